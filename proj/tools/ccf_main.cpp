// Command-line front end wiring the library into reproducible pipelines.
// Every run is seeded explicitly; identical flags give byte-identical files.

#include <CLI11.hpp>

#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "ccf/baselines.hpp"
#include "ccf/choice_model.hpp"
#include "ccf/core.hpp"
#include "ccf/eval.hpp"
#include "ccf/policy.hpp"
#include "ccf/rng.hpp"
#include "ccf/synth.hpp"
#include "ccf/trainer.hpp"

namespace {

enum LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("CCF_LOG_LEVEL");
  if (!env) return kInfo;
  const std::string level(env);
  if (level == "error") return kError;
  if (level == "debug") return kDebug;
  return kInfo;
}

void log_info(const std::string& message) {
  if (log_level() >= kInfo) std::cerr << "[ccf] " << message << '\n';
}

void log_debug(const std::string& message) {
  if (log_level() >= kDebug) std::cerr << "[ccf:debug] " << message << '\n';
}

ccf::PayoffSpec make_payoff(const std::string& kind, const std::string& prices_from,
                            double floor_ratio) {
  if (kind == "ctr") return ccf::PayoffSpec::click_through();
  if (kind == "sr") {
    if (prices_from.empty())
      throw std::invalid_argument("--payoff sr requires --prices-from <world file>");
    ccf::SyntheticWorld world = ccf::read_world_file(prices_from);
    return ccf::PayoffSpec::sales_revenue(world.catalog.prices);
  }
  if (kind == "cd") return ccf::PayoffSpec::diversity(floor_ratio);
  throw std::invalid_argument("unknown payoff '" + kind + "'");
}

// Loyalty weights from a training log: per-user visit frequency.
std::vector<double> visit_frequencies(const ccf::Dataset& log) {
  std::vector<double> counts(log.catalog.num_users, 0.0);
  for (const ccf::InteractionRecord& r : log.records) counts[r.user] += 1.0;
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total > 0)
    for (double& c : counts) c /= total;
  return counts;
}

struct GenerateArgs {
  int users = 1000, items = 200, dim = 5, action_len = 4, dates = 40, pool = 50;
  int records = 200000;
  std::uint64_t seed = 0;
  double corruption = 1.0;
  double jitter = 1.0;
  std::string out_world, out_log;
};

int cmd_generate(const GenerateArgs& a) {
  ccf::SyntheticWorld world =
      ccf::generate_world(a.users, a.items, a.dim, a.action_len, a.dates, a.pool, a.seed);
  ccf::ProductionPolicy production =
      ccf::noisy_ranking_policy(world, a.corruption, a.jitter);
  ccf::Dataset log =
      ccf::generate_interactions(world, a.records, production, ccf::mix_seed(a.seed, 1));
  ccf::write_world_file(world, a.out_world);
  ccf::write_log_file(log, a.out_log);

  std::size_t responded = 0;
  for (const ccf::InteractionRecord& r : log.records)
    if (r.responded()) ++responded;
  std::cout << "users\t" << a.users << "\nitems\t" << a.items << "\nrecords\t"
            << log.records.size() << "\nresponded\t" << responded << '\n';
  return 0;
}

struct TrainArgs {
  std::string log_path, out_path;
  std::string model = "mlf";
  std::string bias = "on";
  ccf::Hyperparams hyper;
};

int cmd_train(const TrainArgs& a) {
  ccf::Dataset log = ccf::read_log_file(a.log_path);
  ccf::ModelParams params;
  if (a.model == "mlf") {
    ccf::Hyperparams hyper = a.hyper;
    hyper.position_bias = a.bias == "on";
    ccf::TrainReport report = ccf::train(log, hyper, &std::cout);
    params = std::move(report.params);
  } else if (a.model == "cf-l2" || a.model == "cf-logistic") {
    std::vector<ccf::DyadObservation> dyads = ccf::dyads_from_log(log);
    log_debug("derived " + std::to_string(dyads.size()) + " dyads");
    params = a.model == "cf-l2"
                 ? ccf::train_cf_l2(dyads, log.catalog, a.hyper, &std::cout)
                 : ccf::train_cf_logistic(dyads, log.catalog, a.hyper, &std::cout);
  } else {
    throw std::invalid_argument("unknown model '" + a.model + "'");
  }
  ccf::write_model_file(params, a.out_path);
  log_info("wrote model to " + a.out_path);
  return 0;
}

struct EvalArgs {
  std::string log_path, model_path, name = "model", mode = "offline";
  int topn = 4;
};

int cmd_eval(const EvalArgs& a) {
  ccf::Dataset log = ccf::read_log_file(a.log_path);
  ccf::ModelParams params = ccf::read_model_file(a.model_path);
  if (a.mode == "offline") {
    ccf::OfflineMetrics metrics = ccf::offline_eval(params, log, a.topn);
    std::cout << a.name << '\t' << metrics.ap << '\t' << metrics.ar << '\t' << metrics.ndcg
              << '\n';
  } else {
    std::vector<ccf::InteractionRecord> responded = ccf::responded_records(log);
    std::cout << a.name << '\t' << ccf::reaction_accuracy(params, responded) << '\n';
  }
  return 0;
}

struct PredictArgs {
  std::string log_path, model_path;
};

int cmd_predict(const PredictArgs& a) {
  ccf::Dataset log = ccf::read_log_file(a.log_path);
  ccf::ModelParams params = ccf::read_model_file(a.model_path);
  for (std::size_t t = 0; t < log.records.size(); ++t) {
    const ccf::InteractionRecord& r = log.records[t];
    if (!r.responded()) continue;
    std::cout << t << '\t' << r.user << '\t'
              << ccf::predict_reaction(params, r.user, r.action) << '\t' << r.reaction
              << '\n';
  }
  return 0;
}

struct OptimizeArgs {
  std::string model_path, log_path, out_path;
  std::string payoff = "ctr", prices_from;
  double floor_ratio = 0.995;
  int samples = 1000;
  int users_sample = 200;
  std::uint64_t seed = 0;
};

int cmd_optimize(const OptimizeArgs& a) {
  ccf::ModelParams params = ccf::read_model_file(a.model_path);
  ccf::Dataset log = ccf::read_log_file(a.log_path);
  ccf::PayoffSpec spec = make_payoff(a.payoff, a.prices_from, a.floor_ratio);

  // Probe the most loyal users, weighted by their visit share.
  std::vector<double> frequencies = visit_frequencies(log);
  std::vector<int> users(params.num_users);
  std::iota(users.begin(), users.end(), 0);
  std::stable_sort(users.begin(), users.end(),
                   [&](int u, int v) { return frequencies[u] > frequencies[v]; });
  if (a.users_sample > 0 && a.users_sample < static_cast<int>(users.size()))
    users.resize(a.users_sample);
  std::vector<double> weights;
  double total = 0.0;
  for (int u : users) total += frequencies[u];
  if (total <= 0) throw std::invalid_argument("optimize: empty training log");
  for (int u : users) weights.push_back(frequencies[u] / total);

  std::vector<int> pool(params.num_items);
  std::iota(pool.begin(), pool.end(), 0);
  const int l = params.action_length;

  ccf::AlphaSearchResult result =
      ccf::optimize_alpha(spec, params, users, weights, pool, l, a.samples, a.seed);
  if (result.floor_warning)
    log_info("diversity floor leaves alpha = 0 as the only feasible point");

  ccf::AlphaPolicy policy = ccf::make_alpha_policy(spec, params, result.alpha, pool, l);
  ccf::write_policy_file(policy, a.out_path);

  std::cout << "alpha\t" << result.alpha << '\n'
            << "value\t" << result.value << '\n'
            << "ctr_at_alpha\t" << result.ctr_at_alpha << '\n'
            << "ctr_at_zero\t" << result.ctr_at_zero << '\n';
  return 0;
}

struct SurplusArgs {
  std::string world_path, log_path, model_path;
  double alpha = 0.0;
  std::string payoff = "ctr";
  std::string production_mode = "ranker";  // ranker | logged
  int probe_users = 0;                     // 0 = every user
  double select_alpha_floor = 0.0;         // > 0 selects alpha on the replay
  double floor_ratio = 0.995;
  double corruption = 1.0;
  double jitter = 1.0;
  std::uint64_t seed = 0;
  bool literal = false;
};

int cmd_surplus(const SurplusArgs& a) {
  ccf::SyntheticWorld world = ccf::read_world_file(a.world_path);
  ccf::Dataset log = ccf::read_log_file(a.log_path);
  ccf::ModelParams params = ccf::read_model_file(a.model_path);
  ccf::PayoffSpec spec = a.payoff == "sr"
                             ? ccf::PayoffSpec::sales_revenue(world.catalog.prices)
                         : a.payoff == "cd" ? ccf::PayoffSpec::diversity(a.floor_ratio)
                                            : ccf::PayoffSpec::click_through();

  ccf::Dataset probe_set = log;
  if (a.probe_users > 0) {
    // Keep the most frequently visiting users, like the paper's probes.
    std::vector<double> frequencies = visit_frequencies(log);
    std::vector<int> users(log.catalog.num_users);
    std::iota(users.begin(), users.end(), 0);
    std::stable_sort(users.begin(), users.end(),
                     [&](int u, int v) { return frequencies[u] > frequencies[v]; });
    users.resize(std::min<std::size_t>(users.size(), a.probe_users));
    std::vector<bool> keep(log.catalog.num_users, false);
    for (int u : users) keep[u] = true;
    probe_set.records.clear();
    for (const ccf::InteractionRecord& r : log.records)
      if (keep[r.user]) probe_set.records.push_back(r);
  }

  const int l = world.catalog.action_length;
  auto print_report = [](const ccf::SurplusReport& report) {
    auto row = [](const char* metric, const ccf::SurplusMetric& s) {
      std::cout << metric << '\t' << s.model_value << '\t' << s.production_value << '\t';
      if (s.surplus_defined)
        std::cout << s.surplus;
      else
        std::cout << "undefined";
      std::cout << '\n';
    };
    row("ctr", report.ctr);
    row("sr", report.sales);
    row("cd", report.diversity);
  };

  if (a.production_mode == "logged") {
    // Counterfactual replay against the log's realized behavior.
    if (a.select_alpha_floor > 0.0) {
      ccf::ReplayAlphaResult picked = ccf::select_alpha_on_replay(
          params, probe_set, world.catalog.prices, a.select_alpha_floor, a.seed);
      std::cout << "alpha\t" << picked.alpha << '\n';
      print_report(picked.report);
      return 0;
    }
    const double alpha = a.alpha;
    ccf::DayPolicy model_policy = [&params, &spec, alpha, l](const ccf::ProbeDay& probe,
                                                             std::mt19937_64& rng) {
      ccf::AlphaPolicy one{alpha,
                           {ccf::payoff_ranking(spec, params, probe.user, probe.pool, l)}};
      return ccf::sample_action(one, 0, probe.pool, l, rng);
    };
    print_report(ccf::replay_surplus(model_policy, probe_set, world.catalog.prices, a.seed,
                                     a.literal));
    return 0;
  }

  std::vector<ccf::ProbeDay> probes = ccf::build_probe_days(probe_set);
  log_debug("built " + std::to_string(probes.size()) + " probe days");

  const double alpha = a.alpha;
  ccf::DayPolicy model_policy = [&params, &spec, alpha, l](const ccf::ProbeDay& probe,
                                                           std::mt19937_64& rng) {
    ccf::AlphaPolicy one{alpha,
                         {ccf::payoff_ranking(spec, params, probe.user, probe.pool, l)}};
    return ccf::sample_action(one, 0, probe.pool, l, rng);
  };

  ccf::ProductionPolicy production =
      ccf::noisy_ranking_policy(world, a.corruption, a.jitter);
  ccf::DayPolicy production_policy = [&production](const ccf::ProbeDay& probe,
                                                   std::mt19937_64& rng) {
    return production(probe.user, probe.pool, rng);
  };

  print_report(ccf::relative_surplus(model_policy, production_policy, probes,
                                     world.catalog.prices, a.seed, a.literal));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative-competitive filtering: choice model, action optimizer, "
               "evaluation harnesses"};
  app.require_subcommand(1);

  GenerateArgs gen_args;
  CLI::App* gen = app.add_subcommand("generate", "Generate a synthetic world and log");
  gen->add_option("--users", gen_args.users);
  gen->add_option("--items", gen_args.items);
  gen->add_option("--dim", gen_args.dim);
  gen->add_option("--action-len", gen_args.action_len);
  gen->add_option("--dates", gen_args.dates);
  gen->add_option("--pool", gen_args.pool);
  gen->add_option("--records", gen_args.records);
  gen->add_option("--seed", gen_args.seed);
  gen->add_option("--corruption", gen_args.corruption,
                  "Production ranker noise relative to the factor scale");
  gen->add_option("--jitter", gen_args.jitter, "Per-visit Gumbel jitter of the production ranker");
  gen->add_option("--out-world", gen_args.out_world)->required();
  gen->add_option("--out-log", gen_args.out_log)->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Fit a choice model or CF baseline");
  train->add_option("--log", train_args.log_path)->required();
  train->add_option("--out", train_args.out_path)->required();
  train->add_option("--model", train_args.model)
      ->check(CLI::IsMember({"mlf", "cf-l2", "cf-logistic"}));
  train->add_option("--bias", train_args.bias)->check(CLI::IsMember({"on", "off"}));
  train->add_option("--dim", train_args.hyper.dim);
  train->add_option("--lambda-u", train_args.hyper.lambda_user);
  train->add_option("--lambda-i", train_args.hyper.lambda_item);
  train->add_option("--lambda-p", train_args.hyper.lambda_position);
  train->add_option("--eta", train_args.hyper.eta0);
  train->add_option("--anneal", train_args.hyper.anneal);
  train->add_option("--epochs", train_args.hyper.epochs);
  train->add_option("--init-scale", train_args.hyper.init_scale);
  train->add_option("--seed", train_args.hyper.seed);
  train->add_option("--workers", train_args.hyper.workers);

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Offline ranking metrics or online accuracy");
  eval->add_option("--log", eval_args.log_path)->required();
  eval->add_option("--model-file", eval_args.model_path)->required();
  eval->add_option("--name", eval_args.name);
  eval->add_option("--mode", eval_args.mode)->check(CLI::IsMember({"offline", "online"}));
  eval->add_option("--topn", eval_args.topn);

  PredictArgs predict_args;
  CLI::App* predict = app.add_subcommand("predict", "Per-record reaction predictions");
  predict->add_option("--log", predict_args.log_path)->required();
  predict->add_option("--model-file", predict_args.model_path)->required();

  OptimizeArgs optimize_args;
  CLI::App* optimize = app.add_subcommand("optimize", "Search the alpha-policy payoff");
  optimize->add_option("--model-file", optimize_args.model_path)->required();
  optimize->add_option("--log", optimize_args.log_path, "Training log for loyalty weights")
      ->required();
  optimize->add_option("--out", optimize_args.out_path)->required();
  optimize->add_option("--payoff", optimize_args.payoff)
      ->check(CLI::IsMember({"ctr", "sr", "cd"}));
  optimize->add_option("--prices-from", optimize_args.prices_from);
  optimize->add_option("--floor", optimize_args.floor_ratio);
  optimize->add_option("--samples", optimize_args.samples);
  optimize->add_option("--users-sample", optimize_args.users_sample);
  optimize->add_option("--seed", optimize_args.seed);

  SurplusArgs surplus_args;
  CLI::App* surplus = app.add_subcommand("surplus", "Probe-day relative surplus report");
  surplus->add_option("--world", surplus_args.world_path)->required();
  surplus->add_option("--log", surplus_args.log_path)->required();
  surplus->add_option("--model-file", surplus_args.model_path)->required();
  surplus->add_option("--alpha", surplus_args.alpha);
  surplus->add_option("--payoff", surplus_args.payoff)
      ->check(CLI::IsMember({"ctr", "sr", "cd"}));
  surplus->add_option("--production", surplus_args.production_mode,
                      "ranker: re-simulate the noisy ranker; logged: replay against "
                      "the log's realized metrics")
      ->check(CLI::IsMember({"ranker", "logged"}));
  surplus->add_option("--probe-users", surplus_args.probe_users,
                      "Restrict probes to the N most frequent users (0 = all)");
  surplus->add_option("--select-alpha-floor", surplus_args.select_alpha_floor,
                      "Pick alpha on the replay under this CTR floor ratio "
                      "(logged production only)");
  surplus->add_option("--floor", surplus_args.floor_ratio);
  surplus->add_option("--corruption", surplus_args.corruption);
  surplus->add_option("--jitter", surplus_args.jitter);
  surplus->add_option("--seed", surplus_args.seed);
  surplus->add_flag("--literal-take-prob", surplus_args.literal,
                    "Use the literal take probability 1/|A n N|");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (predict->parsed()) return cmd_predict(predict_args);
    if (optimize->parsed()) return cmd_optimize(optimize_args);
    if (surplus->parsed()) return cmd_surplus(surplus_args);
  } catch (const ccf::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
