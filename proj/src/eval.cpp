#include "ccf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "ccf/policy.hpp"
#include "ccf/rng.hpp"

namespace ccf {

RankingMetrics ranking_metrics(std::span<const int> ranked, std::span<const int> relevant,
                               int n) {
  if (n < 1) throw std::invalid_argument("ranking_metrics: n must be >= 1");
  std::unordered_set<int> rel(relevant.begin(), relevant.end());
  if (rel.empty()) return {};

  const int depth = std::min<int>(n, static_cast<int>(ranked.size()));
  int hits = 0;
  double precision_sum = 0.0;
  double dcg = 0.0;
  for (int rank = 1; rank <= depth; ++rank) {
    if (!rel.count(ranked[rank - 1])) continue;
    ++hits;
    precision_sum += static_cast<double>(hits) / rank;
    dcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
  }
  const int ideal = std::min<int>(n, static_cast<int>(rel.size()));
  double idcg = 0.0;
  for (int rank = 1; rank <= ideal; ++rank)
    idcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);

  RankingMetrics out;
  out.ap = precision_sum / ideal;
  out.ar = static_cast<double>(hits) / static_cast<double>(rel.size());
  out.ndcg = dcg / idcg;
  return out;
}

namespace {

// date -> every item shown on that date, and (user, date) -> clicked items.
struct DateIndex {
  std::map<std::int64_t, std::set<int>> pools;
  std::map<std::pair<int, std::int64_t>, std::set<int>> clicks;
};

DateIndex index_by_date(const Dataset& d) {
  DateIndex index;
  for (const InteractionRecord& r : d.records) {
    std::set<int>& pool = index.pools[r.timestamp];
    pool.insert(r.action.begin(), r.action.end());
    if (r.responded()) index.clicks[{r.user, r.timestamp}].insert(r.reaction);
  }
  return index;
}

}  // namespace

OfflineMetrics offline_eval(const ModelParams& m, const Dataset& test, int n) {
  DateIndex index = index_by_date(test);
  OfflineMetrics total;
  for (const auto& [key, clicked] : index.clicks) {
    const auto& [user, date] = key;
    const std::set<int>& pool = index.pools.at(date);

    std::vector<std::pair<double, int>> scored;
    scored.reserve(pool.size());
    for (int i : pool) scored.emplace_back(utility(m, user, i), i);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<int> ranked(scored.size());
    for (std::size_t j = 0; j < scored.size(); ++j) ranked[j] = scored[j].second;

    std::vector<int> relevant(clicked.begin(), clicked.end());
    RankingMetrics metrics = ranking_metrics(ranked, relevant, n);
    total.ap += metrics.ap;
    total.ar += metrics.ar;
    total.ndcg += metrics.ndcg;
    ++total.user_dates;
  }
  if (total.user_dates == 0)
    throw std::invalid_argument("offline_eval: no user-date with a clicked item");
  total.ap /= total.user_dates;
  total.ar /= total.user_dates;
  total.ndcg /= total.user_dates;
  return total;
}

std::vector<InteractionRecord> responded_records(const Dataset& d) {
  std::vector<InteractionRecord> out;
  for (const InteractionRecord& r : d.records)
    if (r.responded()) out.push_back(r);
  return out;
}

double reaction_accuracy(const std::function<int(const InteractionRecord&)>& predictor,
                         std::span<const InteractionRecord> responded) {
  if (responded.empty()) throw std::invalid_argument("reaction_accuracy: no records");
  std::size_t correct = 0;
  for (const InteractionRecord& r : responded) {
    if (!r.responded())
      throw std::invalid_argument("reaction_accuracy: record without reaction");
    if (predictor(r) == r.reaction) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(responded.size());
}

double reaction_accuracy(const ModelParams& m, std::span<const InteractionRecord> responded) {
  return reaction_accuracy(
      [&m](const InteractionRecord& r) { return predict_reaction(m, r.user, r.action); },
      responded);
}

std::vector<ProbeDay> build_probe_days(const Dataset& test) {
  DateIndex index = index_by_date(test);
  std::map<std::pair<int, std::int64_t>, ProbeDay> probes;
  for (const InteractionRecord& r : test.records) {
    ProbeDay& probe = probes[{r.user, r.timestamp}];
    probe.user = r.user;
    probe.date = r.timestamp;
  }
  std::vector<ProbeDay> out;
  out.reserve(probes.size());
  for (auto& [key, probe] : probes) {
    const std::set<int>& pool = index.pools.at(probe.date);
    probe.pool.assign(pool.begin(), pool.end());
    auto it = index.clicks.find(key);
    if (it != index.clicks.end()) probe.positives.assign(it->second.begin(), it->second.end());
    out.push_back(std::move(probe));
  }
  return out;
}

int simulate_reaction(const ProbeDay& probe, std::span<const int> action,
                      std::mt19937_64& rng, bool literal_take_prob) {
  std::unordered_set<int> positives(probe.positives.begin(), probe.positives.end());
  std::vector<int> hits;
  for (int i : action)
    if (positives.count(i)) hits.push_back(i);
  if (hits.empty()) return kNoReaction;

  if (literal_take_prob) {
    const std::size_t negatives_shown = action.size() - hits.size();
    const double take_prob =
        negatives_shown == 0
            ? 1.0
            : std::min(1.0, static_cast<double>(hits.size()) / negatives_shown);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) >= take_prob) return kNoReaction;
  }
  std::uniform_int_distribution<std::size_t> pick(0, hits.size() - 1);
  return hits[pick(rng)];
}

namespace {

struct MetricAccumulator {
  std::size_t responses = 0;
  double revenue = 0.0;
  std::map<int, std::size_t> takes;

  void add(int reaction, std::span<const double> prices) {
    if (reaction == kNoReaction) return;
    ++responses;
    revenue += prices[reaction];
    ++takes[reaction];
  }

  double ctr(std::size_t probes) const {
    return probes ? static_cast<double>(responses) / probes : 0.0;
  }
  double mean_revenue(std::size_t probes) const { return probes ? revenue / probes : 0.0; }
  double consumption_entropy() const {
    std::size_t total = 0;
    for (const auto& [item, count] : takes) total += count;
    if (total == 0) return 0.0;
    double h = 0.0;
    for (const auto& [item, count] : takes) {
      const double q = static_cast<double>(count) / total;
      h -= q * std::log(q);
    }
    return h;
  }
};

SurplusMetric make_surplus(double model_value, double production_value) {
  SurplusMetric s;
  s.model_value = model_value;
  s.production_value = production_value;
  s.surplus_defined = production_value > 0.0;
  if (s.surplus_defined) s.surplus = (model_value - production_value) / production_value;
  return s;
}

}  // namespace

SurplusReport relative_surplus(const DayPolicy& model, const DayPolicy& production,
                               std::span<const ProbeDay> probes,
                               std::span<const double> prices, std::uint64_t seed,
                               bool literal_take_prob) {
  if (prices.empty()) throw std::invalid_argument("relative_surplus: prices required");

  MetricAccumulator model_acc, production_acc;
  for (std::size_t t = 0; t < probes.size(); ++t) {
    const ProbeDay& probe = probes[t];
    const std::uint64_t action_seed = mix_seed(seed, t, 0xAC7);
    const std::uint64_t reaction_seed = mix_seed(seed, t, 0x4EAC);

    // Shared substreams: identical policies produce identical actions and
    // identical simulated reactions, so their surplus is exactly zero.
    std::mt19937_64 model_action_rng(action_seed);
    std::mt19937_64 production_action_rng(action_seed);
    const std::vector<int> model_action = model(probe, model_action_rng);
    const std::vector<int> production_action = production(probe, production_action_rng);

    std::mt19937_64 model_reaction_rng(reaction_seed);
    std::mt19937_64 production_reaction_rng(reaction_seed);
    model_acc.add(simulate_reaction(probe, model_action, model_reaction_rng,
                                    literal_take_prob),
                  prices);
    production_acc.add(simulate_reaction(probe, production_action, production_reaction_rng,
                                         literal_take_prob),
                       prices);
  }

  SurplusReport report;
  report.num_probes = probes.size();
  report.ctr = make_surplus(model_acc.ctr(probes.size()), production_acc.ctr(probes.size()));
  report.sales = make_surplus(model_acc.mean_revenue(probes.size()),
                              production_acc.mean_revenue(probes.size()));
  report.diversity =
      make_surplus(model_acc.consumption_entropy(), production_acc.consumption_entropy());
  return report;
}

RealizedMetrics logged_metrics(std::span<const InteractionRecord> records,
                               std::span<const double> prices) {
  if (prices.empty()) throw std::invalid_argument("logged_metrics: prices required");
  MetricAccumulator acc;
  for (const InteractionRecord& r : records) acc.add(r.reaction, prices);
  RealizedMetrics out;
  out.sessions = records.size();
  out.ctr = acc.ctr(records.size());
  out.sales = acc.mean_revenue(records.size());
  out.diversity = acc.consumption_entropy();
  return out;
}

std::vector<ProbeDay> per_record_probes(const Dataset& test) {
  std::vector<ProbeDay> days = build_probe_days(test);
  std::map<std::pair<int, std::int64_t>, const ProbeDay*> index;
  for (const ProbeDay& probe : days) index[{probe.user, probe.date}] = &probe;
  std::vector<ProbeDay> out;
  out.reserve(test.records.size());
  for (const InteractionRecord& r : test.records)
    out.push_back(*index.at({r.user, r.timestamp}));
  return out;
}

SurplusReport replay_surplus(const DayPolicy& model, const Dataset& probe_records,
                             std::span<const double> prices, std::uint64_t seed,
                             bool literal_take_prob) {
  if (prices.empty()) throw std::invalid_argument("replay_surplus: prices required");
  const RealizedMetrics production = logged_metrics(probe_records.records, prices);
  const std::vector<ProbeDay> probes = per_record_probes(probe_records);

  MetricAccumulator acc;
  for (std::size_t t = 0; t < probes.size(); ++t) {
    std::mt19937_64 action_rng(mix_seed(seed, t, 0xAC7));
    const std::vector<int> action = model(probes[t], action_rng);
    std::mt19937_64 reaction_rng(mix_seed(seed, t, 0x4EAC));
    acc.add(simulate_reaction(probes[t], action, reaction_rng, literal_take_prob), prices);
  }

  SurplusReport report;
  report.num_probes = probes.size();
  report.ctr = make_surplus(acc.ctr(probes.size()), production.ctr);
  report.sales = make_surplus(acc.mean_revenue(probes.size()), production.sales);
  report.diversity = make_surplus(acc.consumption_entropy(), production.diversity);
  return report;
}

ReplayAlphaResult select_alpha_on_replay(const ModelParams& params,
                                         const Dataset& probe_records,
                                         std::span<const double> prices, double floor_ratio,
                                         std::uint64_t seed, double grid_step) {
  if (!(grid_step > 0.0 && grid_step <= 1.0))
    throw std::invalid_argument("select_alpha_on_replay: grid_step in (0,1]");
  const int l = probe_records.catalog.action_length;

  // Rank each probe day's pool once; every candidate alpha reuses it.
  std::map<std::pair<int, std::int64_t>, std::vector<int>> rankings;
  for (const ProbeDay& probe : build_probe_days(probe_records))
    rankings[{probe.user, probe.date}] =
        payoff_ranking(PayoffSpec::click_through(), params, probe.user, probe.pool, l);

  ReplayAlphaResult best;
  bool have_best = false;
  double floor_value = 0.0;
  for (double alpha = 0.0; alpha <= 1.0 + 1e-9; alpha += grid_step) {
    const double a = std::min(alpha, 1.0);
    DayPolicy policy = [&params, &rankings, a, l](const ProbeDay& probe,
                                                  std::mt19937_64& rng) {
      AlphaPolicy one{a, {rankings.at({probe.user, probe.date})}};
      return sample_action(one, 0, probe.pool, l, rng);
    };
    SurplusReport report = replay_surplus(policy, probe_records, prices, seed);
    if (a == 0.0) floor_value = floor_ratio * report.ctr.production_value;
    if (report.ctr.model_value + 1e-12 < floor_value) continue;
    if (!have_best || report.diversity.model_value > best.report.diversity.model_value) {
      best.alpha = a;
      best.report = report;
      have_best = true;
    }
  }
  if (!have_best)
    throw std::runtime_error(
        "select_alpha_on_replay: no alpha meets the CTR floor, including 0");
  return best;
}

std::vector<double> position_click_rates(const Dataset& d) {
  std::vector<std::size_t> clicks(d.catalog.action_length, 0);
  for (const InteractionRecord& r : d.records) {
    if (!r.responded()) continue;
    const int p = r.position_of(r.reaction);
    if (p >= 1) ++clicks[p - 1];
  }
  std::vector<double> rates(d.catalog.action_length, 0.0);
  if (!d.records.empty())
    for (int p = 0; p < d.catalog.action_length; ++p)
      rates[p] = static_cast<double>(clicks[p]) / static_cast<double>(d.records.size());
  return rates;
}

}  // namespace ccf
