#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "ccf/eval.hpp"
#include "ccf/synth.hpp"
#include "ccf/trainer.hpp"
#include "test_util.hpp"

using namespace ccf;

TEST_CASE("ranking metrics on single-relevant lists") {
  std::vector<int> ranked{7, 3, 9, 5, 1};

  RankingMetrics first = ranking_metrics(ranked, std::vector<int>{7}, 4);
  CHECK(first.ap == doctest::Approx(1.0));
  CHECK(first.ar == doctest::Approx(1.0));
  CHECK(first.ndcg == doctest::Approx(1.0));

  RankingMetrics second = ranking_metrics(ranked, std::vector<int>{3}, 4);
  CHECK(second.ap == doctest::Approx(0.5));
  CHECK(second.ar == doctest::Approx(1.0));
  CHECK(second.ndcg == doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-12));
  CHECK(second.ndcg == doctest::Approx(0.6309).epsilon(1e-4));

  RankingMetrics missed = ranking_metrics(ranked, std::vector<int>{1}, 4);
  CHECK(missed.ap == 0.0);
  CHECK(missed.ar == 0.0);
  CHECK(missed.ndcg == 0.0);

  RankingMetrics empty = ranking_metrics(ranked, std::vector<int>{}, 4);
  CHECK(empty.ap == 0.0);
  CHECK(empty.ar == 0.0);
  CHECK(empty.ndcg == 0.0);
}

TEST_CASE("nDCG of the ideal ranking is exactly one") {
  for (int trial = 0; trial < 30; ++trial) {
    const int pool = 10 + trial;
    std::vector<int> relevant;
    for (int i = 0; i < 3; ++i) relevant.push_back(i);
    std::vector<int> ranked(pool);
    std::iota(ranked.begin(), ranked.end(), 0);  // relevant items first
    RankingMetrics metrics = ranking_metrics(ranked, relevant, 4);
    CHECK(metrics.ndcg == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(metrics.ap == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(metrics.ar >= 0.0);
    CHECK(metrics.ar <= 1.0);
  }
}

namespace {

// One record per probe: user clicks exactly one item of a shared pool.
Dataset single_click_dataset(std::mt19937_64& gen, int num_users, int num_items,
                             int clicks_per_user) {
  Dataset d{{num_users, num_items, 4, {}, {}}, {}};
  for (int u = 0; u < num_users; ++u) {
    for (int c = 0; c < clicks_per_user; ++c) {
      InteractionRecord r;
      r.timestamp = c;  // one date per click index
      r.user = u;
      r.action = testing::random_action(gen, num_items, 4);
      r.reaction = r.action[std::uniform_int_distribution<int>(0, 3)(gen)];
      d.records.push_back(r);
    }
  }
  std::stable_sort(d.records.begin(), d.records.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return d;
}

}  // namespace

TEST_CASE("offline_eval scores the oracle model perfectly") {
  // Diagonal construction: user u's factors index the items they clicked.
  auto gen = testing::rng(311);
  const int num_users = 4, num_items = 12;
  Dataset d = single_click_dataset(gen, num_users, num_items, 1);

  ModelParams oracle = ModelParams::zeros(num_users, num_items, num_users, 4, false);
  for (int u = 0; u < num_users; ++u) oracle.phi[u * num_users + u] = 1.0;
  for (const InteractionRecord& r : d.records)
    oracle.psi[r.reaction * num_users + r.user] = 1.0;

  OfflineMetrics metrics = offline_eval(oracle, d, 4);
  CHECK(metrics.user_dates > 0);
  CHECK(metrics.ar == doctest::Approx(1.0));
  CHECK(metrics.ndcg == doctest::Approx(1.0));
  CHECK(metrics.ap == doctest::Approx(1.0));
}

TEST_CASE("offline_eval under random utilities recovers the hypergeometric rate") {
  auto gen = testing::rng(313);
  const int num_items = 100;
  // Build a pool-of-100 date: every item shown somewhere that date.
  Dataset d{{300, num_items, 4, {}, {}}, {}};
  for (int u = 0; u < 300; ++u) {
    for (int block = 0; block < num_items / 4; ++block) {
      InteractionRecord r;
      r.timestamp = 0;
      r.user = u;
      for (int j = 0; j < 4; ++j) r.action.push_back(block * 4 + j);
      r.reaction = kNoReaction;
      d.records.push_back(r);
    }
    // Exactly one relevant item per user-date.
    InteractionRecord click;
    click.timestamp = 0;
    click.user = u;
    click.action = testing::random_action(gen, num_items, 4);
    click.reaction = click.action[0];
    d.records.push_back(click);
  }

  ModelParams random_model = testing::random_params(gen, 300, num_items, 3, 4, false);
  OfflineMetrics metrics = offline_eval(random_model, d, 4);
  CHECK(metrics.user_dates == 300);
  // AR@4 per user-date is Bernoulli(4/100).
  const double sigma = std::sqrt(0.04 * 0.96 / 300);
  CHECK(std::abs(metrics.ar - 0.04) <= 3 * sigma);
}

TEST_CASE("offline_eval without any click is an error") {
  Dataset d{{2, 6, 3, {}, {}}, {}};
  InteractionRecord r;
  r.user = 0;
  r.action = {0, 1, 2};
  r.reaction = kNoReaction;
  d.records.push_back(r);
  ModelParams m = ModelParams::zeros(2, 6, 2, 3, false);
  CHECK_THROWS_AS(offline_eval(m, d, 4), std::invalid_argument);
}

TEST_CASE("reaction accuracy: oracle, random, and empty input") {
  auto gen = testing::rng(317);
  Catalog catalog{5, 20, 4, {}, {}};
  ModelParams truth = testing::random_params(gen, 5, 20, 3, 4, false);

  std::vector<InteractionRecord> records;
  for (int t = 0; t < 4000; ++t) {
    InteractionRecord r = testing::random_record(gen, catalog, t, 0.0);
    r.reaction = predict_reaction(truth, r.user, r.action);
    records.push_back(r);
  }
  CHECK(reaction_accuracy(truth, records) == doctest::Approx(1.0));

  auto random_predictor = [&gen](const InteractionRecord& r) {
    return r.action[std::uniform_int_distribution<int>(0, 3)(gen)];
  };
  const double accuracy = reaction_accuracy(random_predictor, records);
  const double sigma = std::sqrt(0.25 * 0.75 / records.size());
  CHECK(std::abs(accuracy - 0.25) <= 3 * sigma);

  CHECK_THROWS_AS(reaction_accuracy(truth, std::vector<InteractionRecord>{}),
                  std::invalid_argument);
  InteractionRecord null_record = records[0];
  null_record.reaction = kNoReaction;
  CHECK_THROWS_AS(reaction_accuracy(truth, std::vector<InteractionRecord>{null_record}),
                  std::invalid_argument);
}

TEST_CASE("simulate_reaction respects the probe partition") {
  ProbeDay probe{3, 0, {2, 5}, {1, 2, 3, 4, 5, 6}};
  auto gen = testing::rng(331);

  // No presented positive: always null.
  for (int t = 0; t < 100; ++t)
    CHECK(simulate_reaction(probe, std::vector<int>{1, 3, 4, 6}, gen) == kNoReaction);

  // One presented positive: always taken.
  for (int t = 0; t < 100; ++t)
    CHECK(simulate_reaction(probe, std::vector<int>{1, 2, 3, 4}, gen) == 2);

  // Two presented positives: an even split.
  int first = 0;
  const int n = 100000;
  std::vector<int> action{2, 5, 1, 3};
  for (int t = 0; t < n; ++t) {
    int taken = simulate_reaction(probe, action, gen);
    CHECK((taken == 2 || taken == 5));
    if (taken == 2) ++first;
  }
  const double sigma = std::sqrt(0.25 / n);
  CHECK(std::abs(static_cast<double>(first) / n - 0.5) <= 3 * sigma);
}

TEST_CASE("simulate_reaction literal mode dampens the response") {
  ProbeDay probe{0, 0, {2}, {1, 2, 3, 4, 5, 6}};
  auto gen = testing::rng(337);
  std::vector<int> action{2, 1, 3, 4};  // one positive, three negatives
  int responses = 0;
  const int n = 60000;
  for (int t = 0; t < n; ++t)
    if (simulate_reaction(probe, action, gen, true) != kNoReaction) ++responses;
  const double expected = 1.0 / 3.0;
  const double sigma = std::sqrt(expected * (1 - expected) / n);
  CHECK(std::abs(static_cast<double>(responses) / n - expected) <= 3 * sigma);
}

namespace {

std::vector<ProbeDay> toy_probes() {
  // Probe 0 has positives production can show; probe 1's positive is only
  // reachable by the model policy.
  std::vector<ProbeDay> probes;
  probes.push_back({0, 0, {0}, {0, 1, 2, 3}});
  probes.push_back({1, 1, {2}, {0, 1, 2, 3}});
  return probes;
}

}  // namespace

TEST_CASE("relative_surplus: identical policies tie exactly") {
  auto policy = [](const ProbeDay& probe, std::mt19937_64&) {
    return std::vector<int>{probe.pool[0], probe.pool[1]};
  };
  std::vector<double> prices{1, 2, 3, 4};
  SurplusReport report = relative_surplus(policy, policy, toy_probes(), prices, 5);
  CHECK(report.ctr.surplus_defined);
  CHECK(report.ctr.surplus == 0.0);
  CHECK(report.sales.surplus == 0.0);
  CHECK(report.diversity.model_value == report.diversity.production_value);
}

TEST_CASE("relative_surplus: the textbook 0.5 vs 1.0 case") {
  // Production hits only probe 0; the model hits both.
  auto production = [](const ProbeDay& probe, std::mt19937_64&) {
    return std::vector<int>{probe.pool[0], probe.pool[1]};
  };
  auto model = [](const ProbeDay& probe, std::mt19937_64&) {
    return probe.positives.empty()
               ? std::vector<int>{probe.pool[0], probe.pool[1]}
               : std::vector<int>{probe.positives[0], probe.pool[0] != probe.positives[0]
                                                          ? probe.pool[0]
                                                          : probe.pool[1]};
  };
  std::vector<double> prices{1, 1, 1, 1};
  SurplusReport report = relative_surplus(model, production, toy_probes(), prices, 5);
  CHECK(report.ctr.model_value == doctest::Approx(1.0));
  CHECK(report.ctr.production_value == doctest::Approx(0.5));
  CHECK(report.ctr.surplus == doctest::Approx(1.0));
}

TEST_CASE("relative_surplus: a zero production metric is undefined") {
  std::vector<ProbeDay> probes;
  probes.push_back({0, 0, {3}, {0, 1, 2, 3}});
  auto production = [](const ProbeDay& probe, std::mt19937_64&) {
    return std::vector<int>{probe.pool[0], probe.pool[1]};
  };
  auto model = [](const ProbeDay& probe, std::mt19937_64&) {
    return std::vector<int>{probe.pool[3], probe.pool[0]};
  };
  std::vector<double> prices{1, 1, 1, 1};
  SurplusReport report = relative_surplus(model, production, probes, prices, 5);
  CHECK_FALSE(report.ctr.surplus_defined);
  CHECK(report.ctr.model_value == doctest::Approx(1.0));
  CHECK(report.ctr.production_value == 0.0);
}

TEST_CASE("surplus metrics stay in their ranges") {
  auto gen = testing::rng(347);
  std::vector<ProbeDay> probes;
  const int num_items = 30;
  for (int t = 0; t < 200; ++t) {
    ProbeDay probe;
    probe.user = t % 7;
    probe.date = t % 11;
    probe.pool = testing::random_action(gen, num_items, 10);
    if (t % 3 != 0) {
      probe.positives = {probe.pool[std::uniform_int_distribution<int>(0, 9)(gen)]};
    }
    probes.push_back(probe);
  }
  auto scatter = [&](const ProbeDay& probe, std::mt19937_64& rng) {
    std::vector<int> pool = probe.pool;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(4);
    return pool;
  };
  std::vector<double> prices(num_items, 2.5);
  SurplusReport report = relative_surplus(scatter, scatter, probes, prices, 13);
  CHECK(report.ctr.model_value >= 0.0);
  CHECK(report.ctr.model_value <= 1.0);
  CHECK(report.sales.model_value >= 0.0);
  CHECK(report.diversity.model_value >= 0.0);
  CHECK(report.diversity.model_value <= std::log(static_cast<double>(num_items)));
}

TEST_CASE("build_probe_days groups the test log by user and date") {
  Dataset d{{3, 8, 2, {}, {}}, {}};
  auto add = [&d](int ts, int user, std::vector<int> action, int reaction) {
    InteractionRecord r;
    r.timestamp = ts;
    r.user = user;
    r.action = std::move(action);
    r.reaction = reaction;
    d.records.push_back(r);
  };
  add(0, 0, {1, 2}, 2);
  add(0, 0, {3, 4}, 3);
  add(0, 1, {1, 5}, kNoReaction);
  add(1, 0, {6, 7}, kNoReaction);

  std::vector<ProbeDay> probes = build_probe_days(d);
  REQUIRE(probes.size() == 3);

  CHECK(probes[0].user == 0);
  CHECK(probes[0].date == 0);
  CHECK(probes[0].positives == std::vector<int>{2, 3});
  CHECK(probes[0].pool == std::vector<int>{1, 2, 3, 4, 5});

  CHECK(probes[1].user == 0);
  CHECK(probes[1].date == 1);
  CHECK(probes[1].positives.empty());
  CHECK(probes[1].pool == std::vector<int>{6, 7});

  CHECK(probes[2].user == 1);
  CHECK(probes[2].positives.empty());

  // The positives always sit inside the pool.
  for (const ProbeDay& probe : probes) {
    std::set<int> pool(probe.pool.begin(), probe.pool.end());
    for (int p : probe.positives) CHECK(pool.count(p) == 1);
  }
}

TEST_CASE("logged_metrics summarizes realized behavior") {
  std::vector<InteractionRecord> records;
  auto add = [&records](std::vector<int> action, int reaction) {
    InteractionRecord r;
    r.user = 0;
    r.action = std::move(action);
    r.reaction = reaction;
    records.push_back(r);
  };
  add({0, 1}, 0);
  add({0, 1}, 1);
  add({2, 3}, kNoReaction);
  add({2, 3}, 3);

  std::vector<double> prices{1.0, 2.0, 3.0, 4.0};
  RealizedMetrics m = logged_metrics(records, prices);
  CHECK(m.sessions == 4);
  CHECK(m.ctr == doctest::Approx(0.75));
  CHECK(m.sales == doctest::Approx((1.0 + 2.0 + 4.0) / 4.0));
  // Three takes of three distinct items: entropy log 3.
  CHECK(m.diversity == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("per_record_probes repeats the probe context per session") {
  Dataset d{{2, 8, 2, {}, {}}, {}};
  auto add = [&d](int ts, int user, std::vector<int> action, int reaction) {
    InteractionRecord r;
    r.timestamp = ts;
    r.user = user;
    r.action = std::move(action);
    r.reaction = reaction;
    d.records.push_back(r);
  };
  add(0, 0, {1, 2}, 2);
  add(0, 0, {3, 4}, kNoReaction);
  add(1, 1, {5, 6}, 5);

  std::vector<ProbeDay> probes = per_record_probes(d);
  REQUIRE(probes.size() == 3);
  CHECK(probes[0].user == 0);
  CHECK(probes[1].user == 0);
  CHECK(probes[0].positives == probes[1].positives);  // same (user, date) context
  CHECK(probes[0].pool == std::vector<int>{1, 2, 3, 4});
  CHECK(probes[2].positives == std::vector<int>{5});
}

TEST_CASE("replay_surplus keeps the log's realized production side") {
  auto gen = testing::rng(353);
  Dataset d{{4, 20, 3, {}, {}}, {}};
  for (int t = 0; t < 400; ++t) {
    InteractionRecord r = testing::random_record(gen, d.catalog, t / 40, 0.3);
    d.records.push_back(r);
  }
  std::vector<double> prices(20, 1.5);
  RealizedMetrics logged = logged_metrics(d.records, prices);

  auto first_three = [](const ProbeDay& probe, std::mt19937_64&) {
    return std::vector<int>(probe.pool.begin(), probe.pool.begin() + 3);
  };
  SurplusReport a = replay_surplus(first_three, d, prices, 7);
  SurplusReport b = replay_surplus(first_three, d, prices, 7);
  CHECK(a.num_probes == d.records.size());
  CHECK(a.ctr.production_value == doctest::Approx(logged.ctr));
  CHECK(a.sales.production_value == doctest::Approx(logged.sales));
  CHECK(a.diversity.production_value == doctest::Approx(logged.diversity));
  CHECK(a.ctr.model_value == b.ctr.model_value);  // deterministic given seed
  CHECK(a.diversity.model_value == b.diversity.model_value);
}

TEST_CASE("select_alpha_on_replay honors its CTR floor") {
  SyntheticWorld world = generate_world(40, 40, 3, 4, 5, 12, 21);
  Dataset log = generate_interactions(world, 8000, noisy_ranking_policy(world, 0.4, 0.5), 22);
  Hyperparams h;
  h.dim = 3;
  h.epochs = 6;
  h.eta0 = 0.1;
  h.seed = 23;
  TrainReport report = train(log, h);

  ReplayAlphaResult picked =
      select_alpha_on_replay(report.params, log, world.catalog.prices, 0.9, 24, 0.1);
  CHECK(picked.alpha >= 0.0);
  CHECK(picked.alpha <= 1.0);
  CHECK(picked.report.ctr.model_value >= 0.9 * picked.report.ctr.production_value - 1e-9);

  // A full floor collapses toward the unrandomized policy unless the ranked
  // actions already clear it.
  ReplayAlphaResult strict =
      select_alpha_on_replay(report.params, log, world.catalog.prices, 1.0, 24, 0.1);
  CHECK(strict.report.ctr.model_value >= strict.report.ctr.production_value - 1e-9);
}

TEST_CASE("position click rates count 1-based positions") {
  Dataset d{{2, 6, 3, {}, {}}, {}};
  auto add = [&d](std::vector<int> action, int reaction) {
    InteractionRecord r;
    r.user = 0;
    r.action = std::move(action);
    r.reaction = reaction;
    d.records.push_back(r);
  };
  add({0, 1, 2}, 0);
  add({3, 4, 5}, 4);
  add({0, 1, 2}, kNoReaction);
  add({1, 2, 3}, 3);

  std::vector<double> rates = position_click_rates(d);
  REQUIRE(rates.size() == 3);
  CHECK(rates[0] == doctest::Approx(0.25));
  CHECK(rates[1] == doctest::Approx(0.25));
  CHECK(rates[2] == doctest::Approx(0.25));
}
