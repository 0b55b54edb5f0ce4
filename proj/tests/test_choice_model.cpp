#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "ccf/choice_model.hpp"
#include "test_util.hpp"

using namespace ccf;

namespace {

ModelParams two_by_two(double phi0, double phi1, double psi0, double psi1) {
  ModelParams m = ModelParams::zeros(1, 1, 2, 1, false);
  m.phi = {phi0, phi1};
  m.psi = {psi0, psi1};
  return m;
}

}  // namespace

TEST_CASE("utility is the factor inner product") {
  ModelParams zero = ModelParams::zeros(2, 3, 4, 2, false);
  for (int i = 0; i < 3; ++i) CHECK(utility(zero, 0, i) == 0.0);

  CHECK(utility(two_by_two(1, 2, 3, -1), 0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(utility(two_by_two(1, 0, 1, 0), 0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(utility(zero, 2, 0), std::out_of_range);
  CHECK_THROWS_AS(utility(zero, 0, 3), std::out_of_range);
}

TEST_CASE("positioned_utility is the three-way inner product") {
  ModelParams m = ModelParams::zeros(1, 1, 2, 2, true);
  m.phi = {1, 2};
  m.psi = {3, 4};
  // All-ones position factors reduce to the plain utility.
  CHECK(positioned_utility(m, 0, 0, 1) == doctest::Approx(11.0));
  CHECK(positioned_utility(m, 0, 0, 1) == doctest::Approx(utility(m, 0, 0)));

  m.beta = {2, 0.5, 1, 1};  // position 1 reweights the dimensions
  CHECK(positioned_utility(m, 0, 0, 1) == doctest::Approx(1 * 3 * 2 + 2 * 4 * 0.5));

  m.phi = {0, 0};
  CHECK(positioned_utility(m, 0, 0, 2) == 0.0);
  CHECK_THROWS_AS(positioned_utility(m, 0, 0, 0), std::out_of_range);
  CHECK_THROWS_AS(positioned_utility(m, 0, 0, 3), std::out_of_range);
}

TEST_CASE("choice probabilities: uniform and limit cases") {
  ModelParams m = ModelParams::zeros(1, 6, 2, 4, false);
  std::vector<int> action{0, 1, 2, 3};
  ChoiceDistribution dist = choice_probabilities(m, 0, action);
  for (const auto& [item, p] : dist.item_probs) CHECK(p == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(dist.null_prob == doctest::Approx(0.2).epsilon(1e-12));

  // theta -> -inf pushes the whole mass to the single shown item.
  ModelParams single = ModelParams::zeros(1, 1, 2, 1, false);
  single.theta[0] = -30.0;
  ChoiceDistribution d1 = choice_probabilities(single, 0, std::vector<int>{0});
  CHECK(std::abs(d1.item_probs[0].second - 1.0) < 1e-12);
}

TEST_CASE("choice probabilities match the hand-computed two-item case") {
  // r = [1, 0], theta = 0: probs (e, 1, 1) / (2 + e).
  ModelParams m = ModelParams::zeros(1, 2, 1, 2, false);
  m.phi = {1.0};
  m.psi = {1.0, 0.0};
  ChoiceDistribution dist = choice_probabilities(m, 0, std::vector<int>{0, 1});
  const double e = std::exp(1.0);
  CHECK(dist.item_probs[0].second == doctest::Approx(e / (2 + e)).epsilon(1e-12));
  CHECK(dist.item_probs[1].second == doctest::Approx(1 / (2 + e)).epsilon(1e-12));
  CHECK(dist.null_prob == doctest::Approx(1 / (2 + e)).epsilon(1e-12));
  CHECK(dist.item_probs[0].second == doctest::Approx(0.5761).epsilon(1e-4));
}

TEST_CASE("choice probabilities normalize and match the oracle") {
  auto gen = testing::rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const bool bias = trial % 2 == 0;
    const int l = 1 + trial % 4;
    ModelParams m = testing::random_params(gen, 4, 10, 3, l, bias);
    std::vector<int> action = testing::random_action(gen, 10, l);
    const int u = trial % 4;

    ChoiceDistribution dist = choice_probabilities(m, u, action);
    double sum = dist.null_prob;
    for (const auto& [item, p] : dist.item_probs) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    testing::OracleDistribution oracle = testing::oracle_probabilities(m, u, action);
    CHECK(std::abs(dist.null_prob - oracle.null_prob) <= 1e-12);
    for (std::size_t p = 0; p < action.size(); ++p)
      CHECK(std::abs(dist.item_probs[p].second - oracle.item_probs[p]) <= 1e-12);
  }
}

TEST_CASE("max-subtraction keeps large scores finite") {
  ModelParams m = ModelParams::zeros(1, 2, 1, 2, false);
  m.phi = {1.0};
  m.psi = {800.0, 798.0};
  m.theta[0] = 750.0;
  ChoiceDistribution dist = choice_probabilities(m, 0, std::vector<int>{0, 1});
  CHECK(std::isfinite(dist.item_probs[0].second));
  const double expect = 1.0 / (1.0 + std::exp(-2.0) + std::exp(-50.0));
  CHECK(dist.item_probs[0].second == doctest::Approx(expect).epsilon(1e-12));

  m.psi[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(choice_probabilities(m, 0, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST_CASE("IIA: odds ratios ignore the rest of the action") {
  auto gen = testing::rng(29);
  for (int trial = 0; trial < 40; ++trial) {
    const bool bias = trial % 2 == 0;
    ModelParams m = testing::random_params(gen, 3, 12, 3, 4, bias);
    // Two actions sharing items 0 and 1 in the same two slots.
    std::vector<int> a{0, 1, 2, 3};
    std::vector<int> b{0, 1, 7, 9};
    ChoiceDistribution da = choice_probabilities(m, 0, a);
    ChoiceDistribution db = choice_probabilities(m, 0, b);
    const double odds_a = da.item_probs[0].second / da.item_probs[1].second;
    const double odds_b = db.item_probs[0].second / db.item_probs[1].second;
    CHECK(std::abs(odds_a - odds_b) <= 1e-10 * std::max(odds_a, odds_b));
  }
}

TEST_CASE("translation invariance of utilities and propensity") {
  // k = 1 with unit user factor makes the item factors the raw scores.
  auto gen = testing::rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    ModelParams m = ModelParams::zeros(1, 5, 1, 3, false);
    std::normal_distribution<double> gauss(0, 1);
    m.phi = {1.0};
    for (double& x : m.psi) x = gauss(gen);
    m.theta[0] = gauss(gen);
    std::vector<int> action{0, 2, 4};
    ChoiceDistribution base = choice_probabilities(m, 0, action);

    const double c = gauss(gen) * 3.0;
    for (double& x : m.psi) x += c;
    m.theta[0] += c;
    ChoiceDistribution shifted = choice_probabilities(m, 0, action);
    CHECK(std::abs(base.null_prob - shifted.null_prob) <= 1e-12);
    for (std::size_t p = 0; p < action.size(); ++p)
      CHECK(std::abs(base.item_probs[p].second - shifted.item_probs[p].second) <= 1e-12);
  }
}

TEST_CASE("monotonicity: raising one utility lifts only that item") {
  ModelParams m = ModelParams::zeros(1, 4, 1, 3, false);
  m.phi = {1.0};
  m.psi = {0.3, -0.2, 0.9, 0.0};
  m.theta[0] = 0.1;
  std::vector<int> action{0, 1, 2};
  ChoiceDistribution before = choice_probabilities(m, 0, action);
  m.psi[1] += 0.5;
  ChoiceDistribution after = choice_probabilities(m, 0, action);
  CHECK(after.item_probs[1].second > before.item_probs[1].second);
  CHECK(after.item_probs[0].second < before.item_probs[0].second);
  CHECK(after.item_probs[2].second < before.item_probs[2].second);
  CHECK(after.null_prob < before.null_prob);
}

TEST_CASE("sample_reaction: degenerate distribution always wins") {
  ModelParams m = ModelParams::zeros(1, 3, 1, 2, false);
  m.phi = {1.0};
  m.psi = {40.0, 0.0, 0.0};
  m.theta[0] = -40.0;
  auto gen = testing::rng(37);
  for (int t = 0; t < 200; ++t)
    CHECK(sample_reaction(m, 0, std::vector<int>{0, 1}, gen) == 0);
}

TEST_CASE("sample_reaction: uniform five-way frequencies") {
  ModelParams m = ModelParams::zeros(1, 4, 1, 4, false);
  std::vector<int> action{0, 1, 2, 3};
  auto gen = testing::rng(41);
  std::map<int, int> counts;
  const int n = 100000;
  for (int t = 0; t < n; ++t) ++counts[sample_reaction(m, 0, action, gen)];
  const double sigma = std::sqrt(0.2 * 0.8 / n);
  for (int outcome : {kNoReaction, 0, 1, 2, 3}) {
    const double freq = static_cast<double>(counts[outcome]) / n;
    CHECK(std::abs(freq - 0.2) <= 3 * sigma);
  }
}

TEST_CASE("sample_reaction frequencies match choice_probabilities") {
  auto gen = testing::rng(43);
  ModelParams m = testing::random_params(gen, 3, 8, 3, 4, true);
  std::vector<int> action = testing::random_action(gen, 8, 4);
  ChoiceDistribution dist = choice_probabilities(m, 1, action);

  std::map<int, int> counts;
  const int n = 100000;
  for (int t = 0; t < n; ++t) ++counts[sample_reaction(m, 1, action, gen)];

  auto check_freq = [&](int outcome, double expected) {
    const double sigma = std::sqrt(std::max(expected * (1 - expected), 1e-12) / n);
    const double freq = static_cast<double>(counts[outcome]) / n;
    CHECK(std::abs(freq - expected) <= 3 * sigma + 1e-4);
  };
  check_freq(kNoReaction, dist.null_prob);
  for (const auto& [item, p] : dist.item_probs) check_freq(item, p);
}

TEST_CASE("axiom1_choice picks the argmax with low-index ties") {
  CHECK(axiom1_choice(std::vector<double>{0.1, 0.9, 0.5}) == 1);
  CHECK(axiom1_choice(std::vector<double>{0.4, 0.4, 0.4}) == 0);
  CHECK_THROWS_AS(axiom1_choice(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("vanishing noise recovers the deterministic choice") {
  auto gen = testing::rng(47);
  ModelParams m = testing::random_params(gen, 1, 6, 3, 3, false);
  m.theta[0] = -50.0;  // the null outcome never competes here
  std::vector<int> action{1, 3, 5};
  std::vector<double> utilities;
  for (int i : action) utilities.push_back(utility(m, 0, i));
  const int expected = action[axiom1_choice(utilities)];

  std::map<int, int> counts;
  for (int t = 0; t < 10000; ++t)
    ++counts[sample_reaction(m, 0, action, gen, 1e-3)];
  int mode = kNoReaction, best = -1;
  for (const auto& [outcome, count] : counts)
    if (count > best) {
      best = count;
      mode = outcome;
    }
  CHECK(mode == expected);
}

TEST_CASE("predict_reaction follows probabilities, not raw utility") {
  ModelParams m = ModelParams::zeros(1, 4, 1, 4, false);
  m.phi = {1.0};
  m.psi = {1.0, 0.0, 0.0, 0.0};
  CHECK(predict_reaction(m, 0, std::vector<int>{0, 1, 2, 3}) == 0);

  // Position bias can overturn the raw-utility argmax: slot 4 amplifies.
  ModelParams biased = ModelParams::zeros(1, 4, 1, 4, true);
  biased.phi = {1.0};
  biased.psi = {1.0, 0.2, 0.2, 0.9};
  biased.beta = {1.0, 1.0, 1.0, 2.0};
  std::vector<int> action{0, 1, 2, 3};
  CHECK(predict_reaction(biased, 0, action) == 3);  // 0.9*2 beats 1.0*1
  std::vector<double> raw;
  for (int i : action) raw.push_back(utility(biased, 0, i));
  CHECK(action[axiom1_choice(raw)] == 0);

  ModelParams zero = ModelParams::zeros(2, 5, 2, 3, false);
  CHECK(predict_reaction(zero, 1, std::vector<int>{4, 2, 0}) == 4);  // tie -> slot 1
}

TEST_CASE("model files round-trip bit-exactly") {
  auto gen = testing::rng(53);
  for (bool bias : {false, true}) {
    ModelParams m = testing::random_params(gen, 5, 7, 3, 4, bias);
    std::stringstream buffer;
    write_model(m, buffer);
    ModelParams back = read_model(buffer);
    CHECK(back == m);
  }

  std::stringstream bogus("#ccf-model v2\n");
  CHECK_THROWS_AS(read_model(bogus), std::runtime_error);
}
