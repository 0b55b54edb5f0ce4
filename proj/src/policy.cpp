#include "ccf/policy.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "ccf/rng.hpp"

namespace ccf {

PayoffSpec PayoffSpec::click_through() { return {PayoffKind::kClickThroughRate, {}, 0.995}; }

PayoffSpec PayoffSpec::sales_revenue(std::vector<double> prices) {
  return {PayoffKind::kSalesRevenue, std::move(prices), 0.995};
}

PayoffSpec PayoffSpec::diversity(double ctr_floor_ratio) {
  if (!(ctr_floor_ratio > 0.0 && ctr_floor_ratio <= 1.0))
    throw std::invalid_argument("ctr_floor_ratio must be in (0,1]");
  return {PayoffKind::kConsumptionDiversity, {}, ctr_floor_ratio};
}

namespace {

void check_prices(const PayoffSpec& spec, const ModelParams& m) {
  if (spec.kind != PayoffKind::kSalesRevenue) return;
  if (static_cast<int>(spec.prices.size()) != m.num_items)
    throw std::invalid_argument("sales-revenue payoff requires one price per item");
}

double entropy_term(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

}  // namespace

double outcome_payoff(const PayoffSpec& spec, const ModelParams& m, int u,
                      std::span<const int> action, int reaction) {
  check_prices(spec, m);
  if (reaction == kNoReaction) return 0.0;
  switch (spec.kind) {
    case PayoffKind::kClickThroughRate:
      return 1.0;
    case PayoffKind::kSalesRevenue:
      if (reaction < 0 || reaction >= m.num_items)
        throw std::invalid_argument("reaction out of range");
      return spec.prices[reaction];
    case PayoffKind::kConsumptionDiversity: {
      ChoiceDistribution dist = choice_probabilities(m, u, action);
      for (const auto& [item, prob] : dist.item_probs)
        if (item == reaction) return -std::log(prob);
      throw std::invalid_argument("reaction not in action");
    }
  }
  throw std::logic_error("unreachable");
}

double expected_payoff(const PayoffSpec& spec, const ModelParams& m, int u,
                       std::span<const int> action) {
  check_prices(spec, m);
  ChoiceDistribution dist = choice_probabilities(m, u, action);
  switch (spec.kind) {
    case PayoffKind::kClickThroughRate:
      return 1.0 - dist.null_prob;
    case PayoffKind::kSalesRevenue: {
      double value = 0.0;
      for (const auto& [item, prob] : dist.item_probs) value += spec.prices[item] * prob;
      return value;
    }
    case PayoffKind::kConsumptionDiversity: {
      double value = 0.0;
      for (const auto& [item, prob] : dist.item_probs) value += entropy_term(prob);
      return value;
    }
  }
  throw std::logic_error("unreachable");
}

namespace {

void enumerate_ordered(const PayoffSpec& spec, const ModelParams& m, int u, int num_items,
                       int l, std::vector<int>& prefix, std::vector<bool>& used,
                       ActionValue& best) {
  if (static_cast<int>(prefix.size()) == l) {
    double value = expected_payoff(spec, m, u, prefix);
    if (best.action.empty() || value > best.value) best = {prefix, value};
    return;
  }
  for (int i = 0; i < num_items; ++i) {
    if (used[i]) continue;
    used[i] = true;
    prefix.push_back(i);
    enumerate_ordered(spec, m, u, num_items, l, prefix, used, best);
    prefix.pop_back();
    used[i] = false;
  }
}

void enumerate_sets(const PayoffSpec& spec, const ModelParams& m, int u, int num_items, int l,
                    int next, std::vector<int>& prefix, ActionValue& best) {
  if (static_cast<int>(prefix.size()) == l) {
    double value = expected_payoff(spec, m, u, prefix);
    if (best.action.empty() || value > best.value) best = {prefix, value};
    return;
  }
  for (int i = next; i < num_items; ++i) {
    prefix.push_back(i);
    enumerate_sets(spec, m, u, num_items, l, i + 1, prefix, best);
    prefix.pop_back();
  }
}

}  // namespace

ActionValue best_action_exhaustive(const PayoffSpec& spec, const ModelParams& m, int u,
                                   int num_items, int l) {
  check_prices(spec, m);
  if (l < 1 || l > num_items)
    throw std::invalid_argument("best_action_exhaustive: need 1 <= l <= num_items");
  double tuples = 1.0;
  for (int t = 0; t < l; ++t) {
    tuples *= static_cast<double>(num_items - t);
    if (tuples > 1e6)
      throw std::invalid_argument(
          "best_action_exhaustive: P(num_items, l) exceeds 1e6; use the alpha-policy path");
  }

  ActionValue best;
  std::vector<int> prefix;
  prefix.reserve(l);
  if (m.position_bias) {
    std::vector<bool> used(num_items, false);
    enumerate_ordered(spec, m, u, num_items, l, prefix, used, best);
  } else {
    // Order-invariant value: searching ascending item sets visits the
    // lexicographically smallest ordering of every set first.
    enumerate_sets(spec, m, u, num_items, l, 0, prefix, best);
  }
  return best;
}

std::vector<int> payoff_ranking(const PayoffSpec& spec, const ModelParams& m, int u,
                                std::span<const int> pool, int len) {
  check_prices(spec, m);
  if (len < 1 || len > static_cast<int>(pool.size()))
    throw std::invalid_argument("payoff_ranking: need 1 <= len <= pool size");
  std::vector<std::pair<double, int>> scored;
  scored.reserve(pool.size());
  for (int i : pool) {
    double score = utility(m, u, i);
    if (spec.kind == PayoffKind::kSalesRevenue) score = spec.prices[i] * std::exp(score);
    scored.emplace_back(score, i);
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) {
              return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
  std::vector<int> out(len);
  for (int j = 0; j < len; ++j) out[j] = scored[j].second;
  return out;
}

AlphaPolicy make_alpha_policy(const PayoffSpec& spec, const ModelParams& m, double alpha,
                              std::span<const int> pool, int len) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0,1]");
  AlphaPolicy policy;
  policy.alpha = alpha;
  policy.rankings.reserve(m.num_users);
  for (int u = 0; u < m.num_users; ++u)
    policy.rankings.push_back(payoff_ranking(spec, m, u, pool, len));
  return policy;
}

namespace {

int draw_distinct(std::span<const int> pool, const std::vector<int>& placed,
                  std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  while (true) {
    int item = pool[pick(rng)];
    if (std::find(placed.begin(), placed.end(), item) == placed.end()) return item;
  }
}

}  // namespace

std::vector<int> sample_action(const AlphaPolicy& policy, int u, std::span<const int> pool,
                               int l, std::mt19937_64& rng) {
  if (u < 0 || u >= static_cast<int>(policy.rankings.size()))
    throw std::out_of_range("sample_action: user id outside policy rankings");
  const std::vector<int>& ranking = policy.rankings[u];
  if (static_cast<int>(ranking.size()) < l)
    throw std::invalid_argument("sample_action: ranking shorter than action length");
  if (static_cast<int>(pool.size()) < l)
    throw std::invalid_argument("sample_action: pool smaller than action length");

  std::bernoulli_distribution randomize(policy.alpha);
  std::vector<int> action;
  action.reserve(l);
  for (int j = 0; j < l; ++j) {
    int item;
    if (randomize(rng)) {
      item = draw_distinct(pool, action, rng);
    } else {
      item = ranking[j];
      // An earlier random draw may already have taken the ranked item.
      if (std::find(action.begin(), action.end(), item) != action.end())
        item = draw_distinct(pool, action, rng);
    }
    action.push_back(item);
  }
  return action;
}

double policy_expected_payoff(const PayoffSpec& spec, const ModelParams& m, int u,
                              const AlphaPolicy& policy, std::span<const int> pool, int l,
                              int num_samples, std::mt19937_64& rng) {
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  if (policy.alpha == 0.0) {
    const std::vector<int>& ranking = policy.rankings.at(u);
    if (static_cast<int>(ranking.size()) < l)
      throw std::invalid_argument("policy ranking shorter than action length");
    return expected_payoff(spec, m, u, std::span<const int>(ranking.data(), l));
  }
  double total = 0.0;
  for (int s = 0; s < num_samples; ++s) {
    std::vector<int> action = sample_action(policy, u, pool, l, rng);
    total += expected_payoff(spec, m, u, action);
  }
  return total / num_samples;
}

namespace {

struct AlphaPoint {
  double objective = 0.0;
  double ctr = 0.0;
};

// One population evaluation at a fixed alpha. CTR/SR aggregate the
// loyalty-weighted per-user expected payoffs; CD builds the aggregate
// expected-consumption distribution and scores its entropy.
AlphaPoint evaluate_alpha(const PayoffSpec& spec, const ModelParams& m,
                          std::span<const int> users, std::span<const double> weights,
                          const std::vector<std::vector<int>>& rankings,
                          std::span<const int> pool, int l, int num_samples,
                          std::uint64_t seed, int eval_index, double alpha) {
  const bool diversity = spec.kind == PayoffKind::kConsumptionDiversity;
  std::vector<double> consumption;
  if (diversity) consumption.assign(m.num_items, 0.0);

  AlphaPoint point;
  std::vector<int> base_action(l);
  for (std::size_t idx = 0; idx < users.size(); ++idx) {
    const int u = users[idx];
    const double f = weights[idx];
    std::mt19937_64 rng(
        mix_seed(seed, static_cast<std::uint64_t>(eval_index), static_cast<std::uint64_t>(u)));
    const int samples = alpha == 0.0 ? 1 : num_samples;
    double user_ctr = 0.0;
    double user_value = 0.0;
    for (int s = 0; s < samples; ++s) {
      std::span<const int> action;
      std::vector<int> sampled;
      if (alpha == 0.0) {
        std::copy_n(rankings[idx].begin(), l, base_action.begin());
        action = base_action;
      } else {
        AlphaPolicy one{alpha, {rankings[idx]}};
        sampled = sample_action(one, 0, pool, l, rng);
        action = sampled;
      }
      ChoiceDistribution dist = choice_probabilities(m, u, action);
      user_ctr += 1.0 - dist.null_prob;
      switch (spec.kind) {
        case PayoffKind::kClickThroughRate:
          user_value += 1.0 - dist.null_prob;
          break;
        case PayoffKind::kSalesRevenue:
          for (const auto& [item, prob] : dist.item_probs)
            user_value += spec.prices[item] * prob;
          break;
        case PayoffKind::kConsumptionDiversity:
          for (const auto& [item, prob] : dist.item_probs)
            consumption[item] += f * prob / samples;
          break;
      }
    }
    point.ctr += f * user_ctr / samples;
    point.objective += f * user_value / samples;
  }

  if (diversity) {
    const double mass = std::accumulate(consumption.begin(), consumption.end(), 0.0);
    double h = 0.0;
    if (mass > 0.0)
      for (double q : consumption) h += entropy_term(q / mass);
    point.objective = h;
  }
  return point;
}

}  // namespace

AlphaSearchResult optimize_alpha(const PayoffSpec& spec, const ModelParams& m,
                                 std::span<const int> users, std::span<const double> weights,
                                 std::span<const int> pool, int l, int num_samples,
                                 std::uint64_t seed) {
  check_prices(spec, m);
  if (users.empty()) throw std::invalid_argument("optimize_alpha: empty user set");
  if (users.size() != weights.size())
    throw std::invalid_argument("optimize_alpha: users/weights size mismatch");

  std::vector<std::vector<int>> rankings;
  rankings.reserve(users.size());
  for (int u : users) rankings.push_back(payoff_ranking(spec, m, u, pool, l));

  const bool diversity = spec.kind == PayoffKind::kConsumptionDiversity;
  int eval_index = 0;
  const AlphaPoint at_zero = evaluate_alpha(spec, m, users, weights, rankings, pool, l,
                                            num_samples, seed, eval_index++, 0.0);
  const double ctr_floor = diversity ? spec.ctr_floor_ratio * at_zero.ctr : 0.0;

  AlphaSearchResult best;
  best.alpha = 0.0;
  best.value = at_zero.objective;
  best.ctr_at_alpha = at_zero.ctr;
  best.ctr_at_zero = at_zero.ctr;
  double max_feasible = 0.0;
  double min_infeasible = std::numeric_limits<double>::infinity();

  auto probe = [&](double alpha) -> double {
    const AlphaPoint point =
        alpha == 0.0 ? at_zero
                     : evaluate_alpha(spec, m, users, weights, rankings, pool, l, num_samples,
                                      seed, eval_index++, alpha);
    if (diversity && point.ctr < ctr_floor - 1e-12) {
      min_infeasible = std::min(min_infeasible, alpha);
      return -std::numeric_limits<double>::infinity();
    }
    max_feasible = std::max(max_feasible, alpha);
    // Require a real improvement; Monte-Carlo accumulation noise must not
    // pull the optimum away from alpha = 0 on ties.
    const double margin = 1e-9 * std::max(1.0, std::abs(best.value));
    if (point.objective > best.value + margin) {
      best.alpha = alpha;
      best.value = point.objective;
      best.ctr_at_alpha = point.ctr;
    }
    return point.objective;
  };

  // Coarse 11-point grid, then golden-section inside the best bracket.
  constexpr int kGridPoints = 11;
  std::vector<double> grid_values(kGridPoints);
  int best_grid = 0;
  for (int g = 0; g < kGridPoints; ++g) {
    const double alpha = static_cast<double>(g) / (kGridPoints - 1);
    grid_values[g] = probe(alpha);
    if (grid_values[g] > grid_values[best_grid]) best_grid = g;
  }

  double lo = (best_grid == 0 ? 0.0 : (best_grid - 1) / 10.0);
  double hi = (best_grid == kGridPoints - 1 ? 1.0 : (best_grid + 1) / 10.0);
  constexpr double kInvPhi = 0.61803398874989484820;
  constexpr double kTolerance = 1e-3;
  double c = hi - kInvPhi * (hi - lo);
  double d = lo + kInvPhi * (hi - lo);
  double fc = probe(c);
  double fd = probe(d);
  while (hi - lo > kTolerance) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kInvPhi * (hi - lo);
      fc = probe(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kInvPhi * (hi - lo);
      fd = probe(d);
    }
  }

  // The diversity optimum is usually pinned to the CTR-floor boundary, which
  // the grid and golden probes can straddle without resolving. Bisect the
  // boundary between the extreme feasible and infeasible points seen so far,
  // scoring every feasible midpoint.
  if (diversity && min_infeasible < std::numeric_limits<double>::infinity()) {
    double feasible_lo = max_feasible;
    double infeasible_hi = min_infeasible;
    while (infeasible_hi - feasible_lo > kTolerance) {
      const double mid = 0.5 * (feasible_lo + infeasible_hi);
      if (std::isfinite(probe(mid)))
        feasible_lo = mid;
      else
        infeasible_hi = mid;
    }
  }

  best.floor_warning = diversity && best.alpha == 0.0;
  return best;
}

void write_policy(const AlphaPolicy& policy, std::ostream& out) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", policy.alpha);
  out << "#ccf-policy v1\n";
  out << "alpha=" << buf << '\n';
  for (std::size_t u = 0; u < policy.rankings.size(); ++u) {
    out << u << '\t';
    const std::vector<int>& ranking = policy.rankings[u];
    for (std::size_t j = 0; j < ranking.size(); ++j) {
      if (j > 0) out << ',';
      out << ranking[j];
    }
    out << '\n';
  }
}

AlphaPolicy read_policy(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "#ccf-policy v1")
    throw ParseError("policy file: expected '#ccf-policy v1'");
  if (!std::getline(in, line) || line.rfind("alpha=", 0) != 0)
    throw ParseError("policy file: expected 'alpha=<real>'");
  AlphaPolicy policy;
  policy.alpha = std::stod(line.substr(6));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string user_tok, items_tok;
    if (!std::getline(row, user_tok, '\t') || !std::getline(row, items_tok))
      throw ParseError("policy file: bad ranking row");
    std::vector<int> ranking;
    std::istringstream items(items_tok);
    std::string tok;
    while (std::getline(items, tok, ',')) ranking.push_back(std::stoi(tok));
    if (std::stoul(user_tok) != policy.rankings.size())
      throw ParseError("policy file: user rows out of order");
    policy.rankings.push_back(std::move(ranking));
  }
  return policy;
}

void write_policy_file(const AlphaPolicy& policy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write policy file: " + path);
  write_policy(policy, out);
}

AlphaPolicy read_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open policy file: " + path);
  return read_policy(in);
}

}  // namespace ccf
