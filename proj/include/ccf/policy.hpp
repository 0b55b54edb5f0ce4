#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ccf/choice_model.hpp"

namespace ccf {

enum class PayoffKind { kClickThroughRate, kSalesRevenue, kConsumptionDiversity };

/// Which system utility the action optimizer maximizes. Sales revenue needs
/// per-item prices; the diversity objective carries the relative CTR floor
/// it must respect.
struct PayoffSpec {
  PayoffKind kind = PayoffKind::kClickThroughRate;
  std::vector<double> prices;
  double ctr_floor_ratio = 0.995;

  static PayoffSpec click_through();
  static PayoffSpec sales_revenue(std::vector<double> prices);
  static PayoffSpec diversity(double ctr_floor_ratio = 0.995);
};

/// Payoff of one realized outcome: response indicator (CTR), price of the
/// taken item (SR), or the surprisal -log p(R|A) of the taken item (CD);
/// all three are 0 for the null reaction.
double outcome_payoff(const PayoffSpec& spec, const ModelParams& params, int u,
                      std::span<const int> action, int reaction);

/// Probability-weighted payoff over the action's outcome space. For CD this
/// is the choice entropy restricted to the item outcomes.
double expected_payoff(const PayoffSpec& spec, const ModelParams& params, int u,
                       std::span<const int> action);

struct ActionValue {
  std::vector<int> action;
  double value = 0.0;
};

/// Exact expected-payoff argmax over ordered tuples of distinct items from
/// {0..num_items-1}. Only item sets are searched when position bias is off
/// (the value is order-invariant); ties break to the lexicographically
/// smallest tuple. Guarded to P(num_items, l) <= 1e6.
ActionValue best_action_exhaustive(const PayoffSpec& spec, const ModelParams& params, int u,
                                   int num_items, int l);

/// Randomized ranking policy: per slot, the ranked item with probability
/// 1-alpha, otherwise a uniform random pool item; duplicates are re-drawn.
struct AlphaPolicy {
  double alpha = 0.0;
  std::vector<std::vector<int>> rankings;  // per user, length >= action length
};

/// Top-`len` pool items by per-item payoff contribution: utility for CTR
/// and CD, price-weighted exp-utility for SR. Ties break to the smaller id.
std::vector<int> payoff_ranking(const PayoffSpec& spec, const ModelParams& params, int u,
                                std::span<const int> pool, int len);

/// Rankings for every user over a shared candidate pool.
AlphaPolicy make_alpha_policy(const PayoffSpec& spec, const ModelParams& params, double alpha,
                              std::span<const int> pool, int len);

std::vector<int> sample_action(const AlphaPolicy& policy, int u, std::span<const int> pool,
                               int l, std::mt19937_64& rng);

/// Monte-Carlo estimate of the expected payoff under the alpha-randomized
/// action distribution; alpha == 0 short-circuits to the exact value of the
/// single base action.
double policy_expected_payoff(const PayoffSpec& spec, const ModelParams& params, int u,
                              const AlphaPolicy& policy, std::span<const int> pool, int l,
                              int num_samples, std::mt19937_64& rng);

struct AlphaSearchResult {
  double alpha = 0.0;
  double value = 0.0;          // objective value at alpha
  double ctr_at_alpha = 0.0;   // population CTR estimate at alpha
  double ctr_at_zero = 0.0;    // exact population CTR at alpha = 0
  bool floor_warning = false;  // diversity search found no feasible alpha > 0
};

/// Maximizes the population payoff over alpha in [0,1]: an 11-point grid
/// scan followed by golden-section search (tolerance 1e-3) inside the best
/// bracketing interval. CTR and SR maximize the loyalty-weighted sum of
/// per-user expected payoffs. CD maximizes the entropy of the aggregate
/// expected-consumption distribution subject to CTR(alpha) >=
/// ctr_floor_ratio * CTR(0); infeasible points score -infinity and the
/// CTR-floor boundary is refined by bisection, since the constrained
/// optimum usually sits on it.
AlphaSearchResult optimize_alpha(const PayoffSpec& spec, const ModelParams& params,
                                 std::span<const int> users, std::span<const double> weights,
                                 std::span<const int> pool, int l, int num_samples,
                                 std::uint64_t seed);

void write_policy(const AlphaPolicy& policy, std::ostream& out);
AlphaPolicy read_policy(std::istream& in);
void write_policy_file(const AlphaPolicy& policy, const std::string& path);
AlphaPolicy read_policy_file(const std::string& path);

}  // namespace ccf
