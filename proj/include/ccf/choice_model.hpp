#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccf/core.hpp"

namespace ccf {

/// Parameters of the multinomial logit factor (MLF) choice model: user and
/// item latent factors, per-user response propensities, and per-position
/// factors for the position-bias extension. Factors are stored row-major.
struct ModelParams {
  int num_users = 0;
  int num_items = 0;
  int dim = 0;
  int action_length = 0;
  bool position_bias = false;

  std::vector<double> phi;    // num_users x dim
  std::vector<double> psi;    // num_items x dim
  std::vector<double> theta;  // num_users
  std::vector<double> beta;   // action_length x dim; all ones when bias is off

  static ModelParams zeros(int num_users, int num_items, int dim, int action_length,
                           bool position_bias);

  std::span<const double> user_factors(int u) const {
    return {phi.data() + static_cast<std::size_t>(u) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<double> user_factors(int u) {
    return {phi.data() + static_cast<std::size_t>(u) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<const double> item_factors(int i) const {
    return {psi.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<double> item_factors(int i) {
    return {psi.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  /// Position factors for 1-based position p.
  std::span<const double> position_factors(int p) const {
    return {beta.data() + static_cast<std::size_t>(p - 1) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<double> position_factors(int p) {
    return {beta.data() + static_cast<std::size_t>(p - 1) * dim, static_cast<std::size_t>(dim)};
  }

  bool operator==(const ModelParams&) const = default;
};

/// Conditional reaction distribution over one action: one probability per
/// action slot plus the no-response probability; sums to 1.
struct ChoiceDistribution {
  std::vector<std::pair<int, double>> item_probs;  // aligned with the action order
  double null_prob = 0.0;
};

/// Deterministic utility r_ui, the inner product of the user and item factors.
double utility(const ModelParams& params, int u, int i);

/// Three-way inner product of user, item, and position factors (1-based p).
/// Reduces to utility() when the position factors are all ones.
double positioned_utility(const ModelParams& params, int u, int i, int p);

/// Softmax choice probabilities over the action plus the null outcome, with
/// the response propensity exp(theta_u) as the null mass. Uses positioned
/// utilities when position bias is enabled. Max-subtraction keeps the
/// exponentials finite for any finite parameters.
ChoiceDistribution choice_probabilities(const ModelParams& params, int u,
                                        std::span<const int> action);

/// Draws a reaction by the Gumbel-max rule: argmax of score + noise over the
/// action items and the propensity pseudo-item. Equivalent to a categorical
/// draw from choice_probabilities at noise_scale 1; the mode collapses to
/// axiom1_choice as noise_scale -> 0.
int sample_reaction(const ModelParams& params, int u, std::span<const int> action,
                    std::mt19937_64& rng, double noise_scale = 1.0);

/// Index of the maximal utility; ties break toward the lowest index.
std::size_t axiom1_choice(std::span<const double> utilities);

/// The action item with the highest choice probability (null excluded);
/// ties break toward the lowest position.
int predict_reaction(const ModelParams& params, int u, std::span<const int> action);

/// Model file format: versioned header, dimension line, then factor rows
/// with 17 significant digits (exact round trip for 64-bit floats).
void write_model(const ModelParams& params, std::ostream& out);
ModelParams read_model(std::istream& in);
void write_model_file(const ModelParams& params, const std::string& path);
ModelParams read_model_file(const std::string& path);

}  // namespace ccf
