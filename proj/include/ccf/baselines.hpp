#pragma once

#include <iosfwd>
#include <vector>

#include "ccf/choice_model.hpp"
#include "ccf/core.hpp"
#include "ccf/trainer.hpp"

namespace ccf {

/// A matrix-completion style observation derived from session logs.
struct DyadObservation {
  int user = 0;
  int item = 0;
  int label = 0;  // 1 = clicked, 0 = shown but not clicked

  bool operator==(const DyadObservation&) const = default;
};

/// Flattens sessions to dyads: the clicked item gets label 1, every other
/// shown item label 0; duplicate (user,item) pairs collapse keeping the max
/// label. Output is sorted by (user, item).
std::vector<DyadObservation> dyads_from_log(const Dataset& dataset);

/// Per-dyad losses with the L2 penalties of the touched rows, and their
/// exact gradients; used by the SGD trainers below.
struct DyadGradient {
  std::vector<double> d_phi;
  std::vector<double> d_psi;
};

double dyad_loss_l2(const ModelParams& params, const DyadObservation& dyad,
                    const Hyperparams& hyper);
DyadGradient dyad_gradient_l2(const ModelParams& params, const DyadObservation& dyad,
                              const Hyperparams& hyper);

/// Logistic loss on +/-1 coded labels: log(1 + exp(-y * phi'psi)).
double dyad_loss_logistic(const ModelParams& params, const DyadObservation& dyad,
                          const Hyperparams& hyper);
DyadGradient dyad_gradient_logistic(const ModelParams& params, const DyadObservation& dyad,
                                    const Hyperparams& hyper);

/// SGD on the squared loss. The returned model has zero propensities,
/// all-ones position factors, and bias disabled, so it ranks through the
/// same utility() surface as the choice model.
ModelParams train_cf_l2(const std::vector<DyadObservation>& dyads, const Catalog& catalog,
                        const Hyperparams& hyper, std::ostream* progress = nullptr);

/// SGD on the logistic loss; same output contract as train_cf_l2.
ModelParams train_cf_logistic(const std::vector<DyadObservation>& dyads, const Catalog& catalog,
                              const Hyperparams& hyper, std::ostream* progress = nullptr);

}  // namespace ccf
