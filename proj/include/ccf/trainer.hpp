#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ccf/choice_model.hpp"
#include "ccf/core.hpp"

namespace ccf {

struct Hyperparams {
  int dim = 50;
  double lambda_user = 1e-4;
  double lambda_item = 1e-4;
  double lambda_position = 1e-4;
  double eta0 = 0.05;
  double anneal = 0.9;  // multiplicative learning-rate decay per epoch
  int epochs = 20;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
  int workers = 1;
  bool position_bias = true;
};

void validate_hyperparams(const Hyperparams& hyper);

struct TrainReport {
  std::vector<double> epoch_nll;      // penalized objective after each epoch
  std::vector<double> epoch_seconds;  // wall time per epoch
  ModelParams params;
};

/// Negative log-likelihood of one record's observed outcome (no penalties).
double record_nll(const ModelParams& params, const InteractionRecord& record);

/// Full penalized objective: sum of record NLLs plus the global L2 penalties
/// on user, item, and position factors.
double nll(const ModelParams& params, const Dataset& dataset, const Hyperparams& hyper);

/// Loss differentiated by one SGD step: the record's NLL plus the L2
/// penalties of the rows that step touches (phi_u, psi_i for i in A, and
/// every beta_p when position bias is on).
double record_penalized_loss(const ModelParams& params, const InteractionRecord& record,
                             const Hyperparams& hyper);

/// Per-record gradient, dense over the touched rows. d_psi and d_beta are
/// laid out per action slot (slot-major, dim entries each).
struct RecordGradient {
  std::vector<double> d_phi;   // dim
  std::vector<double> d_psi;   // action_length x dim
  std::vector<double> d_beta;  // action_length x dim; empty when bias is off
  double d_theta = 0.0;
};

/// Exact gradient of record_penalized_loss at the current point.
RecordGradient record_gradient(const ModelParams& params, const InteractionRecord& record,
                               const Hyperparams& hyper);

/// One SGD update: params -= eta * record_gradient. All untouched rows are
/// left bit-identical.
void gradient_step(ModelParams& params, const InteractionRecord& record, double eta,
                   const Hyperparams& hyper);

/// Random initialization used by train(): factors from init_scale x standard
/// normal, propensities zero, position factors at all-ones plus
/// init_scale x standard normal when bias is on.
ModelParams init_params(const Catalog& catalog, const Hyperparams& hyper);

/// SGD over shuffled records with per-epoch learning-rate annealing.
/// workers > 1 shards each epoch across threads that update shared
/// parameters without locking; workers == 1 is bit-deterministic for a
/// fixed seed. Throws if the objective becomes non-finite. When progress is
/// given, emits one `epoch\tnll\teta\tseconds` TSV row per epoch.
TrainReport train(const Dataset& dataset, const Hyperparams& hyper,
                  std::ostream* progress = nullptr);

}  // namespace ccf
