#include "ccf/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "ccf/rng.hpp"

namespace ccf {

std::vector<DyadObservation> dyads_from_log(const Dataset& d) {
  std::map<std::pair<int, int>, int> labels;
  for (const InteractionRecord& r : d.records) {
    for (int item : r.action) {
      int& label = labels[{r.user, item}];
      if (r.responded() && item == r.reaction) label = 1;
    }
  }
  std::vector<DyadObservation> out;
  out.reserve(labels.size());
  for (const auto& [key, label] : labels) out.push_back({key.first, key.second, label});
  return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += a[d] * b[d];
  return s;
}

double squared_norm(std::span<const double> v) { return dot(v, v); }

double penalty(const ModelParams& m, const DyadObservation& o, const Hyperparams& h) {
  return h.lambda_user * squared_norm(m.user_factors(o.user)) +
         h.lambda_item * squared_norm(m.item_factors(o.item));
}

// log(1 + exp(x)) without overflow.
double log1p_exp(double x) { return x > 35.0 ? x : std::log1p(std::exp(x)); }

DyadGradient scored_gradient(const ModelParams& m, const DyadObservation& o,
                             const Hyperparams& h, double dloss_dscore) {
  const int k = m.dim;
  auto phi_u = m.user_factors(o.user);
  auto psi_i = m.item_factors(o.item);
  DyadGradient g;
  g.d_phi.resize(k);
  g.d_psi.resize(k);
  for (int d = 0; d < k; ++d) {
    g.d_phi[d] = dloss_dscore * psi_i[d] + 2.0 * h.lambda_user * phi_u[d];
    g.d_psi[d] = dloss_dscore * phi_u[d] + 2.0 * h.lambda_item * psi_i[d];
  }
  return g;
}

}  // namespace

double dyad_loss_l2(const ModelParams& m, const DyadObservation& o, const Hyperparams& h) {
  const double z = utility(m, o.user, o.item);
  const double err = z - static_cast<double>(o.label);
  return err * err + penalty(m, o, h);
}

DyadGradient dyad_gradient_l2(const ModelParams& m, const DyadObservation& o,
                              const Hyperparams& h) {
  const double z = utility(m, o.user, o.item);
  return scored_gradient(m, o, h, 2.0 * (z - static_cast<double>(o.label)));
}

double dyad_loss_logistic(const ModelParams& m, const DyadObservation& o,
                          const Hyperparams& h) {
  const double y = o.label ? 1.0 : -1.0;
  const double z = utility(m, o.user, o.item);
  return log1p_exp(-y * z) + penalty(m, o, h);
}

DyadGradient dyad_gradient_logistic(const ModelParams& m, const DyadObservation& o,
                                    const Hyperparams& h) {
  const double y = o.label ? 1.0 : -1.0;
  const double z = utility(m, o.user, o.item);
  const double dloss = -y / (1.0 + std::exp(y * z));
  return scored_gradient(m, o, h, dloss);
}

namespace {

enum class CfLoss { kSquared, kLogistic };

ModelParams train_cf(CfLoss loss, const std::vector<DyadObservation>& dyads,
                     const Catalog& catalog, const Hyperparams& h, std::ostream* progress) {
  validate_hyperparams(h);
  if (dyads.empty()) throw std::invalid_argument("train_cf: no dyads");
  for (const DyadObservation& o : dyads)
    if (o.user < 0 || o.user >= catalog.num_users || o.item < 0 || o.item >= catalog.num_items)
      throw std::invalid_argument("train_cf: dyad outside catalog bounds");

  Hyperparams init_hyper = h;
  init_hyper.position_bias = false;
  ModelParams m = init_params(catalog, init_hyper);

  std::vector<std::size_t> order(dyads.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const int k = m.dim;
  double eta = h.eta0;
  for (int epoch = 0; epoch < h.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(mix_seed(h.seed, 0xCF0C, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t idx : order) {
      const DyadObservation& o = dyads[idx];
      DyadGradient g = loss == CfLoss::kSquared ? dyad_gradient_l2(m, o, h)
                                                : dyad_gradient_logistic(m, o, h);
      double* phi_u = m.phi.data() + static_cast<std::size_t>(o.user) * k;
      double* psi_i = m.psi.data() + static_cast<std::size_t>(o.item) * k;
      for (int d = 0; d < k; ++d) {
        phi_u[d] -= eta * g.d_phi[d];
        psi_i[d] -= eta * g.d_psi[d];
      }
    }

    double objective = 0.0;
    for (const DyadObservation& o : dyads)
      objective +=
          loss == CfLoss::kSquared ? dyad_loss_l2(m, o, h) - penalty(m, o, h)
                                   : dyad_loss_logistic(m, o, h) - penalty(m, o, h);
    objective += h.lambda_user * squared_norm(m.phi) + h.lambda_item * squared_norm(m.psi);
    if (!std::isfinite(objective))
      throw std::runtime_error("train_cf: objective became non-finite at epoch " +
                               std::to_string(epoch) + " (learning rate too high?)");
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (progress)
      (*progress) << epoch << '\t' << objective << '\t' << eta << '\t' << seconds << '\n';
    eta *= h.anneal;
  }
  return m;
}

}  // namespace

ModelParams train_cf_l2(const std::vector<DyadObservation>& dyads, const Catalog& catalog,
                        const Hyperparams& hyper, std::ostream* progress) {
  return train_cf(CfLoss::kSquared, dyads, catalog, hyper, progress);
}

ModelParams train_cf_logistic(const std::vector<DyadObservation>& dyads, const Catalog& catalog,
                              const Hyperparams& hyper, std::ostream* progress) {
  return train_cf(CfLoss::kLogistic, dyads, catalog, hyper, progress);
}

}  // namespace ccf
