#include "ccf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include "ccf/rng.hpp"

namespace ccf {

void validate_hyperparams(const Hyperparams& h) {
  if (h.dim < 1) throw std::invalid_argument("hyper: dim must be >= 1");
  if (h.lambda_user < 0 || h.lambda_item < 0 || h.lambda_position < 0)
    throw std::invalid_argument("hyper: regularization weights must be >= 0");
  if (!(h.eta0 > 0)) throw std::invalid_argument("hyper: eta0 must be > 0");
  if (!(h.anneal > 0 && h.anneal <= 1)) throw std::invalid_argument("hyper: anneal in (0,1]");
  if (h.epochs < 1) throw std::invalid_argument("hyper: epochs must be >= 1");
  if (h.init_scale < 0) throw std::invalid_argument("hyper: init_scale must be >= 0");
  if (h.workers < 1) throw std::invalid_argument("hyper: workers must be >= 1");
}

namespace {

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Log-partition pieces of one record: softmax over the slot scores plus the
// propensity pseudo-item, computed with max-subtraction.
struct RecordSoftmax {
  std::vector<double> slot_probs;  // p(R = item at slot p | A)
  double null_prob = 0.0;
  double log_denom = 0.0;  // log(e^theta + sum_j e^{s_j})
};

RecordSoftmax record_softmax(const ModelParams& m, const InteractionRecord& r) {
  const int l = static_cast<int>(r.action.size());
  std::vector<double> scores(l);
  double max_score = m.theta[r.user];
  for (int p = 0; p < l; ++p) {
    scores[p] = m.position_bias ? positioned_utility(m, r.user, r.action[p], p + 1)
                                : utility(m, r.user, r.action[p]);
    max_score = std::max(max_score, scores[p]);
  }
  double denom = std::exp(m.theta[r.user] - max_score);
  const double null_mass = denom;
  std::vector<double> mass(l);
  for (int p = 0; p < l; ++p) {
    mass[p] = std::exp(scores[p] - max_score);
    denom += mass[p];
  }
  RecordSoftmax out;
  out.slot_probs.resize(l);
  for (int p = 0; p < l; ++p) out.slot_probs[p] = mass[p] / denom;
  out.null_prob = null_mass / denom;
  out.log_denom = std::log(denom) + max_score;
  return out;
}

}  // namespace

double record_nll(const ModelParams& m, const InteractionRecord& r) {
  RecordSoftmax sm = record_softmax(m, r);
  double chosen_score;
  if (r.responded()) {
    int p = r.position_of(r.reaction);
    if (p == 0) throw std::invalid_argument("record reaction not in action");
    chosen_score = m.position_bias ? positioned_utility(m, r.user, r.reaction, p)
                                   : utility(m, r.user, r.reaction);
  } else {
    chosen_score = m.theta[r.user];
  }
  return sm.log_denom - chosen_score;
}

double nll(const ModelParams& m, const Dataset& d, const Hyperparams& h) {
  if (m.num_users != d.catalog.num_users || m.num_items != d.catalog.num_items)
    throw std::invalid_argument("nll: params inconsistent with dataset catalog");
  double total = 0.0;
  for (const InteractionRecord& r : d.records) total += record_nll(m, r);
  total += h.lambda_user * squared_norm(m.phi);
  total += h.lambda_item * squared_norm(m.psi);
  if (m.position_bias) total += h.lambda_position * squared_norm(m.beta);
  return total;
}

double record_penalized_loss(const ModelParams& m, const InteractionRecord& r,
                             const Hyperparams& h) {
  double loss = record_nll(m, r);
  loss += h.lambda_user * squared_norm(m.user_factors(r.user));
  for (int i : r.action) loss += h.lambda_item * squared_norm(m.item_factors(i));
  if (m.position_bias)
    for (int p = 1; p <= static_cast<int>(r.action.size()); ++p)
      loss += h.lambda_position * squared_norm(m.position_factors(p));
  return loss;
}

RecordGradient record_gradient(const ModelParams& m, const InteractionRecord& r,
                               const Hyperparams& h) {
  const int k = m.dim;
  const int l = static_cast<int>(r.action.size());
  RecordSoftmax sm = record_softmax(m, r);

  // l'(u,i) = p(i|A) - delta_{i,i*}; the null branch gets p(null) - delta_null.
  std::vector<double> slot_err(sm.slot_probs);
  if (r.responded()) {
    int p = r.position_of(r.reaction);
    slot_err[p - 1] -= 1.0;
  }
  const double null_err = sm.null_prob - (r.responded() ? 0.0 : 1.0);

  RecordGradient g;
  g.d_phi.assign(k, 0.0);
  g.d_psi.assign(static_cast<std::size_t>(l) * k, 0.0);
  if (m.position_bias) g.d_beta.assign(static_cast<std::size_t>(l) * k, 0.0);
  g.d_theta = null_err;

  const double* phi_u = m.phi.data() + static_cast<std::size_t>(r.user) * k;
  for (int p = 0; p < l; ++p) {
    const double* psi_i = m.psi.data() + static_cast<std::size_t>(r.action[p]) * k;
    const double* beta_p = m.beta.data() + static_cast<std::size_t>(p) * k;
    double* g_psi = g.d_psi.data() + static_cast<std::size_t>(p) * k;
    const double e = slot_err[p];
    if (m.position_bias) {
      double* g_beta = g.d_beta.data() + static_cast<std::size_t>(p) * k;
      for (int d = 0; d < k; ++d) {
        g.d_phi[d] += e * psi_i[d] * beta_p[d];
        g_psi[d] = e * phi_u[d] * beta_p[d];
        g_beta[d] = e * phi_u[d] * psi_i[d];
      }
    } else {
      for (int d = 0; d < k; ++d) {
        g.d_phi[d] += e * psi_i[d];
        g_psi[d] = e * phi_u[d];
      }
    }
  }

  // Exact derivatives of the L2 penalties on the touched rows.
  for (int d = 0; d < k; ++d) g.d_phi[d] += 2.0 * h.lambda_user * phi_u[d];
  for (int p = 0; p < l; ++p) {
    const double* psi_i = m.psi.data() + static_cast<std::size_t>(r.action[p]) * k;
    double* g_psi = g.d_psi.data() + static_cast<std::size_t>(p) * k;
    for (int d = 0; d < k; ++d) g_psi[d] += 2.0 * h.lambda_item * psi_i[d];
  }
  if (m.position_bias) {
    for (int p = 0; p < l; ++p) {
      const double* beta_p = m.beta.data() + static_cast<std::size_t>(p) * k;
      double* g_beta = g.d_beta.data() + static_cast<std::size_t>(p) * k;
      for (int d = 0; d < k; ++d) g_beta[d] += 2.0 * h.lambda_position * beta_p[d];
    }
  }
  return g;
}

void gradient_step(ModelParams& m, const InteractionRecord& r, double eta,
                   const Hyperparams& h) {
  if (!(eta > 0)) throw std::invalid_argument("gradient_step: eta must be > 0");
  RecordGradient g = record_gradient(m, r, h);
  const int k = m.dim;
  const int l = static_cast<int>(r.action.size());

  double* phi_u = m.phi.data() + static_cast<std::size_t>(r.user) * k;
  for (int d = 0; d < k; ++d) phi_u[d] -= eta * g.d_phi[d];
  for (int p = 0; p < l; ++p) {
    double* psi_i = m.psi.data() + static_cast<std::size_t>(r.action[p]) * k;
    const double* g_psi = g.d_psi.data() + static_cast<std::size_t>(p) * k;
    for (int d = 0; d < k; ++d) psi_i[d] -= eta * g_psi[d];
  }
  if (m.position_bias) {
    for (int p = 0; p < l; ++p) {
      double* beta_p = m.beta.data() + static_cast<std::size_t>(p) * k;
      const double* g_beta = g.d_beta.data() + static_cast<std::size_t>(p) * k;
      for (int d = 0; d < k; ++d) beta_p[d] -= eta * g_beta[d];
    }
  }
  m.theta[r.user] -= eta * g.d_theta;
}

ModelParams init_params(const Catalog& catalog, const Hyperparams& h) {
  ModelParams m = ModelParams::zeros(catalog.num_users, catalog.num_items, h.dim,
                                     catalog.action_length, h.position_bias);
  std::mt19937_64 rng(mix_seed(h.seed, 0x1417));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& x : m.phi) x = h.init_scale * gauss(rng);
  for (double& x : m.psi) x = h.init_scale * gauss(rng);
  if (h.position_bias)
    for (double& x : m.beta) x = 1.0 + h.init_scale * gauss(rng);
  return m;
}

TrainReport train(const Dataset& d, const Hyperparams& h, std::ostream* progress) {
  validate_hyperparams(h);
  if (d.records.empty()) throw std::invalid_argument("train: dataset is empty");

  TrainReport report;
  report.params = init_params(d.catalog, h);
  ModelParams& m = report.params;

  std::vector<std::size_t> order(d.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double eta = h.eta0;
  for (int epoch = 0; epoch < h.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(mix_seed(h.seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    if (h.workers == 1) {
      for (std::size_t idx : order) gradient_step(m, d.records[idx], eta, h);
    } else {
      // Hogwild-style: shards update the shared parameters without locks.
      const std::size_t n = order.size();
      const int W = std::min<int>(h.workers, static_cast<int>(n));
      std::vector<std::thread> pool;
      pool.reserve(W);
      for (int w = 0; w < W; ++w) {
        const std::size_t lo = n * w / W;
        const std::size_t hi = n * (w + 1) / W;
        pool.emplace_back([&, lo, hi]() {
          for (std::size_t i = lo; i < hi; ++i) gradient_step(m, d.records[order[i]], eta, h);
        });
      }
      for (auto& t : pool) t.join();
    }

    const double objective = nll(m, d, h);
    if (!std::isfinite(objective))
      throw std::runtime_error(
          "train: objective became non-finite at epoch " + std::to_string(epoch) +
          " (learning rate too high?)");
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epoch_nll.push_back(objective);
    report.epoch_seconds.push_back(seconds);
    if (progress)
      (*progress) << epoch << '\t' << objective << '\t' << eta << '\t' << seconds << '\n';
    eta *= h.anneal;
  }
  return report;
}

}  // namespace ccf
