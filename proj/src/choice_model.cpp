#include "ccf/choice_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ccf/rng.hpp"

namespace ccf {

ModelParams ModelParams::zeros(int num_users, int num_items, int dim, int action_length,
                               bool position_bias) {
  if (num_users < 1 || num_items < 1 || dim < 1 || action_length < 1)
    throw std::invalid_argument("ModelParams: all dimensions must be >= 1");
  ModelParams m;
  m.num_users = num_users;
  m.num_items = num_items;
  m.dim = dim;
  m.action_length = action_length;
  m.position_bias = position_bias;
  m.phi.assign(static_cast<std::size_t>(num_users) * dim, 0.0);
  m.psi.assign(static_cast<std::size_t>(num_items) * dim, 0.0);
  m.theta.assign(num_users, 0.0);
  m.beta.assign(static_cast<std::size_t>(action_length) * dim, 1.0);
  return m;
}

namespace {

void check_user(const ModelParams& m, int u) {
  if (u < 0 || u >= m.num_users) throw std::out_of_range("user id out of range");
}

void check_item(const ModelParams& m, int i) {
  if (i < 0 || i >= m.num_items) throw std::out_of_range("item id out of range");
}

void check_action(const ModelParams& m, std::span<const int> action) {
  if (action.empty()) throw std::invalid_argument("action must be nonempty");
  if (m.position_bias && static_cast<int>(action.size()) != m.action_length)
    throw std::invalid_argument("position-biased model requires actions of length " +
                                std::to_string(m.action_length));
  for (int i : action) check_item(m, i);
}

// Score of the item at 1-based slot p in the action.
double slot_score(const ModelParams& m, int u, int item, int p) {
  return m.position_bias ? positioned_utility(m, u, item, p) : utility(m, u, item);
}

}  // namespace

double utility(const ModelParams& m, int u, int i) {
  check_user(m, u);
  check_item(m, i);
  const double* a = m.phi.data() + static_cast<std::size_t>(u) * m.dim;
  const double* b = m.psi.data() + static_cast<std::size_t>(i) * m.dim;
  double s = 0.0;
  for (int d = 0; d < m.dim; ++d) s += a[d] * b[d];
  return s;
}

double positioned_utility(const ModelParams& m, int u, int i, int p) {
  check_user(m, u);
  check_item(m, i);
  if (p < 1 || p > m.action_length) throw std::out_of_range("position out of range");
  if (!m.position_bias) return utility(m, u, i);
  const double* a = m.phi.data() + static_cast<std::size_t>(u) * m.dim;
  const double* b = m.psi.data() + static_cast<std::size_t>(i) * m.dim;
  const double* c = m.beta.data() + static_cast<std::size_t>(p - 1) * m.dim;
  double s = 0.0;
  for (int d = 0; d < m.dim; ++d) s += a[d] * b[d] * c[d];
  return s;
}

ChoiceDistribution choice_probabilities(const ModelParams& m, int u,
                                        std::span<const int> action) {
  check_user(m, u);
  check_action(m, action);

  const double propensity = m.theta[u];
  if (!std::isfinite(propensity)) throw std::invalid_argument("non-finite propensity");

  std::vector<double> scores(action.size());
  double max_score = propensity;
  for (std::size_t p = 0; p < action.size(); ++p) {
    scores[p] = slot_score(m, u, action[p], static_cast<int>(p) + 1);
    if (!std::isfinite(scores[p])) throw std::invalid_argument("non-finite utility");
    max_score = std::max(max_score, scores[p]);
  }

  double denom = std::exp(propensity - max_score);
  const double null_mass = denom;
  std::vector<double> mass(action.size());
  for (std::size_t p = 0; p < action.size(); ++p) {
    mass[p] = std::exp(scores[p] - max_score);
    denom += mass[p];
  }

  ChoiceDistribution dist;
  dist.item_probs.reserve(action.size());
  for (std::size_t p = 0; p < action.size(); ++p)
    dist.item_probs.emplace_back(action[p], mass[p] / denom);
  dist.null_prob = null_mass / denom;
  return dist;
}

int sample_reaction(const ModelParams& m, int u, std::span<const int> action,
                    std::mt19937_64& rng, double noise_scale) {
  check_user(m, u);
  check_action(m, action);

  double best = m.theta[u] + noise_scale * sample_gumbel(rng);
  int chosen = kNoReaction;
  for (std::size_t p = 0; p < action.size(); ++p) {
    double score = slot_score(m, u, action[p], static_cast<int>(p) + 1) +
                   noise_scale * sample_gumbel(rng);
    if (score > best) {
      best = score;
      chosen = action[p];
    }
  }
  return chosen;
}

std::size_t axiom1_choice(std::span<const double> utilities) {
  if (utilities.empty()) throw std::invalid_argument("axiom1_choice: empty utility list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < utilities.size(); ++i)
    if (utilities[i] > utilities[best]) best = i;
  return best;
}

int predict_reaction(const ModelParams& m, int u, std::span<const int> action) {
  check_user(m, u);
  check_action(m, action);
  std::size_t best = 0;
  double best_score = slot_score(m, u, action[0], 1);
  for (std::size_t p = 1; p < action.size(); ++p) {
    double score = slot_score(m, u, action[p], static_cast<int>(p) + 1);
    if (score > best_score) {
      best_score = score;
      best = p;
    }
  }
  return action[best];
}

namespace {

void write_row(std::ostream& out, const double* row, int n) {
  char buf[32];
  for (int d = 0; d < n; ++d) {
    std::snprintf(buf, sizeof(buf), "%.17g", row[d]);
    if (d > 0) out << ' ';
    out << buf;
  }
  out << '\n';
}

std::vector<double> parse_row(const std::string& line, int n, std::size_t line_no) {
  std::istringstream in(line);
  std::vector<double> row(n);
  for (int d = 0; d < n; ++d) {
    if (!(in >> row[d]))
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(n) + " reals");
  }
  std::string rest;
  if (in >> rest)
    throw ParseError("line " + std::to_string(line_no) + ": trailing tokens");
  return row;
}

}  // namespace

void write_model(const ModelParams& m, std::ostream& out) {
  out << "#ccf-model v1\n";
  out << m.num_users << ' ' << m.num_items << ' ' << m.dim << ' ' << m.action_length
      << " bias=" << (m.position_bias ? 1 : 0) << '\n';
  for (int u = 0; u < m.num_users; ++u)
    write_row(out, m.phi.data() + static_cast<std::size_t>(u) * m.dim, m.dim);
  for (int i = 0; i < m.num_items; ++i)
    write_row(out, m.psi.data() + static_cast<std::size_t>(i) * m.dim, m.dim);
  write_row(out, m.theta.data(), m.num_users);
  for (int p = 0; p < m.action_length; ++p)
    write_row(out, m.beta.data() + static_cast<std::size_t>(p) * m.dim, m.dim);
}

ModelParams read_model(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line))
      throw ParseError("model file truncated at line " + std::to_string(line_no + 1));
    ++line_no;
    return line;
  };

  if (next_line() != "#ccf-model v1")
    throw ParseError("line 1: expected '#ccf-model v1'");

  int num_users = 0, num_items = 0, dim = 0, action_length = 0, bias = 0;
  {
    std::istringstream hdr(next_line());
    std::string bias_tok;
    if (!(hdr >> num_users >> num_items >> dim >> action_length >> bias_tok) ||
        bias_tok.rfind("bias=", 0) != 0 || bias_tok.size() != 6 ||
        (bias_tok[5] != '0' && bias_tok[5] != '1'))
      throw ParseError("line 2: expected 'N M k l bias={0|1}'");
    bias = bias_tok[5] - '0';
  }

  ModelParams m = ModelParams::zeros(num_users, num_items, dim, action_length, bias == 1);
  for (int u = 0; u < num_users; ++u) {
    auto row = parse_row(next_line(), dim, line_no);
    std::copy(row.begin(), row.end(), m.phi.begin() + static_cast<std::size_t>(u) * dim);
  }
  for (int i = 0; i < num_items; ++i) {
    auto row = parse_row(next_line(), dim, line_no);
    std::copy(row.begin(), row.end(), m.psi.begin() + static_cast<std::size_t>(i) * dim);
  }
  {
    auto row = parse_row(next_line(), num_users, line_no);
    m.theta = std::move(row);
  }
  for (int p = 0; p < action_length; ++p) {
    auto row = parse_row(next_line(), dim, line_no);
    std::copy(row.begin(), row.end(), m.beta.begin() + static_cast<std::size_t>(p) * dim);
  }
  return m;
}

void write_model_file(const ModelParams& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  write_model(m, out);
}

ModelParams read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  return read_model(in);
}

}  // namespace ccf
