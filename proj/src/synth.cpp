#include "ccf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ccf/rng.hpp"

namespace ccf {

SyntheticWorld generate_world(int num_users, int num_items, int dim, int action_length,
                              int num_dates, int pool_size, std::uint64_t seed) {
  if (num_users < 1 || num_items < 1 || dim < 1 || action_length < 1 || num_dates < 1)
    throw std::invalid_argument("generate_world: all counts must be >= 1");
  if (pool_size < action_length || pool_size > num_items)
    throw std::invalid_argument("generate_world: need action_length <= pool_size <= num_items");

  SyntheticWorld world;
  world.seed = seed;
  world.truth = ModelParams::zeros(num_users, num_items, dim, action_length, true);
  ModelParams& truth = world.truth;

  std::mt19937_64 rng(mix_seed(seed, 0x509D));
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Factor entries have variance 1/sqrt(dim) so utilities have variance 1.
  const double factor_scale = std::pow(static_cast<double>(dim), -0.25);
  for (double& x : truth.phi) x = factor_scale * gauss(rng);
  for (double& x : truth.psi) x = factor_scale * gauss(rng);

  // Outer positions weigh more than the middle ones (scalar per position).
  for (int p = 1; p <= action_length; ++p) {
    const bool outer = p == 1 || p == action_length;
    const double weight = action_length <= 2 ? 1.0 : (outer ? 1.3 : 0.7);
    auto row = truth.position_factors(p);
    std::fill(row.begin(), row.end(), weight);
  }

  // theta_u = log E[sum of exp scores of a uniform random action], which puts
  // the response rate of a random action near one half.
  for (int u = 0; u < num_users; ++u) {
    double expected_mass = 0.0;
    for (int p = 1; p <= action_length; ++p) {
      double mean_exp = 0.0;
      for (int i = 0; i < num_items; ++i)
        mean_exp += std::exp(positioned_utility(truth, u, i, p));
      expected_mass += mean_exp / num_items;
    }
    truth.theta[u] = std::log(expected_mass);
  }

  world.catalog.num_users = num_users;
  world.catalog.num_items = num_items;
  world.catalog.action_length = action_length;
  std::uniform_real_distribution<double> price(1.0, 5.0);
  world.catalog.prices.resize(num_items);
  for (double& c : world.catalog.prices) c = price(rng);
  world.catalog.loyalty.resize(num_users);
  double loyalty_sum = 0.0;
  for (int u = 0; u < num_users; ++u) {
    world.catalog.loyalty[u] = 1.0 / (u + 1.0);
    loyalty_sum += world.catalog.loyalty[u];
  }
  for (double& f : world.catalog.loyalty) f /= loyalty_sum;

  // Transient pools: items rotate through shuffled partition cycles, so an
  // item is active on few dates, like a short-lived article inventory.
  std::vector<int> items(num_items);
  std::iota(items.begin(), items.end(), 0);
  const int pools_per_cycle = std::max(1, num_items / pool_size);
  world.date_pools.resize(num_dates);
  for (int d = 0; d < num_dates; ++d) {
    const int slot = d % pools_per_cycle;
    if (slot == 0) std::shuffle(items.begin(), items.end(), rng);
    world.date_pools[d].assign(items.begin() + static_cast<std::size_t>(slot) * pool_size,
                               items.begin() + static_cast<std::size_t>(slot + 1) * pool_size);
    std::sort(world.date_pools[d].begin(), world.date_pools[d].end());
  }
  return world;
}

ProductionPolicy noisy_ranking_policy(const SyntheticWorld& world, double corruption_scale,
                                      double jitter_scale) {
  auto corrupted = std::make_shared<ModelParams>(world.truth);
  corrupted->position_bias = false;
  std::mt19937_64 rng(mix_seed(world.seed, 0xC02A));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double noise = corruption_scale * std::pow(static_cast<double>(world.truth.dim), -0.25);
  for (double& x : corrupted->phi) x += noise * gauss(rng);
  for (double& x : corrupted->psi) x += noise * gauss(rng);

  const int l = world.catalog.action_length;
  return [corrupted, l, jitter_scale](int user, std::span<const int> pool,
                                      std::mt19937_64& call_rng) {
    std::vector<std::pair<double, int>> scored;
    scored.reserve(pool.size());
    for (int i : pool) {
      double score = utility(*corrupted, user, i);
      if (jitter_scale > 0) score += jitter_scale * sample_gumbel(call_rng);
      scored.emplace_back(score, i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<int> action(l);
    for (int j = 0; j < l; ++j) action[j] = scored[j].second;
    return action;
  };
}

Dataset generate_interactions(const SyntheticWorld& world, int num_records,
                              const ProductionPolicy& production, std::uint64_t seed) {
  if (num_records < 0) throw std::invalid_argument("num_records must be >= 0");
  Dataset d;
  d.catalog = world.catalog;
  d.records.reserve(num_records);

  std::mt19937_64 rng(mix_seed(seed, 0x6E7A));
  std::discrete_distribution<int> user_draw(world.catalog.loyalty.begin(),
                                            world.catalog.loyalty.end());
  const int num_dates = static_cast<int>(world.date_pools.size());
  for (int t = 0; t < num_records; ++t) {
    InteractionRecord r;
    const int date = static_cast<int>(static_cast<std::int64_t>(t) * num_dates / num_records);
    r.timestamp = date;
    r.user = user_draw(rng);
    r.action = production(r.user, world.date_pools[date], rng);
    if (static_cast<int>(r.action.size()) != world.catalog.action_length)
      throw std::invalid_argument("production policy emitted a wrong-size action");
    r.reaction = sample_reaction(world.truth, r.user, r.action, rng);
    d.records.push_back(std::move(r));
  }
  return d;
}

namespace {

void write_real_row(std::ostream& out, const char* label, std::span<const double> row) {
  out << label;
  char buf[32];
  for (double x : row) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out << ' ' << buf;
  }
  out << '\n';
}

std::vector<double> parse_real_row(const std::string& line, const char* label, int n) {
  std::istringstream in(line);
  std::string tag;
  in >> tag;
  if (tag != label) throw ParseError(std::string("world file: expected '") + label + "'");
  std::vector<double> row(n);
  for (int i = 0; i < n; ++i)
    if (!(in >> row[i]))
      throw ParseError(std::string("world file: short '") + label + "' row");
  return row;
}

}  // namespace

void write_world(const SyntheticWorld& world, std::ostream& out) {
  write_model(world.truth, out);
  out << "#ccf-world v1\n";
  out << "seed=" << world.seed << '\n';
  out << "dates=" << world.date_pools.size() << '\n';
  for (const std::vector<int>& pool : world.date_pools) {
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (j > 0) out << ',';
      out << pool[j];
    }
    out << '\n';
  }
  write_real_row(out, "prices", world.catalog.prices);
  write_real_row(out, "loyalty", world.catalog.loyalty);
}

SyntheticWorld read_world(std::istream& in) {
  SyntheticWorld world;
  world.truth = read_model(in);
  world.catalog.num_users = world.truth.num_users;
  world.catalog.num_items = world.truth.num_items;
  world.catalog.action_length = world.truth.action_length;

  std::string line;
  if (!std::getline(in, line) || line != "#ccf-world v1")
    throw ParseError("world file: expected '#ccf-world v1'");
  if (!std::getline(in, line) || line.rfind("seed=", 0) != 0)
    throw ParseError("world file: expected 'seed=<int>'");
  world.seed = std::stoull(line.substr(5));
  if (!std::getline(in, line) || line.rfind("dates=", 0) != 0)
    throw ParseError("world file: expected 'dates=<int>'");
  const int num_dates = std::stoi(line.substr(6));

  world.date_pools.resize(num_dates);
  for (int d = 0; d < num_dates; ++d) {
    if (!std::getline(in, line)) throw ParseError("world file: missing date pool");
    std::istringstream items(line);
    std::string tok;
    while (std::getline(items, tok, ',')) world.date_pools[d].push_back(std::stoi(tok));
  }
  if (!std::getline(in, line)) throw ParseError("world file: missing prices");
  world.catalog.prices = parse_real_row(line, "prices", world.catalog.num_items);
  if (!std::getline(in, line)) throw ParseError("world file: missing loyalty");
  world.catalog.loyalty = parse_real_row(line, "loyalty", world.catalog.num_users);
  return world;
}

void write_world_file(const SyntheticWorld& world, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write world file: " + path);
  write_world(world, out);
}

SyntheticWorld read_world_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open world file: " + path);
  return read_world(in);
}

}  // namespace ccf
