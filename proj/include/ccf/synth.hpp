#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ccf/choice_model.hpp"
#include "ccf/core.hpp"

namespace ccf {

/// Ground truth for simulation: the true choice-model parameters, a catalog
/// with prices and loyalty weights, and the transient per-date item pools.
struct SyntheticWorld {
  ModelParams truth;
  Catalog catalog;
  std::vector<std::vector<int>> date_pools;
  std::uint64_t seed = 0;
};

/// Samples a world: factors Gaussian with unit-variance utilities,
/// propensities calibrated so a uniform random action is answered about
/// half the time, position factors shaped so the outer positions pull more
/// clicks than the middle ones, uniform prices in [1,5], and Zipf loyalty.
SyntheticWorld generate_world(int num_users, int num_items, int dim, int action_length,
                              int num_dates, int pool_size, std::uint64_t seed);

/// Emits an ordered action from a date pool for one user.
using ProductionPolicy =
    std::function<std::vector<int>(int user, std::span<const int> pool, std::mt19937_64&)>;

/// The default production baseline: ranks a corrupted copy of the true
/// utilities, re-jittered with Gumbel noise on every call so the same user
/// sees varying actions within a date (a Plackett-Luce draw over the
/// corrupted scores). corruption_scale 1 makes the persistent per-entry
/// noise as large as the factor scale; jitter_scale 0 makes the ranking
/// deterministic again.
ProductionPolicy noisy_ranking_policy(const SyntheticWorld& world, double corruption_scale,
                                      double jitter_scale = 1.0);

/// Simulates num_records interactions: users drawn by loyalty, dates swept
/// in equal contiguous blocks (timestamp == date), actions from the
/// production policy, reactions sampled from the true model.
Dataset generate_interactions(const SyntheticWorld& world, int num_records,
                              const ProductionPolicy& production, std::uint64_t seed);

/// World file: the model format followed by a '#ccf-world v1' section with
/// the seed, date pools, prices, and loyalty weights.
void write_world(const SyntheticWorld& world, std::ostream& out);
SyntheticWorld read_world(std::istream& in);
void write_world_file(const SyntheticWorld& world, const std::string& path);
SyntheticWorld read_world_file(const std::string& path);

}  // namespace ccf
