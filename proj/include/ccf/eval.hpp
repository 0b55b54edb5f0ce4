#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ccf/choice_model.hpp"
#include "ccf/core.hpp"

namespace ccf {

struct RankingMetrics {
  double ap = 0.0;
  double ar = 0.0;
  double ndcg = 0.0;
};

/// Binary-relevance AP@n, AR@n, nDCG@n of one ranked list. AP normalizes by
/// min(n, |relevant|); nDCG uses gain 1 and discount 1/log2(rank+1). An
/// empty relevant set scores (0,0,0).
RankingMetrics ranking_metrics(std::span<const int> ranked, std::span<const int> relevant,
                               int n);

struct OfflineMetrics {
  double ap = 0.0;
  double ar = 0.0;
  double ndcg = 0.0;
  int user_dates = 0;  // evaluation points with a nonempty relevant set
};

/// Per (user, date): ranks the items active on that date by model utility
/// against the items the user clicked that date, then macro-averages.
/// Throws when no user-date has a click.
OfflineMetrics offline_eval(const ModelParams& params, const Dataset& test, int n = 4);

std::vector<InteractionRecord> responded_records(const Dataset& dataset);

/// Fraction of responded records whose predicted reaction matches the log.
double reaction_accuracy(const ModelParams& params,
                         std::span<const InteractionRecord> responded);
double reaction_accuracy(const std::function<int(const InteractionRecord&)>& predictor,
                         std::span<const InteractionRecord> responded);

/// One simulation probe: the items a user took on one date and the rest of
/// that date's pool.
struct ProbeDay {
  int user = 0;
  std::int64_t date = 0;
  std::vector<int> positives;  // P_ud, disjoint from the implied negatives
  std::vector<int> pool;       // P_ud union N_ud
};

/// Builds one probe per (user, date) pair present in the log; the pool is
/// every item shown on that date, the positives are the user's clicks.
std::vector<ProbeDay> build_probe_days(const Dataset& test);

/// Simulated reaction: null when the action misses every positive,
/// otherwise a uniform choice among the presented positives. The literal
/// mode instead responds with probability min(1, |A n P| / |A n N|),
/// keeping the uniform item choice.
int simulate_reaction(const ProbeDay& probe, std::span<const int> action,
                      std::mt19937_64& rng, bool literal_take_prob = false);

struct SurplusMetric {
  double model_value = 0.0;
  double production_value = 0.0;
  bool surplus_defined = false;
  double surplus = 0.0;  // (model - production) / production when defined
};

struct SurplusReport {
  SurplusMetric ctr;
  SurplusMetric sales;
  SurplusMetric diversity;
  std::size_t num_probes = 0;
};

/// A policy that emits an ordered action from one probe day's pool.
using DayPolicy = std::function<std::vector<int>(const ProbeDay&, std::mt19937_64&)>;

/// Replays every probe under both policies with shared per-probe random
/// substreams (identical policies therefore tie exactly) and reports
/// realized CTR, mean sales revenue, and the entropy of the aggregate
/// consumption distribution, with relative surpluses.
SurplusReport relative_surplus(const DayPolicy& model, const DayPolicy& production,
                               std::span<const ProbeDay> probes,
                               std::span<const double> prices, std::uint64_t seed,
                               bool literal_take_prob = false);

struct RealizedMetrics {
  double ctr = 0.0;
  double sales = 0.0;
  double diversity = 0.0;
  std::size_t sessions = 0;
};

/// Realized per-session CTR, mean revenue, and take entropy of a log slice.
RealizedMetrics logged_metrics(std::span<const InteractionRecord> records,
                               std::span<const double> prices);

/// One probe per record (carrying its user-date positives and pool), so a
/// replay emits as many simulated sessions as the log holds real ones.
std::vector<ProbeDay> per_record_probes(const Dataset& test);

/// Session-by-session counterfactual replay: the model policy answers every
/// logged session through the probe-day simulator, while the production
/// side of the report keeps the log's realized metrics.
SurplusReport replay_surplus(const DayPolicy& model, const Dataset& probe_records,
                             std::span<const double> prices, std::uint64_t seed,
                             bool literal_take_prob = false);

struct ReplayAlphaResult {
  double alpha = 0.0;
  SurplusReport report;
};

/// Deployment-style diversity tuning: sweeps an alpha grid over the replay
/// and keeps the most diverse randomization whose replayed CTR stays above
/// floor_ratio times the logged production CTR. Rankings are by model
/// utility over each probe day's pool.
ReplayAlphaResult select_alpha_on_replay(const ModelParams& params,
                                         const Dataset& probe_records,
                                         std::span<const double> prices, double floor_ratio,
                                         std::uint64_t seed, double grid_step = 0.025);

/// Fraction of records clicked at each 1-based action position.
std::vector<double> position_click_rates(const Dataset& dataset);

}  // namespace ccf
