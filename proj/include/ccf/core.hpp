#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ccf {

/// Sentinel reaction value for a session the user ignored.
inline constexpr int kNoReaction = -1;

/// Malformed input file (log, model, world, or policy).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Static description of the recommendation market: user/item universe,
/// action size, and the optional per-item prices and per-user loyalty
/// weights used by the revenue payoff and population aggregation.
struct Catalog {
  int num_users = 0;
  int num_items = 0;
  int action_length = 0;
  std::vector<double> prices;   // empty, or one nonnegative price per item
  std::vector<double> loyalty;  // empty, or one weight per user, sums to 1

  bool has_prices() const { return !prices.empty(); }
  bool has_loyalty() const { return !loyalty.empty(); }
};

/// One user-system game play: the system shows an ordered action of
/// distinct items, the user reacts with one of them or with nothing.
struct InteractionRecord {
  std::int64_t timestamp = 0;
  int user = 0;
  std::vector<int> action;
  int reaction = kNoReaction;

  bool responded() const { return reaction != kNoReaction; }

  /// 1-based position of an item within the action, 0 if absent.
  int position_of(int item) const {
    for (std::size_t p = 0; p < action.size(); ++p)
      if (action[p] == item) return static_cast<int>(p) + 1;
    return 0;
  }

  bool operator==(const InteractionRecord&) const = default;
};

struct Dataset {
  Catalog catalog;
  std::vector<InteractionRecord> records;
};

/// Throws std::invalid_argument if the catalog bounds are inconsistent.
void validate_catalog(const Catalog& catalog);

/// Throws std::invalid_argument naming the first offending record if any
/// record violates the catalog bounds, action distinctness, reaction
/// membership, or timestamp ordering.
void validate_dataset(const Dataset& dataset);

/// Parses the interaction-log TSV format. Malformed input throws
/// std::runtime_error naming the 1-based line number.
Dataset parse_log(std::istream& in);
Dataset parse_log(const std::string& text);
Dataset read_log_file(const std::string& path);

/// Writes the interaction-log TSV format; parse_log(write_log(d)) == d and
/// the byte stream is deterministic.
void write_log(const Dataset& dataset, std::ostream& out);
std::string write_log_string(const Dataset& dataset);
void write_log_file(const Dataset& dataset, const std::string& path);

/// Random record-level partition. |train| = round(fraction * total); record
/// order within each side is preserved. Deterministic given seed.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double train_fraction,
                                          std::uint64_t seed);

bool operator==(const Catalog& a, const Catalog& b);
bool operator==(const Dataset& a, const Dataset& b);

}  // namespace ccf
