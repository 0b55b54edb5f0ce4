#include "ccf/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "ccf/rng.hpp"

namespace ccf {

bool operator==(const Catalog& a, const Catalog& b) {
  return a.num_users == b.num_users && a.num_items == b.num_items &&
         a.action_length == b.action_length && a.prices == b.prices && a.loyalty == b.loyalty;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.catalog == b.catalog && a.records == b.records;
}

void validate_catalog(const Catalog& c) {
  if (c.num_users < 1) throw std::invalid_argument("catalog: num_users must be >= 1");
  if (c.action_length < 1) throw std::invalid_argument("catalog: action_length must be >= 1");
  if (c.num_items < c.action_length)
    throw std::invalid_argument("catalog: num_items must be >= action_length");
  if (c.has_prices()) {
    if (static_cast<int>(c.prices.size()) != c.num_items)
      throw std::invalid_argument("catalog: prices length must equal num_items");
    for (double p : c.prices)
      if (!(p >= 0.0)) throw std::invalid_argument("catalog: prices must be nonnegative");
  }
  if (c.has_loyalty() && static_cast<int>(c.loyalty.size()) != c.num_users)
    throw std::invalid_argument("catalog: loyalty length must equal num_users");
}

void validate_dataset(const Dataset& d) {
  validate_catalog(d.catalog);
  std::int64_t prev_ts = 0;
  for (std::size_t idx = 0; idx < d.records.size(); ++idx) {
    const InteractionRecord& r = d.records[idx];
    const std::string where = "record " + std::to_string(idx) + ": ";
    if (r.timestamp < 0) throw std::invalid_argument(where + "negative timestamp");
    if (idx > 0 && r.timestamp < prev_ts)
      throw std::invalid_argument(where + "timestamps must be nondecreasing");
    prev_ts = r.timestamp;
    if (r.user < 0 || r.user >= d.catalog.num_users)
      throw std::invalid_argument(where + "user id out of range");
    if (static_cast<int>(r.action.size()) != d.catalog.action_length)
      throw std::invalid_argument(where + "action length mismatch");
    std::unordered_set<int> seen;
    for (int item : r.action) {
      if (item < 0 || item >= d.catalog.num_items)
        throw std::invalid_argument(where + "item id out of range");
      if (!seen.insert(item).second)
        throw std::invalid_argument(where + "duplicate item in action");
    }
    if (r.responded() && !seen.count(r.reaction))
      throw std::invalid_argument(where + "reaction not in action");
  }
}

namespace {

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

long long parse_int(const std::string& s, std::size_t line_no, const char* what) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    parse_fail(line_no, std::string("bad ") + what + " '" + s + "'");
  return value;
}

}  // namespace

Dataset parse_log(std::istream& in) {
  Dataset d;
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) parse_fail(1, "missing header");
  ++line_no;
  if (line != "#ccf-log v1") parse_fail(line_no, "expected '#ccf-log v1'");

  if (!std::getline(in, line)) parse_fail(2, "missing dimension line");
  ++line_no;
  {
    auto fields = split_on(line, '\t');
    if (fields.size() != 3 || fields[0].rfind("N=", 0) != 0 || fields[1].rfind("M=", 0) != 0 ||
        fields[2].rfind("l=", 0) != 0)
      parse_fail(line_no, "expected 'N=<int>\\tM=<int>\\tl=<int>'");
    d.catalog.num_users = static_cast<int>(parse_int(fields[0].substr(2), line_no, "N"));
    d.catalog.num_items = static_cast<int>(parse_int(fields[1].substr(2), line_no, "M"));
    d.catalog.action_length = static_cast<int>(parse_int(fields[2].substr(2), line_no, "l"));
  }
  validate_catalog(d.catalog);

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.eof()) break;
    auto fields = split_on(line, '\t');
    if (fields.size() != 4) parse_fail(line_no, "expected 4 tab-separated columns");

    InteractionRecord r;
    r.timestamp = parse_int(fields[0], line_no, "timestamp");
    if (r.timestamp < 0) parse_fail(line_no, "negative timestamp");
    r.user = static_cast<int>(parse_int(fields[1], line_no, "user"));
    if (r.user < 0 || r.user >= d.catalog.num_users) parse_fail(line_no, "user id out of range");

    std::unordered_set<int> seen;
    for (const std::string& tok : split_on(fields[2], ',')) {
      int item = static_cast<int>(parse_int(tok, line_no, "item"));
      if (item < 0 || item >= d.catalog.num_items) parse_fail(line_no, "item id out of range");
      if (!seen.insert(item).second) parse_fail(line_no, "duplicate item in action");
      r.action.push_back(item);
    }
    if (static_cast<int>(r.action.size()) != d.catalog.action_length)
      parse_fail(line_no, "action length mismatch");

    if (fields[3] == "-") {
      r.reaction = kNoReaction;
    } else {
      r.reaction = static_cast<int>(parse_int(fields[3], line_no, "reaction"));
      if (!seen.count(r.reaction)) parse_fail(line_no, "reaction not in action");
    }
    if (!d.records.empty() && r.timestamp < d.records.back().timestamp)
      parse_fail(line_no, "timestamps must be nondecreasing");
    d.records.push_back(std::move(r));
  }
  return d;
}

Dataset parse_log(const std::string& text) {
  std::istringstream in(text);
  return parse_log(in);
}

Dataset read_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open log file: " + path);
  return parse_log(in);
}

void write_log(const Dataset& d, std::ostream& out) {
  out << "#ccf-log v1\n";
  out << "N=" << d.catalog.num_users << "\tM=" << d.catalog.num_items
      << "\tl=" << d.catalog.action_length << "\n";
  for (const InteractionRecord& r : d.records) {
    out << r.timestamp << '\t' << r.user << '\t';
    for (std::size_t i = 0; i < r.action.size(); ++i) {
      if (i > 0) out << ',';
      out << r.action[i];
    }
    out << '\t';
    if (r.responded())
      out << r.reaction;
    else
      out << '-';
    out << '\n';
  }
}

std::string write_log_string(const Dataset& d) {
  std::ostringstream out;
  write_log(d, out);
  return out.str();
}

void write_log_file(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write log file: " + path);
  write_log(d, out);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction,
                                          std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must be in (0,1)");
  if (d.records.empty()) throw std::invalid_argument("split_dataset: dataset is empty");

  const std::size_t total = d.records.size();
  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(total)));

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed, 0x5917));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> in_train(total, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  Dataset train{d.catalog, {}};
  Dataset test{d.catalog, {}};
  for (std::size_t i = 0; i < total; ++i)
    (in_train[i] ? train : test).records.push_back(d.records[i]);
  return {std::move(train), std::move(test)};
}

}  // namespace ccf
