#include "gbdtwm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "gbdtwm/rng.hpp"

namespace gbdtwm {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  for (auto& cell : cells) {
    const auto a = cell.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
      cell.clear();
      continue;
    }
    const auto b = cell.find_last_not_of(" \t\r");
    cell = cell.substr(a, b - a + 1);
  }
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

int resolve_label_column(const CsvOptions& opts,
                         const std::vector<std::string>& header,
                         std::size_t column_count, const std::string& path) {
  if (opts.label_column.empty()) return static_cast<int>(column_count) - 1;
  int idx = 0;
  const auto& sel = opts.label_column;
  auto [ptr, ec] = std::from_chars(sel.data(), sel.data() + sel.size(), idx);
  if (ec == std::errc{} && ptr == sel.data() + sel.size()) {
    if (idx < 0 || idx >= static_cast<int>(column_count))
      throw std::invalid_argument("load_csv: label column index " + sel +
                                  " out of range for " + path);
    return idx;
  }
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == sel) return static_cast<int>(i);
  throw std::invalid_argument("load_csv: no column named '" + sel + "' in " +
                              path);
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty() || num_features < 1)
    throw std::invalid_argument("Dataset: empty dataset");
  if (features.size() != labels.size() * static_cast<std::size_t>(num_features))
    throw std::invalid_argument("Dataset: feature matrix shape mismatch");
  if (class_count < 1) throw std::invalid_argument("Dataset: class_count < 1");
  for (int y : labels)
    if (y < 0 || y >= class_count)
      throw std::invalid_argument("Dataset: label " + std::to_string(y) +
                                  " outside [0, " +
                                  std::to_string(class_count) + ")");
  for (double v : features)
    if (!std::isfinite(v))
      throw std::invalid_argument("Dataset: non-finite feature value");
}

Dataset load_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  std::string line;
  std::vector<std::string> header;
  std::size_t lineno = 0;

  if (opts.has_header) {
    if (!std::getline(in, line))
      throw std::runtime_error("load_csv: " + path + " is empty");
    ++lineno;
    header = split_line(line);
  }

  Dataset out;
  std::unordered_map<std::string, int> label_ids;
  int label_col = -1;
  std::size_t column_count = header.size();

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (column_count == 0) column_count = cells.size();
    if (cells.size() != column_count)
      throw std::runtime_error("load_csv: " + path + ":" +
                               std::to_string(lineno) + ": expected " +
                               std::to_string(column_count) + " columns, got " +
                               std::to_string(cells.size()));
    if (label_col < 0) {
      label_col = resolve_label_column(opts, header, column_count, path);
      out.num_features = static_cast<int>(column_count) - 1;
      if (out.num_features < 1)
        throw std::runtime_error("load_csv: " + path + " has no feature columns");
      if (!header.empty()) {
        for (std::size_t i = 0; i < column_count; ++i)
          if (static_cast<int>(i) != label_col)
            out.feature_names.push_back(header[i]);
      }
    }
    for (std::size_t i = 0; i < column_count; ++i) {
      if (static_cast<int>(i) == static_cast<std::size_t>(label_col)) continue;
      double v = 0.0;
      if (!parse_double(cells[i], v))
        throw std::runtime_error("load_csv: " + path + ":" +
                                 std::to_string(lineno) + ": non-numeric cell '" +
                                 cells[i] + "'");
      if (!std::isfinite(v))
        throw std::runtime_error("load_csv: " + path + ":" +
                                 std::to_string(lineno) +
                                 ": non-finite feature value");
      out.features.push_back(v);
    }
    const std::string& token = cells[label_col];
    auto it = label_ids.find(token);
    if (it == label_ids.end()) {
      const int id = static_cast<int>(label_ids.size());
      if (opts.class_count >= 0 && id >= opts.class_count)
        throw std::runtime_error("load_csv: " + path + ":" +
                                 std::to_string(lineno) + ": label '" + token +
                                 "' exceeds declared class count " +
                                 std::to_string(opts.class_count));
      it = label_ids.emplace(token, id).first;
      out.class_names.push_back(token);
    }
    out.labels.push_back(it->second);
  }

  if (out.labels.empty())
    throw std::runtime_error("load_csv: " + path + " has no data rows");
  out.class_count = opts.class_count >= 0 ? opts.class_count
                                          : static_cast<int>(label_ids.size());
  out.validate();
  return out;
}

std::size_t ceil_fraction(double fraction, std::size_t n) {
  return static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

std::pair<Dataset, Dataset> split(const Dataset& data, double fraction,
                                  std::uint64_t seed) {
  const std::size_t n = data.size();
  const std::size_t na = ceil_fraction(fraction, n);
  if (na == 0 || na >= n)
    throw std::invalid_argument("split: fraction " + std::to_string(fraction) +
                                " leaves one side empty (N=" +
                                std::to_string(n) + ")");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng::SplitMix64 gen(seed);
  rng::shuffle(order, gen);

  auto take = [&](std::size_t from, std::size_t to) {
    Dataset part;
    part.num_features = data.num_features;
    part.class_count = data.class_count;
    part.feature_names = data.feature_names;
    part.class_names = data.class_names;
    part.features.reserve((to - from) * data.num_features);
    part.labels.reserve(to - from);
    for (std::size_t i = from; i < to; ++i) {
      const auto r = data.row(order[i]);
      part.features.insert(part.features.end(), r.begin(), r.end());
      part.labels.push_back(data.labels[order[i]]);
    }
    return part;
  };
  return {take(0, na), take(na, n)};
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.num_features != b.num_features)
    throw std::invalid_argument("concat: feature widths differ (" +
                                std::to_string(a.num_features) + " vs " +
                                std::to_string(b.num_features) + ")");
  if (a.class_count != b.class_count)
    throw std::invalid_argument("concat: class counts differ (" +
                                std::to_string(a.class_count) + " vs " +
                                std::to_string(b.class_count) + ")");
  Dataset out = a;
  out.features.insert(out.features.end(), b.features.begin(), b.features.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

StandardizationStats standardize_fit(const Dataset& data) {
  const std::size_t n = data.size();
  const int d = data.num_features;
  StandardizationStats stats;
  stats.mean.assign(d, 0.0);
  stats.stddev.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = data.row(i);
    for (int f = 0; f < d; ++f) stats.mean[f] += r[f];
  }
  for (int f = 0; f < d; ++f) stats.mean[f] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = data.row(i);
    for (int f = 0; f < d; ++f) {
      const double dev = r[f] - stats.mean[f];
      stats.stddev[f] += dev * dev;
    }
  }
  for (int f = 0; f < d; ++f)
    stats.stddev[f] = std::sqrt(stats.stddev[f] / static_cast<double>(n));
  return stats;
}

std::vector<double> standardize_apply(const StandardizationStats& stats,
                                      std::span<const double> x) {
  if (x.size() != stats.mean.size())
    throw std::invalid_argument("standardize_apply: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t f = 0; f < x.size(); ++f) {
    out[f] = x[f] - stats.mean[f];
    if (stats.stddev[f] > 0.0) out[f] /= stats.stddev[f];
  }
  return out;
}

std::vector<double> standardize_all(const StandardizationStats& stats,
                                    const Dataset& data) {
  std::vector<double> out;
  out.reserve(data.features.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = standardize_apply(stats, data.row(i));
    out.insert(out.end(), z.begin(), z.end());
  }
  return out;
}

}  // namespace gbdtwm
