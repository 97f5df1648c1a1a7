#include "tsrl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "tsrl/error.hpp"
#include "tsrl/rng.hpp"

namespace tsrl {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Finite number or nullopt.
std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    lines.push_back(line);
  }
  if (lines.empty()) throw FormatError(path.string() + ": file is empty");
  return lines;
}

}  // namespace

TimeSeriesInstance TimeSeriesInstance::from_values(std::size_t length, std::size_t features,
                                                   std::vector<double> values,
                                                   std::optional<int> label, std::string id) {
  if (length < 1 || features < 1) throw ShapeError("instance: T and F must be >= 1");
  if (values.size() != length * features) {
    throw ShapeError("instance: expected " + std::to_string(length * features) + " values, got " +
                     std::to_string(values.size()));
  }
  TimeSeriesInstance inst;
  inst.length = length;
  inst.features = features;
  inst.observed.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    inst.observed[i] = std::isfinite(values[i]);
    if (!inst.observed[i]) values[i] = kMissing;
  }
  inst.values = std::move(values);
  inst.label = label;
  inst.id = std::move(id);
  return inst;
}

std::size_t Dataset::class_index(int label) const {
  const auto it = std::lower_bound(classes.begin(), classes.end(), label);
  if (it == classes.end() || *it != label) {
    throw ConfigError("label " + std::to_string(label) + " is not a known class");
  }
  return static_cast<std::size_t>(it - classes.begin());
}

void Dataset::finalize() {
  std::set<int> labels;
  for (const auto& inst : instances) {
    if (inst.length != length() || inst.features != features()) {
      throw ShapeError("dataset: instance '" + inst.id + "' has shape " +
                       std::to_string(inst.length) + "x" + std::to_string(inst.features) +
                       ", expected " + std::to_string(length()) + "x" +
                       std::to_string(features()));
    }
    if (inst.label) labels.insert(*inst.label);
  }
  classes.assign(labels.begin(), labels.end());
}

Dataset load_tsv(const std::filesystem::path& path, const TsvOptions& options) {
  if (options.features < 1) throw ConfigError("load_tsv: feature count must be >= 1");
  if (options.format == TsvFormat::kUcr && options.features != 1) {
    throw ConfigError("load_tsv: UCR files are univariate; use the uea-flat format for F > 1");
  }
  const std::size_t features = options.features;
  const auto lines = read_lines(path);

  std::size_t expected_cells = 0;
  if (options.length) {
    expected_cells = 1 + *options.length * features;
  } else {
    expected_cells = split_tabs(lines.front()).size();
    if (expected_cells < 2 || (expected_cells - 1) % features != 0) {
      throw FormatError(path.string() + ": row 0 has " + std::to_string(expected_cells - 1) +
                        " values, not a multiple of F = " + std::to_string(features));
    }
  }
  const std::size_t length = (expected_cells - 1) / features;
  if (length < 1) throw FormatError(path.string() + ": series length must be >= 1");

  Dataset ds;
  ds.split = options.split;
  ds.instances.reserve(lines.size());
  for (std::size_t row = 0; row < lines.size(); ++row) {
    const auto cells = split_tabs(lines[row]);
    if (cells.size() != expected_cells) {
      throw FormatError(path.string() + ": row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(expected_cells));
    }
    std::optional<int> label;
    if (!trim(cells[0]).empty()) {
      const auto parsed = parse_number(cells[0]);
      if (!parsed || *parsed != std::floor(*parsed) || std::abs(*parsed) > 1e9) {
        throw FormatError(path.string() + ": row " + std::to_string(row) +
                          " has a non-integer label '" + std::string(cells[0]) + "'");
      }
      label = static_cast<int>(*parsed);
    }
    // File is feature-major; memory is [t][f].
    std::vector<double> values(length * features);
    for (std::size_t f = 0; f < features; ++f) {
      for (std::size_t t = 0; t < length; ++t) {
        values[t * features + f] = parse_number(cells[1 + f * length + t]).value_or(kMissing);
      }
    }
    ds.instances.push_back(TimeSeriesInstance::from_values(
        length, features, std::move(values), label,
        path.filename().string() + ":" + std::to_string(row)));
  }
  ds.finalize();
  return ds;
}

void write_tsv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  char buf[64];
  for (const auto& inst : ds.instances) {
    if (inst.label) out << *inst.label;
    for (std::size_t f = 0; f < inst.features; ++f) {
      for (std::size_t t = 0; t < inst.length; ++t) {
        out << '\t';
        if (!inst.is_observed(t, f)) {
          out << "NaN";
        } else {
          std::snprintf(buf, sizeof buf, "%.17g", inst.at(t, f));
          out << buf;
        }
      }
    }
    out << '\n';
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

TimeSeriesInstance load_series_tsv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const std::size_t features = split_tabs(lines.front()).size();
  std::vector<double> values;
  values.reserve(lines.size() * features);
  for (std::size_t row = 0; row < lines.size(); ++row) {
    const auto cells = split_tabs(lines[row]);
    if (cells.size() != features) {
      throw FormatError(path.string() + ": row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(features));
    }
    for (auto cell : cells) values.push_back(parse_number(cell).value_or(kMissing));
  }
  return TimeSeriesInstance::from_values(lines.size(), features, std::move(values), std::nullopt,
                                         path.filename().string());
}

Dataset synth_two_class(std::size_t n_per_class, std::size_t length, std::size_t features,
                        std::uint64_t seed, double noise_std) {
  if (n_per_class < 1) throw ConfigError("synth_two_class: n_per_class must be >= 1");
  if (length < 1 || features < 1) throw ConfigError("synth_two_class: T and F must be >= 1");
  Rng rng(seed);
  Dataset ds;
  const double steps = static_cast<double>(length);
  for (int label = 0; label < 2; ++label) {
    const double cycles = label == 0 ? 4.0 : 8.0;
    for (std::size_t n = 0; n < n_per_class; ++n) {
      std::vector<double> values(length * features);
      for (std::size_t t = 0; t < length; ++t) {
        const double clean = std::sin(2.0 * M_PI * cycles * static_cast<double>(t) / steps);
        for (std::size_t f = 0; f < features; ++f) {
          values[t * features + f] = clean + noise_std * rng.normal();
        }
      }
      ds.instances.push_back(TimeSeriesInstance::from_values(
          length, features, std::move(values), label,
          "synth-" + std::to_string(label) + "-" + std::to_string(n)));
    }
  }
  ds.finalize();
  return ds;
}

Dataset normalize(const Dataset& ds) {
  Dataset out = ds;
  for (auto& inst : out.instances) {
    for (std::size_t f = 0; f < inst.features; ++f) {
      double total = 0.0;
      std::size_t count = 0;
      for (std::size_t t = 0; t < inst.length; ++t) {
        if (inst.is_observed(t, f)) {
          total += inst.at(t, f);
          ++count;
        }
      }
      if (count == 0) {
        throw FormatError("normalize: instance '" + inst.id + "' feature " + std::to_string(f) +
                          " has no observed values");
      }
      const double mu = total / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t t = 0; t < inst.length; ++t) {
        if (inst.is_observed(t, f)) sq += (inst.at(t, f) - mu) * (inst.at(t, f) - mu);
      }
      const double sd = std::sqrt(sq / static_cast<double>(count));
      const bool constant = sd <= 1e-12 * (1.0 + std::abs(mu));
      for (std::size_t t = 0; t < inst.length; ++t) {
        if (!inst.is_observed(t, f)) continue;
        double& v = inst.values[t * inst.features + f];
        v = constant ? 0.0 : (v - mu) / sd;
      }
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t shuffle_seed) {
  if (batch_size < 2) throw ConfigError("batches: batch_size must be >= 2");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(shuffle_seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (end - start < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

}  // namespace tsrl
