#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tsrl {

/// One series of T timestamps by F features, stored row-major as [t][f].
/// Missing cells hold NaN and have observed == false.
struct TimeSeriesInstance {
  std::size_t length = 0;
  std::size_t features = 0;
  std::vector<double> values;
  std::vector<bool> observed;
  std::optional<int> label;
  std::string id;

  double at(std::size_t t, std::size_t f) const { return values[t * features + f]; }
  bool is_observed(std::size_t t, std::size_t f) const { return observed[t * features + f]; }

  /// Builds an instance from [t][f] values; non-finite cells become missing.
  static TimeSeriesInstance from_values(std::size_t length, std::size_t features,
                                        std::vector<double> values,
                                        std::optional<int> label = std::nullopt,
                                        std::string id = {});
};

enum class Split { kTrain, kTest };

/// Instances sharing T and F. `classes` lists the distinct labels in
/// ascending order; class indices are positions in that list.
struct Dataset {
  std::vector<TimeSeriesInstance> instances;
  std::vector<int> classes;
  Split split = Split::kTrain;

  std::size_t size() const { return instances.size(); }
  std::size_t length() const { return instances.empty() ? 0 : instances.front().length; }
  std::size_t features() const { return instances.empty() ? 0 : instances.front().features; }
  std::optional<std::size_t> num_classes() const {
    if (classes.empty()) return std::nullopt;
    return classes.size();
  }

  /// Index of `label` in `classes`; throws if unknown.
  std::size_t class_index(int label) const;

  /// Checks uniform T/F and recomputes `classes` from the labels present.
  void finalize();
};

enum class TsvFormat { kUcr, kUeaFlat };

struct TsvOptions {
  TsvFormat format = TsvFormat::kUcr;
  /// Feature count F. Must be 1 for UCR files.
  std::size_t features = 1;
  /// Series length T; inferred from the first row when absent.
  std::optional<std::size_t> length;
  Split split = Split::kTrain;
};

/// Reads a tab-separated archive file: one instance per line, label first,
/// then T*F values in feature-major blocks. Unparsable value cells load as
/// missing. An empty label cell loads as an unlabeled instance.
Dataset load_tsv(const std::filesystem::path& path, const TsvOptions& options);

/// Inverse of load_tsv for the UEA-flat layout (UCR when F == 1). Values are
/// written with round-trip precision; missing cells as "NaN".
void write_tsv(const Dataset& ds, const std::filesystem::path& path);

/// Single long series: one timestamp per line, F tab-separated values.
TimeSeriesInstance load_series_tsv(const std::filesystem::path& path);

/// Two-class sinusoid corpus: class 0 has period T/4, class 1 period T/8,
/// amplitude 1, additive Gaussian noise with the given deviation on every
/// feature. Class 0 instances come first.
Dataset synth_two_class(std::size_t n_per_class, std::size_t length, std::size_t features,
                        std::uint64_t seed, double noise_std = 0.1);

/// Per-instance, per-feature z-score over observed cells. Constant channels
/// become zeros. Throws when a channel has no observed value.
Dataset normalize(const Dataset& ds);

/// Shuffled partition of [0, n) into batches of `batch_size`; a trailing
/// batch with fewer than 2 members is dropped.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t shuffle_seed);
inline std::vector<std::vector<std::size_t>> batches(const Dataset& ds, std::size_t batch_size,
                                                     std::uint64_t shuffle_seed) {
  return batches(ds.size(), batch_size, shuffle_seed);
}

}  // namespace tsrl
