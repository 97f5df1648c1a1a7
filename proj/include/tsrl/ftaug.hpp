#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tsrl/dataset.hpp"
#include "tsrl/rng.hpp"

namespace tsrl {

using Complex = std::complex<double>;

/// X[f] = sum_t x[t] exp(-2 pi i f t / T). Radix-2 for power-of-two lengths,
/// direct summation otherwise. Throws NumericError on non-finite input.
std::vector<Complex> dft(std::span<const double> signal);
std::vector<Complex> dft(std::span<const Complex> signal);

/// Inverse of dft, including the 1/T factor.
std::vector<Complex> idft(std::span<const Complex> spectrum);

/// Two overlapping crop windows over a series of length T, half-open:
/// view 1 covers [a1, b1), view 2 covers [a2, b2), and the overlap is
/// [a2, b1). Always 0 <= a1 <= a2 < b1 <= b2 <= T.
struct CropPair {
  std::size_t a1 = 0;
  std::size_t a2 = 0;
  std::size_t b1 = 0;
  std::size_t b2 = 0;

  std::size_t view1_length() const { return b1 - a1; }
  std::size_t view2_length() const { return b2 - a2; }
  std::size_t overlap_length() const { return b1 - a2; }
  /// Where the overlap starts inside each view.
  std::size_t overlap_offset_view1() const { return a2 - a1; }
  std::size_t overlap_offset_view2() const { return 0; }

  bool valid(std::size_t length) const {
    return a1 <= a2 && a2 < b1 && b1 <= b2 && b2 <= length;
  }
};

/// Uniform over all valid crop pairs for a series of the given length.
CropPair random_crop_pair(std::size_t length, Rng& rng);
CropPair random_crop_pair(std::size_t length, std::uint64_t seed);

struct FrequencyMixResult {
  TimeSeriesInstance series;
  /// Per feature, the non-redundant bins (0..floor(T/2)) taken from the donor.
  std::vector<std::vector<std::size_t>> replaced_bins;
  /// Largest |imag| seen after the inverse transform, before discarding.
  double max_imag_residue = 0.0;
};

/// Replaces a `rate` fraction of each channel's non-redundant frequency bins
/// (and their conjugate mirrors) with the donor's coefficients. Missing cells
/// enter the transform as zero and stay missing in the output.
FrequencyMixResult frequency_mix(const TimeSeriesInstance& x, const TimeSeriesInstance& donor,
                                 double rate, Rng& rng);
FrequencyMixResult frequency_mix(const TimeSeriesInstance& x, const TimeSeriesInstance& donor,
                                 double rate, std::uint64_t seed);

/// Copy of timestamps [begin, end).
TimeSeriesInstance crop(const TimeSeriesInstance& x, std::size_t begin, std::size_t end);

struct AugmentedPair {
  TimeSeriesInstance view1;  // original series over [a1, b1)
  TimeSeriesInstance view2;  // frequency-mixed series over [a2, b2)
  CropPair crop;
};

/// Frequency-mixes the full series with the donor, then crops both views
/// using the given windows.
AugmentedPair ftaug_pair(const TimeSeriesInstance& x, const TimeSeriesInstance& donor,
                         double mix_rate, const CropPair& crop, Rng& rng);
/// Same, drawing the crop windows as well.
AugmentedPair ftaug_pair(const TimeSeriesInstance& x, const TimeSeriesInstance& donor,
                         double mix_rate, std::uint64_t seed);

}  // namespace tsrl
