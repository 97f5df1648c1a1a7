#include "tsrl/ftaug.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tsrl/error.hpp"

namespace tsrl {
namespace {

bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

Complex unit_root(std::size_t m, std::size_t n) {
  const double angle = -2.0 * M_PI * static_cast<double>(m) / static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

std::vector<Complex> radix2(std::vector<Complex> a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    std::vector<Complex> w(half);
    for (std::size_t k = 0; k < half; ++k) w[k] = unit_root(k, len);
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[start + k];
        const Complex v = a[start + k + half] * w[k];
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
  return a;
}

std::vector<Complex> direct(const std::vector<Complex>& a) {
  const std::size_t n = a.size();
  std::vector<Complex> table(n);
  for (std::size_t m = 0; m < n; ++m) table[m] = unit_root(m, n);
  std::vector<Complex> out(n);
  for (std::size_t f = 0; f < n; ++f) {
    Complex acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) acc += a[t] * table[(f * t) % n];
    out[f] = acc;
  }
  return out;
}

std::vector<Complex> transform(std::vector<Complex> a) {
  if (a.empty()) throw ShapeError("dft: empty signal");
  for (const Complex& v : a) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw NumericError("dft: non-finite input");
    }
  }
  return is_power_of_two(a.size()) ? radix2(std::move(a)) : direct(a);
}

}  // namespace

std::vector<Complex> dft(std::span<const double> signal) {
  return transform(std::vector<Complex>(signal.begin(), signal.end()));
}

std::vector<Complex> dft(std::span<const Complex> signal) {
  return transform(std::vector<Complex>(signal.begin(), signal.end()));
}

std::vector<Complex> idft(std::span<const Complex> spectrum) {
  std::vector<Complex> conj(spectrum.size());
  for (std::size_t i = 0; i < spectrum.size(); ++i) conj[i] = std::conj(spectrum[i]);
  auto out = transform(std::move(conj));
  const double inv = 1.0 / static_cast<double>(out.size());
  for (Complex& v : out) v = std::conj(v) * inv;
  return out;
}

CropPair random_crop_pair(std::size_t length, Rng& rng) {
  if (length < 2) throw ConfigError("random_crop_pair: series length must be >= 2");
  // A non-decreasing 4-tuple (a1, a2, b1-1, b2-1) over [0, T) corresponds to a
  // 4-subset of [0, T+3) after adding 0,1,2,3; sampling the subset uniformly
  // samples the crop pair uniformly.
  auto picks = rng.sample_without_replacement(length + 3, 4);
  std::sort(picks.begin(), picks.end());
  CropPair crop;
  crop.a1 = picks[0];
  crop.a2 = picks[1] - 1;
  crop.b1 = picks[2] - 2 + 1;
  crop.b2 = picks[3] - 3 + 1;
  return crop;
}

CropPair random_crop_pair(std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  return random_crop_pair(length, rng);
}

FrequencyMixResult frequency_mix(const TimeSeriesInstance& x, const TimeSeriesInstance& donor,
                                 double rate, Rng& rng) {
  if (x.length != donor.length || x.features != donor.features) {
    throw ShapeError("frequency_mix: series is " + std::to_string(x.length) + "x" +
                     std::to_string(x.features) + " but donor is " +
                     std::to_string(donor.length) + "x" + std::to_string(donor.features));
  }
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("frequency_mix: rate must lie in [0, 1]");

  const std::size_t length = x.length;
  const std::size_t features = x.features;
  const std::size_t half_bins = length / 2 + 1;
  const auto count = static_cast<std::size_t>(std::lround(rate * static_cast<double>(half_bins)));

  FrequencyMixResult result;
  result.series = x;
  result.replaced_bins.resize(features);
  std::vector<double> channel(length);
  std::vector<double> donor_channel(length);
  for (std::size_t f = 0; f < features; ++f) {
    for (std::size_t t = 0; t < length; ++t) {
      channel[t] = x.is_observed(t, f) ? x.at(t, f) : 0.0;
      donor_channel[t] = donor.is_observed(t, f) ? donor.at(t, f) : 0.0;
    }
    auto spectrum = dft(channel);
    const auto donor_spectrum = dft(donor_channel);

    auto bins = rng.sample_without_replacement(half_bins, count);
    std::sort(bins.begin(), bins.end());
    for (std::size_t bin : bins) {
      spectrum[bin] = donor_spectrum[bin];
      const std::size_t mirror = (length - bin) % length;
      spectrum[mirror] = donor_spectrum[mirror];
    }
    result.replaced_bins[f] = std::move(bins);

    const auto mixed = idft(spectrum);
    double scale = 1.0;
    for (const Complex& v : mixed) {
      result.max_imag_residue = std::max(result.max_imag_residue, std::abs(v.imag()));
      scale = std::max(scale, std::abs(v.real()));
    }
    if (result.max_imag_residue > 1e-9 * scale) {
      throw NumericError("frequency_mix: inverse transform left an imaginary residue");
    }
    for (std::size_t t = 0; t < length; ++t) {
      if (x.is_observed(t, f)) result.series.values[t * features + f] = mixed[t].real();
    }
  }
  return result;
}

FrequencyMixResult frequency_mix(const TimeSeriesInstance& x, const TimeSeriesInstance& donor,
                                 double rate, std::uint64_t seed) {
  Rng rng(seed);
  return frequency_mix(x, donor, rate, rng);
}

TimeSeriesInstance crop(const TimeSeriesInstance& x, std::size_t begin, std::size_t end) {
  if (begin >= end || end > x.length) {
    throw ShapeError("crop: window [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for length " + std::to_string(x.length));
  }
  TimeSeriesInstance out;
  out.length = end - begin;
  out.features = x.features;
  out.label = x.label;
  out.id = x.id;
  const auto first = static_cast<std::ptrdiff_t>(begin * x.features);
  const auto last = static_cast<std::ptrdiff_t>(end * x.features);
  out.values.assign(x.values.begin() + first, x.values.begin() + last);
  out.observed.assign(x.observed.begin() + first, x.observed.begin() + last);
  return out;
}

AugmentedPair ftaug_pair(const TimeSeriesInstance& x, const TimeSeriesInstance& donor,
                         double mix_rate, const CropPair& crop_pair, Rng& rng) {
  if (!crop_pair.valid(x.length)) throw ShapeError("ftaug_pair: crop pair invalid for series");
  auto mixed = frequency_mix(x, donor, mix_rate, rng);
  AugmentedPair pair;
  pair.view1 = crop(x, crop_pair.a1, crop_pair.b1);
  pair.view2 = crop(mixed.series, crop_pair.a2, crop_pair.b2);
  pair.crop = crop_pair;
  return pair;
}

AugmentedPair ftaug_pair(const TimeSeriesInstance& x, const TimeSeriesInstance& donor,
                         double mix_rate, std::uint64_t seed) {
  Rng rng(seed);
  const CropPair crop_pair = random_crop_pair(x.length, rng);
  return ftaug_pair(x, donor, mix_rate, crop_pair, rng);
}

}  // namespace tsrl
