#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <map>
#include <tuple>

#include "oracles.hpp"
#include "tsrl/error.hpp"
#include "tsrl/ftaug.hpp"

using namespace tsrl;

namespace {

TimeSeriesInstance random_series(std::size_t t, std::size_t f, Rng& rng) {
  std::vector<double> v(t * f);
  for (double& x : v) x = rng.normal();
  return TimeSeriesInstance::from_values(t, f, std::move(v));
}

std::vector<double> channel(const TimeSeriesInstance& x, std::size_t f) {
  std::vector<double> out(x.length);
  for (std::size_t t = 0; t < x.length; ++t) out[t] = x.at(t, f);
  return out;
}

}  // namespace

TEST(Dft, MatchesNaiveTransform) {
  Rng rng(1);
  for (std::size_t t : {1u, 2u, 3u, 7u, 8u, 12u, 16u, 31u, 64u}) {
    std::vector<double> x(t);
    for (double& v : x) v = rng.normal();
    const auto fast = dft(x);
    const auto ref = oracle::naive_dft(x);
    for (std::size_t f = 0; f < t; ++f) EXPECT_LT(std::abs(fast[f] - ref[f]), 1e-10) << t;
  }
}

TEST(Dft, RoundTripAllLengths) {
  Rng rng(2);
  for (std::size_t t = 1; t <= 128; ++t) {
    std::vector<double> x(t);
    for (double& v : x) v = rng.normal();
    const auto back = idft(dft(x));
    for (std::size_t i = 0; i < t; ++i) {
      EXPECT_LT(std::abs(back[i] - Complex(x[i], 0.0)), 1e-9) << "T=" << t;
    }
  }
}

TEST(Dft, Parseval) {
  Rng rng(3);
  for (std::size_t t : {5u, 16u, 50u, 128u}) {
    std::vector<double> x(t);
    for (double& v : x) v = rng.normal();
    const auto spec = dft(x);
    double time_energy = 0.0, freq_energy = 0.0;
    for (double v : x) time_energy += v * v;
    for (const auto& c : spec) freq_energy += std::norm(c);
    EXPECT_NEAR(time_energy, freq_energy / t, 1e-9 * time_energy);
  }
}

TEST(Dft, ConstantIsDcOnly) {
  const auto spec = dft(std::vector<double>(9, 2.5));
  EXPECT_NEAR(spec[0].real(), 22.5, 1e-12);
  for (std::size_t f = 1; f < 9; ++f) EXPECT_LT(std::abs(spec[f]), 1e-12);
}

TEST(Dft, SingleToneOccupiesTwoBins) {
  const std::size_t t = 12;
  std::vector<double> x(t);
  for (std::size_t i = 0; i < t; ++i) x[i] = std::cos(2.0 * M_PI * i / t);
  const auto spec = dft(x);
  for (std::size_t f = 0; f < t; ++f) {
    const double expect = (f == 1 || f == t - 1) ? t / 2.0 : 0.0;
    EXPECT_NEAR(std::abs(spec[f]), expect, 1e-12) << f;
  }
}

TEST(Dft, RejectsNonFinite) {
  std::vector<double> x{1.0, std::nan("")};
  EXPECT_THROW(dft(x), NumericError);
}

TEST(Crop, InvariantOverMillionDraws) {
  for (std::size_t t : {2u, 3u, 65u, 512u}) {
    Rng rng(4 + t);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < 1000000; ++i) {
      const CropPair c = random_crop_pair(t, rng);
      if (!(c.a1 <= c.a2 && c.a2 < c.b1 && c.b1 <= c.b2 && c.b2 <= t)) ++bad;
      if (c.view1_length() < 1 || c.view2_length() < 1 || c.overlap_length() < 1) ++bad;
    }
    EXPECT_EQ(bad, 0u) << "T=" << t;
  }
}

TEST(Crop, ShortSeriesRejected) { EXPECT_THROW(random_crop_pair(1, 0), ConfigError); }

TEST(Crop, SeededDrawsReproducible) {
  const CropPair a = random_crop_pair(50, 17), b = random_crop_pair(50, 17);
  EXPECT_EQ(std::tie(a.a1, a.a2, a.b1, a.b2), std::tie(b.a1, b.a2, b.b1, b.b2));
}

TEST(Crop, UniformOverValidPairs) {
  // T = 4: count all (a1, a2, b1, b2) with a1 <= a2 < b1 <= b2 <= 4.
  const std::size_t t = 4;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>, std::size_t> counts;
  for (std::size_t a1 = 0; a1 <= t; ++a1)
    for (std::size_t a2 = a1; a2 <= t; ++a2)
      for (std::size_t b1 = a2 + 1; b1 <= t; ++b1)
        for (std::size_t b2 = b1; b2 <= t; ++b2) counts[{a1, a2, b1, b2}] = 0;
  const std::size_t draws = 350000;
  Rng rng(5);
  for (std::size_t i = 0; i < draws; ++i) {
    const CropPair c = random_crop_pair(t, rng);
    auto it = counts.find({c.a1, c.a2, c.b1, c.b2});
    ASSERT_NE(it, counts.end());
    ++it->second;
  }
  const double expected = static_cast<double>(draws) / counts.size();
  double chi2 = 0.0;
  for (const auto& [k, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
  // 34 degrees of freedom; 99.9th percentile is about 65.
  EXPECT_EQ(counts.size(), 35u);
  EXPECT_LT(chi2, 65.0);
}

TEST(Crop, OffsetsAlignOverlap) {
  const CropPair c{2, 5, 9, 12};
  EXPECT_EQ(c.view1_length(), 7u);
  EXPECT_EQ(c.view2_length(), 7u);
  EXPECT_EQ(c.overlap_length(), 4u);
  EXPECT_EQ(c.overlap_offset_view1(), 3u);
  EXPECT_EQ(c.overlap_offset_view2(), 0u);
}

TEST(FrequencyMix, RateZeroIsIdentity) {
  Rng rng(6);
  for (std::size_t t : {1u, 2u, 9u, 64u, 100u}) {
    const auto x = random_series(t, 2, rng), d = random_series(t, 2, rng);
    const auto out = frequency_mix(x, d, 0.0, rng);
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      EXPECT_NEAR(out.series.values[i], x.values[i], 1e-9);
    }
  }
}

TEST(FrequencyMix, RateOneReproducesDonor) {
  Rng rng(7);
  for (std::size_t t : {1u, 2u, 9u, 64u, 100u}) {
    const auto x = random_series(t, 3, rng), d = random_series(t, 3, rng);
    const auto out = frequency_mix(x, d, 1.0, rng);
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      EXPECT_NEAR(out.series.values[i], d.values[i], 1e-9);
    }
  }
}

TEST(FrequencyMix, ReplacesExactlyTheChosenBins) {
  Rng rng(8);
  for (std::size_t t : {8u, 15u, 64u}) {
    const auto x = random_series(t, 1, rng), d = random_series(t, 1, rng);
    const auto out = frequency_mix(x, d, 0.3, rng);
    ASSERT_EQ(out.replaced_bins.size(), 1u);
    const std::size_t half = t / 2;
    EXPECT_EQ(out.replaced_bins[0].size(),
              static_cast<std::size_t>(std::llround(0.3 * (half + 1))));
    const auto sx = oracle::naive_dft(channel(x, 0));
    const auto sd = oracle::naive_dft(channel(d, 0));
    const auto so = oracle::naive_dft(channel(out.series, 0));
    std::vector<bool> chosen(t, false);
    for (std::size_t b : out.replaced_bins[0]) {
      ASSERT_LE(b, half);
      chosen[b] = true;
      chosen[(t - b) % t] = true;
    }
    for (std::size_t f = 0; f < t; ++f) {
      const auto& want = chosen[f] ? sd[f] : sx[f];
      EXPECT_LT(std::abs(so[f] - want), 1e-9) << "T=" << t << " bin " << f;
    }
  }
}

TEST(FrequencyMix, SwappingBinOneRemovesTone) {
  // x is a tone at bin 1, donor a tone at bin 2; find a seed whose draw
  // replaces bin 1 (but not 2) and check the tone vanishes.
  const std::size_t t = 16;
  std::vector<double> a(t), b(t);
  for (std::size_t i = 0; i < t; ++i) {
    a[i] = std::cos(2.0 * M_PI * i / t);
    b[i] = std::cos(2.0 * M_PI * 2.0 * i / t);
  }
  const auto x = TimeSeriesInstance::from_values(t, 1, a);
  const auto d = TimeSeriesInstance::from_values(t, 1, b);
  bool found = false;
  for (std::uint64_t seed = 0; seed < 200 && !found; ++seed) {
    const auto out = frequency_mix(x, d, 0.5, seed);
    const auto& bins = out.replaced_bins[0];
    const bool has1 = std::find(bins.begin(), bins.end(), 1u) != bins.end();
    const bool has2 = std::find(bins.begin(), bins.end(), 2u) != bins.end();
    if (!has1 || has2) continue;
    found = true;
    for (double v : out.series.values) EXPECT_NEAR(v, 0.0, 1e-12);
  }
  EXPECT_TRUE(found);
}

TEST(FrequencyMix, SelfDonationIsIdentity) {
  Rng rng(14);
  const auto x = random_series(33, 2, rng);
  const auto out = frequency_mix(x, x, 0.7, rng);
  for (std::size_t i = 0; i < x.values.size(); ++i) EXPECT_NEAR(out.series.values[i], x.values[i], 1e-9);
}

TEST(FrequencyMix, ParsevalOfSplicedSpectrum) {
  Rng rng(15);
  for (std::size_t t : {10u, 17u, 64u}) {
    const auto x = random_series(t, 1, rng), d = random_series(t, 1, rng);
    const auto out = frequency_mix(x, d, 0.4, rng);
    const auto sx = oracle::naive_dft(channel(x, 0));
    const auto sd = oracle::naive_dft(channel(d, 0));
    std::vector<bool> chosen(t, false);
    for (std::size_t b : out.replaced_bins[0]) chosen[b] = chosen[(t - b) % t] = true;
    double spliced = 0.0, energy = 0.0;
    for (std::size_t f = 0; f < t; ++f) spliced += std::norm(chosen[f] ? sd[f] : sx[f]);
    for (double v : out.series.values) energy += v * v;
    EXPECT_NEAR(energy, spliced / t, 1e-9 * (1.0 + energy));
  }
}

TEST(FrequencyMix, OutputIsReal) {
  Rng rng(9);
  for (std::size_t t = 1; t <= 70; ++t) {
    const auto x = random_series(t, 1, rng), d = random_series(t, 1, rng);
    const auto out = frequency_mix(x, d, rng.uniform(), rng);
    EXPECT_LT(out.max_imag_residue, 1e-9);
    for (double v : out.series.values) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(FrequencyMix, MissingCellsStayMissing) {
  Rng rng(10);
  auto x = random_series(12, 1, rng);
  x.values[4] = std::nan("");
  x.observed[4] = false;
  const auto out = frequency_mix(x, random_series(12, 1, rng), 0.5, rng);
  EXPECT_FALSE(out.series.observed[4]);
  EXPECT_TRUE(out.series.observed[5]);
}

TEST(FrequencyMix, ShapeMismatchRejected) {
  Rng rng(11);
  EXPECT_THROW(frequency_mix(random_series(8, 1, rng), random_series(9, 1, rng), 0.5, rng),
               ShapeError);
}

TEST(FtaugPair, ViewsFollowCropWindows) {
  Rng rng(12);
  const auto x = random_series(20, 2, rng), d = random_series(20, 2, rng);
  const CropPair c{1, 4, 10, 17};
  const auto pair = ftaug_pair(x, d, 0.0, c, rng);
  EXPECT_EQ(pair.view1.length, 9u);
  EXPECT_EQ(pair.view2.length, 13u);
  for (std::size_t t = 0; t < 9; ++t) EXPECT_EQ(pair.view1.at(t, 1), x.at(t + 1, 1));
  // Rate 0 leaves the second view equal to the original up to round-off.
  for (std::size_t t = 0; t < 13; ++t) EXPECT_NEAR(pair.view2.at(t, 0), x.at(t + 4, 0), 1e-12);
}

TEST(FtaugPair, DeterministicPerSeed) {
  Rng rng(13);
  const auto x = random_series(30, 1, rng), d = random_series(30, 1, rng);
  const auto a = ftaug_pair(x, d, 0.4, 99), b = ftaug_pair(x, d, 0.4, 99);
  EXPECT_EQ(a.view2.values, b.view2.values);
  EXPECT_EQ(a.crop.a1, b.crop.a1);
  EXPECT_EQ(a.crop.b2, b.crop.b2);
}
