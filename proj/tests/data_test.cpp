#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "tsrl/dataset.hpp"
#include "tsrl/error.hpp"

using namespace tsrl;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "tsrl_data_test";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p, std::ios::binary) << body;
  return p;
}

}  // namespace

TEST(LoadTsv, SingleRowUcr) {
  const Dataset ds = load_tsv(write_file("one.tsv", "1\t0.5\t0.7\n"), {});
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.length(), 2u);
  EXPECT_EQ(ds.features(), 1u);
  EXPECT_EQ(ds.instances[0].label, 1);
  EXPECT_DOUBLE_EQ(ds.instances[0].at(1, 0), 0.7);
  EXPECT_EQ(ds.classes, std::vector<int>{1});
}

TEST(LoadTsv, NanCellIsMissing) {
  const Dataset ds = load_tsv(write_file("nan.tsv", "0\t1.0\tNaN\t2.0\n"), {});
  EXPECT_TRUE(ds.instances[0].is_observed(0, 0));
  EXPECT_FALSE(ds.instances[0].is_observed(1, 0));
  EXPECT_TRUE(std::isnan(ds.instances[0].at(1, 0)));
}

TEST(LoadTsv, RaggedRowNamesRow) {
  try {
    load_tsv(write_file("ragged.tsv", "0\t1\t2\t3\n1\t1\t2\n"), {});
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(LoadTsv, EmptyFileRejected) {
  EXPECT_THROW(load_tsv(write_file("empty.tsv", ""), {}), FormatError);
}

TEST(LoadTsv, MissingFileRejected) {
  EXPECT_THROW(load_tsv("/nonexistent/file.tsv", {}), Error);
}

TEST(LoadTsv, UeaFlatIsFeatureMajor) {
  // T=2, F=2: feature 0 block then feature 1 block.
  TsvOptions opt;
  opt.format = TsvFormat::kUeaFlat;
  opt.features = 2;
  const Dataset ds = load_tsv(write_file("uea.tsv", "3\t1\t2\t10\t20\n"), opt);
  ASSERT_EQ(ds.length(), 2u);
  EXPECT_EQ(ds.instances[0].at(0, 0), 1.0);
  EXPECT_EQ(ds.instances[0].at(1, 0), 2.0);
  EXPECT_EQ(ds.instances[0].at(0, 1), 10.0);
  EXPECT_EQ(ds.instances[0].at(1, 1), 20.0);
}

TEST(LoadTsv, CellCountMustDivideByFeatures) {
  TsvOptions opt;
  opt.format = TsvFormat::kUeaFlat;
  opt.features = 2;
  EXPECT_THROW(load_tsv(write_file("odd.tsv", "3\t1\t2\t10\n"), opt), FormatError);
}

TEST(LoadTsv, ClassesSortedAndIndexed) {
  const Dataset ds = load_tsv(write_file("cls.tsv", "5\t1\n-1\t2\n5\t3\n2\t4\n"), {});
  EXPECT_EQ(ds.classes, (std::vector<int>{-1, 2, 5}));
  EXPECT_EQ(ds.class_index(5), 2u);
  EXPECT_THROW(ds.class_index(7), Error);
  for (const auto& inst : ds.instances) EXPECT_LT(ds.class_index(*inst.label), 3u);
}

TEST(WriteTsv, RoundTripsExactly) {
  Dataset ds = synth_two_class(3, 9, 2, 11);
  ds.instances[1].values[3] = std::nan("");
  ds.instances[1].observed[3] = false;
  const fs::path p = write_file("rt.tsv", "");
  write_tsv(ds, p);
  TsvOptions opt;
  opt.format = TsvFormat::kUeaFlat;
  opt.features = 2;
  const Dataset back = load_tsv(p, opt);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.instances[i].label, ds.instances[i].label);
    EXPECT_EQ(back.instances[i].observed, ds.instances[i].observed);
    for (std::size_t c = 0; c < ds.instances[i].values.size(); ++c) {
      if (ds.instances[i].observed[c]) {
        EXPECT_EQ(back.instances[i].values[c], ds.instances[i].values[c]);
      }
    }
  }
}

TEST(SeriesTsv, OneTimestampPerRow) {
  const auto s = load_series_tsv(write_file("series.tsv", "1\t2\n3\t4\n5\t6\n"));
  EXPECT_EQ(s.length, 3u);
  EXPECT_EQ(s.features, 2u);
  EXPECT_EQ(s.at(2, 1), 6.0);
}

TEST(Synth, DeterministicPerSeed) {
  const Dataset a = synth_two_class(4, 16, 1, 9), b = synth_two_class(4, 16, 1, 9);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.instances[i].values, b.instances[i].values);
  const Dataset c = synth_two_class(4, 16, 1, 10);
  EXPECT_NE(a.instances[0].values, c.instances[0].values);
}

TEST(Synth, NoiselessClassMeans) {
  const std::size_t t = 64;
  const Dataset ds = synth_two_class(2, t, 1, 0, 0.0);
  for (const auto& inst : ds.instances) {
    const double cycles = *inst.label == 0 ? 4.0 : 8.0;
    for (std::size_t s = 0; s < t; ++s) {
      EXPECT_NEAR(inst.at(s, 0), std::sin(2.0 * M_PI * cycles * s / t), 1e-15);
    }
  }
}

TEST(Synth, BalancedLabels) {
  const Dataset ds = synth_two_class(50, 64, 1, 0);
  EXPECT_EQ(ds.size(), 100u);
  std::size_t ones = 0;
  for (const auto& inst : ds.instances) ones += *inst.label == 1 ? 1 : 0;
  EXPECT_EQ(ones, 50u);
  EXPECT_EQ(ds.num_classes(), 2u);
}

TEST(Synth, NoiseLevel) {
  const std::size_t t = 64;
  const Dataset ds = synth_two_class(200, t, 1, 5);
  double ss = 0.0;
  std::size_t n = 0;
  for (const auto& inst : ds.instances) {
    const double cycles = *inst.label == 0 ? 4.0 : 8.0;
    for (std::size_t s = 0; s < t; ++s) {
      const double e = inst.at(s, 0) - std::sin(2.0 * M_PI * cycles * s / t);
      ss += e * e;
      ++n;
    }
  }
  EXPECT_NEAR(std::sqrt(ss / n), 0.1, 0.003);
}

TEST(Normalize, ZeroMeanUnitVariance) {
  const Dataset ds = normalize(synth_two_class(3, 20, 2, 1));
  for (const auto& inst : ds.instances) {
    for (std::size_t f = 0; f < 2; ++f) {
      double m = 0.0, v = 0.0;
      for (std::size_t t = 0; t < 20; ++t) m += inst.at(t, f);
      m /= 20;
      for (std::size_t t = 0; t < 20; ++t) v += (inst.at(t, f) - m) * (inst.at(t, f) - m);
      EXPECT_NEAR(m, 0.0, 1e-12);
      EXPECT_NEAR(v / 20, 1.0, 1e-12);
    }
  }
}

TEST(Normalize, ConstantChannelBecomesZero) {
  Dataset ds;
  ds.instances.push_back(TimeSeriesInstance::from_values(3, 1, {4.0, 4.0, 4.0}, 0));
  ds.finalize();
  const Dataset out = normalize(ds);
  for (double v : out.instances[0].values) EXPECT_EQ(v, 0.0);
}

TEST(Normalize, FullyMissingChannelRejected) {
  Dataset ds;
  ds.instances.push_back(
      TimeSeriesInstance::from_values(2, 2, {1.0, std::nan(""), 2.0, std::nan("")}, 0));
  ds.finalize();
  EXPECT_THROW(normalize(ds), Error);
}

TEST(Normalize, MissingStaysMissing) {
  Dataset ds;
  ds.instances.push_back(TimeSeriesInstance::from_values(3, 1, {1.0, std::nan(""), 3.0}, 0));
  ds.finalize();
  const Dataset out = normalize(ds);
  EXPECT_FALSE(out.instances[0].is_observed(1, 0));
  EXPECT_NEAR(out.instances[0].at(0, 0), -1.0, 1e-12);
}

TEST(Batches, PartitionAndDropSingleton) {
  const auto bs = batches(11, 5, 3);
  ASSERT_EQ(bs.size(), 2u);  // 5, 5, and a dropped singleton
  std::set<std::size_t> seen;
  for (const auto& b : bs) {
    EXPECT_EQ(b.size(), 5u);
    for (std::size_t i : b) EXPECT_TRUE(seen.insert(i).second);
  }
  EXPECT_EQ(batches(12, 5, 3).back().size(), 2u);
}

TEST(Batches, RejectsTinyBatchSize) { EXPECT_THROW(batches(10, 1, 0), ConfigError); }
