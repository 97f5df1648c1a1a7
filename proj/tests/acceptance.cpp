// Acceptance checks, one per process: `tsrl_acceptance <n>` prints one
// PASS/FAIL/SKIP line and exits 0, 1 or 77 respectively.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"
#include "oracles.hpp"
#include "tsrl/dataset.hpp"
#include "tsrl/dualcon.hpp"
#include "tsrl/eval.hpp"
#include "tsrl/ftaug.hpp"
#include "tsrl/ops.hpp"
#include "tsrl/recon.hpp"
#include "tsrl/selftest.hpp"
#include "tsrl/train.hpp"

using namespace tsrl;
namespace fs = std::filesystem;

namespace {

constexpr int kSkip = 77;

struct Outcome {
  enum Kind { kPass, kFail, kSkip } kind;
  std::string detail;
};

Outcome verdict(bool ok, const std::string& detail) {
  return {ok ? Outcome::kPass : Outcome::kFail, detail};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double probe_accuracy(const EncoderState& enc, const Dataset& train, const Dataset& test) {
  const auto classes = merged_classes(train, test);
  return linear_probe_classify(encode_dataset(enc, train), class_indices(train, classes),
                               encode_dataset(enc, test), class_indices(test, classes))
      .accuracy;
}

// The synthetic training run shared by criteria 5, 6 and 9.
struct SyntheticRun {
  Dataset train_set = synth_two_class(50, 64, 1, 0);
  Dataset test_set = synth_two_class(50, 64, 1, 1000);
  TrainConfig cfg;
  TrainResult result;
  double seconds = 0.0;

  SyntheticRun() {
    cfg.encoder.input_dims = 1;
    const auto t0 = std::chrono::steady_clock::now();
    result = train(train_set, cfg);
    seconds = seconds_since(t0);
  }
};

Outcome loss_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    const std::size_t b = 2 + rng.below(2), l = 1 + rng.below(4), k = 1 + rng.below(3);
    const AlignedReprPair pair{oracle::random_tensor({b, l, k}, rng),
                               oracle::random_tensor({b, l, k}, rng)};
    DualConOptions opt;
    opt.temperature = 0.5 + rng.uniform();
    const std::size_t density = c % 2 ? 1 + rng.below(2) : 0;
    if (l >= 2) {
      const auto tu = synth_temporal_universum(pair, rng, density);
      worst = std::max(worst, std::abs(temporal_loss(pair, tu, opt).item() -
                                       oracle::temporal_loss(pair.r, pair.r_prime, tu,
                                                             opt.temperature, true)));
    }
    const auto iu = synth_instance_universum(pair, rng, density);
    worst = std::max(worst, std::abs(instance_loss(pair, iu, opt).item() -
                                     oracle::instance_loss(pair.r, pair.r_prime, iu,
                                                           opt.temperature, false)));
  }
  const double secs = seconds_since(t0);
  return verdict(worst <= 1e-10 && secs < 5.0,
                 "200 cases, max |vectorized - enumerated| " + fmt("%.3g", worst) + ", " +
                     fmt("%.2f", secs) + " s");
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const SuiteResult r = gradient_suite(202, 50);
  const double secs = seconds_since(t0);
  return verdict(r.passed && r.cases >= 50 && secs < 60.0,
                 std::to_string(r.cases) + " checks over 50 configurations, worst rel error " +
                     fmt("%.3g", r.worst) + ", " + fmt("%.1f", secs) + " s" +
                     (r.detail.empty() ? "" : "; " + r.detail));
}

TimeSeriesInstance random_series(std::size_t t, std::size_t f, Rng& rng) {
  std::vector<double> v(t * f);
  for (double& x : v) x = rng.normal();
  return TimeSeriesInstance::from_values(t, f, v);
}

Outcome ftaug() {
  Rng rng(303);
  double roundtrip = 0.0;
  for (std::size_t t = 1; t <= 128; ++t) {
    std::vector<double> x(t);
    for (double& v : x) v = rng.normal();
    const auto back = idft(dft(x));
    for (std::size_t i = 0; i < t; ++i) {
      roundtrip = std::max(roundtrip, std::abs(back[i] - std::complex<double>(x[i], 0.0)));
    }
  }
  double identity = 0.0, donor = 0.0, imag = 0.0;
  for (std::size_t t = 1; t <= 128; t += 7) {
    const auto x = random_series(t, 2, rng), d = random_series(t, 2, rng);
    const auto m0 = frequency_mix(x, d, 0.0, rng), m1 = frequency_mix(x, d, 1.0, rng);
    const auto mh = frequency_mix(x, d, 0.5, rng);
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      identity = std::max(identity, std::abs(m0.series.values[i] - x.values[i]));
      donor = std::max(donor, std::abs(m1.series.values[i] - d.values[i]));
    }
    imag = std::max({imag, m0.max_imag_residue, m1.max_imag_residue, mh.max_imag_residue});
  }
  std::size_t bad = 0;
  for (std::size_t t : {2u, 3u, 17u, 64u, 512u}) {
    for (int i = 0; i < 200000; ++i) {
      const CropPair c = random_crop_pair(t, rng);
      if (!(c.a1 <= c.a2 && c.a2 < c.b1 && c.b1 <= c.b2 && c.b2 <= t)) ++bad;
    }
  }
  const bool ok = roundtrip <= 1e-9 && identity <= 1e-9 && donor <= 1e-9 && imag <= 1e-9 && bad == 0;
  return verdict(ok, "round-trip " + fmt("%.3g", roundtrip) + ", rate-0 " + fmt("%.3g", identity) +
                         ", rate-1 " + fmt("%.3g", donor) + ", imag residue " + fmt("%.3g", imag) +
                         ", crop violations " + std::to_string(bad) + "/1000000");
}

Outcome recon_locality() {
  Rng rng(404);
  std::size_t nonzero = 0, checked = 0;
  for (int c = 0; c < 50; ++c) {
    const std::size_t b = 1 + rng.below(4), t = 2 + rng.below(10), f = 1 + rng.below(3);
    const Tensor target = oracle::random_tensor({b, t, f}, rng);
    const Tensor pred = oracle::random_tensor({b, t, f}, rng, true);
    const Tensor pred_aug = oracle::random_tensor({b, t, f}, rng, true);
    const MaskSpec m = random_mask(b, t, 0.5, rng);
    const auto cells = recon_cells(m, f, ReconOn::kMasked, std::vector<bool>(b * t * f, true));
    const ReconLoss loss = recon_loss(target, target, pred, pred_aug, cells, cells);
    if (loss.no_masked_positions) continue;
    backward(loss.value);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i]) continue;
      ++checked;
      nonzero += pred.grad()[i] != 0.0 || pred_aug.grad()[i] != 0.0;
    }
  }
  const double e = 1.375;
  const Tensor target({1, 2, 1}, {0.5, -1.0});
  const Tensor pred({1, 2, 1}, {0.5, -1.0 + e}, true);
  const std::vector<bool> one{false, true}, none{false, false};
  const double got = recon_loss(target, target, pred, pred, one, none).value.item();
  const double err = std::abs(got - e * e / 2.0);
  return verdict(nonzero == 0 && checked > 0 && err == 0.0,
                 std::to_string(nonzero) + " nonzero gradients at " + std::to_string(checked) +
                     " observed cells; one-cell loss " + fmt("%.17g", got) + " vs e^2/2 " +
                     fmt("%.17g", e * e / 2.0));
}

Outcome training_sanity() {
  const SyntheticRun run;
  const EncoderState random =
      EncoderState::init(run.cfg.encoder, Rng::derive(run.cfg.seed, 1).next_u64());
  const double trained = probe_accuracy(run.result.encoder, run.train_set, run.test_set);
  const double baseline = probe_accuracy(random, run.train_set, run.test_set);
  std::vector<double> totals;
  for (const auto& r : run.result.report.records) totals.push_back(r.total);
  const std::size_t tenth = std::max<std::size_t>(1, totals.size() / 10);
  const double first = median({totals.begin(), totals.begin() + static_cast<std::ptrdiff_t>(tenth)});
  const double last = median({totals.end() - static_cast<std::ptrdiff_t>(tenth), totals.end()});
  const bool ok = trained >= 0.95 && baseline <= 0.80 && last < first && run.seconds < 300.0;
  std::string detail = "trained " + fmt("%.3f", trained) + " (>= 0.95 " +
                       (trained >= 0.95 ? "ok" : "MISS") + "), random baseline " +
                       fmt("%.3f", baseline) + " (<= 0.80 " + (baseline <= 0.80 ? "ok" : "MISS") +
                       "), loss median " + fmt("%.3f", first) + " -> " + fmt("%.3f", last) +
                       ", " + fmt("%.1f", run.seconds) + " s";
  return verdict(ok, detail);
}

Outcome universum_hardness() {
  const SyntheticRun run;
  HardnessStats stats;
  Rng rng(606);
  NoGradGuard guard;
  const auto& inst = run.test_set.instances;
  for (std::size_t s = 0; s + 2 <= inst.size(); s += run.cfg.batch_size) {
    const std::size_t n = std::min(run.cfg.batch_size, inst.size() - s);
    const std::span<const TimeSeriesInstance> batch(inst.data() + s, n);
    accumulate_hardness(augmented_overlap_reprs(run.result.encoder, batch, run.cfg.mix_rate, rng),
                        rng, stats);
  }
  return verdict(stats.universum_mean() > stats.negative_mean(),
                 "level-0 mean dot: universum " + fmt("%.4g", stats.universum_mean()) +
                     ", ordinary negative " + fmt("%.4g", stats.negative_mean()) + " over " +
                     std::to_string(stats.universum_count) + " / " +
                     std::to_string(stats.negative_count) + " pairs");
}

Outcome universum_ablation() {
  const char* dir = std::getenv("TSRL_ERING_DIR");
  if (dir == nullptr) return {Outcome::kSkip, "TSRL_ERING_DIR not set; ERing files unavailable"};
  const fs::path train_path = fs::path(dir) / "ERing_TRAIN.tsv";
  const fs::path test_path = fs::path(dir) / "ERing_TEST.tsv";
  if (!fs::exists(train_path) || !fs::exists(test_path)) {
    return {Outcome::kSkip, "ERing_TRAIN.tsv / ERing_TEST.tsv not found in " + std::string(dir)};
  }
  TsvOptions opts;
  opts.format = TsvFormat::kUeaFlat;
  opts.features = 4;
  opts.split = Split::kTrain;
  const Dataset train_set = load_tsv(train_path, opts);
  opts.split = Split::kTest;
  const Dataset test_set = load_tsv(test_path, opts);
  double with = 0.0, without = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.encoder.input_dims = train_set.features();
    cfg.dualcon.universum_density = 1;
    with += probe_accuracy(train(train_set, cfg).encoder, train_set, test_set) / 3.0;
    cfg.dualcon.universum_density = 0;
    without += probe_accuracy(train(train_set, cfg).encoder, train_set, test_set) / 3.0;
  }
  return verdict(with >= without - 0.01 && with >= 0.85,
                 "mean accuracy over 3 seeds: with universums " + fmt("%.3f", with) +
                     ", without " + fmt("%.3f", without));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Report lines with the wall-clock field removed.
std::vector<std::string> report_without_timing(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    auto j = nlohmann::ordered_json::parse(line);
    j.erase("wall_ms");
    out.push_back(j.dump());
  }
  return out;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "tsrl_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path data = dir / "train.tsv";
  write_tsv(synth_two_class(50, 64, 1, 0), data);
  auto run = [&](const std::string& name) {
    const std::string cmd = std::string(TSRL_CLI_PATH) + " --seed 7 train --data " +
                            data.string() + " --iters 20 --out " + (dir / name).string() +
                            " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  if (run("a") != 0 || run("b") != 0) return {Outcome::kFail, "train command failed"};
  const bool ckpt = slurp(dir / "a/checkpoint.bin") == slurp(dir / "b/checkpoint.bin");
  const auto ra = report_without_timing(dir / "a/report.jsonl");
  const auto rb = report_without_timing(dir / "b/report.jsonl");
  const bool report = ra == rb && ra.size() == 20;
  const bool raw = slurp(dir / "a/report.jsonl") == slurp(dir / "b/report.jsonl");
  return verdict(ckpt && report,
                 std::string("checkpoints ") + (ckpt ? "byte-identical" : "DIFFER") +
                     ", report records " + (report ? "identical" : "DIFFER") +
                     " excluding wall_ms (raw bytes " + (raw ? "identical" : "differ in wall_ms") +
                     ")");
}

Outcome forecast_head() {
  Rng rng(909);
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    const Eigen::Index n = 10 + static_cast<Eigen::Index>(rng.below(30));
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(8));
    const Eigen::Index h = 1 + static_cast<Eigen::Index>(rng.below(3));
    Eigen::MatrixXd x(n, d), y(n, h);
    oracle::Matrix xo(n, std::vector<double>(d)), yo(n, std::vector<double>(h));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) xo[i][j] = x(i, j) = rng.normal();
      for (Eigen::Index j = 0; j < h; ++j) yo[i][j] = y(i, j) = rng.normal();
    }
    const double lambda = std::pow(10.0, -1.0 + 2.0 * rng.uniform());
    const RidgeModel m = ridge_fit(x, y, lambda);
    const auto sol = oracle::ridge(xo, yo, lambda);
    for (Eigen::Index j = 0; j < h; ++j) {
      for (Eigen::Index p = 0; p < d; ++p) worst = std::max(worst, std::abs(m.weight(p, j) - sol[p][j]));
      worst = std::max(worst, std::abs(m.bias(j) - sol[d][j]));
    }
  }
  const SyntheticRun run;
  std::vector<double> v(2000);
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = std::sin(2.0 * M_PI * t / 32.0);
  ForecastOptions fo;
  fo.horizons = {24};
  fo.context = 64;
  const auto metrics = forecast_eval(run.result.encoder, TimeSeriesInstance::from_values(v.size(), 1, v), fo);
  const double mse = metrics[0].mse;
  return verdict(worst <= 1e-8 && mse <= 0.05,
                 "ridge vs normal equations max diff " + fmt("%.3g", worst) +
                     "; sinusoid (period 32, context 64) MSE at horizon 24 " + fmt("%.3g", mse));
}

const std::map<int, std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {1, {"loss oracle equivalence", loss_oracle}},
    {2, {"gradient suite", gradients}},
    {3, {"augmentation correctness", ftaug}},
    {4, {"reconstruction locality", recon_locality}},
    {5, {"training sanity (synthetic)", training_sanity}},
    {6, {"universum hardness", universum_hardness}},
    {7, {"universum ablation (ERing)", universum_ablation}},
    {8, {"determinism", determinism}},
    {9, {"forecast head", forecast_head}},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty()) {
    for (const auto& [n, _] : kCriteria) which.push_back(n);
  }
  int code = 0;
  for (int n : which) {
    const auto it = kCriteria.find(n);
    if (it == kCriteria.end()) {
      std::cerr << "unknown criterion " << n << "\n";
      return 2;
    }
    Outcome o{Outcome::kFail, ""};
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {Outcome::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.kind == Outcome::kPass ? "PASS" : o.kind == Outcome::kFail ? "FAIL" : "SKIP";
    std::cout << "criterion " << n << " [" << it->second.first << "]: " << tag << " - " << o.detail
              << std::endl;
    if (o.kind == Outcome::kFail) code = 1;
    if (o.kind == Outcome::kSkip && code == 0 && which.size() == 1) code = kSkip;
  }
  return code;
}
