// Command-line front end: train, encode, eval-cls, eval-forecast, selftest.
// Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tsrl/checkpoint.hpp"
#include "tsrl/dataset.hpp"
#include "tsrl/error.hpp"
#include "tsrl/eval.hpp"
#include "tsrl/selftest.hpp"
#include "tsrl/train.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct DataFlags {
  std::string path;
  std::size_t dims = 1;
  std::optional<std::size_t> length;
  bool normalize = false;

  tsrl::Dataset load(const std::string& file, tsrl::Split split) const {
    tsrl::TsvOptions opts;
    opts.format = dims > 1 ? tsrl::TsvFormat::kUeaFlat : tsrl::TsvFormat::kUcr;
    opts.features = dims;
    opts.length = length;
    opts.split = split;
    tsrl::Dataset ds = tsrl::load_tsv(file, opts);
    return normalize ? tsrl::normalize(ds) : ds;
  }
};

void add_data_flags(CLI::App* cmd, DataFlags& d, bool required = true) {
  auto* data = cmd->add_option("--data", d.path, "Dataset TSV (label, then T*F values per row)")
                   ->check(CLI::ExistingFile);
  if (required) data->required();
  cmd->add_option("--dims", d.dims, "Features per timestamp F")->check(CLI::PositiveNumber);
  cmd->add_option("--length", d.length, "Series length T (inferred when omitted)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--normalize", d.normalize, "z-score each instance and feature before use");
}

void emit(const ordered_json& j) { std::cout << j.dump(2) << '\n'; }

int run_train(const DataFlags& data, tsrl::TrainConfig cfg, const std::string& recon_on,
              const std::string& out_dir) {
  cfg.recon_on = recon_on == "observed" ? tsrl::ReconOn::kObserved : tsrl::ReconOn::kMasked;
  const tsrl::Dataset ds = data.load(data.path, tsrl::Split::kTrain);
  cfg.encoder.input_dims = ds.features();
  cfg.validate();

  fs::create_directories(out_dir);
  const fs::path ckpt = fs::path(out_dir) / "checkpoint.bin";
  const fs::path report_path = fs::path(out_dir) / "report.jsonl";
  const tsrl::TrainResult result = tsrl::train(ds, cfg, {ckpt});
  {
    std::ofstream report(report_path, std::ios::binary);
    if (!report) throw tsrl::Error("cannot write " + report_path.string());
    result.report.write_jsonl(report);
  }
  const auto& recs = result.report.records;
  ordered_json j;
  j["checkpoint"] = ckpt.string();
  j["report"] = report_path.string();
  j["iterations"] = recs.size();
  j["final_total"] = recs.empty() ? 0.0 : recs.back().total;
  emit(j);
  std::cerr << "trained " << recs.size() << " iterations on " << ds.size() << " series in "
            << result.report.wall_ms / 1000.0 << " s; final loss "
            << (recs.empty() ? 0.0 : recs.back().total) << "\n";
  return kExitOk;
}

int run_encode(const DataFlags& data, const std::string& checkpoint, const std::string& out) {
  const tsrl::Dataset ds = data.load(data.path, tsrl::Split::kTrain);
  const tsrl::Checkpoint ck = tsrl::load_checkpoint(checkpoint);
  const Eigen::MatrixXd vecs = tsrl::encode_dataset(ck.encoder, ds);
  std::ofstream os(out, std::ios::binary);
  if (!os) throw tsrl::Error("cannot write " + out);
  char buf[32];
  for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
    const auto& label = ds.instances[static_cast<std::size_t>(i)].label;
    if (label) os << *label;
    for (Eigen::Index c = 0; c < vecs.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", vecs(i, c));
      os << '\t' << buf;
    }
    os << '\n';
  }
  ordered_json j;
  j["output"] = out;
  j["instances"] = vecs.rows();
  j["repr_dims"] = vecs.cols();
  emit(j);
  std::cerr << "wrote " << vecs.rows() << " vectors of width " << vecs.cols() << " to " << out
            << "\n";
  return kExitOk;
}

int run_eval_cls(const DataFlags& data, const std::string& test_path,
                 const std::string& checkpoint, double reg) {
  const tsrl::Dataset train = data.load(data.path, tsrl::Split::kTrain);
  const tsrl::Dataset test = data.load(test_path, tsrl::Split::kTest);
  const tsrl::Checkpoint ck = tsrl::load_checkpoint(checkpoint);
  const auto classes = tsrl::merged_classes(train, test);
  tsrl::ProbeOptions opts;
  opts.reg = reg;
  const auto res = tsrl::linear_probe_classify(
      tsrl::encode_dataset(ck.encoder, train), tsrl::class_indices(train, classes),
      tsrl::encode_dataset(ck.encoder, test), tsrl::class_indices(test, classes), opts);
  ordered_json j;
  j["metric"] = "linear-probe accuracy";
  j["accuracy"] = res.accuracy;
  j["train_instances"] = train.size();
  j["test_instances"] = test.size();
  j["probe_steps"] = res.steps;
  j["probe_converged"] = res.converged;
  emit(j);
  std::cerr << "linear-probe accuracy " << res.accuracy << " on " << test.size()
            << " test series\n";
  return kExitOk;
}

int run_eval_forecast(const std::string& series_path, const std::string& checkpoint,
                      const std::vector<std::size_t>& horizons, std::size_t context) {
  const tsrl::TimeSeriesInstance series = tsrl::load_series_tsv(series_path);
  const tsrl::Checkpoint ck = tsrl::load_checkpoint(checkpoint);
  tsrl::ForecastOptions opts;
  opts.horizons = horizons;
  opts.context = context;
  const auto metrics = tsrl::forecast_eval(ck.encoder, series, opts);
  ordered_json j;
  j["context"] = context;
  j["horizons"] = ordered_json::array();
  for (const auto& m : metrics) {
    ordered_json h;
    h["horizon"] = m.horizon;
    h["mse"] = m.mse;
    h["mae"] = m.mae;
    h["ridge_lambda"] = m.lambda;
    h["train_samples"] = m.train_samples;
    h["test_samples"] = m.test_samples;
    j["horizons"].push_back(h);
    std::cerr << "horizon " << m.horizon << ": mse " << m.mse << ", mae " << m.mae << "\n";
  }
  emit(j);
  return kExitOk;
}

int run_selftest(std::uint64_t seed, std::size_t gradient_configs) {
  const auto results = tsrl::run_selftest(seed, &std::cerr, gradient_configs);
  ordered_json j = ordered_json::array();
  bool ok = true;
  for (const auto& r : results) {
    ordered_json s;
    s["suite"] = r.name;
    s["passed"] = r.passed;
    s["cases"] = r.cases;
    s["worst"] = r.worst;
    s["seconds"] = r.seconds;
    if (!r.detail.empty()) s["detail"] = r.detail;
    j.push_back(s);
    ok = ok && r.passed;
  }
  emit(j);
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised time-series representation learning"};
  app.set_config("--config", "", "INI/TOML config file; sections name subcommands, flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random draw")->capture_default_str();

  // train
  DataFlags train_data;
  tsrl::TrainConfig cfg;
  std::string recon_on = "masked";
  std::string out_dir;
  auto* train = app.add_subcommand("train", "Train an encoder; writes checkpoint and report");
  add_data_flags(train, train_data);
  train->add_option("--repr-dims", cfg.encoder.repr_dims, "Representation width K")
      ->check(CLI::PositiveNumber);
  train->add_option("--hidden-dims", cfg.encoder.hidden_dims)->check(CLI::PositiveNumber);
  train->add_option("--depth", cfg.encoder.depth, "Residual conv blocks")->check(CLI::PositiveNumber);
  train->add_option("--batch-size", cfg.batch_size)->check(CLI::Range(2, 1 << 20));
  train->add_option("--epochs", cfg.epochs, "Passes over the data; overrides --iters");
  train->add_option("--iters", cfg.iterations, "Optimiser steps when --epochs is 0");
  train->add_option("--lr", cfg.lr)->check(CLI::PositiveNumber);
  train->add_option("--alpha", cfg.alpha, "Weight of the reconstruction loss")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--mix-rate", cfg.mix_rate, "Fraction of frequency bins taken from the donor")
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--mask-rate", cfg.mask_rate, "Fraction of timestamps hidden")
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--recon-on", recon_on, "Cells scored by reconstruction")
      ->check(CLI::IsMember({"masked", "observed"}));
  train->add_option("--universum-density", cfg.dualcon.universum_density,
                    "Universum draws per anchor and axis; 0 disables them");
  train->add_option("--temperature", cfg.dualcon.temperature)->check(CLI::PositiveNumber);
  train->add_option("--out", out_dir, "Output directory")->required();

  // encode
  DataFlags enc_data;
  std::string enc_ckpt, enc_out;
  auto* encode = app.add_subcommand("encode", "Write one max-pooled vector per instance as TSV");
  add_data_flags(encode, enc_data);
  encode->add_option("--checkpoint", enc_ckpt)->required()->check(CLI::ExistingFile);
  encode->add_option("--out", enc_out, "Output TSV")->required();

  // eval-cls
  DataFlags cls_data;
  std::string cls_test, cls_ckpt;
  double reg = tsrl::ProbeOptions{}.reg;
  auto* cls = app.add_subcommand("eval-cls", "Linear-probe accuracy of frozen representations");
  add_data_flags(cls, cls_data);
  cls->add_option("--test-data", cls_test)->required()->check(CLI::ExistingFile);
  cls->add_option("--checkpoint", cls_ckpt)->required()->check(CLI::ExistingFile);
  cls->add_option("--reg", reg, "L2 penalty of the probe")->check(CLI::NonNegativeNumber);

  // eval-forecast
  std::string fc_data, fc_ckpt;
  std::vector<std::size_t> horizons{24};
  std::size_t context = 64;
  auto* fc = app.add_subcommand("eval-forecast", "Ridge forecasting from frozen representations");
  fc->add_option("--data", fc_data, "Series TSV, one timestamp per row")
      ->required()
      ->check(CLI::ExistingFile);
  fc->add_option("--checkpoint", fc_ckpt)->required()->check(CLI::ExistingFile);
  fc->add_option("--horizons", horizons)->delimiter(',');
  fc->add_option("--context", context)->check(CLI::PositiveNumber);

  // selftest
  std::size_t grad_configs = 50;
  auto* selftest = app.add_subcommand("selftest", "Run the oracle suites");
  selftest->add_option("--gradient-configs", grad_configs)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    cfg.seed = seed;
    if (*train) return run_train(train_data, cfg, recon_on, out_dir);
    if (*encode) return run_encode(enc_data, enc_ckpt, enc_out);
    if (*cls) return run_eval_cls(cls_data, cls_test, cls_ckpt, reg);
    if (*fc) return run_eval_forecast(fc_data, fc_ckpt, horizons, context);
    if (*selftest) return run_selftest(seed, grad_configs);
  } catch (const tsrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
