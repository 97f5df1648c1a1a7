#include "tsrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tsrl/error.hpp"
#include "tsrl/ftaug.hpp"
#include "tsrl/tensor.hpp"

namespace tsrl {

namespace {

// Max over time of each instance, written to rows starting at row0.
void encode_range(const EncoderState& state, std::span<const TimeSeriesInstance> instances,
                  Eigen::MatrixXd& out, std::size_t row0) {
  const Tensor r = encode(state, pack_batch(instances));
  const std::size_t b = r.dim(0), t = r.dim(1), k = r.dim(2);
  auto data = r.data();
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < t; ++s) m = std::max(m, data[(i * t + s) * k + c]);
      out(static_cast<Eigen::Index>(row0 + i), static_cast<Eigen::Index>(c)) = m;
    }
  }
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

std::size_t argmax_row(const Eigen::MatrixXd& m, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c) {
    if (m(row, c) > m(row, best)) best = c;
  }
  return static_cast<std::size_t>(best);
}

}  // namespace

Eigen::MatrixXd encode_dataset(const EncoderState& state, const Dataset& ds,
                               std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("encode_dataset: batch_size must be positive");
  NoGradGuard no_grad;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ds.size()),
                      static_cast<Eigen::Index>(state.config().repr_dims));
  const std::span<const TimeSeriesInstance> all(ds.instances);
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, ds.size() - start);
    encode_range(state, all.subspan(start, n), out, start);
  }
  return out;
}

std::vector<std::size_t> class_indices(const Dataset& ds, const std::vector<int>& classes) {
  std::vector<std::size_t> y;
  y.reserve(ds.size());
  for (const auto& inst : ds.instances) {
    if (!inst.label) throw FormatError("class_indices: instance '" + inst.id + "' has no label");
    const auto it = std::lower_bound(classes.begin(), classes.end(), *inst.label);
    if (it == classes.end() || *it != *inst.label) {
      throw FormatError("class_indices: unknown label " + std::to_string(*inst.label));
    }
    y.push_back(static_cast<std::size_t>(it - classes.begin()));
  }
  return y;
}

std::vector<int> merged_classes(const Dataset& a, const Dataset& b) {
  std::vector<int> out = a.classes;
  out.insert(out.end(), b.classes.begin(), b.classes.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ProbeResult linear_probe_classify(const Eigen::MatrixXd& train_x,
                                  const std::vector<std::size_t>& train_y,
                                  const Eigen::MatrixXd& test_x,
                                  const std::vector<std::size_t>& test_y,
                                  const ProbeOptions& options) {
  const Eigen::Index n = train_x.rows();
  const Eigen::Index d = train_x.cols();
  if (static_cast<std::size_t>(n) != train_y.size() ||
      static_cast<std::size_t>(test_x.rows()) != test_y.size()) {
    throw ShapeError("linear_probe: feature rows and labels differ in count");
  }
  if (test_x.cols() != d) throw ShapeError("linear_probe: train and test widths differ");
  if (n == 0) throw ConfigError("linear_probe: empty training set");
  if (!(options.reg >= 0.0)) throw ConfigError("linear_probe: reg must be >= 0");

  std::size_t classes = 0;
  for (std::size_t y : train_y) classes = std::max(classes, y + 1);
  for (std::size_t y : test_y) classes = std::max(classes, y + 1);
  std::vector<bool> present(classes, false);
  for (std::size_t y : train_y) present[y] = true;
  if (std::count(present.begin(), present.end(), true) < 2) {
    throw ConfigError("linear_probe: training labels contain fewer than 2 classes");
  }
  const auto c = static_cast<Eigen::Index>(classes);

  const Eigen::RowVectorXd mu = train_x.colwise().mean();
  Eigen::RowVectorXd sd =
      ((train_x.rowwise() - mu).array().square().colwise().sum() / static_cast<double>(n))
          .sqrt()
          .matrix();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(sd(j) > 1e-12)) sd(j) = 1.0;
  }
  const Eigen::MatrixXd xs = (train_x.rowwise() - mu).array().rowwise() / sd.array();
  const Eigen::MatrixXd xt = (test_x.rowwise() - mu).array().rowwise() / sd.array();

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, static_cast<Eigen::Index>(train_y[i])) = 1.0;

  // Softmax cross-entropy has Hessian bounded by 0.5 * Xa^T Xa / n for the
  // bias-augmented design Xa.
  Eigen::MatrixXd xa(n, d + 1);
  xa << xs, Eigen::VectorXd::Ones(n);
  const Eigen::MatrixXd gram = xa.transpose() * xa / static_cast<double>(n);
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .maxCoeff();
  const double step = 1.0 / (0.5 * lmax + options.reg);

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d + 1, c);  // last row is the bias
  ProbeResult result;
  for (std::size_t s = 0; s < options.max_steps; ++s) {
    const Eigen::MatrixXd p = softmax_rows(xa * w);
    Eigen::MatrixXd g = xa.transpose() * (p - onehot) / static_cast<double>(n);
    g.topRows(d) += options.reg * w.topRows(d);
    result.steps = s + 1;
    if (g.cwiseAbs().maxCoeff() < options.tolerance) {
      result.converged = true;
      break;
    }
    w -= step * g;
  }

  Eigen::MatrixXd ta(xt.rows(), d + 1);
  ta << xt, Eigen::VectorXd::Ones(xt.rows());
  const Eigen::MatrixXd scores = ta * w;
  std::size_t correct = 0;
  result.predictions.resize(test_y.size());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    result.predictions[i] = argmax_row(scores, i);
    correct += result.predictions[i] == test_y[i] ? 1 : 0;
  }
  result.accuracy =
      test_y.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test_y.size());
  return result;
}

Eigen::MatrixXd RidgeModel::predict(const Eigen::MatrixXd& x) const {
  return (x * weight).rowwise() + bias;
}

RidgeModel ridge_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda) {
  if (x.rows() != y.rows()) throw ShapeError("ridge_fit: X and Y row counts differ");
  if (x.rows() == 0) throw ConfigError("ridge_fit: no samples");
  if (!(lambda >= 0.0)) throw ConfigError("ridge_fit: lambda must be >= 0");
  // Centering removes the bias from the penalised problem.
  const Eigen::RowVectorXd xm = x.colwise().mean();
  const Eigen::RowVectorXd ym = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - xm;
  const Eigen::MatrixXd yc = y.rowwise() - ym;
  Eigen::MatrixXd a = xc.transpose() * xc;
  a.diagonal().array() += lambda;
  RidgeModel model;
  model.weight = a.ldlt().solve(xc.transpose() * yc);
  model.bias = ym - xm * model.weight;
  return model;
}

std::vector<HorizonMetrics> forecast_eval(const EncoderState& state,
                                          const TimeSeriesInstance& series,
                                          const ForecastOptions& options) {
  if (options.horizons.empty()) throw ConfigError("forecast_eval: no horizons given");
  if (options.context == 0) throw ConfigError("forecast_eval: context must be positive");
  if (options.ridge_lambdas.empty()) throw ConfigError("forecast_eval: no ridge lambdas");
  if (!(options.train_fraction > 0.0 && options.valid_fraction > 0.0 &&
        options.train_fraction + options.valid_fraction < 1.0)) {
    throw ConfigError("forecast_eval: split fractions must be positive and sum below 1");
  }
  if (series.features != state.config().input_dims) {
    throw ShapeError("forecast_eval: series has " + std::to_string(series.features) +
                     " features, encoder expects " + std::to_string(state.config().input_dims));
  }
  const std::size_t n = series.length;
  const std::size_t f = series.features;
  const std::size_t hmax = *std::max_element(options.horizons.begin(), options.horizons.end());
  if (hmax == 0) throw ConfigError("forecast_eval: horizons must be positive");
  if (n < options.context + hmax) {
    throw ShapeError("forecast_eval: series of length " + std::to_string(n) +
                     " is shorter than context + max horizon (" +
                     std::to_string(options.context + hmax) + ")");
  }
  // Forecast origins t: context [t-context+1, t], targets t+1..t+h.
  const std::size_t origins = n - options.context - hmax + 1;
  const auto n_train = static_cast<std::size_t>(std::floor(options.train_fraction * origins));
  const auto n_valid = static_cast<std::size_t>(std::floor(options.valid_fraction * origins));
  if (n_train < 2 || n_valid < 1 || origins - n_train - n_valid < 1) {
    throw ShapeError("forecast_eval: series too short for a train/valid/test split (" +
                     std::to_string(origins) + " forecast origins)");
  }

  // z-score with statistics of the timestamps seen by training samples.
  const std::size_t stat_end = n_train - 1 + options.context + hmax;
  std::vector<double> mu(f, 0.0), sd(f, 0.0);
  for (std::size_t c = 0; c < f; ++c) {
    double s = 0.0, s2 = 0.0;
    std::size_t cnt = 0;
    for (std::size_t t = 0; t < stat_end; ++t) {
      if (!series.is_observed(t, c)) continue;
      s += series.at(t, c);
      s2 += series.at(t, c) * series.at(t, c);
      ++cnt;
    }
    if (cnt == 0) throw FormatError("forecast_eval: feature with no observed training value");
    mu[c] = s / static_cast<double>(cnt);
    const double var = s2 / static_cast<double>(cnt) - mu[c] * mu[c];
    sd[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  TimeSeriesInstance z = series;
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < f; ++c) {
      if (z.is_observed(t, c)) z.values[t * f + c] = (z.values[t * f + c] - mu[c]) / sd[c];
    }
  }

  // Representation at the last step of every context window, computed once.
  const std::size_t k = state.config().repr_dims;
  Eigen::MatrixXd reps(static_cast<Eigen::Index>(origins), static_cast<Eigen::Index>(k));
  {
    NoGradGuard no_grad;
    std::vector<TimeSeriesInstance> windows;
    for (std::size_t start = 0; start < origins; start += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, origins - start);
      windows.clear();
      for (std::size_t o = start; o < start + count; ++o) {
        windows.push_back(crop(z, o, o + options.context));
      }
      const Tensor r = encode(state, pack_batch(windows));
      auto data = r.data();
      const std::size_t len = options.context;
      for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
          reps(static_cast<Eigen::Index>(start + i), static_cast<Eigen::Index>(c)) =
              data[(i * len + len - 1) * k + c];
        }
      }
    }
  }

  std::vector<HorizonMetrics> out;
  for (std::size_t h : options.horizons) {
    if (h == 0) throw ConfigError("forecast_eval: horizons must be positive");
    // Targets: next h values of every feature; samples with a missing target
    // are dropped.
    auto build = [&](std::size_t first, std::size_t count, Eigen::MatrixXd& x,
                     Eigen::MatrixXd& y) {
      std::vector<std::size_t> keep;
      for (std::size_t o = first; o < first + count; ++o) {
        const std::size_t t0 = o + options.context;
        bool ok = true;
        for (std::size_t s = 0; s < h && ok; ++s) {
          for (std::size_t c = 0; c < f && ok; ++c) ok = z.is_observed(t0 + s, c);
        }
        if (ok) keep.push_back(o);
      }
      x.resize(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(k));
      y.resize(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(h * f));
      for (std::size_t i = 0; i < keep.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        x.row(row) = reps.row(static_cast<Eigen::Index>(keep[i]));
        const std::size_t t0 = keep[i] + options.context;
        for (std::size_t s = 0; s < h; ++s) {
          for (std::size_t c = 0; c < f; ++c) {
            y(row, static_cast<Eigen::Index>(s * f + c)) = z.at(t0 + s, c);
          }
        }
      }
    };
    Eigen::MatrixXd xtr, ytr, xva, yva, xte, yte;
    build(0, n_train, xtr, ytr);
    build(n_train, n_valid, xva, yva);
    build(n_train + n_valid, origins - n_train - n_valid, xte, yte);
    if (xtr.rows() < 2 || xva.rows() < 1 || xte.rows() < 1) {
      throw ShapeError("forecast_eval: too few fully observed samples for horizon " +
                       std::to_string(h));
    }

    HorizonMetrics m;
    m.horizon = h;
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : options.ridge_lambdas) {
      const double err =
          (ridge_fit(xtr, ytr, lambda).predict(xva) - yva).array().square().mean();
      if (err < best) {
        best = err;
        m.lambda = lambda;
      }
    }
    const Eigen::MatrixXd diff = ridge_fit(xtr, ytr, m.lambda).predict(xte) - yte;
    m.mse = diff.array().square().mean();
    m.mae = diff.array().abs().mean();
    m.train_samples = static_cast<std::size_t>(xtr.rows());
    m.test_samples = static_cast<std::size_t>(xte.rows());
    out.push_back(m);
  }
  return out;
}

}  // namespace tsrl
