#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "tsrl/dataset.hpp"
#include "tsrl/encoder.hpp"

namespace tsrl {

/// One K-vector per instance: the elementwise max of r over all timestamps.
/// Inference path, no masking or augmentation. Rows follow ds.instances.
Eigen::MatrixXd encode_dataset(const EncoderState& state, const Dataset& ds,
                               std::size_t batch_size = 64);

/// Position of each instance's label in `classes` (ascending, distinct).
/// Throws for unlabeled instances and labels outside `classes`.
std::vector<std::size_t> class_indices(const Dataset& ds, const std::vector<int>& classes);
inline std::vector<std::size_t> class_indices(const Dataset& ds) {
  return class_indices(ds, ds.classes);
}

/// Sorted union of the label sets of two splits.
std::vector<int> merged_classes(const Dataset& a, const Dataset& b);

struct ProbeOptions {
  double reg = 1e-3;         // L2 penalty on the weights, not the bias
  double tolerance = 1e-6;   // stop when the gradient's max-norm falls below
  std::size_t max_steps = 10000;
};

struct ProbeResult {
  double accuracy = 0.0;
  std::size_t steps = 0;
  bool converged = false;
  std::vector<std::size_t> predictions;
};

/// Multinomial logistic regression on standardised features, fit by
/// full-batch gradient descent, scored on the test rows. Throws when the
/// training labels hold fewer than two classes.
ProbeResult linear_probe_classify(const Eigen::MatrixXd& train_x,
                                  const std::vector<std::size_t>& train_y,
                                  const Eigen::MatrixXd& test_x,
                                  const std::vector<std::size_t>& test_y,
                                  const ProbeOptions& options = {});

struct RidgeModel {
  Eigen::MatrixXd weight;  // [D, H]
  Eigen::RowVectorXd bias;  // [H]

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

/// argmin ||X W + 1 b - Y||^2 + lambda ||W||^2 with the bias left unpenalised.
RidgeModel ridge_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda);

struct ForecastOptions {
  std::size_t context = 64;
  std::vector<std::size_t> horizons{24};
  std::vector<double> ridge_lambdas{0.1, 1.0, 10.0};
  double train_fraction = 0.6;
  double valid_fraction = 0.2;
  std::size_t batch_size = 64;
};

struct HorizonMetrics {
  std::size_t horizon = 0;
  double mse = 0.0;
  double mae = 0.0;
  double lambda = 0.0;  // picked on the validation segment
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
};

/// Ridge forecasting from the representation at the last context timestamp to
/// the next h values of every feature. The series is z-scored with statistics
/// of the training segment; samples are split chronologically by forecast
/// origin. Representations are computed once and shared by all horizons.
std::vector<HorizonMetrics> forecast_eval(const EncoderState& state,
                                          const TimeSeriesInstance& series,
                                          const ForecastOptions& options = {});

}  // namespace tsrl
