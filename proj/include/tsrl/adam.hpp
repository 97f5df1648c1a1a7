#pragma once

#include <cstdint>
#include <vector>

#include "tsrl/tensor.hpp"

namespace tsrl {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments. Holds handles to the parameter leaves it
/// updates; moments are allocated on construction.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  /// One update from the grads currently stored on the parameters. Throws if
  /// any parameter has no grad.
  void step();
  void zero_grad();

  std::int64_t steps_taken() const { return step_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  AdamOptions options_;
  std::int64_t step_ = 0;
};

}  // namespace tsrl
