#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tsrl/dualcon.hpp"
#include "tsrl/tensor.hpp"

namespace tsrl {

// Reference implementations by direct enumeration, one anchor at a time.
// Universum vectors are rebuilt from each draw's lambda and partner.
double brute_temporal_loss(const AlignedReprPair& pair, std::span<const UniversumDraw> universums,
                           const DualConOptions& options = {});
double brute_instance_loss(const AlignedReprPair& pair, std::span<const UniversumDraw> universums,
                           const DualConOptions& options = {});

/// Empty string when every draw has lambda in (0, 0.5] and a partner on the
/// expected axis; otherwise a description of the first violation.
std::string check_temporal_draws(const AlignedReprPair& pair,
                                 std::span<const UniversumDraw> draws);
std::string check_instance_draws(const AlignedReprPair& pair,
                                 std::span<const UniversumDraw> draws);

struct GradCheckOptions {
  double step = 1e-5;
  double rtol = 1e-4;
  /// Lower bound of the relative-error denominator, so that components whose
  /// true value is ~0 are judged on an absolute scale of rtol * floor.
  double floor = 1e-3;
};

struct GradCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares the recorded gradient of f at `inputs` (leaves requiring grad)
/// with central differences over every input element. f must be
/// deterministic.
GradCheck check_gradients(const std::string& name, const ScalarFn& f, std::vector<Tensor> inputs,
                          const GradCheckOptions& options = {});

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::size_t cases = 0;
  double worst = 0.0;  // largest error observed, in the suite's own measure
  std::string detail;
  double seconds = 0.0;
};

/// Round trip idft(dft(x)) for every length in [1, max_length].
SuiteResult dft_roundtrip_suite(std::uint64_t seed, std::size_t max_length = 128,
                                double tolerance = 1e-9);
/// Vectorised temporal and instance losses against the enumeration above on
/// random small cases, with and without universums.
SuiteResult loss_oracle_suite(std::uint64_t seed, std::size_t cases = 200,
                              double tolerance = 1e-10);
/// Finite-difference checks for every differentiable op and for the full
/// training objective, each over `configs` random configurations.
SuiteResult gradient_suite(std::uint64_t seed, std::size_t configs = 50,
                           const GradCheckOptions& options = {});

/// Runs the three suites; writes one line per suite to `log` when given.
std::vector<SuiteResult> run_selftest(std::uint64_t seed, std::ostream* log = nullptr,
                                      std::size_t gradient_configs = 50);

}  // namespace tsrl
