#pragma once

#include <array>
#include <span>
#include <vector>

namespace delight {

/// One-dimensional two-component Gaussian mixture.
struct Gmm2 {
  std::array<double, 2> weight{0.5, 0.5};
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> variance{1.0, 1.0};
  /// Components collapsed into one (overlapping means); weight {1, 0}.
  bool merged = false;
  int iterations = 0;
  /// Mean per-sample log-likelihood after initialization and each EM step.
  std::vector<double> loglik;

  int major() const { return weight[1] > weight[0] ? 1 : 0; }
  int minor() const { return 1 - major(); }
};

/// EM from a median split of the samples. Variances are floored at
/// max(1e-8 * range^2, (1e-6 * mean)^2); iteration stops when the mean log-likelihood improves by
/// less than `tol` or after `max_iter` steps. Components whose means lie
/// within the smaller standard deviation of each other are merged.
/// Throws InvalidArgument for fewer than 8 samples or non-finite samples.
Gmm2 fit_gmm2(std::span<const double> samples, int max_iter = 200, double tol = 1e-8);

/// Mean per-sample log-likelihood of `samples` under `gmm`.
double gmm_loglik(const Gmm2& gmm, std::span<const double> samples);

}  // namespace delight
