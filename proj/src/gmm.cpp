#include "delight/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "delight/error.hpp"

namespace delight {

namespace {

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

void moments(std::span<const double> xs, double& mean, double& var) {
  mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
}

}  // namespace

double gmm_loglik(const Gmm2& gmm, std::span<const double> samples) {
  double total = 0.0;
  for (double x : samples) {
    double l[2];
    for (int k = 0; k < 2; ++k) {
      l[k] = gmm.weight[k] > 0.0 ? std::log(gmm.weight[k]) + log_normal(x, gmm.mean[k], gmm.variance[k])
                                 : -std::numeric_limits<double>::infinity();
    }
    const double m = std::max(l[0], l[1]);
    total += m + std::log(std::exp(l[0] - m) + std::exp(l[1] - m));
  }
  return total / static_cast<double>(samples.size());
}

constexpr double kRelativePrecision = 1e-6;

Gmm2 fit_gmm2(std::span<const double> samples, int max_iter, double tol) {
  if (samples.size() < 8) throw InvalidArgument("fit_gmm2: at least 8 samples required");
  for (double x : samples) {
    if (!std::isfinite(x)) throw InvalidArgument("fit_gmm2: non-finite sample");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double range = sorted.back() - sorted.front();
  double all_mean, all_var;
  moments(sorted, all_mean, all_var);
  // Samples derived from float32 pixels carry about 1e-7 relative noise.
  const double precision = kRelativePrecision * all_mean;
  const double floor = range > 0.0 ? std::max(1e-8 * range * range, precision * precision)
                                   : 1e-8 * std::max(1.0, all_mean * all_mean);

  Gmm2 g;
  const std::size_t half = sorted.size() / 2;
  const std::span<const double> lo(sorted.data(), half), hi(sorted.data() + half, sorted.size() - half);
  moments(lo, g.mean[0], g.variance[0]);
  moments(hi, g.mean[1], g.variance[1]);
  g.weight = {static_cast<double>(lo.size()) / sorted.size(),
              static_cast<double>(hi.size()) / sorted.size()};
  for (auto& v : g.variance) v = std::max(v, floor);
  g.loglik.push_back(gmm_loglik(g, samples));

  const std::size_t n = samples.size();
  std::vector<double> resp(n);
  for (int it = 0; it < max_iter; ++it) {
    double nk1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double l0 = std::log(g.weight[0]) + log_normal(samples[i], g.mean[0], g.variance[0]);
      const double l1 = std::log(g.weight[1]) + log_normal(samples[i], g.mean[1], g.variance[1]);
      resp[i] = 1.0 / (1.0 + std::exp(l0 - l1));
      nk1 += resp[i];
    }
    const double nk0 = static_cast<double>(n) - nk1;
    // A component that lost every sample ends the fit.
    if (nk0 < 1e-12 || nk1 < 1e-12) break;
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s0 += (1.0 - resp[i]) * samples[i];
      s1 += resp[i] * samples[i];
    }
    g.mean = {s0 / nk0, s1 / nk1};
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v0 += (1.0 - resp[i]) * (samples[i] - g.mean[0]) * (samples[i] - g.mean[0]);
      v1 += resp[i] * (samples[i] - g.mean[1]) * (samples[i] - g.mean[1]);
    }
    g.variance = {std::max(v0 / nk0, floor), std::max(v1 / nk1, floor)};
    g.weight = {nk0 / n, nk1 / n};
    g.iterations = it + 1;
    g.loglik.push_back(gmm_loglik(g, samples));
    if (g.loglik.back() - g.loglik[g.loglik.size() - 2] < tol) break;
  }

  const double spread = std::sqrt(std::min(g.variance[0], g.variance[1]));
  if (std::abs(g.mean[0] - g.mean[1]) < spread) {
    g.merged = true;
    g.weight = {1.0, 0.0};
    g.mean = {all_mean, all_mean};
    const double v = std::max(all_var, floor);
    g.variance = {v, v};
  }
  return g;
}

}  // namespace delight
