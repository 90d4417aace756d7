#include "delight/penumbra.hpp"

#include <cmath>
#include <numbers>

#include "delight/error.hpp"

namespace delight {

namespace {

struct Tridiagonal {
  std::vector<double> lower, diag, upper, rhs;
};

// Thomas algorithm; lower[0] and upper[n-1] are ignored.
std::vector<double> thomas(Tridiagonal m) {
  const std::size_t n = m.diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double f = m.lower[i] / m.diag[i - 1];
    m.diag[i] -= f * m.upper[i - 1];
    m.rhs[i] -= f * m.rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = m.rhs[n - 1] / m.diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (m.rhs[i] - m.upper[i] * x[i + 1]) / m.diag[i];
  return x;
}

// Normal equations (P + lambda A D^T D A) alpha = P alpha0 - lambda A D^T D b
// with rows of `fixed` samples replaced by alpha_i = value_i.
std::vector<double> solve_with_fixed(const ShadowProfile& p, const std::vector<double>& w,
                                     double lambda, const std::vector<char>& fixed,
                                     const std::vector<double>& value) {
  const std::size_t n = p.size();
  Tridiagonal m{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    m.diag[i] = w[i];
    m.rhs[i] = w[i] * p.alpha0[i];
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    // Edge term lambda/2 (a_{i+1} x_{i+1} + b_{i+1} - a_i x_i - b_i)^2.
    const double ai = p.a[i], aj = p.a[i + 1], db = p.b[i + 1] - p.b[i];
    m.diag[i] += lambda * ai * ai;
    m.diag[i + 1] += lambda * aj * aj;
    m.upper[i] -= lambda * ai * aj;
    m.lower[i + 1] -= lambda * ai * aj;
    m.rhs[i] += lambda * ai * db;
    m.rhs[i + 1] -= lambda * aj * db;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!fixed[i]) continue;
    m.diag[i] = 1.0;
    m.lower[i] = m.upper[i] = 0.0;
    m.rhs[i] = value[i];
  }
  return thomas(std::move(m));
}

std::vector<double> gradient(const ShadowProfile& p, const std::vector<double>& w, double lambda,
                             const std::vector<double>& x) {
  const std::size_t n = p.size();
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = w[i] * (x[i] - p.alpha0[i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double r = p.a[i + 1] * x[i + 1] + p.b[i + 1] - p.a[i] * x[i] - p.b[i];
    g[i] -= lambda * p.a[i] * r;
    g[i + 1] += lambda * p.a[i + 1] * r;
  }
  return g;
}

}  // namespace

void PenumbraParams::validate() const {
  if (half_length < 2 || half_length > 256) {
    throw ConfigError("penumbra: half_length must be in [2, 256]");
  }
  if (stride < 1) throw ConfigError("penumbra: stride must be >= 1");
  if (!(lambda >= 0)) throw ConfigError("penumbra: lambda must be >= 0");
  if (!(transition_halfwidth >= 0 && transition_halfwidth < half_length)) {
    throw ConfigError("penumbra: transition_halfwidth must be in [0, half_length)");
  }
  if (!(low_weight > 0 && low_weight <= 1)) throw ConfigError("penumbra: low_weight must be in (0, 1]");
  if (!(max_normal_deg > 0 && max_normal_deg < 90)) {
    throw ConfigError("penumbra: max_normal_deg must be in (0, 90)");
  }
  if (!(exposure_floor >= 0 && exposure_floor < 1)) {
    throw ConfigError("penumbra: exposure_floor must be in [0, 1)");
  }
}

std::vector<ShadowProfile> extract_profiles(const VisibilityMask& mask, const GBuffer& gbuf,
                                            const LinearImage& img, const IlluminationRatio& ratio,
                                            const PenumbraParams& params) {
  params.validate();
  const int w = mask.width(), h = mask.height();
  if (gbuf.width() != w || gbuf.height() != h || img.width() != w || img.height() != h) {
    throw InvalidArgument("extract_profiles: dimension mismatch");
  }
  if (!ratio.accepted) throw InvalidArgument("extract_profiles: illumination ratio not accepted");
  const double r = ratio.ratio.mean();
  std::vector<float> values;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (gbuf.valid(x, y)) values.push_back(static_cast<float>(img.luminance(x, y)));
    }
  }
  const double floor = params.exposure_floor * percentile(std::move(values), 99.9);
  const double cos_max = std::cos(params.max_normal_deg * std::numbers::pi / 180.0);
  const Raster& a = mask.alpha;
  const auto lit = [&](int x, int y) { return gbuf.valid(x, y) && a.at(x, y) >= 0.5f; };
  const auto shadow = [&](int x, int y) { return gbuf.valid(x, y) && a.at(x, y) < 0.5f; };
  const auto valid_at = [&](double x, double y) {
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    for (int yy = y0; yy <= y0 + 1; ++yy) {
      for (int xx = x0; xx <= x0 + 1; ++xx) {
        if (!a.contains(xx, yy) || !gbuf.valid(xx, yy)) return false;
      }
    }
    return true;
  };

  std::vector<ShadowProfile> profiles;
  long counter = 0;
  const int L = params.half_length;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!lit(x, y)) continue;
      const bool boundary = (x > 0 && shadow(x - 1, y)) || (x + 1 < w && shadow(x + 1, y)) ||
                            (y > 0 && shadow(x, y - 1)) || (y + 1 < h && shadow(x, y + 1));
      if (!boundary || counter++ % params.stride != 0) continue;
      const Eigen::Vector2d d = boundary_normal(a, gbuf, x, y);
      if (d.isZero()) continue;
      ShadowProfile p;
      p.anchor = Eigen::Vector2d(x, y);
      p.direction = d;
      const Vec3 n0 = gbuf.normal_at(x, y);
      bool ok = true;
      for (int k = -L; k <= L && ok; ++k) {
        const Eigen::Vector2d q = p.anchor + k * d;
        if (!valid_at(q.x(), q.y())) {
          ok = false;
          break;
        }
        const int nx = static_cast<int>(std::lround(q.x())), ny = static_cast<int>(std::lround(q.y()));
        if (gbuf.normal_at(nx, ny).dot(n0) < cos_max) ok = false;
        const double lum = (double(img.raster().bilinear(q.x(), q.y(), 0)) +
                            img.raster().bilinear(q.x(), q.y(), 1) +
                            img.raster().bilinear(q.x(), q.y(), 2)) / 3.0;
        if (!(lum > floor) || !(lum > 0.0)) ok = false;
        p.t.push_back(k);
        p.alpha0.push_back(a.at(nx, ny) >= 0.5f ? 1.0 : 0.0);
        p.lum.push_back(lum);
        p.k_sun.push_back(gbuf.k_sun.bilinear(q.x(), q.y()));
        p.k_sky.push_back(gbuf.k_sky.bilinear(q.x(), q.y()));
      }
      if (!ok) continue;
      // Exactly one 0 -> 1 transition.
      int transitions = 0;
      for (std::size_t i = 1; i < p.size(); ++i) {
        if (p.alpha0[i] != p.alpha0[i - 1]) {
          ++transitions;
          p.transition = static_cast<int>(i);
        }
      }
      if (transitions != 1 || p.alpha0.front() != 0.0) continue;
      p.a.resize(p.size());
      p.b.resize(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) {
        p.a[i] = r * p.k_sun[i] / p.lum[i];
        p.b[i] = p.k_sky[i] / p.lum[i];
      }
      const double s = 2.0 / (p.a.front() * p.alpha0.front() + p.b.front() +
                              p.a.back() * p.alpha0.back() + p.b.back());
      for (std::size_t i = 0; i < p.size(); ++i) {
        p.a[i] *= s;
        p.b[i] *= s;
      }
      bool finite = true;
      for (std::size_t i = 0; i < p.size(); ++i) finite &= std::isfinite(p.a[i]) && std::isfinite(p.b[i]);
      if (finite) profiles.push_back(std::move(p));
    }
  }
  return profiles;
}

std::vector<double> profile_weights(const ShadowProfile& p, const PenumbraParams& params) {
  std::vector<double> w(p.size());
  const double center = p.transition - 0.5;
  const double hw = params.transition_halfwidth;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dist = std::abs(static_cast<double>(i) - center);
    if (dist <= hw) {
      w[i] = params.low_weight;
    } else if (dist >= 2.0 * hw || hw == 0.0) {
      w[i] = 1.0;
    } else {
      w[i] = params.low_weight + (1.0 - params.low_weight) * (dist - hw) / hw;
    }
  }
  return w;
}

double profile_objective(const ShadowProfile& p, const std::vector<double>& weights, double lambda,
                         const std::vector<double>& alpha) {
  double data = 0.0, reg = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    data += weights[i] * (alpha[i] - p.alpha0[i]) * (alpha[i] - p.alpha0[i]);
  }
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double r = p.a[i + 1] * alpha[i + 1] + p.b[i + 1] - p.a[i] * alpha[i] - p.b[i];
    reg += r * r;
  }
  return 0.5 * data + 0.5 * lambda * reg;
}

std::vector<double> solve_profile_unconstrained(const ShadowProfile& p,
                                                const std::vector<double>& weights, double lambda) {
  const std::size_t n = p.size();
  if (n < 2 || weights.size() != n) throw InvalidArgument("solve_profile: size mismatch");
  std::vector<char> fixed(n, 0);
  fixed[0] = 1;
  fixed[n - 1] = 1;
  return solve_with_fixed(p, weights, lambda, fixed, p.alpha0);
}

std::vector<double> solve_profile(const ShadowProfile& p, const std::vector<double>& weights,
                                  double lambda) {
  const std::size_t n = p.size();
  if (n < 2 || weights.size() != n) throw InvalidArgument("solve_profile: size mismatch");
  for (double wi : weights) {
    if (!(wi > 0.0)) throw InvalidArgument("solve_profile: data weights must be positive");
  }
  // Working set: 0 free, 1 at lower bound, 2 at upper bound. Ends stay fixed.
  std::vector<char> state(n, 0), fixed(n, 0);
  std::vector<double> x = p.alpha0, value(n, 0.0);
  const auto sync = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const bool end = i == 0 || i + 1 == n;
      fixed[i] = end || state[i] != 0;
      value[i] = end ? p.alpha0[i] : (state[i] == 2 ? 1.0 : 0.0);
    }
  };
  const int max_iter = static_cast<int>(4 * n + 20);
  for (int it = 0; it < max_iter; ++it) {
    sync();
    const std::vector<double> target = solve_with_fixed(p, weights, lambda, fixed, value);
    // Longest feasible step from x toward target.
    double step = 1.0;
    std::size_t blocking = n;
    int blocking_state = 0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (fixed[i]) continue;
      const double dx = target[i] - x[i];
      if (dx < 0.0 && target[i] < 0.0) {
        const double s = (0.0 - x[i]) / dx;
        if (s < step) { step = s; blocking = i; blocking_state = 1; }
      } else if (dx > 0.0 && target[i] > 1.0) {
        const double s = (1.0 - x[i]) / dx;
        if (s < step) { step = s; blocking = i; blocking_state = 2; }
      }
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = fixed[i] ? value[i] : x[i] + step * (target[i] - x[i]);
    if (blocking < n) {
      state[blocking] = static_cast<char>(blocking_state);
      x[blocking] = blocking_state == 2 ? 1.0 : 0.0;
      continue;
    }
    // At the subproblem minimizer: release the bound with the worst multiplier.
    const std::vector<double> g = gradient(p, weights, lambda, x);
    std::size_t release = n;
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double violation = state[i] == 1 ? -g[i] : state[i] == 2 ? g[i] : 0.0;
      if (violation > worst) {
        worst = violation;
        release = i;
      }
    }
    if (release == n) break;
    state[release] = 0;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) x[i] = std::clamp(x[i], 0.0, 1.0);
  return x;
}

SoftVisibility composite_soft_mask(const VisibilityMask& mask,
                                   const std::vector<ShadowProfile>& profiles,
                                   const std::vector<std::vector<double>>& solved) {
  if (profiles.size() != solved.size()) throw InvalidArgument("composite: size mismatch");
  const int w = mask.width(), h = mask.height();
  Raster acc(w, h, 1), weight(w, h, 1);
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    const auto& p = profiles[k];
    const Eigen::Vector2d across(-p.direction.y(), p.direction.x());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Eigen::Vector2d q = p.anchor + p.t[i] * p.direction;
      const int x0 = static_cast<int>(std::floor(q.x())) - 3;
      const int y0 = static_cast<int>(std::floor(q.y())) - 3;
      for (int y = y0; y <= y0 + 7; ++y) {
        for (int x = x0; x <= x0 + 7; ++x) {
          if (!mask.alpha.contains(x, y)) continue;
          const Eigen::Vector2d o = Eigen::Vector2d(x, y) - q;
          const double u = std::abs(o.dot(p.direction));
          const double v = o.dot(across);
          if (u >= 1.0 || std::abs(v) > 3.0) continue;
          const double wt = (1.0 - u) * std::exp(-0.5 * v * v);
          acc.at(x, y) += static_cast<float>(wt * solved[k][i]);
          weight.at(x, y) += static_cast<float>(wt);
        }
      }
    }
  }
  SoftVisibility soft{mask.alpha, weight};
  for (std::size_t i = 0; i < soft.alpha.pixel_count(); ++i) {
    if (weight[i] > 0.0f) soft.alpha[i] = std::clamp(acc[i] / weight[i], 0.0f, 1.0f);
  }
  return soft;
}

double inverse_albedo_tv(const ShadowProfile& p, const std::vector<double>& alpha) {
  double tv = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    tv += std::abs(p.a[i + 1] * alpha[i + 1] + p.b[i + 1] - p.a[i] * alpha[i] - p.b[i]);
  }
  return tv;
}

}  // namespace delight
