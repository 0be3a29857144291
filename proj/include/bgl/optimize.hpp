#ifndef BGL_OPTIMIZE_HPP
#define BGL_OPTIMIZE_HPP

// Unconstrained minimizers over small parameter vectors (dimension <= 4 in
// practice): Nelder-Mead, BFGS with backtracking, and a damped Newton
// polish on a finite-difference Hessian. An objective may return +inf to
// reject a point; every method treats that as "worse than anything".

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace bgl::optim {

using Vector = std::vector<double>;

/// Objective with optional analytic gradient. Without one, gradients are
/// central differences with step 1e-5 * max(1, |x_i|).
class Objective {
 public:
  using ValueFn = std::function<double(std::span<const double>)>;
  using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;

  explicit Objective(ValueFn value, GradientFn gradient = {})
      : value_(std::move(value)), gradient_(std::move(gradient)) {}

  double operator()(std::span<const double> x) const {
    ++evaluations_;
    const double f = value_(x);
    return std::isnan(f) ? std::numeric_limits<double>::infinity() : f;
  }

  /// Fills g; returns false if the gradient is not finite.
  bool gradient(std::span<const double> x, std::span<double> g) const {
    if (gradient_) {
      ++evaluations_;
      gradient_(x, g);
    } else {
      Vector probe(x.begin(), x.end());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = 1e-5 * std::max(1.0, std::fabs(x[i]));
        probe[i] = x[i] + h;
        const double up = (*this)(probe);
        probe[i] = x[i] - h;
        const double down = (*this)(probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
      }
    }
    return std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); });
  }

  [[nodiscard]] bool has_analytic_gradient() const { return static_cast<bool>(gradient_); }
  [[nodiscard]] long evaluations() const { return evaluations_; }

 private:
  ValueFn value_;
  GradientFn gradient_;
  mutable long evaluations_ = 0;
};

inline double norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

struct NelderMeadOptions {
  int max_iterations = 2000;
  double initial_step = 0.5;
  double x_tolerance = 1e-9;   // simplex diameter
  double f_tolerance = 0.0;    // spread of vertex values, relative to 1 + |f_best|
};

struct MinimizeResult {
  Vector x;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double gradient_norm = std::numeric_limits<double>::infinity();
  double simplex_diameter = std::numeric_limits<double>::infinity();
};

/// Nelder-Mead with the standard coefficients (1, 2, 1/2, 1/2). Stops when
/// the simplex diameter (max-norm distance of any vertex from the best)
/// drops below x_tolerance, or the vertex values agree to f_tolerance.
inline MinimizeResult nelder_mead(const Objective& objective, const Vector& start, const NelderMeadOptions& options) {
  const std::size_t n = start.size();
  std::vector<Vector> simplex(n + 1, start);
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += options.initial_step;
  for (std::size_t i = 0; i <= n; ++i) values[i] = objective(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  auto diameter = [&]() {
    double d = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) d = std::max(d, std::fabs(simplex[order[i]][j] - simplex[order[0]][j]));
    }
    return d;
  };

  MinimizeResult result;
  int iter = 0;
  Vector centroid(n), trial(n), trial2(n);
  for (;; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    const double best = values[order[0]];
    const double worst = values[order[n]];
    result.simplex_diameter = diameter();
    if (result.simplex_diameter < options.x_tolerance) break;
    if (options.f_tolerance > 0.0 && std::isfinite(worst) &&
        worst - best <= options.f_tolerance * (1.0 + std::fabs(best))) {
      break;
    }
    if (iter >= options.max_iterations) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[order[i]][j] / static_cast<double>(n);
    }
    const Vector& w = simplex[order[n]];
    for (std::size_t j = 0; j < n; ++j) trial[j] = centroid[j] + (centroid[j] - w[j]);
    const double fr = objective(trial);
    const double second_worst = values[order[n - 1]];

    if (fr < best) {
      for (std::size_t j = 0; j < n; ++j) trial2[j] = centroid[j] + 2.0 * (centroid[j] - w[j]);
      const double fe = objective(trial2);
      if (fe < fr) {
        simplex[order[n]] = trial2;
        values[order[n]] = fe;
      } else {
        simplex[order[n]] = trial;
        values[order[n]] = fr;
      }
      continue;
    }
    if (fr < second_worst) {
      simplex[order[n]] = trial;
      values[order[n]] = fr;
      continue;
    }
    // contraction, outside if the reflection helped at all
    const bool outside = fr < worst;
    for (std::size_t j = 0; j < n; ++j) {
      trial2[j] = outside ? centroid[j] + 0.5 * (trial[j] - centroid[j]) : centroid[j] + 0.5 * (w[j] - centroid[j]);
    }
    const double fc = objective(trial2);
    if (fc < (outside ? fr : worst)) {
      simplex[order[n]] = trial2;
      values[order[n]] = fc;
      continue;
    }
    // shrink towards the best vertex
    const Vector& b = simplex[order[0]];
    for (std::size_t i = 1; i <= n; ++i) {
      Vector& v = simplex[order[i]];
      for (std::size_t j = 0; j < n; ++j) v[j] = b[j] + 0.5 * (v[j] - b[j]);
      values[order[i]] = objective(v);
    }
  }
  result.x = simplex[order[0]];
  result.f = values[order[0]];
  result.iterations = iter;
  return result;
}

struct GradientOptions {
  int max_iterations = 2000;
  double gradient_tolerance = 1e-7;
};

namespace detail {

// Backtracking line search along d from x (f0, slope = g.d < 0). Returns the
// accepted step length, or 0 when no decrease was found.
inline double backtrack(const Objective& objective, const Vector& x, double f0, const Vector& d, double slope,
                        Vector& x_new, double& f_new, int max_halvings = 60) {
  double step = 1.0;
  for (int k = 0; k < max_halvings; ++k) {
    for (std::size_t j = 0; j < x.size(); ++j) x_new[j] = x[j] + step * d[j];
    f_new = objective(x_new);
    if (f_new <= f0 + 1e-4 * step * slope) return step;
    step *= 0.5;
  }
  return 0.0;
}

// Cholesky solve of (H + mu I) d = -g; false if not positive definite.
inline bool damped_newton_direction(const std::vector<Vector>& h, const Vector& g, double mu, Vector& d) {
  const std::size_t n = g.size();
  std::vector<Vector> l(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = h[i][j] + (i == j ? mu : 0.0);
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (i == j) {
        if (!(s > 0.0)) return false;
        l[i][i] = std::sqrt(s);
      } else {
        l[i][j] = s / l[j][j];
      }
    }
  }
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = -g[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i][k] * y[k];
    y[i] = s / l[i][i];
  }
  d.assign(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l[k][ii] * d[k];
    d[ii] = s / l[ii][ii];
  }
  return true;
}

}  // namespace detail

/// BFGS on the inverse Hessian with Armijo backtracking; the update is
/// skipped whenever the curvature condition s.y > 0 fails.
inline constexpr int kStagnationWindow = 50;
inline constexpr double kStagnationTolerance = 1e-10;

inline MinimizeResult bfgs(const Objective& objective, const Vector& start, const GradientOptions& options) {
  const std::size_t n = start.size();
  MinimizeResult result;
  Vector x = start;
  double f = objective(x);
  Vector g(n), g_new(n), d(n), x_new(n), s(n), y(n);
  if (!std::isfinite(f) || !objective.gradient(x, g)) {
    result.x = x;
    result.f = f;
    return result;
  }
  std::vector<Vector> inv_h(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv_h[i][i] = 1.0;

  int iter = 0;
  double f_checkpoint = f;
  for (; iter < options.max_iterations; ++iter) {
    if (norm(g) <= options.gradient_tolerance) break;
    // a start crawling along a flat ridge is left to the caller's polish
    if (iter > 0 && iter % kStagnationWindow == 0) {
      if (f_checkpoint - f <= kStagnationTolerance * (1.0 + std::fabs(f))) break;
      f_checkpoint = f;
    }
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = 0.0;
      for (std::size_t j = 0; j < n; ++j) d[i] -= inv_h[i][j] * g[j];
    }
    double slope = std::inner_product(g.begin(), g.end(), d.begin(), 0.0);
    if (!(slope < 0.0)) {
      // not a descent direction: restart from steepest descent
      for (std::size_t i = 0; i < n; ++i) {
        std::fill(inv_h[i].begin(), inv_h[i].end(), 0.0);
        inv_h[i][i] = 1.0;
        d[i] = -g[i];
      }
      slope = -std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    }
    double f_new = f;
    const double step = detail::backtrack(objective, x, f, d, slope, x_new, f_new);
    if (step == 0.0) break;
    if (!objective.gradient(x_new, g_new)) break;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    const double sy = std::inner_product(s.begin(), s.end(), y.begin(), 0.0);
    if (sy > 1e-12 * norm(s) * norm(y)) {
      Vector hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) hy[i] += inv_h[i][j] * y[j];
      }
      const double yhy = std::inner_product(y.begin(), y.end(), hy.begin(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          inv_h[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
        }
      }
    }
    const bool stalled = f - f_new <= 1e-16 * std::fabs(f);
    x = x_new;
    f = f_new;
    g = g_new;
    if (stalled && norm(s) <= 1e-14 * std::max(1.0, norm(x))) break;
  }
  result.x = x;
  result.f = f;
  result.iterations = iter;
  result.gradient_norm = norm(g);
  return result;
}

/// Damped Newton steps on a Hessian taken as central differences of the
/// gradient. A step is kept only if it does not increase f; stops at the
/// gradient tolerance, when no step helps, or after three steps in a row
/// that barely change f or the gradient.
inline MinimizeResult newton_polish(const Objective& objective, const Vector& start, const GradientOptions& options,
                                    int max_steps = 50) {
  const std::size_t n = start.size();
  MinimizeResult result;
  Vector x = start;
  double f = objective(x);
  Vector g(n), d(n), x_new(n), gp(n), gm(n), probe(n);
  bool ok = std::isfinite(f) && objective.gradient(x, g);
  int iter = 0;
  int stalled = 0;
  for (; ok && iter < max_steps; ++iter) {
    if (norm(g) <= options.gradient_tolerance) break;
    std::vector<Vector> h(n, Vector(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
      const double step = 1e-4 * std::max(1.0, std::fabs(x[j]));
      probe = x;
      probe[j] = x[j] + step;
      const bool up = objective.gradient(probe, gp);
      probe[j] = x[j] - step;
      const bool down = objective.gradient(probe, gm);
      if (!up || !down) {
        ok = false;
        break;
      }
      for (std::size_t i = 0; i < n; ++i) h[i][j] = (gp[i] - gm[i]) / (2.0 * step);
    }
    if (!ok) break;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) h[i][j] = h[j][i] = 0.5 * (h[i][j] + h[j][i]);
    }
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::fabs(h[i][i]));
    bool improved = false;
    for (double mu = 0.0; mu <= 1e8 * std::max(scale, 1e-12);
         mu = (mu == 0.0 ? 1e-10 * std::max(scale, 1e-12) : mu * 10.0)) {
      if (!detail::damped_newton_direction(h, g, mu, d)) continue;
      const double slope = std::inner_product(g.begin(), g.end(), d.begin(), 0.0);
      if (!(slope < 0.0)) continue;
      double f_new = f;
      // Newton steps are well scaled; a step needing more halvings is noise
      const double step = detail::backtrack(objective, x, f, d, slope, x_new, f_new, 30);
      if (step == 0.0) continue;
      Vector g_new(n);
      if (!objective.gradient(x_new, g_new)) continue;
      if (f_new < f || (f_new == f && norm(g_new) < norm(g))) {
        const bool progress = f - f_new > 1e-14 * (1.0 + std::fabs(f)) || norm(g_new) < 0.5 * norm(g);
        stalled = progress ? 0 : stalled + 1;
        x = x_new;
        f = f_new;
        g = g_new;
        improved = true;
        break;
      }
    }
    // drifting along a flat ridge, not converging
    if (!improved || stalled >= 3) break;
  }
  result.x = x;
  result.f = f;
  result.iterations = iter;
  result.gradient_norm = ok ? norm(g) : std::numeric_limits<double>::infinity();
  return result;
}

}  // namespace bgl::optim

#endif
