#ifndef BGL_DISTRIBUTIONS_HPP
#define BGL_DISTRIBUTIONS_HPP

// Density, CDF, survival, quantile, sampling and numerical moments for the
// nine families in bgl::Family.
//
// The four Lindley-based families share one kernel (BL, GL and L are BGL
// with alpha = 1, a = b = 1, or both), and the three Weibull-based families
// share another (BE is BW with alpha = 1, W is BW with a = b = 1). All
// Lindley algebra is carried in logs:
//   u(x) = (1 + lambda + lambda x) / (1 + lambda) * exp(-lambda x),
//   V(x) = 1 - u(x),
// with ln u, ln V and ln(-ln V) each computed without cancellation, so that
// ln V stays accurate when V is tiny and ln(1 - V^alpha) stays accurate when
// V^alpha is close to one.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bgl/errors.hpp"
#include "bgl/family.hpp"
#include "bgl/quadrature.hpp"
#include "bgl/sample.hpp"
#include "bgl/specfun.hpp"

namespace bgl {

/// cdf and survival (1 - cdf) at one point, each accurate on its own tail.
struct Tails {
  double cdf;
  double sf;
};

namespace detail {

struct LindleyPoint {
  double log_u;
  double log_v;
  double log_neg_log_v;  // ln(-ln V)
};

inline LindleyPoint lindley_point(double lambda, double x) {
  LindleyPoint pt{};
  pt.log_u = std::log1p(lambda * x / (1.0 + lambda)) - lambda * x;
  const double u = std::exp(pt.log_u);
  if (u < 0.5) {
    pt.log_v = std::log1p(-u);
    // -ln(1-u) = u (1 + u/2 + ...)
    pt.log_neg_log_v = u < 1e-8 ? pt.log_u + std::log1p(0.5 * u) : std::log(-pt.log_v);
  } else {
    pt.log_v = std::log(-std::expm1(pt.log_u));
    pt.log_neg_log_v = std::log(-pt.log_v);
  }
  return pt;
}

/// ln(1 - e^w) for w <= 0, given ln(-w). Near w = 0 the series
/// ln(-w) + w/2 replaces log(-expm1(w)), which would lose -w to rounding
/// once it underflows.
inline double log1m_exp(double w, double log_neg_w) {
  return w < -1e-8 ? std::log(-std::expm1(w)) : log_neg_w + 0.5 * w;
}

/// ln of the Lindley density lambda^2/(1+lambda) (1+x) e^{-lambda x}.
inline double lindley_log_density(double lambda, double x) {
  return 2.0 * std::log(lambda) - std::log1p(lambda) + std::log1p(x) - lambda * x;
}

inline double lindley_mean(double lambda) { return (lambda + 2.0) / (lambda * (lambda + 1.0)); }

inline double lindley_sd(double lambda) {
  return std::sqrt(lambda * lambda + 4.0 * lambda + 2.0) / (lambda * (lambda + 1.0));
}

/// ln t and ln(1 - t) for the beta layer I_t(a,b) = p, each accurate even
/// when t or 1 - t is below the smallest double. Past the logit range of
/// the root search the small side comes from the leading term of its
/// series, I_x(a,b) ~ x^a / (a B(a,b)), which is exact there.
struct BetaLayerRoot {
  double log_t;
  double log_s;
};

inline BetaLayerRoot beta_layer_inverse(double p, double a, double b, bool unit_beta) {
  if (unit_beta) {
    return p <= 0.5 ? BetaLayerRoot{std::log(p), std::log1p(-p)}
                    : BetaLayerRoot{std::log1p(-(1.0 - p)), std::log(1.0 - p)};
  }
  constexpr double kSeriesLogit = 700.0;
  const double z = reg_inc_beta_inv_logit(p, a, b);
  if (z < -kSeriesLogit) return {(std::log(p) + std::log(a) + log_beta(a, b)) / a, 0.0};
  if (z > kSeriesLogit) return {0.0, (std::log(1.0 - p) + std::log(b) + log_beta(a, b)) / b};
  // ln t = -ln(1 + e^-z), ln(1 - t) = -ln(1 + e^z)
  auto softplus = [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
  return {-softplus(-z), -softplus(z)};
}

inline constexpr double kSmallestPositive = std::numeric_limits<double>::denorm_min();

/// x > 0 with g(x) = target for increasing g. `eval(x)` returns
/// {g(x), dg/d(ln x)}. Newton on ln x inside a bisection bracket; the upper
/// end starts at `start` and doubles at most 200 times.
template <class Eval>
double solve_increasing(Eval&& eval, double target, double start) {
  double hi = start;
  int expansions = 0;
  while (eval(hi).first < target) {
    if (++expansions > 200) {
      throw convergence_error("quantile: upper bracket still below target after 200 doublings");
    }
    hi *= 2.0;
  }
  double lo = hi;
  double factor = 2.0;
  while (eval(lo).first > target) {
    lo /= factor;
    factor = std::min(factor * factor, 1e64);
    if (lo < std::numeric_limits<double>::min()) {
      lo = std::numeric_limits<double>::min();
      if (eval(lo).first >= target) return lo;
      break;
    }
  }
  double s_lo = std::log(lo);
  double s_hi = std::log(hi);
  double s = s_hi;
  for (int iter = 0; iter < 300; ++iter) {
    const auto [g, slope] = eval(std::exp(s));
    const double f = g - target;
    if (f == 0.0) return std::exp(s);
    if (f < 0.0) {
      s_lo = s;
    } else {
      s_hi = s;
    }
    double next = (slope > 0.0 && std::isfinite(slope)) ? s - f / slope : std::numeric_limits<double>::quiet_NaN();
    if (!(next > s_lo && next < s_hi)) next = 0.5 * (s_lo + s_hi);
    const double tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(next));
    if (std::fabs(next - s) <= tol || s_hi - s_lo <= tol) return std::exp(next);
    s = next;
  }
  throw convergence_error("quantile: root search did not converge");
}

}  // namespace detail

/// Evaluator for one FamilySpec with its normalizing constants precomputed.
/// Cheap to copy; holds no mutable state.
class Density {
 public:
  explicit Density(const FamilySpec& spec) : spec_(spec) {
    alpha_ = spec.get_or_unit(Param::alpha);
    lambda_ = spec.get_or_unit(Param::lambda);
    a_ = spec.get_or_unit(Param::a);
    b_ = spec.get_or_unit(Param::b);
    unit_beta_ = a_ == 1.0 && b_ == 1.0;
    switch (spec.family()) {
      case Family::BGL:
      case Family::BL:
      case Family::GL:
      case Family::L:
        kind_ = Kind::lindley;
        log_const_ = std::log(alpha_) + 2.0 * std::log(lambda_) - log_beta(a_, b_) - std::log1p(lambda_);
        break;
      case Family::BW:
      case Family::W:
      case Family::BE:
        kind_ = Kind::weibull;
        log_const_ = std::log(alpha_) + alpha_ * std::log(lambda_) - log_beta(a_, b_);
        break;
      case Family::GAM:
        kind_ = Kind::gamma;
        log_const_ = alpha_ * std::log(lambda_) - log_gamma(alpha_);
        break;
      case Family::LogN:
        kind_ = Kind::lognormal;
        log_const_ = -std::log(lambda_) - detail::kHalfLog2Pi;
        break;
    }
  }

  [[nodiscard]] const FamilySpec& spec() const { return spec_; }

  /// ln f(x) for x > 0. -inf when the density underflows; NaN or +inf
  /// raise bgl::overflow_error.
  [[nodiscard]] double log_pdf(double x) const {
    if (!(x > 0.0)) throw bgl::domain_error("log_pdf: x must be positive");
    if (std::isinf(x)) return -std::numeric_limits<double>::infinity();
    double lp = log_const_;
    switch (kind_) {
      case Kind::lindley: {
        const auto pt = detail::lindley_point(lambda_, x);
        lp += std::log1p(x) - lambda_ * x;
        const double power = a_ * alpha_ - 1.0;
        if (power != 0.0) lp += power * pt.log_v;
        if (b_ != 1.0) {
          const double w = alpha_ * pt.log_v;
          lp += (b_ - 1.0) * detail::log1m_exp(w, std::log(alpha_) + pt.log_neg_log_v);
        }
        break;
      }
      case Kind::weibull: {
        const double log_x = std::log(x);
        const double log_z = alpha_ * (std::log(lambda_) + log_x);
        const double z = std::exp(log_z);
        lp += (alpha_ - 1.0) * log_x - b_ * z;
        if (a_ != 1.0) lp += (a_ - 1.0) * detail::log1m_exp(-z, log_z);
        break;
      }
      case Kind::gamma:
        lp += (alpha_ - 1.0) * std::log(x) - lambda_ * x;
        break;
      case Kind::lognormal: {
        const double log_x = std::log(x);
        const double z = (log_x - alpha_) / lambda_;
        lp += -log_x - 0.5 * z * z;
        break;
      }
    }
    if (std::isnan(lp) || lp == std::numeric_limits<double>::infinity()) {
      throw bgl::overflow_error("log_pdf: non-finite log density for " + spec_.to_string() +
                                " at x=" + std::to_string(x));
    }
    return lp;
  }

  [[nodiscard]] double pdf(double x) const { return std::exp(log_pdf(x)); }

  [[nodiscard]] Tails tails(double x) const {
    if (!(x >= 0.0)) throw bgl::domain_error("cdf: x must be nonnegative");
    if (x == 0.0) return {0.0, 1.0};
    if (std::isinf(x)) return {1.0, 0.0};
    switch (kind_) {
      case Kind::lindley: {
        const auto pt = detail::lindley_point(lambda_, x);
        const double w = alpha_ * pt.log_v;  // ln V^alpha
        const double log_s = detail::log1m_exp(w, std::log(alpha_) + pt.log_neg_log_v);
        const double t = std::exp(w);
        const double s = w < -1e-8 ? -std::expm1(w) : std::exp(log_s);
        if (unit_beta_) return {t, s};
        const auto bt = reg_inc_beta_tails(t, s, w, log_s, a_, b_);
        return {bt.lower, bt.upper};
      }
      case Kind::weibull: {
        const double log_z = alpha_ * (std::log(lambda_) + std::log(x));
        const double z = std::exp(log_z);
        const double t = -std::expm1(-z);
        const double s = std::exp(-z);
        if (unit_beta_) return {t, s};
        const auto bt = reg_inc_beta_tails(t, s, detail::log1m_exp(-z, log_z), -z, a_, b_);
        return {bt.lower, bt.upper};
      }
      case Kind::gamma: {
        const auto gt = reg_inc_gamma_tails(alpha_, lambda_ * x);
        return {gt.lower, gt.upper};
      }
      case Kind::lognormal: {
        const double z = (std::log(x) - alpha_) / lambda_;
        return {std_normal_cdf(z), std_normal_cdf(-z)};
      }
    }
    return {0.0, 1.0};
  }

  [[nodiscard]] double cdf(double x) const { return tails(x).cdf; }
  [[nodiscard]] double sf(double x) const { return tails(x).sf; }

  /// x with cdf(x) = p for p in (0,1).
  [[nodiscard]] double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw bgl::domain_error("quantile: p must lie in (0, 1)");
    switch (kind_) {
      case Kind::lindley: return lindley_quantile(p);
      case Kind::weibull: {
        // z = -ln(1 - t) where t solves I_t(a,b) = p; z ~ t for tiny t
        const auto root = detail::beta_layer_inverse(p, a_, b_, unit_beta_);
        const double log_z = root.log_t < -30.0 ? root.log_t : std::log(-root.log_s);
        return std::max(std::exp(log_z / alpha_) / lambda_, detail::kSmallestPositive);
      }
      case Kind::gamma: {
        const double start = (alpha_ + 20.0 * std::sqrt(alpha_)) / lambda_;
        return probability_quantile(p, start);
      }
      case Kind::lognormal:
        return std::max(std::exp(alpha_ + lambda_ * std_normal_quantile(p)), detail::kSmallestPositive);
    }
    return 0.0;
  }

 private:
  enum class Kind { lindley, weibull, gamma, lognormal };

  // Stage one inverts the beta layer (t = V^alpha), stage two inverts the
  // monotone Lindley CDF, on ln V for the lower half and on -ln u above it.
  [[nodiscard]] double lindley_quantile(double p) const {
    const auto [log_t, log_s] = detail::beta_layer_inverse(p, a_, b_, unit_beta_);
    const double log_v_target = log_t / alpha_;
    const double start = detail::lindley_mean(lambda_) + 20.0 * detail::lindley_sd(lambda_);
    const double lambda = lambda_;
    if (log_v_target <= -std::numbers::ln2) {
      return detail::solve_increasing(
          [lambda](double x) {
            const auto pt = detail::lindley_point(lambda, x);
            const double slope = std::exp(std::log(x) + detail::lindley_log_density(lambda, x) - pt.log_v);
            return std::pair{pt.log_v, slope};
          },
          log_v_target, start);
    }
    const double log_u_target =
        log_v_target < 0.0 ? std::log(-std::expm1(log_v_target)) : log_s - std::log(alpha_);
    return detail::solve_increasing(
        [lambda](double x) {
          const auto pt = detail::lindley_point(lambda, x);
          const double slope = std::exp(std::log(x) + detail::lindley_log_density(lambda, x) - pt.log_u);
          return std::pair{-pt.log_u, slope};
        },
        -log_u_target, start);
  }

  [[nodiscard]] double probability_quantile(double p, double start) const {
    const bool upper = p > 0.5;
    const double target = upper ? -(1.0 - p) : p;
    return detail::solve_increasing(
        [this, upper](double x) {
          const Tails t = tails(x);
          const double slope = std::exp(std::log(x) + log_pdf(x));
          return std::pair{upper ? -t.sf : t.cdf, slope};
        },
        target, start);
  }

  FamilySpec spec_;
  Kind kind_ = Kind::lindley;
  double alpha_ = 1.0;
  double lambda_ = 1.0;
  double a_ = 1.0;
  double b_ = 1.0;
  double log_const_ = 0.0;
  bool unit_beta_ = true;
};

inline double log_pdf(const FamilySpec& spec, double x) { return Density(spec).log_pdf(x); }
inline double pdf(const FamilySpec& spec, double x) { return Density(spec).pdf(x); }
inline double cdf(const FamilySpec& spec, double x) { return Density(spec).cdf(x); }

/// 1 - cdf, computed directly rather than by subtraction.
inline double survival(const FamilySpec& spec, double x) { return Density(spec).sf(x); }

inline double quantile(const FamilySpec& spec, double p) { return Density(spec).quantile(p); }

/// Uniform on the open interval (0,1) from the top 53 bits of a 64-bit draw.
/// Unlike std::uniform_real_distribution this is the same on every
/// standard library.
inline double open_unit_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// n inverse-transform draws; identical seeds give identical samples.
inline Sample sample(const FamilySpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw bgl::domain_error("sample: n must be at least 1");
  const Density density(spec);
  std::mt19937_64 rng(seed);
  std::vector<double> values;
  values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) values.push_back(density.quantile(open_unit_uniform(rng)));
  return Sample(std::move(values));
}

/// E[X^order] by adaptive quadrature on ln x. The integration window grows
/// outwards from the median until the integrand falls 17 orders of magnitude
/// below its peak; a window that runs off the representable range is a
/// divergence.
inline double moment(const FamilySpec& spec, int order) {
  if (order < 1) throw bgl::domain_error("moment: order must be at least 1");
  const Density density(spec);
  auto integrand = [&](double y) {
    const double lp = density.log_pdf(std::exp(y));
    return std::exp((order + 1) * y + lp);
  };
  const double center = std::log(density.quantile(0.5));
  constexpr double step = 0.5;
  constexpr double drop = 1e-17;
  constexpr double y_max = 700.0;
  double peak = integrand(center);

  double hi = center;
  double prev = peak;
  for (;;) {
    hi += step;
    if (hi > y_max) throw divergence_error("moment: integrand of order " + std::to_string(order) + " does not decay");
    const double v = integrand(hi);
    peak = std::max(peak, v);
    if (v < drop * peak && v <= prev) break;
    prev = v;
  }
  double lo = center;
  prev = integrand(center);
  for (;;) {
    lo -= step;
    if (lo < -740.0) break;
    const double v = integrand(lo);
    peak = std::max(peak, v);
    if (v < drop * peak && v <= prev) break;
    prev = v;
  }
  const auto result = integrate(integrand, lo, hi, 1e-10);
  if (!(result.error <= 1e-8 * std::fabs(result.value)) || !std::isfinite(result.value)) {
    throw divergence_error("moment: quadrature failed its convergence check");
  }
  return result.value;
}

/// The lower-parameter family that `spec` collapses to when its extra
/// parameters sit at their embedding values (within 1e-12), e.g.
/// BGL(1, l, a, b) -> BL(l, a, b), BGL(al, l, 1, 1) -> GL(al, l),
/// BW(al, l, 1, 1) -> W(al, l). Reductions compose down to the smallest
/// family; std::nullopt when no rule applies.
inline std::optional<FamilySpec> reduce_to_submodel(const FamilySpec& spec) {
  auto unit = [](double v) { return std::fabs(v - 1.0) <= 1e-12; };
  const double alpha = spec.get_or_unit(Param::alpha);
  const double lambda = spec.get_or_unit(Param::lambda);
  const double a = spec.get_or_unit(Param::a);
  const double b = spec.get_or_unit(Param::b);
  std::optional<FamilySpec> out;
  switch (spec.family()) {
    case Family::BGL:
      if (unit(a) && unit(b)) {
        out = unit(alpha) ? FamilySpec(Family::L, {lambda}) : FamilySpec(Family::GL, {alpha, lambda});
      } else if (unit(alpha)) {
        out = FamilySpec(Family::BL, {lambda, a, b});
      }
      break;
    case Family::BL:
      if (unit(a) && unit(b)) out = FamilySpec(Family::L, {lambda});
      break;
    case Family::GL:
      if (unit(alpha)) out = FamilySpec(Family::L, {lambda});
      break;
    case Family::BW:
      if (unit(a) && unit(b)) {
        out = FamilySpec(Family::W, {alpha, lambda});
      } else if (unit(alpha)) {
        out = FamilySpec(Family::BE, {lambda, a, b});
      }
      break;
    case Family::BE:
      if (unit(a) && unit(b)) out = FamilySpec(Family::W, {1.0, lambda});
      break;
    case Family::L:
    case Family::GAM:
    case Family::W:
    case Family::LogN:
      break;
  }
  return out;
}

}  // namespace bgl

#endif
