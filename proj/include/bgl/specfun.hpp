#ifndef BGL_SPECFUN_HPP
#define BGL_SPECFUN_HPP

// Special functions behind the distribution families: log-gamma, digamma,
// log-beta, the regularized incomplete beta and gamma functions, their
// inverses, and the standard normal CDF/quantile.
//
// Everything here is a pure function of its arguments. Domain violations
// throw bgl::domain_error; an iteration cap breach throws
// bgl::convergence_error instead of returning a partial value.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "bgl/errors.hpp"

namespace bgl {

namespace detail {

inline constexpr double kEulerGamma = 0.57721566490153286061;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

// B_2, B_4, ..., B_18
inline constexpr std::array<double, 9> kBernoulliEven = {
    1.0 / 6.0,       -1.0 / 30.0, 1.0 / 42.0,       -1.0 / 30.0, 5.0 / 66.0,
    -691.0 / 2730.0, 7.0 / 6.0,   -3617.0 / 510.0, 43867.0 / 798.0};

constexpr double int_pow_inv(int n, int k) {
  double p = 1.0;
  const double inv = 1.0 / n;
  for (int i = 0; i < k; ++i) p *= inv;
  return p;
}

// zeta(k) by Euler-Maclaurin with N = 10 explicit terms.
constexpr double zeta_int(int k) {
  constexpr int n_terms = 10;
  double s = 0.0;
  for (int n = n_terms - 1; n >= 1; --n) s += int_pow_inv(n, k);
  s += int_pow_inv(n_terms, k - 1) / (k - 1);
  s += 0.5 * int_pow_inv(n_terms, k);
  double rising = k;  // k (k+1) ... (k+2j-2)
  double factorial = 2.0;
  for (int j = 1; j <= 8; ++j) {
    s += kBernoulliEven[j - 1] / factorial * rising * int_pow_inv(n_terms, k + 2 * j - 1);
    rising *= static_cast<double>(k + 2 * j - 1) * (k + 2 * j);
    factorial *= static_cast<double>(2 * j + 1) * (2 * j + 2);
  }
  return s;
}

inline constexpr int kZetaTerms = 42;

constexpr std::array<double, kZetaTerms> make_zeta_table() {
  std::array<double, kZetaTerms> t{};
  for (int k = 2; k < kZetaTerms; ++k) t[k] = zeta_int(k);
  return t;
}

inline constexpr std::array<double, kZetaTerms> kZeta = make_zeta_table();

// ln Gamma(1 + x) for |x| <= 0.25, accurate relative to the result.
inline double log_gamma_1p_series(double x) {
  double term = -x;
  double s = -kEulerGamma * x;
  for (int k = 2; k < kZetaTerms; ++k) {
    term *= -x;
    s += kZeta[k] * term / k;
  }
  return s;
}

inline double log_gamma_stirling(double a) {
  const double inv = 1.0 / a;
  const double inv2 = inv * inv;
  double corr = 0.0;
  double pw = inv;
  for (int k = 1; k <= 8; ++k) {
    corr += kBernoulliEven[k - 1] / (2.0 * k * (2.0 * k - 1.0)) * pw;
    pw *= inv2;
  }
  return (a - 0.5) * std::log(a) - a + kHalfLog2Pi + corr;
}

[[noreturn]] inline void throw_domain(const char* fn, const std::string& what) {
  throw bgl::domain_error(std::string(fn) + ": " + what);
}

}  // namespace detail

/// ln Gamma(a) for a > 0.
inline double log_gamma(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) detail::throw_domain("log_gamma", "argument must be positive and finite");
  if (std::fabs(a - 1.0) <= 0.25) return detail::log_gamma_1p_series(a - 1.0);
  if (std::fabs(a - 2.0) <= 0.25) {
    const double x = a - 2.0;
    return std::log1p(x) + detail::log_gamma_1p_series(x);
  }
  if (a < 0.75) return log_gamma(a + 1.0) - std::log(a);
  if (a >= 15.0) return detail::log_gamma_stirling(a);
  double product = 1.0;
  double shifted = a;
  while (shifted < 15.0) {
    product *= shifted;
    shifted += 1.0;
  }
  return detail::log_gamma_stirling(shifted) - std::log(product);
}

/// ln B(a, b); symmetric in its arguments bit-for-bit.
inline double log_beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    detail::throw_domain("log_beta", "arguments must be positive and finite");
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  return log_gamma(lo) + log_gamma(hi) - log_gamma(lo + hi);
}

/// Psi(a) = Gamma'(a) / Gamma(a) for a > 0.
inline double digamma(double a) {
  if (!(a > 0.0) || !std::isfinite(a)) detail::throw_domain("digamma", "argument must be positive and finite");
  double shift = 0.0;
  while (a < 10.0) {
    shift += 1.0 / a;
    a += 1.0;
  }
  const double inv2 = 1.0 / (a * a);
  double series = 0.0;
  double pw = inv2;
  for (int k = 1; k <= 7; ++k) {
    series += detail::kBernoulliEven[k - 1] / (2.0 * k) * pw;
    pw *= inv2;
  }
  return std::log(a) - 0.5 / a - series - shift;
}

/// I_x(a,b) together with its complement 1 - I_x(a,b), each accurate
/// in its own right.
struct BetaTails {
  double lower;
  double upper;
};

namespace detail {

inline constexpr int kBetaMaxIterations = 300;
inline constexpr double kBetaTolerance = 1e-15;

// Continued fraction for I_x(a,b) (modified Lentz). Converges fast for
// x < (a+1)/(a+b+2).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxIterations; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= kBetaTolerance) return h;
  }
  throw convergence_error("reg_inc_beta: continued fraction did not converge within 300 iterations (a=" +
                          std::to_string(a) + ", b=" + std::to_string(b) + ", x=" + std::to_string(x) + ")");
}

}  // namespace detail

/// Regularized incomplete beta at x with complement y = 1 - x supplied
/// separately (together with their logarithms) so that arguments produced
/// by log-domain code keep their precision near both ends.
inline BetaTails reg_inc_beta_tails(double x, double y, double log_x, double log_y, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    detail::throw_domain("reg_inc_beta", "shape parameters must be positive and finite");
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0))
    detail::throw_domain("reg_inc_beta", "x must lie in [0, 1]");
  // x or y may have underflowed while its logarithm is still finite; only
  // an exact endpoint short-circuits.
  if (x == 0.0 && std::isinf(log_x)) return {0.0, 1.0};
  if (y == 0.0 && std::isinf(log_y)) return {1.0, 0.0};
  const double log_front = a * log_x + b * log_y - log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    const double lower = std::exp(log_front) * detail::beta_continued_fraction(a, b, x) / a;
    return {lower, 1.0 - lower};
  }
  const double upper = std::exp(log_front) * detail::beta_continued_fraction(b, a, y) / b;
  return {1.0 - upper, upper};
}

inline BetaTails reg_inc_beta_tails(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0)) detail::throw_domain("reg_inc_beta", "x must lie in [0, 1]");
  const double y = 1.0 - x;
  const double log_x = x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
  const double log_y = std::log1p(-x);
  return reg_inc_beta_tails(x, y, log_x, log_y, a, b);
}

/// I_x(a,b) = (1/B(a,b)) * integral_0^x t^(a-1) (1-t)^(b-1) dt.
inline double reg_inc_beta(double x, double a, double b) { return reg_inc_beta_tails(x, a, b).lower; }

/// ln(x / (1 - x)) for the x in [0,1] with I_x(a,b) = p, so that both x and
/// 1 - x can be recovered without cancellation. Newton on the logit,
/// safeguarded by bisection of a bracket that always contains the root;
/// the logit is confined to [-740, 740].
inline double reg_inc_beta_inv_logit(double p, double a, double b) {
  if (!(p >= 0.0 && p <= 1.0)) detail::throw_domain("reg_inc_beta_inv", "p must lie in [0, 1]");
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    detail::throw_domain("reg_inc_beta_inv", "shape parameters must be positive and finite");
  if (p == 0.0) return -HUGE_VAL;
  if (p == 1.0) return HUGE_VAL;

  const double lbeta = log_beta(a, b);
  const bool upper_side = p > 0.5;
  const double q = 1.0 - p;

  // ln(1 + e^v) without overflow
  auto softplus = [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };

  // Residual I - p, evaluated on the tail that keeps it accurate.
  auto residual = [&](double z, double& slope) {
    const double log_x = -softplus(-z);
    const double log_y = -softplus(z);
    const BetaTails t = reg_inc_beta_tails(std::exp(log_x), std::exp(log_y), log_x, log_y, a, b);
    slope = std::exp(a * log_x + b * log_y - lbeta);  // dI/dz
    return upper_side ? q - t.upper : t.lower - p;
  };

  constexpr double z_limit = 740.0;
  double lo = -z_limit;
  double hi = z_limit;

  // Starting point from the power-law behaviour of whichever tail is nearer.
  double z;
  if (a >= 1.0 && b >= 1.0) {
    z = std::log(a / b);
  } else {
    const double log_x0 = (std::log(p) + std::log(a) + lbeta) / a;
    const double log_y0 = (std::log(q) + std::log(b) + lbeta) / b;
    if (log_x0 < std::log(0.5)) {
      z = log_x0 - std::log1p(-std::exp(log_x0));
    } else if (log_y0 < std::log(0.5)) {
      z = std::log1p(-std::exp(log_y0)) - log_y0;
    } else {
      z = 0.0;
    }
  }
  z = std::clamp(z, lo, hi);

  for (int iter = 0; iter < 400; ++iter) {
    double slope = 0.0;
    const double f = residual(z, slope);
    if (f == 0.0) return z;
    if (f < 0.0) {
      lo = z;
    } else {
      hi = z;
    }
    double next = (slope > 0.0 && std::isfinite(slope)) ? z - f / slope : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::fabs(next - z);
    z = next;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(z)) ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(z))) {
      return z;
    }
  }
  if (hi - lo > 1e-6 * std::max(1.0, std::fabs(z)))
    throw convergence_error("reg_inc_beta_inv: root search did not converge");
  return z;
}

/// x in [0,1] with I_x(a,b) = p.
inline double reg_inc_beta_inv(double p, double a, double b) {
  return 1.0 / (1.0 + std::exp(-reg_inc_beta_inv_logit(p, a, b)));
}

/// Regularized lower and upper incomplete gamma P(a,x), Q(a,x).
struct GammaTails {
  double lower;
  double upper;
};

inline GammaTails reg_inc_gamma_tails(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) detail::throw_domain("reg_inc_gamma", "a must be positive and finite");
  if (!(x >= 0.0)) detail::throw_domain("reg_inc_gamma", "x must be nonnegative");
  if (x == 0.0) return {0.0, 1.0};
  if (std::isinf(x)) return {1.0, 0.0};
  constexpr int max_iterations = 100000;
  constexpr double eps = 1e-16;
  const double log_front = -x + a * std::log(x) - log_gamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int n = 0; n < max_iterations; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * eps) {
        const double lower = sum * std::exp(log_front);
        return {lower, 1.0 - lower};
      }
    }
    throw convergence_error("reg_inc_gamma: series did not converge");
  }
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= max_iterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) {
      const double upper = std::exp(log_front) * h;
      return {1.0 - upper, upper};
    }
  }
  throw convergence_error("reg_inc_gamma: continued fraction did not converge");
}

/// P(a,x) = gamma(a,x) / Gamma(a).
inline double reg_inc_gamma_lower(double a, double x) { return reg_inc_gamma_tails(a, x).lower; }

/// Phi(z). Accepts +-inf; NaN is a domain error.
inline double std_normal_cdf(double z) {
  if (std::isnan(z)) detail::throw_domain("std_normal_cdf", "argument is NaN");
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

namespace detail {

// Acklam's rational approximation, lower half, followed by Halley steps.
inline double normal_quantile_lower(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int i = 0; i < 2; ++i) {
    const double e = std_normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace detail

/// z with Phi(z) = p, for p in (0,1); the endpoints map to -+inf.
inline double std_normal_quantile(double p) {
  if (!(p >= 0.0 && p <= 1.0)) detail::throw_domain("std_normal_quantile", "p must lie in [0, 1]");
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  if (p > 0.5) return -detail::normal_quantile_lower(1.0 - p);
  return detail::normal_quantile_lower(p);
}

}  // namespace bgl

#endif
