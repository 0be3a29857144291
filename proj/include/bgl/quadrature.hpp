#ifndef BGL_QUADRATURE_HPP
#define BGL_QUADRATURE_HPP

#include <cmath>
#include <queue>
#include <vector>

#include "bgl/errors.hpp"

namespace bgl {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int intervals = 0;
};

namespace detail {

struct GkSegment {
  double lo, hi, value, error;
  bool operator<(const GkSegment& other) const { return error < other.error; }
};

// 15-point Kronrod rule with embedded 7-point Gauss rule (QUADPACK nodes).
template <class F>
GkSegment gauss_kronrod_15(F&& f, double lo, double hi) {
  static constexpr double xgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                    0.207784955007898467600689403773245, 0.0};
  static constexpr double wgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr double wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                   0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = f(center);
  double kronrod = fc * wgk[7];
  double gauss = fc * wg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * xgk[j];
    const double fsum = f(center - dx) + f(center + dx);
    kronrod += wgk[j] * fsum;
    if (j % 2 == 1) gauss += wg[j / 2] * fsum;
  }
  return {lo, hi, kronrod * half, std::fabs((kronrod - gauss) * half)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod quadrature of f over [lo, hi]: the
/// segment with the largest error estimate is bisected until the summed
/// estimate drops below max(abs_tol, rel_tol * |integral|).
template <class F>
QuadratureResult integrate(F&& f, double lo, double hi, double rel_tol = 1e-10, double abs_tol = 0.0,
                           int max_intervals = 4000) {
  std::priority_queue<detail::GkSegment> work;
  auto first = detail::gauss_kronrod_15(f, lo, hi);
  double total = first.value;
  double error = first.error;
  work.push(first);
  int intervals = 1;
  while (error > std::max(abs_tol, rel_tol * std::fabs(total)) && intervals < max_intervals) {
    const auto worst = work.top();
    work.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    const auto left = detail::gauss_kronrod_15(f, worst.lo, mid);
    const auto right = detail::gauss_kronrod_15(f, mid, worst.hi);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    work.push(left);
    work.push(right);
    ++intervals;
  }
  // re-sum to shed the drift of the running updates
  total = 0.0;
  error = 0.0;
  while (!work.empty()) {
    total += work.top().value;
    error += work.top().error;
    work.pop();
  }
  return {total, error, intervals};
}

}  // namespace bgl

#endif
