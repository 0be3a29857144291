#ifndef BGL_EMPIRICAL_HPP
#define BGL_EMPIRICAL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "bgl/errors.hpp"

namespace bgl {

enum class QuantileRule {
  interpolated,  // linear between order statistics at (i-1)/(n-1)
  step,          // smallest x_(i) with i/n >= level
};

inline double empirical_quantile(std::span<const double> sorted, double level,
                                 QuantileRule rule = QuantileRule::interpolated) {
  if (sorted.empty()) throw bgl::domain_error("empirical_quantile: empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw bgl::domain_error("empirical_quantile: level must lie in [0, 1]");
  const std::size_t n = sorted.size();
  if (rule == QuantileRule::step) {
    const auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
    return sorted[std::clamp<std::size_t>(k, 1, n) - 1];
  }
  const double h = level * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace bgl

#endif
