#ifndef BGL_SAMPLE_HPP
#define BGL_SAMPLE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bgl/errors.hpp"

namespace bgl {

/// Inclusive calendar-year interval.
struct YearRange {
  int first = 0;
  int last = 0;

  [[nodiscard]] bool contains(int year) const { return year >= first && year <= last; }
  [[nodiscard]] std::string to_string() const {
    return first == last ? std::to_string(first) : std::to_string(first) + "-" + std::to_string(last);
  }
  friend bool operator==(const YearRange&, const YearRange&) = default;
};

/// A validated vector of strictly positive observations (wind speeds in m/s)
/// plus where they came from. Synthetic samples carry no provenance.
class Sample {
 public:
  Sample() = default;

  explicit Sample(std::vector<double> values, std::optional<int> height_m = std::nullopt,
                  std::optional<YearRange> years = std::nullopt)
      : values_(std::move(values)), height_m_(height_m), years_(years) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) {
        throw bgl::domain_error("Sample: value at index " + std::to_string(i) + " is not a positive finite number");
      }
    }
  }

  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::size_t n() const { return values_.size(); }
  [[nodiscard]] bool empty() const { return values_.empty(); }
  [[nodiscard]] std::optional<int> height_m() const { return height_m_; }
  [[nodiscard]] std::optional<YearRange> years() const { return years_; }

  [[nodiscard]] std::vector<double> sorted() const {
    std::vector<double> out = values_;
    std::stable_sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const Sample&, const Sample&) = default;

 private:
  std::vector<double> values_;
  std::optional<int> height_m_;
  std::optional<YearRange> years_;
};

}  // namespace bgl

#endif
