#ifndef BGL_SUMMATION_HPP
#define BGL_SUMMATION_HPP

#include <cmath>

namespace bgl {

// Neumaier's variant of Kahan summation. Adding -inf is sticky.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::isfinite(t)) {
      if (std::fabs(sum_) >= std::fabs(v)) {
        carry_ += (sum_ - t) + v;
      } else {
        carry_ += (v - t) + sum_;
      }
    }
    sum_ = t;
  }

  CompensatedSum& operator+=(double v) {
    add(v);
    return *this;
  }

  [[nodiscard]] double value() const {
    return std::isfinite(sum_) ? sum_ + carry_ : sum_;
  }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace bgl

#endif
