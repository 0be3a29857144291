#ifndef BGL_FAMILY_HPP
#define BGL_FAMILY_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "bgl/errors.hpp"

namespace bgl {

/// The nine families compared in the wind-speed study. Parameter order per
/// family follows the usual notation:
///   BGL(alpha, lambda, a, b)   BL(lambda, a, b)   GL(alpha, lambda)   L(lambda)
///   GAM(alpha, lambda)         BW(alpha, lambda, a, b)               W(alpha, lambda)
///   BE(lambda, a, b)           LogN(alpha, lambda)  (log-mean, log-sd)
enum class Family { BGL, BL, GL, L, GAM, BW, W, BE, LogN };

inline constexpr std::array<Family, 9> kAllFamilies = {Family::BGL, Family::BL, Family::GL, Family::L,   Family::GAM,
                                                       Family::BW,  Family::W,  Family::BE, Family::LogN};

enum class Param { alpha, lambda, a, b };

inline constexpr double kMinParam = 1e-8;
inline constexpr double kMaxParam = 1e8;

inline constexpr std::string_view family_name(Family f) {
  switch (f) {
    case Family::BGL: return "BGL";
    case Family::BL: return "BL";
    case Family::GL: return "GL";
    case Family::L: return "L";
    case Family::GAM: return "GAM";
    case Family::BW: return "BW";
    case Family::W: return "W";
    case Family::BE: return "BE";
    case Family::LogN: return "LogN";
  }
  return "?";
}

inline std::optional<Family> parse_family(std::string_view text) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
  };
  const std::string key = lower(text);
  for (Family f : kAllFamilies) {
    if (lower(family_name(f)) == key) return f;
  }
  return std::nullopt;
}

namespace detail {
inline constexpr Param kFourParams[] = {Param::alpha, Param::lambda, Param::a, Param::b};
inline constexpr Param kThreeParams[] = {Param::lambda, Param::a, Param::b};
inline constexpr Param kTwoParams[] = {Param::alpha, Param::lambda};
inline constexpr Param kOneParam[] = {Param::lambda};
}  // namespace detail

/// Which named parameters a family carries, in storage order.
inline constexpr std::span<const Param> family_params(Family f) {
  switch (f) {
    case Family::BGL:
    case Family::BW: return detail::kFourParams;
    case Family::BL:
    case Family::BE: return detail::kThreeParams;
    case Family::GL:
    case Family::GAM:
    case Family::W:
    case Family::LogN: return detail::kTwoParams;
    case Family::L: return detail::kOneParam;
  }
  return {};
}

inline constexpr std::size_t parameter_count(Family f) { return family_params(f).size(); }

inline constexpr std::string_view param_name(Param p) {
  switch (p) {
    case Param::alpha: return "alpha";
    case Param::lambda: return "lambda";
    case Param::a: return "a";
    case Param::b: return "b";
  }
  return "?";
}

/// LogN's alpha is a log-mean and may take any finite value; every other
/// parameter is a positive shape, rate or scale.
inline constexpr bool param_is_positive(Family f, Param p) { return !(f == Family::LogN && p == Param::alpha); }

/// Immutable (family, parameter vector) pair. Construction validates the
/// parameter count and ranges: positive parameters must lie in
/// [kMinParam, kMaxParam]; LogN's alpha must be finite with |alpha| <= kMaxParam.
class FamilySpec {
 public:
  FamilySpec(Family family, std::span<const double> params) : family_(family) {
    const auto names = family_params(family);
    if (params.size() != names.size()) {
      throw bgl::domain_error(std::string(family_name(family)) + " takes " + std::to_string(names.size()) +
                              " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double v = params[i];
      const bool ok = param_is_positive(family, names[i]) ? (v >= kMinParam && v <= kMaxParam)
                                                          : (std::isfinite(v) && std::fabs(v) <= kMaxParam);
      if (!ok) {
        throw bgl::domain_error(std::string(family_name(family)) + ": parameter " + std::string(param_name(names[i])) +
                                " = " + std::to_string(v) + " is outside its valid range");
      }
      values_[i] = v;
    }
  }

  FamilySpec(Family family, std::initializer_list<double> params)
      : FamilySpec(family, std::span<const double>(params.begin(), params.size())) {}

  [[nodiscard]] Family family() const { return family_; }
  [[nodiscard]] std::size_t size() const { return parameter_count(family_); }
  [[nodiscard]] std::span<const double> params() const { return {values_.data(), size()}; }

  [[nodiscard]] std::optional<double> get(Param p) const {
    const auto names = family_params(family_);
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == p) return values_[i];
    }
    return std::nullopt;
  }

  /// Parameter value, or the value that embeds this family in its parent
  /// (1 for absent alpha, a, b).
  [[nodiscard]] double get_or_unit(Param p) const { return get(p).value_or(1.0); }

  [[nodiscard]] std::string to_string() const {
    std::string out(family_name(family_));
    out += '(';
    for (std::size_t i = 0; i < size(); ++i) {
      if (i) out += ", ";
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", values_[i]);
      out += buf;
    }
    out += ')';
    return out;
  }

  friend bool operator==(const FamilySpec& x, const FamilySpec& y) {
    if (x.family_ != y.family_) return false;
    return std::equal(x.params().begin(), x.params().end(), y.params().begin());
  }

 private:
  Family family_;
  std::array<double, 4> values_{};
};

}  // namespace bgl

#endif
