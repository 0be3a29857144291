#ifndef BGL_GOF_HPP
#define BGL_GOF_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bgl/distributions.hpp"
#include "bgl/empirical.hpp"
#include "bgl/errors.hpp"
#include "bgl/family.hpp"
#include "bgl/fitting.hpp"
#include "bgl/sample.hpp"
#include "bgl/summation.hpp"

namespace bgl {

/// Probabilities are clamped to this floor before taking logs in the AD sum.
inline constexpr double kAdProbabilityFloor = 1e-300;

struct InformationCriteria {
  double aic;
  double bic;
};

inline InformationCriteria information_criteria(double neg2ll, int p, long long n) {
  if (p < 1) throw bgl::domain_error("information_criteria: p must be at least 1");
  if (n < 1) throw bgl::domain_error("information_criteria: n must be at least 1");
  return {2.0 * p + neg2ll, p * std::log(static_cast<double>(n)) + neg2ll};
}

/// KS distance of sorted model probabilities F(x_(1)) <= ... <= F(x_(n))
/// from the uniform step function.
inline double ks_from_probabilities(std::span<const double> sorted_cdf) {
  const double n = static_cast<double>(sorted_cdf.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted_cdf.size(); ++i) {
    const double f = sorted_cdf[i];
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

inline double ks_statistic(const FamilySpec& spec, const Sample& sample) {
  if (sample.empty()) throw bgl::domain_error("ks_statistic: empty sample");
  const Density density(spec);
  std::vector<double> f = sample.sorted();
  for (double& x : f) x = density.cdf(x);
  return ks_from_probabilities(f);
}

struct AdStatistic {
  double value;
  std::size_t clamped;  // probabilities raised to kAdProbabilityFloor
};

/// Ordered-sample AD from per-point tails sorted by x. ln(1 - F) is taken
/// from the survival function, so the upper tail keeps full precision.
inline AdStatistic ad_from_tails(std::span<const Tails> sorted) {
  const std::size_t n = sorted.size();
  if (n == 0) throw bgl::domain_error("ad_statistic: empty sample");
  std::size_t clamped = 0;
  auto log_clamped = [&](double p) {
    if (!(p >= kAdProbabilityFloor)) {
      ++clamped;
      p = kAdProbabilityFloor;
    }
    return std::log(std::min(p, 1.0));
  };
  CompensatedSum sum;
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double weight = (2.0 * static_cast<double>(i) + 1.0) / dn;
    sum += weight * (log_clamped(sorted[i].cdf) + log_clamped(sorted[n - 1 - i].sf));
  }
  return {-dn - sum.value(), clamped};
}

inline AdStatistic ad_statistic_detailed(const FamilySpec& spec, const Sample& sample) {
  if (sample.empty()) throw bgl::domain_error("ad_statistic: empty sample");
  const Density density(spec);
  const std::vector<double> xs = sample.sorted();
  std::vector<Tails> tails;
  tails.reserve(xs.size());
  for (double x : xs) tails.push_back(density.tails(x));
  return ad_from_tails(tails);
}

inline double ad_statistic(const FamilySpec& spec, const Sample& sample) {
  return ad_statistic_detailed(spec, sample).value;
}

struct PercentileBias {
  double level;
  double observed;
  double estimated;
  double bias;
};

inline PercentileBias percentile_bias(const FamilySpec& spec, const Sample& sample, double level,
                                      QuantileRule rule = QuantileRule::interpolated) {
  if (!(level > 0.0 && level < 1.0)) throw bgl::domain_error("percentile_bias: level must lie in (0, 1)");
  const std::vector<double> xs = sample.sorted();
  const double observed = empirical_quantile(xs, level, rule);
  const double estimated = quantile(spec, level);
  return {level, observed, estimated, estimated - observed};
}

inline std::size_t count_ties(std::span<const double> sorted) {
  std::size_t ties = 0;
  for (std::size_t i = 1; i < sorted.size(); ++i) ties += sorted[i] == sorted[i - 1] ? 1 : 0;
  return ties;
}

struct GofReport {
  double neg2_log_lik;
  double aic;
  double bic;
  double ks;
  double ad;
  int p;
  long long n;
  std::size_t ad_clamped;
  std::size_t ties;
};

inline GofReport gof_report(const FamilySpec& spec, const Sample& sample) {
  if (sample.empty()) throw bgl::domain_error("gof_report: empty sample");
  const double neg2ll = -2.0 * log_likelihood(spec, sample);
  const int p = static_cast<int>(spec.size());
  const auto n = static_cast<long long>(sample.n());
  const auto ic = information_criteria(neg2ll, p, n);
  const Density density(spec);
  const std::vector<double> xs = sample.sorted();
  std::vector<Tails> tails;
  std::vector<double> cdfs;
  tails.reserve(xs.size());
  cdfs.reserve(xs.size());
  for (double x : xs) {
    tails.push_back(density.tails(x));
    cdfs.push_back(tails.back().cdf);
  }
  const auto ad = ad_from_tails(tails);
  return {neg2ll, ic.aic, ic.bic, ks_from_probabilities(cdfs), ad.value, p, n, ad.clamped, count_ties(xs)};
}

}  // namespace bgl

#endif
