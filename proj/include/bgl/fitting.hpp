#ifndef BGL_FITTING_HPP
#define BGL_FITTING_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "bgl/distributions.hpp"
#include "bgl/errors.hpp"
#include "bgl/family.hpp"
#include "bgl/optimize.hpp"
#include "bgl/sample.hpp"
#include "bgl/specfun.hpp"
#include "bgl/summation.hpp"

namespace bgl {

enum class Optimizer { simplex, quasi_newton, hybrid };

struct FitConfig {
  int max_iterations = 2000;
  double gradient_tolerance = 1e-7;
  int n_starts = 12;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::hybrid;

  void validate() const {
    if (max_iterations <= 0) throw bgl::domain_error("FitConfig: max_iterations must be positive");
    if (!(gradient_tolerance > 0.0)) throw bgl::domain_error("FitConfig: gradient_tolerance must be positive");
    if (n_starts <= 0) throw bgl::domain_error("FitConfig: n_starts must be positive");
  }
};

struct StartSummary {
  std::vector<double> initial;  // natural scale
  double initial_neg2_log_lik = std::numeric_limits<double>::infinity();
  double final_neg2_log_lik = std::numeric_limits<double>::infinity();
  bool converged = false;
  long evaluations = 0;
};

struct FitResult {
  explicit FitResult(FamilySpec fitted) : spec(std::move(fitted)) {}

  FamilySpec spec;
  double neg2_log_lik = std::numeric_limits<double>::infinity();
  bool converged = false;
  long n_evaluations = 0;
  int start_index_of_best = 0;
  double gradient_norm_at_optimum = std::numeric_limits<double>::infinity();
  std::string diagnostic;
  std::vector<StartSummary> starts;
};

/// Sum of log_pdf over the sample, compensated.
inline double log_likelihood(const FamilySpec& spec, const Sample& sample) {
  const Density density(spec);
  CompensatedSum sum;
  for (double x : sample.values()) sum += density.log_pdf(x);
  return sum.value();
}

namespace detail {

/// Distinct sample values with multiplicities; wind records are quantized
/// so this shrinks likelihood loops considerably.
struct WeightedSample {
  std::vector<double> values;
  std::vector<double> weights;
  double n = 0.0;

  explicit WeightedSample(const Sample& sample) {
    std::vector<double> sorted = sample.sorted();
    for (double x : sorted) {
      if (!values.empty() && values.back() == x) {
        weights.back() += 1.0;
      } else {
        values.push_back(x);
        weights.push_back(1.0);
      }
    }
    n = static_cast<double>(sorted.size());
  }
};

inline double weighted_log_likelihood(const FamilySpec& spec, const WeightedSample& ws) {
  const Density density(spec);
  CompensatedSum sum;
  for (std::size_t i = 0; i < ws.values.size(); ++i) sum += ws.weights[i] * density.log_pdf(ws.values[i]);
  return sum.value();
}

inline std::array<double, 4> bgl_score_weighted(const FamilySpec& spec, const WeightedSample& ws) {
  if (spec.family() != Family::BGL) throw bgl::domain_error("bgl_score: spec must be BGL");
  if (ws.values.empty()) throw bgl::domain_error("bgl_score: empty sample");
  const auto p = spec.params();
  const double alpha = p[0], lambda = p[1], a = p[2], b = p[3];
  const double log_alpha = std::log(alpha);
  const double log_lambda = std::log(lambda);
  const double log1p_lambda = std::log1p(lambda);
  CompensatedSum s_log_v, s_log1m, s_ratio, s_x, s_lambda;
  for (std::size_t i = 0; i < ws.values.size(); ++i) {
    const double x = ws.values[i];
    const double w = ws.weights[i];
    const auto pt = lindley_point(lambda, x);
    if (std::isinf(pt.log_v)) {
      throw bgl::overflow_error("bgl_score: V(x) underflows at x=" + std::to_string(x));
    }
    const double wv = alpha * pt.log_v;
    const double l1m = log1m_exp(wv, log_alpha + pt.log_neg_log_v);  // ln(1 - V^alpha)
    // ln dV/dlambda
    const double log_dv = log_lambda + std::log(x) + std::log(2.0 + lambda + x + lambda * x) - lambda * x -
                          2.0 * log1p_lambda;
    s_log_v += w * pt.log_v;
    s_log1m += w * l1m;
    s_ratio += -w * std::exp(wv + pt.log_neg_log_v - l1m);
    s_x += w * x;
    s_lambda += w * ((a * alpha - 1.0) * std::exp(log_dv - pt.log_v) +
                     (1.0 - b) * std::exp(log_alpha + (alpha - 1.0) * pt.log_v + log_dv - l1m));
  }
  const double n = ws.n;
  const double psi_ab = digamma(a + b);
  std::array<double, 4> g{};
  g[0] = n / alpha + a * s_log_v.value() + (1.0 - b) * s_ratio.value();
  g[1] = n * (2.0 + lambda) / (lambda * (1.0 + lambda)) - s_x.value() + s_lambda.value();
  g[2] = n * (psi_ab - digamma(a)) + alpha * s_log_v.value();
  g[3] = n * (psi_ab - digamma(b)) + s_log1m.value();
  for (double v : g) {
    if (!std::isfinite(v)) throw bgl::overflow_error("bgl_score: non-finite component for " + spec.to_string());
  }
  return g;
}

// Unconstrained coordinates: log for positive parameters, identity for the
// lognormal location.
inline double to_natural(Family f, std::size_t i, double z) {
  return param_is_positive(f, family_params(f)[i]) ? std::exp(z) : z;
}

inline double to_transformed(Family f, std::size_t i, double v) {
  return param_is_positive(f, family_params(f)[i]) ? std::log(v) : v;
}

inline bool natural_params(Family f, std::span<const double> z, std::vector<double>& out) {
  out.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = to_natural(f, i, z[i]);
    if (!std::isfinite(out[i])) return false;
    if (param_is_positive(f, family_params(f)[i]) && (out[i] < kMinParam || out[i] > kMaxParam)) return false;
    if (!param_is_positive(f, family_params(f)[i]) && std::fabs(out[i]) > kMaxParam) return false;
  }
  return true;
}

// Mean negative log-likelihood on the transformed scale.
inline optim::Objective make_objective(Family family, const WeightedSample& ws) {
  auto value = [family, &ws](std::span<const double> z) {
    std::vector<double> theta;
    if (!natural_params(family, z, theta)) return std::numeric_limits<double>::infinity();
    try {
      const double ll = weighted_log_likelihood(FamilySpec(family, theta), ws);
      return std::isfinite(ll) ? -ll / ws.n : std::numeric_limits<double>::infinity();
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  if (family != Family::BGL) return optim::Objective(value);
  auto gradient = [&ws](std::span<const double> z, std::span<double> g) {
    std::vector<double> theta;
    if (!natural_params(Family::BGL, z, theta)) {
      std::fill(g.begin(), g.end(), std::numeric_limits<double>::quiet_NaN());
      return;
    }
    try {
      const auto score = bgl_score_weighted(FamilySpec(Family::BGL, theta), ws);
      for (std::size_t i = 0; i < 4; ++i) g[i] = -theta[i] * score[i] / ws.n;
    } catch (const std::exception&) {
      std::fill(g.begin(), g.end(), std::numeric_limits<double>::quiet_NaN());
    }
  };
  return optim::Objective(value, gradient);
}

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
  double log_mean = 0.0;
  double log_sd = 0.0;
};

inline Moments sample_moments(const WeightedSample& ws) {
  Moments m;
  CompensatedSum s, sl;
  for (std::size_t i = 0; i < ws.values.size(); ++i) {
    s += ws.weights[i] * ws.values[i];
    sl += ws.weights[i] * std::log(ws.values[i]);
  }
  m.mean = s.value() / ws.n;
  m.log_mean = sl.value() / ws.n;
  CompensatedSum v, vl;
  for (std::size_t i = 0; i < ws.values.size(); ++i) {
    const double d = ws.values[i] - m.mean;
    const double dl = std::log(ws.values[i]) - m.log_mean;
    v += ws.weights[i] * d * d;
    vl += ws.weights[i] * dl * dl;
  }
  m.sd = std::sqrt(v.value() / ws.n);
  m.log_sd = std::sqrt(vl.value() / ws.n);
  return m;
}

// Lindley rate whose mean equals m: root of m l^2 + (m-1) l - 2 = 0.
inline double lindley_rate_for_mean(double m) {
  return (-(m - 1.0) + std::sqrt((m - 1.0) * (m - 1.0) + 8.0 * m)) / (2.0 * m);
}

inline double clamp_param(double v) { return std::clamp(v, 1e-6, 1e6); }

inline std::vector<std::vector<double>> closed_form_seeds(Family family, const Moments& m) {
  const double cv = std::max(m.sd / m.mean, 1e-3);
  const double lindley = clamp_param(lindley_rate_for_mean(m.mean));
  const double weibull_shape = clamp_param(std::pow(cv, -1.086));
  const double weibull_rate = clamp_param(std::exp(log_gamma(1.0 + 1.0 / weibull_shape)) / m.mean);
  const double gamma_shape = clamp_param(1.0 / (cv * cv));
  const double gamma_rate = clamp_param(gamma_shape / m.mean);
  switch (family) {
    case Family::L:
      return {{lindley}};
    case Family::GL:
      return {{1.0, lindley}};
    case Family::BL:
      return {{lindley, 1.0, 1.0}};
    case Family::BGL:
      return {{1.0, lindley, 1.0, 1.0}};
    case Family::GAM:
      return {{gamma_shape, gamma_rate}};
    case Family::W:
      return {{weibull_shape, weibull_rate}, {1.0, clamp_param(1.0 / m.mean)}};
    case Family::BE:
      // exponential, and an exponentiated-exponential guess with gamma-like shape
      return {{clamp_param(1.0 / m.mean), 1.0, 1.0}, {clamp_param(1.0 / m.sd), gamma_shape, 1.0}};
    case Family::BW:
      return {{weibull_shape, weibull_rate, 1.0, 1.0}};
    case Family::LogN:
      return {{m.log_mean, std::max(m.log_sd, 1e-6)}};
  }
  return {};
}

inline std::vector<double> random_start(Family family, std::mt19937_64& rng, const Moments& m) {
  auto log_uniform = [&](double lo, double hi) {
    const double u = open_unit_uniform(rng);
    return std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)));
  };
  std::vector<double> theta;
  for (Param p : family_params(family)) {
    if (!param_is_positive(family, p)) {
      theta.push_back(m.log_mean + (open_unit_uniform(rng) - 0.5) * 4.0 * std::max(m.log_sd, 0.1));
    } else if (p == Param::lambda && family == Family::LogN) {
      theta.push_back(log_uniform(0.05, 10.0) * std::max(m.log_sd, 1e-3));
    } else if (p == Param::lambda) {
      theta.push_back(log_uniform(0.05, 10.0));
    } else {
      theta.push_back(log_uniform(0.05, 100.0));
    }
  }
  return theta;
}

// Submodel optima embedded into the parent parameter vector.
inline std::vector<double> embed(Family parent, const FamilySpec& sub) {
  std::vector<double> theta;
  for (Param p : family_params(parent)) theta.push_back(sub.get_or_unit(p));
  return theta;
}

inline constexpr double kObjectiveTieTolerance = 1e-12;

struct StartOutcome {
  std::vector<double> z;
  double f = std::numeric_limits<double>::infinity();
  double gradient_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  long evaluations = 0;
};

inline StartOutcome run_start(Family family, const WeightedSample& ws, const std::vector<double>& z0,
                              const FitConfig& config) {
  const optim::Objective objective = make_objective(family, ws);
  const std::size_t dim = z0.size();
  StartOutcome out;
  optim::GradientOptions gopt{config.max_iterations, config.gradient_tolerance};
  optim::Vector z = z0;
  double diameter = std::numeric_limits<double>::infinity();

  if (config.optimizer == Optimizer::simplex) {
    optim::NelderMeadOptions nm;
    nm.max_iterations = config.max_iterations;
    nm.x_tolerance = 1e-9;
    const auto r = optim::nelder_mead(objective, z, nm);
    z = r.x;
    diameter = r.simplex_diameter;
  } else {
    if (config.optimizer == Optimizer::hybrid) {
      optim::NelderMeadOptions nm;
      nm.max_iterations = std::min(config.max_iterations, 150 * static_cast<int>(dim));
      nm.x_tolerance = 1e-6;
      nm.f_tolerance = 1e-10;
      z = optim::nelder_mead(objective, z, nm).x;
    }
    z = optim::bfgs(objective, z, gopt).x;
    z = optim::newton_polish(objective, z, gopt).x;
  }

  out.z = z;
  out.f = objective(z);
  std::vector<double> g(dim);
  if (std::isfinite(out.f) && objective.gradient(z, g)) out.gradient_norm = optim::norm(g);
  out.converged = std::isfinite(out.f) &&
                  (out.gradient_norm <= config.gradient_tolerance ||
                   (config.optimizer == Optimizer::simplex && diameter < 1e-9));
  out.evaluations = objective.evaluations();
  return out;
}

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::uint64_t family_stream(std::uint64_t seed, Family family) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(family) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Gradient of log_likelihood for a BGL spec, ordered (alpha, lambda, a, b).
inline std::array<double, 4> bgl_score(const FamilySpec& spec, const Sample& sample) {
  if (sample.empty()) throw bgl::domain_error("bgl_score: empty sample");
  return detail::bgl_score_weighted(spec, detail::WeightedSample(sample));
}

/// Previously fitted submodels, used as warm starts by their parents.
using FitHints = std::map<Family, FitResult>;

inline FitResult fit_mle(Family family, const Sample& sample, const FitConfig& config = {}, FitHints* hints = nullptr) {
  config.validate();
  if (sample.empty()) throw bgl::domain_error("fit_mle: empty sample");
  const detail::WeightedSample ws(sample);
  const detail::Moments moments = detail::sample_moments(ws);

  // warm starts from nested submodels
  std::vector<Family> submodels;
  switch (family) {
    case Family::BGL: submodels = {Family::GL, Family::BL}; break;
    case Family::GL:
    case Family::BL: submodels = {Family::L}; break;
    case Family::BW: submodels = {Family::W, Family::BE}; break;
    default: break;
  }

  std::vector<std::vector<double>> seeds = detail::closed_form_seeds(family, moments);
  const bool degenerate = ws.values.size() == 1;
  if (!degenerate) {
    FitHints local;
    FitHints& cache = hints ? *hints : local;
    for (Family sub : submodels) {
      auto it = cache.find(sub);
      if (it == cache.end()) it = cache.emplace(sub, fit_mle(sub, sample, config, &cache)).first;
      seeds.insert(seeds.begin(), detail::embed(family, it->second.spec));
    }
  }
  std::mt19937_64 rng(detail::family_stream(config.seed, family));
  while (seeds.size() < static_cast<std::size_t>(config.n_starts)) seeds.push_back(detail::random_start(family, rng, moments));
  seeds.resize(static_cast<std::size_t>(config.n_starts));

  const optim::Objective probe = detail::make_objective(family, ws);
  std::vector<std::vector<double>> z0(seeds.size());
  std::vector<StartSummary> summaries(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t j = 0; j < seeds[i].size(); ++j) z0[i].push_back(detail::to_transformed(family, j, seeds[i][j]));
    summaries[i].initial = seeds[i];
    summaries[i].initial_neg2_log_lik = 2.0 * ws.n * probe(z0[i]);
  }

  if (degenerate) {
    FitResult result(FamilySpec(family, seeds.front()));
    result.neg2_log_lik = -2.0 * log_likelihood(result.spec, sample);
    result.converged = false;
    result.diagnostic = "degenerate sample: all observations equal";
    result.starts = std::move(summaries);
    return result;
  }

  std::vector<detail::StartOutcome> outcomes(seeds.size());
  detail::parallel_for(seeds.size(), [&](std::size_t i) { outcomes[i] = detail::run_start(family, ws, z0[i], config); });

  long evaluations = 0;
  double f_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    evaluations += outcomes[i].evaluations;
    summaries[i].final_neg2_log_lik = 2.0 * ws.n * outcomes[i].f;
    summaries[i].converged = outcomes[i].converged;
    summaries[i].evaluations = outcomes[i].evaluations;
    f_min = std::min(f_min, outcomes[i].f);
  }
  // Values within rounding of the minimum are ties: prefer a converged
  // start, then the lowest index.
  const double tie = f_min + detail::kObjectiveTieTolerance * (1.0 + std::fabs(f_min));
  std::size_t best = outcomes.size();
  for (int pass = 0; pass < 2 && best == outcomes.size(); ++pass) {
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (outcomes[i].f <= tie && (pass == 1 || outcomes[i].converged)) {
        best = i;
        break;
      }
    }
  }
  if (best == outcomes.size()) best = 0;
  const auto& win = outcomes[best];
  if (!std::isfinite(win.f)) {
    FitResult result(FamilySpec(family, seeds.front()));
    result.neg2_log_lik = std::numeric_limits<double>::infinity();
    result.n_evaluations = evaluations;
    result.diagnostic = "no start reached a finite likelihood";
    result.starts = std::move(summaries);
    return result;
  }
  std::vector<double> theta;
  detail::natural_params(family, win.z, theta);
  FitResult result(FamilySpec(family, theta));
  result.neg2_log_lik = -2.0 * log_likelihood(result.spec, sample);
  result.converged = win.converged;
  result.n_evaluations = evaluations;
  result.start_index_of_best = static_cast<int>(best);
  result.gradient_norm_at_optimum = win.gradient_norm;
  if (!win.converged) {
    result.diagnostic = "best start stopped with transformed gradient norm " + std::to_string(win.gradient_norm);
  }
  result.starts = std::move(summaries);
  return result;
}

}  // namespace bgl

#endif
