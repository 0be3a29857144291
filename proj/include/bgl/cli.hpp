#ifndef BGL_CLI_HPP
#define BGL_CLI_HPP

// Batch front end: describe | fit | percentiles | plotdata | sample | rerun.
// Every command writes its tables plus manifest.txt into --out; rerunning
// the manifest reproduces the outputs byte for byte.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bgl/csv.hpp"
#include "bgl/distributions.hpp"
#include "bgl/errors.hpp"
#include "bgl/family.hpp"
#include "bgl/fitting.hpp"
#include "bgl/gof.hpp"
#include "bgl/ingest.hpp"
#include "bgl/sample.hpp"

namespace bgl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr std::size_t kFastSubsample = 10000;
inline constexpr int kPdfGridPoints = 512;

/// Thrown for invalid flag values; maps to exit status 2.
class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string command;
  std::string input;        // tower CSV
  std::string values;       // single-column file, alternative to input
  std::optional<int> height;
  std::optional<YearRange> years;
  std::vector<Family> families;
  std::string config;
  std::string out = ".";
  bool fast = false;
  FitConfig fit;
  std::vector<double> levels = {0.95, 0.99};
  int bins = 50;
  std::optional<Family> family;  // sample
  std::vector<double> params;    // sample
  long long n = 0;               // sample
};

inline std::string format_exact(double v) { return text::format_exact(v); }

inline std::string format_fixed(double v, int decimals) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string optimizer_name(Optimizer o) {
  switch (o) {
    case Optimizer::simplex: return "simplex";
    case Optimizer::quasi_newton: return "quasi_newton";
    case Optimizer::hybrid: return "hybrid";
  }
  return "hybrid";
}

inline Optimizer parse_optimizer(const std::string& s) {
  if (s == "simplex") return Optimizer::simplex;
  if (s == "quasi_newton") return Optimizer::quasi_newton;
  if (s == "hybrid") return Optimizer::hybrid;
  throw usage_error("unknown optimizer '" + s + "'");
}

inline YearRange parse_years(const std::string& s) {
  const auto dash = s.find('-');
  const auto first = text::parse_int(s.substr(0, dash));
  const auto last = dash == std::string::npos ? first : text::parse_int(s.substr(dash + 1));
  if (!first || !last || *first > *last) throw usage_error("--years expects YYYY or YYYY-YYYY, got '" + s + "'");
  return {static_cast<int>(*first), static_cast<int>(*last)};
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto t = text::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline std::vector<Family> parse_families(const std::string& s) {
  std::vector<Family> out;
  for (const auto& name : split_list(s)) {
    if (text::lower(name) == "all") {
      out.assign(kAllFamilies.begin(), kAllFamilies.end());
      continue;
    }
    const auto f = parse_family(name);
    if (!f) throw usage_error("unknown family '" + name + "'");
    if (std::find(out.begin(), out.end(), *f) == out.end()) out.push_back(*f);
  }
  if (out.empty()) throw usage_error("--families names no family");
  return out;
}

inline std::vector<double> parse_numbers(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    const auto v = text::parse_double(item);
    if (!v) throw usage_error(flag + ": '" + item + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

inline std::string join_numbers(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_exact(v[i]);
  return out;
}

inline std::string join_families(const std::vector<Family>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::string(family_name(v[i]));
  return out;
}

/// Applies fit.* keys of a config file.
inline void apply_fit_keys(const std::map<std::string, std::string>& kv, FitConfig& fit) {
  for (const auto& [key, value] : kv) {
    if (key.rfind("fit.", 0) != 0) continue;
    const std::string name = key.substr(4);
    if (name == "optimizer") {
      fit.optimizer = parse_optimizer(value);
      continue;
    }
    const auto num = text::parse_double(value);
    if (!num) throw usage_error("config: " + key + " is not a number");
    if (name == "max_iterations") {
      fit.max_iterations = static_cast<int>(*num);
    } else if (name == "gradient_tolerance") {
      fit.gradient_tolerance = *num;
    } else if (name == "n_starts") {
      fit.n_starts = static_cast<int>(*num);
    } else if (name == "seed") {
      const auto seed = text::parse_int(value);
      if (!seed || *seed < 0) throw usage_error("config: fit.seed must be a nonnegative integer");
      fit.seed = static_cast<std::uint64_t>(*seed);
    } else {
      throw usage_error("config: unknown key " + key);
    }
  }
}

// ---- manifest ------------------------------------------------------------

inline std::string manifest_text(const Options& o) {
  std::ostringstream m;
  m << "command=" << o.command << '\n';
  if (!o.input.empty()) m << "input=" << o.input << '\n';
  if (!o.values.empty()) m << "values=" << o.values << '\n';
  if (o.height) m << "height=" << *o.height << '\n';
  if (o.years) m << "years=" << o.years->to_string() << '\n';
  if (!o.config.empty()) m << "config=" << o.config << '\n';
  m << "out=" << o.out << '\n';
  m << "fast=" << (o.fast ? 1 : 0) << '\n';
  if (o.fast) m << "fast_subsample=" << kFastSubsample << '\n';
  m << "seed=" << o.fit.seed << '\n';
  if (o.command == "sample") {
    m << "family=" << family_name(*o.family) << '\n';
    m << "params=" << join_numbers(o.params) << '\n';
    m << "n=" << o.n << '\n';
    return m.str();
  }
  if (o.command != "describe") {
    m << "families=" << join_families(o.families) << '\n';
    m << "fit.max_iterations=" << o.fit.max_iterations << '\n';
    m << "fit.gradient_tolerance=" << format_exact(o.fit.gradient_tolerance) << '\n';
    m << "fit.n_starts=" << o.fit.n_starts << '\n';
    m << "fit.optimizer=" << optimizer_name(o.fit.optimizer) << '\n';
  }
  if (o.command == "percentiles") m << "levels=" << join_numbers(o.levels) << '\n';
  if (o.command == "plotdata") m << "bins=" << o.bins << '\n';
  return m.str();
}

inline Options options_from_manifest(const std::map<std::string, std::string>& kv) {
  Options o;
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  const auto command = get("command");
  if (!command) throw usage_error("manifest: missing command");
  o.command = *command;
  o.input = get("input").value_or("");
  o.values = get("values").value_or("");
  if (const auto h = get("height")) {
    const auto v = text::parse_int(*h);
    if (!v) throw usage_error("manifest: bad height");
    o.height = static_cast<int>(*v);
  }
  if (const auto y = get("years")) o.years = parse_years(*y);
  o.config = get("config").value_or("");
  o.out = get("out").value_or(".");
  o.fast = get("fast").value_or("0") == "1";
  if (const auto s = get("seed")) {
    const auto v = text::parse_int(*s);
    if (!v || *v < 0) throw usage_error("manifest: bad seed");
    o.fit.seed = static_cast<std::uint64_t>(*v);
  }
  if (const auto f = get("families")) o.families = parse_families(*f);
  std::map<std::string, std::string> fit_keys;
  for (const auto& [k, v] : kv) {
    if (k.rfind("fit.", 0) == 0) fit_keys[k] = v;
  }
  apply_fit_keys(fit_keys, o.fit);
  if (const auto l = get("levels")) o.levels = parse_numbers(*l, "levels");
  if (const auto b = get("bins")) o.bins = static_cast<int>(text::parse_int(*b).value_or(0));
  if (const auto f = get("family")) {
    o.family = parse_family(*f);
    if (!o.family) throw usage_error("manifest: unknown family " + *f);
  }
  if (const auto p = get("params")) o.params = parse_numbers(*p, "params");
  if (const auto n = get("n")) o.n = text::parse_int(*n).value_or(0);
  return o;
}

// ---- tables --------------------------------------------------------------

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::string to_csv() const {
    std::string out = csv::join(header) + "\n";
    for (const auto& r : rows) out += csv::join(r) + "\n";
    return out;
  }

  /// Right-aligned columns except the first.
  [[nodiscard]] std::string to_text() const {
    std::vector<std::size_t> width(header.size(), 0);
    auto measure = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
    };
    measure(header);
    for (const auto& r : rows) measure(r);
    auto line = [&](const std::vector<std::string>& r) {
      std::string out;
      for (std::size_t i = 0; i < r.size(); ++i) {
        const std::string pad(width[i] - r[i].size(), ' ');
        if (i) out += "  ";
        out += i == 0 ? r[i] + pad : pad + r[i];
      }
      while (!out.empty() && out.back() == ' ') out.pop_back();
      return out + "\n";
    };
    std::string out = line(header);
    for (const auto& r : rows) out += line(r);
    return out;
  }
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw bgl::io_error("cannot write " + path.string());
  f << content;
  if (!f) throw bgl::io_error("write failed for " + path.string());
}

// ---- data loading ----------------------------------------------------------

struct LoadedSample {
  Sample sample;
  std::optional<CleaningLog> cleaning;
  std::size_t malformed = 0;
  std::size_t full_n = 0;
};

inline Sample deterministic_subsample(const Sample& s, std::size_t k, std::uint64_t seed) {
  if (s.n() <= k) return s;
  std::vector<std::size_t> idx(s.n());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5DEECE66DULL);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (s.n() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<double> values;
  values.reserve(k);
  for (std::size_t i : idx) values.push_back(s.values()[i]);
  return Sample(std::move(values), s.height_m(), s.years());
}

inline LoadedSample load_sample(const Options& o, std::ostream& err) {
  LoadedSample out;
  if (!o.values.empty()) {
    out.sample = read_values(o.values);
  } else {
    ColumnMapping mapping = ColumnMapping::m2_defaults();
    if (!o.config.empty()) apply_mapping_keys(read_key_values(o.config), mapping);
    const auto parsed = parse_csv(o.input, mapping);
    out.malformed = parsed.log.malformed.size();
    for (const auto& m : parsed.log.malformed) {
      err << "warning: " << o.input << ":" << m.line << ": " << m.reason << " (row skipped)\n";
    }
    const YearRange years = o.years.value_or(YearRange{0, 9999});
    auto cleaned = clean(parsed.records, *o.height, years, mapping.sentinel);
    out.sample = std::move(cleaned.sample);
    out.cleaning = cleaned.log;
  }
  out.full_n = out.sample.n();
  if (o.fast) out.sample = deterministic_subsample(out.sample, kFastSubsample, o.fit.seed);
  return out;
}

// ---- fitting shared by fit / percentiles / plotdata -----------------------

struct FamilyFit {
  Family family;
  FitResult result;
};

/// Fits in nesting order so parents reuse their submodels' optima.
inline std::vector<FamilyFit> fit_families(const std::vector<Family>& families, const Sample& sample,
                                           const FitConfig& config) {
  static constexpr Family kOrder[] = {Family::L,  Family::GL, Family::BL,  Family::BGL, Family::W,
                                      Family::BE, Family::BW, Family::GAM, Family::LogN};
  FitHints hints;
  std::vector<FamilyFit> out;
  for (Family f : kOrder) {
    if (std::find(families.begin(), families.end(), f) == families.end()) continue;
    auto it = hints.find(f);
    if (it == hints.end()) it = hints.emplace(f, fit_mle(f, sample, config, &hints)).first;
    out.push_back({f, it->second});
  }
  return out;
}

inline std::string param_cell(const FamilySpec& spec, Param p, int decimals) {
  const auto v = spec.get(p);
  if (!v) return "";
  return decimals < 0 ? format_exact(*v) : format_fixed(*v, decimals);
}

// ---- commands --------------------------------------------------------------

struct CommandOutput {
  std::map<std::string, std::string> files;  // name -> content
  std::string stdout_text;
  bool ok = true;
};

inline CommandOutput cmd_describe(const Options& o, std::ostream& err) {
  const auto loaded = load_sample(o, err);
  const auto d = describe(loaded.sample);
  Table csv_table{{"height_m", "years", "n", "min", "max", "median", "mean", "variance", "skewness", "kurtosis", "p95",
                   "p99"},
                  {}};
  Table text_table{csv_table.header, {}};
  const std::string height = loaded.sample.height_m() ? std::to_string(*loaded.sample.height_m()) : "";
  const std::string years = loaded.sample.years() ? loaded.sample.years()->to_string() : "";
  csv_table.rows.push_back({height, years, std::to_string(d.n), format_exact(d.min), format_exact(d.max),
                            format_exact(d.median), format_exact(d.mean), format_exact(d.variance),
                            format_exact(d.skewness), format_exact(d.kurtosis), format_exact(d.p95),
                            format_exact(d.p99)});
  text_table.rows.push_back({height, years, std::to_string(d.n), format_fixed(d.min, 2), format_fixed(d.max, 2),
                             format_fixed(d.median, 2), format_fixed(d.mean, 2), format_fixed(d.variance, 2),
                             format_fixed(d.skewness, 2), format_fixed(d.kurtosis, 2), format_fixed(d.p95, 2),
                             format_fixed(d.p99, 2)});
  CommandOutput out;
  out.files["describe.csv"] = csv_table.to_csv();
  std::string text = text_table.to_text();
  if (loaded.cleaning) {
    const auto& c = *loaded.cleaning;
    Table log{{"rows_read", "out_of_range", "duplicates_removed", "sentinel_rows_removed", "nonpositive_removed",
               "missing_height", "rows_kept", "malformed_rows"},
              {{std::to_string(c.rows_read), std::to_string(c.out_of_range), std::to_string(c.duplicates_removed),
                std::to_string(c.sentinel_rows_removed), std::to_string(c.nonpositive_removed),
                std::to_string(c.missing_height), std::to_string(c.rows_kept), std::to_string(loaded.malformed)}}};
    out.files["cleaning.csv"] = log.to_csv();
    text += "\n" + log.to_text();
  }
  out.files["describe.txt"] = text;
  out.stdout_text = text;
  out.ok = loaded.malformed == 0;
  return out;
}

inline CommandOutput cmd_fit(const Options& o, std::ostream& err) {
  const auto loaded = load_sample(o, err);
  auto fits = fit_families(o.families, loaded.sample, o.fit);
  struct Row {
    FamilyFit fit;
    GofReport gof;
  };
  std::vector<Row> rows;
  for (auto& f : fits) rows.push_back({f, gof_report(f.result.spec, loaded.sample)});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    const double a = std::isnan(x.gof.neg2_log_lik) ? std::numeric_limits<double>::infinity() : x.gof.neg2_log_lik;
    const double b = std::isnan(y.gof.neg2_log_lik) ? std::numeric_limits<double>::infinity() : y.gof.neg2_log_lik;
    return a < b;
  });
  Table csv_table{{"family", "alpha", "lambda", "a", "b", "p", "n", "neg2_log_lik", "aic", "bic", "ks", "ad",
                   "converged", "gradient_norm", "start_index", "evaluations", "ad_clamped", "ties"},
                  {}};
  Table text_table{{"Family", "alpha", "lambda", "a", "b", "-2lnL", "AIC", "BIC", "KS", "AD", "status"}, {}};
  CommandOutput out;
  for (const auto& r : rows) {
    const auto& spec = r.fit.result.spec;
    const std::string name(family_name(r.fit.family));
    csv_table.rows.push_back({name, param_cell(spec, Param::alpha, -1), param_cell(spec, Param::lambda, -1),
                              param_cell(spec, Param::a, -1), param_cell(spec, Param::b, -1),
                              std::to_string(r.gof.p), std::to_string(r.gof.n), format_exact(r.gof.neg2_log_lik),
                              format_exact(r.gof.aic), format_exact(r.gof.bic), format_exact(r.gof.ks),
                              format_exact(r.gof.ad), r.fit.result.converged ? "1" : "0",
                              format_exact(r.fit.result.gradient_norm_at_optimum),
                              std::to_string(r.fit.result.start_index_of_best),
                              std::to_string(r.fit.result.n_evaluations), std::to_string(r.gof.ad_clamped),
                              std::to_string(r.gof.ties)});
    text_table.rows.push_back({name, param_cell(spec, Param::alpha, 3), param_cell(spec, Param::lambda, 3),
                               param_cell(spec, Param::a, 3), param_cell(spec, Param::b, 3),
                               format_fixed(r.gof.neg2_log_lik, 1), format_fixed(r.gof.aic, 1),
                               format_fixed(r.gof.bic, 1), format_fixed(r.gof.ks, 3), format_fixed(r.gof.ad, 2),
                               r.fit.result.converged ? "ok" : "UNCONVERGED"});
    if (!r.fit.result.converged) {
      out.ok = false;
      err << "warning: " << name << " did not converge: " << r.fit.result.diagnostic << "\n";
    }
    if (r.gof.ad_clamped > 0) {
      err << "warning: " << name << ": " << r.gof.ad_clamped << " tail probabilities clamped in AD\n";
    }
  }
  std::string text = text_table.to_text();
  text += "n = " + std::to_string(loaded.sample.n());
  if (o.fast) text += " (fast: deterministic subsample of " + std::to_string(loaded.full_n) + ")";
  text += "\n";
  out.files["fit.csv"] = csv_table.to_csv();
  out.files["fit.txt"] = text;
  out.stdout_text = text;
  out.ok = out.ok && loaded.malformed == 0;
  return out;
}

inline CommandOutput cmd_percentiles(const Options& o, std::ostream& err) {
  const auto loaded = load_sample(o, err);
  const auto fits = fit_families(o.families, loaded.sample, o.fit);
  const double sort_level =
      std::find(o.levels.begin(), o.levels.end(), 0.95) != o.levels.end() ? 0.95 : o.levels.front();
  struct Block {
    Family family;
    bool converged;
    std::vector<PercentileBias> rows;
    double key;
  };
  std::vector<Block> blocks;
  CommandOutput out;
  for (const auto& f : fits) {
    Block b{f.family, f.result.converged, {}, 0.0};
    for (double level : o.levels) {
      b.rows.push_back(percentile_bias(f.result.spec, loaded.sample, level));
      if (level == sort_level) b.key = std::fabs(b.rows.back().bias);
    }
    if (!f.result.converged) {
      out.ok = false;
      err << "warning: " << family_name(f.family) << " did not converge: " << f.result.diagnostic << "\n";
    }
    blocks.push_back(std::move(b));
  }
  std::stable_sort(blocks.begin(), blocks.end(), [](const Block& x, const Block& y) { return x.key < y.key; });
  Table csv_table{{"family", "level", "observed", "estimated", "bias", "converged"}, {}};
  Table text_table{{"Family", "level", "obs", "est", "bias"}, {}};
  for (const auto& b : blocks) {
    for (const auto& r : b.rows) {
      const std::string name(family_name(b.family));
      csv_table.rows.push_back({name, format_exact(r.level), format_exact(r.observed), format_exact(r.estimated),
                                format_exact(r.bias), b.converged ? "1" : "0"});
      char bias[32];
      std::snprintf(bias, sizeof bias, "%+.2f", r.bias);
      text_table.rows.push_back({name + (b.converged ? "" : " (unconverged)"), format_exact(r.level),
                                 format_fixed(r.observed, 2), format_fixed(r.estimated, 2), bias});
    }
  }
  out.files["percentiles.csv"] = csv_table.to_csv();
  out.files["percentiles.txt"] = text_table.to_text();
  out.stdout_text = text_table.to_text();
  out.ok = out.ok && loaded.malformed == 0;
  return out;
}

inline CommandOutput cmd_plotdata(const Options& o, std::ostream& err) {
  const auto loaded = load_sample(o, err);
  const auto xs = loaded.sample.sorted();
  const double lo = xs.front();
  const double hi = xs.back();
  const double width = (hi - lo) / o.bins;
  std::vector<long long> counts(static_cast<std::size_t>(o.bins), 0);
  for (double x : xs) {
    auto k = width > 0.0 ? static_cast<long long>((x - lo) / width) : 0;
    k = std::clamp<long long>(k, 0, o.bins - 1);
    ++counts[static_cast<std::size_t>(k)];
  }
  Table hist{{"bin_lo", "bin_hi", "count", "density"}, {}};
  const double n = static_cast<double>(xs.size());
  for (int i = 0; i < o.bins; ++i) {
    const double a = lo + i * width;
    const double b = i + 1 == o.bins ? hi : lo + (i + 1) * width;
    const double w = width > 0.0 ? width : 1.0;
    hist.rows.push_back({format_exact(a), format_exact(b), std::to_string(counts[static_cast<std::size_t>(i)]),
                         format_exact(static_cast<double>(counts[static_cast<std::size_t>(i)]) / (n * w))});
  }

  const auto fits = fit_families(o.families, loaded.sample, o.fit);
  CommandOutput out;
  Table grid{{"x"}, {}};
  for (const auto& f : fits) {
    grid.header.emplace_back(family_name(f.family));
    if (!f.result.converged) {
      out.ok = false;
      err << "warning: " << family_name(f.family) << " did not converge: " << f.result.diagnostic << "\n";
    }
  }
  const double top = empirical_quantile(xs, 0.999);
  for (int i = 0; i < kPdfGridPoints; ++i) {
    const double x = top * i / (kPdfGridPoints - 1);
    // the left end stands in for the limit x -> 0+
    const double at = std::max(x, DBL_MIN);
    std::vector<std::string> row{format_exact(x)};
    for (const auto& f : fits) row.push_back(format_exact(pdf(f.result.spec, at)));
    grid.rows.push_back(std::move(row));
  }
  Table params{{"family", "alpha", "lambda", "a", "b", "converged"}, {}};
  for (const auto& f : fits) {
    params.rows.push_back({std::string(family_name(f.family)), param_cell(f.result.spec, Param::alpha, -1),
                           param_cell(f.result.spec, Param::lambda, -1), param_cell(f.result.spec, Param::a, -1),
                           param_cell(f.result.spec, Param::b, -1), f.result.converged ? "1" : "0"});
  }
  out.files["histogram.csv"] = hist.to_csv();
  out.files["pdf_grid.csv"] = grid.to_csv();
  out.files["plot_params.csv"] = params.to_csv();
  out.stdout_text = "wrote histogram.csv (" + std::to_string(o.bins) + " bins), pdf_grid.csv (" +
                    std::to_string(kPdfGridPoints) + " points), plot_params.csv\n";
  out.ok = out.ok && loaded.malformed == 0;
  return out;
}

inline CommandOutput cmd_sample(const Options& o, std::ostream&) {
  const FamilySpec spec(*o.family, o.params);
  const Sample s = sample(spec, static_cast<std::size_t>(o.n), o.fit.seed);
  std::ostringstream values;
  write_values(values, s);
  CommandOutput out;
  out.files["sample.txt"] = values.str();
  out.stdout_text = "wrote " + std::to_string(o.n) + " draws from " + spec.to_string() + " to sample.txt\n";
  return out;
}

inline void validate(const Options& o) {
  static const std::vector<std::string> kCommands = {"describe", "fit", "percentiles", "plotdata", "sample"};
  if (std::find(kCommands.begin(), kCommands.end(), o.command) == kCommands.end()) {
    throw usage_error("unknown command '" + o.command + "'");
  }
  if (o.command == "sample") {
    if (!o.family) throw usage_error("sample: --family is required");
    if (o.params.size() != parameter_count(*o.family)) {
      throw usage_error("sample: " + std::string(family_name(*o.family)) + " takes " +
                        std::to_string(parameter_count(*o.family)) + " parameters");
    }
    if (o.n < 1) throw usage_error("sample: --n must be at least 1");
    try {
      FamilySpec(*o.family, o.params);
    } catch (const bgl::domain_error& e) {
      throw usage_error(std::string("sample: ") + e.what());
    }
    return;
  }
  if (o.input.empty() == o.values.empty()) throw usage_error("exactly one of --input or --values is required");
  if (!o.input.empty() && !o.height) throw usage_error("--height is required with --input");
  if (o.command != "describe" && o.families.empty()) throw usage_error("--families is required");
  if (o.command == "percentiles") {
    if (o.levels.empty()) throw usage_error("--levels names no level");
    for (double l : o.levels) {
      if (!(l > 0.0 && l < 1.0)) throw usage_error("--levels must lie in (0, 1)");
    }
  }
  if (o.command == "plotdata" && o.bins < 2) throw usage_error("--bins must be at least 2");
  try {
    o.fit.validate();
  } catch (const bgl::domain_error& e) {
    throw usage_error(e.what());
  }
}

/// Runs a validated command, writes its files and manifest.
inline int execute(const Options& o, std::ostream& out, std::ostream& err) {
  validate(o);
  CommandOutput result;
  if (o.command == "describe") result = cmd_describe(o, err);
  if (o.command == "fit") result = cmd_fit(o, err);
  if (o.command == "percentiles") result = cmd_percentiles(o, err);
  if (o.command == "plotdata") result = cmd_plotdata(o, err);
  if (o.command == "sample") result = cmd_sample(o, err);
  const std::filesystem::path dir(o.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw bgl::io_error("cannot create output directory " + o.out + ": " + ec.message());
  for (const auto& [name, content] : result.files) write_file(dir / name, content);
  write_file(dir / "manifest.txt", manifest_text(o));
  out << result.stdout_text;
  return result.ok ? kExitOk : kExitFailure;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Beta-generalized Lindley and reference distributions for wind-speed data"};
  app.require_subcommand(1);

  Options o;
  std::string years, families = "all", levels, params, optimizer, family, manifest;
  std::optional<std::uint64_t> seed;

  auto data_flags = [&](CLI::App* sub) {
    sub->add_option("--input", o.input, "tower CSV file");
    sub->add_option("--values", o.values, "single-column file of speeds (alternative to --input)");
    sub->add_option("--height", o.height, "measurement height in m");
    sub->add_option("--years", years, "YYYY or YYYY-YYYY (default: all)");
    sub->add_option("--config", o.config, "key=value file with column mapping and fit.* settings");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "seed for random starts and --fast subsampling");
    sub->add_flag("--fast", o.fast, "fit a deterministic 10k-point subsample");
  };
  auto fit_flags = [&](CLI::App* sub) {
    sub->add_option("--families", families, "comma-separated families or 'all'")->capture_default_str();
    sub->add_option("--optimizer", optimizer, "simplex | quasi_newton | hybrid");
  };

  auto* describe_cmd = app.add_subcommand("describe", "descriptive statistics of one slice");
  data_flags(describe_cmd);
  auto* fit_cmd = app.add_subcommand("fit", "fit families and rank them by -2lnL");
  data_flags(fit_cmd);
  fit_flags(fit_cmd);
  auto* pct_cmd = app.add_subcommand("percentiles", "observed vs fitted percentiles");
  data_flags(pct_cmd);
  fit_flags(pct_cmd);
  pct_cmd->add_option("--levels", levels, "comma-separated levels in (0,1)")->default_str("0.95,0.99");
  auto* plot_cmd = app.add_subcommand("plotdata", "histogram and fitted pdf curves");
  data_flags(plot_cmd);
  fit_flags(plot_cmd);
  plot_cmd->add_option("--bins", o.bins, "histogram bins")->capture_default_str();
  auto* sample_cmd = app.add_subcommand("sample", "seeded draws from one distribution");
  sample_cmd->add_option("--family", family, "family name")->required();
  sample_cmd->add_option("--params", params, "comma-separated parameters in family order")->required();
  sample_cmd->add_option("--n", o.n, "number of draws")->required();
  sample_cmd->add_option("--seed", seed, "random seed");
  sample_cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  auto* rerun_cmd = app.add_subcommand("rerun", "repeat a run from its manifest.txt");
  rerun_cmd->add_option("--manifest", manifest, "manifest path")->required();
  std::string rerun_out;
  rerun_cmd->add_option("--out", rerun_out, "output directory (default: the manifest's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (rerun_cmd->parsed()) {
      o = options_from_manifest(read_key_values(manifest));
      if (!o.config.empty()) apply_fit_keys(read_key_values(o.config), o.fit);
      // manifest values win over the config file
      apply_fit_keys(read_key_values(manifest), o.fit);
      if (!rerun_out.empty()) o.out = rerun_out;
      return execute(o, out, err);
    }
    for (auto* sub : {describe_cmd, fit_cmd, pct_cmd, plot_cmd, sample_cmd}) {
      if (sub->parsed()) o.command = sub->get_name();
    }
    if (!o.config.empty()) apply_fit_keys(read_key_values(o.config), o.fit);
    if (seed) o.fit.seed = *seed;
    if (!optimizer.empty()) o.fit.optimizer = parse_optimizer(optimizer);
    if (!years.empty()) o.years = parse_years(years);
    if (o.command != "describe" && o.command != "sample") o.families = parse_families(families);
    if (o.command == "percentiles" && !levels.empty()) o.levels = parse_numbers(levels, "--levels");
    if (o.command == "sample") {
      o.family = parse_family(family);
      if (!o.family) throw usage_error("unknown family '" + family + "'");
      o.params = parse_numbers(params, "--params");
    }
    return execute(o, out, err);
  } catch (const usage_error& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace bgl::cli

#endif
