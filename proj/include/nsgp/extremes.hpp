#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nsgp/error.hpp"
#include "nsgp/nelder_mead.hpp"

namespace nsgp {

/// Below this |xi| the Gumbel limit of the GEV family is used.
inline constexpr double kXiTol = 1e-8;
inline constexpr std::size_t kMinSeriesLength = 10;

struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
};

struct GevFit {
  GevParams params{std::numeric_limits<double>::quiet_NaN(),
                   std::numeric_limits<double>::quiet_NaN(),
                   std::numeric_limits<double>::quiet_NaN()};
  bool converged = false;
  double nll = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
};

struct EnsembleValue {
  std::int64_t cell_id = 0;
  int year = 0;
  int member = 0;
  double value = 0.0;
};

struct MaximaSeries {
  std::int64_t cell_id = 0;
  std::vector<int> years;
  std::vector<double> values;
};

/// Per cell and year, the maximum over ensemble members. Every cell must cover
/// every year present anywhere in the table.
inline std::vector<MaximaSeries> extract_annual_maxima(std::span<const EnsembleValue> rows) {
  std::map<std::int64_t, std::map<int, double>> table;
  std::vector<int> all_years;
  for (const auto& r : rows) {
    auto& per_year = table[r.cell_id];
    auto [it, inserted] = per_year.try_emplace(r.year, r.value);
    if (!inserted) it->second = std::max(it->second, r.value);
    all_years.push_back(r.year);
  }
  std::sort(all_years.begin(), all_years.end());
  all_years.erase(std::unique(all_years.begin(), all_years.end()), all_years.end());

  std::ostringstream missing;
  std::size_t n_missing = 0;
  for (const auto& [cell, per_year] : table) {
    for (int y : all_years) {
      if (per_year.count(y) == 0) {
        if (n_missing < 20) missing << " (cell " << cell << ", year " << y << ")";
        ++n_missing;
      }
    }
  }
  if (n_missing > 0) {
    throw DataError("ensemble table lacks " + std::to_string(n_missing) +
                    " (cell, year) combinations:" + missing.str());
  }

  std::vector<MaximaSeries> out;
  out.reserve(table.size());
  for (const auto& [cell, per_year] : table) {
    MaximaSeries s;
    s.cell_id = cell;
    for (const auto& [year, v] : per_year) {
      s.years.push_back(year);
      s.values.push_back(v);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline void check_scale(const GevParams& p) {
  if (!(p.sigma > 0.0)) throw DomainError("GEV scale must be positive");
}

inline double gev_cdf(double x, const GevParams& p) {
  check_scale(p);
  const double z = (x - p.mu) / p.sigma;
  if (std::abs(p.xi) < kXiTol) return std::exp(-std::exp(-z));
  const double t = 1.0 + p.xi * z;
  if (t <= 0.0) return p.xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::exp(-std::log1p(p.xi * z) / p.xi));
}

/// Log density; -inf outside the support.
inline double gev_logpdf(double x, const GevParams& p) {
  if (!(p.sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  const double z = (x - p.mu) / p.sigma;
  if (std::abs(p.xi) < kXiTol) return -std::log(p.sigma) - z - std::exp(-z);
  if (1.0 + p.xi * z <= 0.0) return -std::numeric_limits<double>::infinity();
  const double lt = std::log1p(p.xi * z);
  return -std::log(p.sigma) - (1.0 + 1.0 / p.xi) * lt - std::exp(-lt / p.xi);
}

/// Negative log-likelihood with a soft +inf barrier for sigma <= 0 and for any
/// observation outside the support.
inline double gev_nll(std::span<const double> values, const GevParams& p) {
  if (!(p.sigma > 0.0)) return std::numeric_limits<double>::infinity();
  double nll = 0.0;
  for (double x : values) {
    const double lp = gev_logpdf(x, p);
    if (!std::isfinite(lp)) return std::numeric_limits<double>::infinity();
    nll -= lp;
  }
  return nll;
}

inline double gev_nll(const MaximaSeries& s, const GevParams& p) { return gev_nll(s.values, p); }

/// Level exceeded on average once every `r` blocks.
inline double return_value(const GevParams& p, double r) {
  if (!(r > 1.0)) throw DomainError("return period must exceed 1");
  check_scale(p);
  const double y = -std::log1p(-1.0 / r);
  if (std::abs(p.xi) < kXiTol) return p.mu - p.sigma * std::log(y);
  // mu - (sigma/xi) * (1 - y^-xi), with 1 - y^-xi = -expm1(-xi log y)
  return p.mu + (p.sigma / p.xi) * std::expm1(-p.xi * std::log(y));
}

/// Maximum-likelihood GEV fit by Nelder-Mead from a method-of-moments start.
/// Non-convergence is reported through the flag, never thrown.
inline GevFit fit_gev(std::span<const double> values, const NelderMeadOptions& opts = {}) {
  GevFit fit;
  const std::size_t n = values.size();
  if (n < kMinSeriesLength) return fit;
  for (double v : values)
    if (!std::isfinite(v)) return fit;

  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) return fit;

  const double sigma0 = sd * std::sqrt(6.0) / std::numbers::pi;
  const double mu0 = mean - 0.57722 * sigma0;
  std::vector<double> x{mu0, sigma0, 0.1};
  auto objective = [&](std::span<const double> v) { return gev_nll(values, {v[0], v[1], v[2]}); };

  // A restart from the best vertex guards against a prematurely collapsed
  // simplex; iterations are budgeted across restarts.
  std::size_t used = 0;
  bool converged = false;
  double fx = objective(x);
  for (int round = 0; round < 3 && used < opts.max_iter; ++round) {
    NelderMeadOptions o = opts;
    o.max_iter = opts.max_iter - used;
    const double scale = x[1] > 0.0 ? x[1] : sigma0;
    const std::vector<double> steps{0.5 * scale, 0.25 * scale, 0.1};
    auto res = nelder_mead(objective, x, steps, o);
    used += res.iterations;
    const double prev = fx;
    x = res.x;
    fx = res.fx;
    converged = res.converged;
    if (!converged) break;
    if (round > 0 && std::abs(prev - fx) <= opts.ftol_rel * (std::abs(fx) + opts.ftol_rel)) break;
  }

  fit.iterations = used;
  fit.nll = fx;
  fit.converged = converged && std::isfinite(fx) && x[1] > 0.0;
  if (fit.converged) fit.params = {x[0], x[1], x[2]};
  return fit;
}

inline GevFit fit_gev(const MaximaSeries& s, const NelderMeadOptions& opts = {}) {
  return fit_gev(std::span<const double>(s.values), opts);
}

}  // namespace nsgp
