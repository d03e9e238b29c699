#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace nsgp {

struct NelderMeadOptions {
  std::size_t max_iter = 2000;
  double ftol_rel = 1e-10;
  // Standard reflection / expansion / contraction / shrink coefficients.
  double alpha = 1.0;
  double gamma = 2.0;
  double rho = 0.5;
  double shrink = 0.5;
};

struct NelderMeadResult {
  std::vector<double> x;
  double fx = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Derivative-free simplex minimization. The objective may return +inf to mark
/// infeasible points; those vertices are simply ranked last.
inline NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                                    std::vector<double> x0, std::span<const double> steps,
                                    const NelderMeadOptions& opts = {}) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += steps[i];
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);

  std::vector<std::size_t> idx(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  NelderMeadResult res;

  auto sort_simplex = [&] {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return fv[a] < fv[b];
    });
  };
  auto combine = [&](double t, const std::vector<double>& far, std::vector<double>& out) {
    // out = centroid + t * (centroid - far)
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (centroid[j] - far[j]);
  };

  std::size_t iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    sort_simplex();
    const double fbest = fv[idx.front()];
    const double fworst = fv[idx.back()];
    if (std::isfinite(fworst) &&
        std::abs(fworst - fbest) <= opts.ftol_rel * (std::abs(fbest) + opts.ftol_rel)) {
      res.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[idx[i]][j];
    for (double& c : centroid) c /= static_cast<double>(n);

    const std::size_t worst = idx.back();
    const double fsecond = fv[idx[n - 1]];

    combine(opts.alpha, simplex[worst], xr);
    const double fr = f(xr);
    if (fr < fbest) {
      combine(opts.alpha * opts.gamma, simplex[worst], xe);
      const double fe = f(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fsecond) {
      simplex[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    // Contraction: outside if the reflected point improved on the worst.
    const bool outside = fr < fworst;
    combine(outside ? opts.alpha * opts.rho : -opts.rho, simplex[worst], xc);
    const double fc = f(xc);
    if (fc < (outside ? fr : fworst)) {
      simplex[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    const std::vector<double> best = simplex[idx.front()];
    for (std::size_t i = 1; i <= n; ++i) {
      auto& v = simplex[idx[i]];
      for (std::size_t j = 0; j < n; ++j) v[j] = best[j] + opts.shrink * (v[j] - best[j]);
      fv[idx[i]] = f(v);
    }
  }

  sort_simplex();
  res.x = simplex[idx.front()];
  res.fx = fv[idx.front()];
  res.iterations = iter;
  return res;
}

}  // namespace nsgp
