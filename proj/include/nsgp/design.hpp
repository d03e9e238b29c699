#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsgp/dataset.hpp"
#include "nsgp/error.hpp"

namespace nsgp {

/// Type-7 sample quantile (linear interpolation between order statistics).
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Natural cubic spline basis without intercept. Columns are the truncated
/// power construction on the boundary-rescaled variable
///   u = (x - lo) / (hi - lo),
/// N_1 = u and N_{j+2} = d_j(u) - d_{K-2}(u) with
///   d_j(u) = ((u - k_j)^3_+ - (u - k_{K-1})^3_+) / (k_{K-1} - k_j).
/// Every column is cubic between knots and linear outside [lo, hi].
struct SplineBasis {
  int df = 3;
  std::vector<double> interior_knots;
  double lower = 0.0;
  double upper = 1.0;

  [[nodiscard]] std::vector<double> scaled_knots() const {
    std::vector<double> k;
    k.reserve(interior_knots.size() + 2);
    k.push_back(0.0);
    for (double v : interior_knots) k.push_back((v - lower) / (upper - lower));
    k.push_back(1.0);
    return k;
  }

  /// Evaluates the df basis functions at x.
  [[nodiscard]] Eigen::VectorXd evaluate(double x) const {
    Eigen::VectorXd out(df);
    const double u = (x - lower) / (upper - lower);
    out(0) = u;
    if (df == 1) return out;
    const auto knots = scaled_knots();
    const std::size_t last = knots.size() - 1;
    auto cube_plus = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
    auto d = [&](std::size_t j) {
      return (cube_plus(u - knots[j]) - cube_plus(u - knots[last])) / (knots[last] - knots[j]);
    };
    const double d_end = d(last - 1);
    for (std::size_t j = 0; j + 1 < last; ++j) out(static_cast<Eigen::Index>(j) + 1) = d(j) - d_end;
    return out;
  }
};

/// Boundary knots at the data extremes and df-1 interior knots at equally
/// spaced quantiles of the supplied values.
inline SplineBasis build_spline_basis(std::span<const double> latitudes, int df = 3) {
  if (df < 1) throw ConfigError("spline df must be at least 1");
  std::vector<double> sorted(latitudes.begin(), latitudes.end());
  std::sort(sorted.begin(), sorted.end());
  const std::set<double> distinct(sorted.begin(), sorted.end());
  if (distinct.size() < static_cast<std::size_t>(df) + 2) {
    throw DataError("spline basis with df=" + std::to_string(df) + " needs at least " +
                    std::to_string(df + 2) + " distinct latitudes, got " +
                    std::to_string(distinct.size()));
  }
  SplineBasis b;
  b.df = df;
  b.lower = sorted.front();
  b.upper = sorted.back();
  double prev = b.lower;
  for (int j = 1; j < df; ++j) {
    const double q = quantile_sorted(sorted, static_cast<double>(j) / df);
    if (!(q > prev) || !(q < b.upper))
      throw DataError("spline interior knots are not distinct; latitudes too concentrated");
    b.interior_knots.push_back(q);
    prev = q;
  }
  return b;
}

struct DesignMatrices {
  Eigen::MatrixXd x_sigma;  // log spatial SD design
  Eigen::MatrixXd x_range;  // log isotropic range design: [1, land]
};

/// Rows of the spatial-SD design are [1, b_1..b_df, land, b_1*land..b_df*land];
/// without the land interaction they are [1, b_1..b_df, land].
inline DesignMatrices build_design(const SpatialDataset& data, const SplineBasis& basis,
                                   bool land_interaction = true) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index df = basis.df;
  const Eigen::Index p = land_interaction ? 2 * (df + 1) : df + 2;
  DesignMatrices d;
  d.x_sigma.setZero(n, p);
  d.x_range.setZero(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Cell& c = data.cells[static_cast<std::size_t>(i)];
    if (!std::isfinite(c.latitude))
      throw DataError("cell " + std::to_string(c.cell_id) + " has no latitude");
    if (c.land != 0 && c.land != 1)
      throw DataError("cell " + std::to_string(c.cell_id) + " has an invalid land indicator");
    const double land = c.land;
    const Eigen::VectorXd b = basis.evaluate(c.latitude);
    d.x_sigma(i, 0) = 1.0;
    d.x_sigma.block(i, 1, 1, df) = b.transpose();
    d.x_sigma(i, df + 1) = land;
    if (land_interaction) d.x_sigma.block(i, df + 2, 1, df) = land * b.transpose();
    d.x_range(i, 0) = 1.0;
    d.x_range(i, 1) = land;
  }
  return d;
}

/// Spatial standard deviation sigma(s) = exp(x_sigma(s)' alpha).
inline double eval_sigma(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                         const Eigen::Ref<const Eigen::VectorXd>& alpha) {
  return std::exp(row.dot(alpha.transpose()));
}

/// Local isotropic range rho(s) = exp(x_range(s)' phi) in Mm. The kernel
/// matrix of the nonstationary covariance is rho(s)^2 I_3.
inline double eval_range(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                         const Eigen::Ref<const Eigen::VectorXd>& phi) {
  return std::exp(row.dot(phi.transpose()));
}

/// Parameter state (mu, tau2, alpha, phi): constant mean, constant nugget
/// variance, spatial-SD coefficients and isotropic-range coefficients.
struct ThetaState {
  double mu = 0.0;
  double tau2 = 1.0;
  Eigen::VectorXd alpha;
  Eigen::VectorXd phi;

  [[nodiscard]] Eigen::Index size() const { return 2 + alpha.size() + phi.size(); }

  [[nodiscard]] Eigen::VectorXd pack() const {
    Eigen::VectorXd v(size());
    v << mu, tau2, alpha, phi;
    return v;
  }

  static ThetaState unpack(const Eigen::Ref<const Eigen::VectorXd>& v, Eigen::Index n_alpha,
                           Eigen::Index n_phi) {
    ThetaState t;
    t.mu = v(0);
    t.tau2 = v(1);
    t.alpha = v.segment(2, n_alpha);
    t.phi = v.segment(2 + n_alpha, n_phi);
    return t;
  }
};

/// sigma(s) and rho(s) at every design row.
struct ParameterFields {
  Eigen::VectorXd sigma;
  Eigen::VectorXd range;
};

inline ParameterFields eval_fields(const DesignMatrices& d, const ThetaState& theta) {
  return {(d.x_sigma * theta.alpha).array().exp().matrix(),
          (d.x_range * theta.phi).array().exp().matrix()};
}

}  // namespace nsgp

namespace nsgp {

/// Selects design rows, e.g. the observed cells of a full-grid design.
inline DesignMatrices select_rows(const DesignMatrices& d, const std::vector<std::size_t>& idx) {
  DesignMatrices out;
  out.x_sigma.resize(static_cast<Eigen::Index>(idx.size()), d.x_sigma.cols());
  out.x_range.resize(static_cast<Eigen::Index>(idx.size()), d.x_range.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.x_sigma.row(static_cast<Eigen::Index>(r)) = d.x_sigma.row(static_cast<Eigen::Index>(idx[r]));
    out.x_range.row(static_cast<Eigen::Index>(r)) = d.x_range.row(static_cast<Eigen::Index>(idx[r]));
  }
  return out;
}

}  // namespace nsgp
