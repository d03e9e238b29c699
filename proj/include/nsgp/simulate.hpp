#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nsgp/covariance.hpp"
#include "nsgp/dataset.hpp"
#include "nsgp/design.hpp"
#include "nsgp/error.hpp"
#include "nsgp/likelihood.hpp"

namespace nsgp {

/// Crude rectangular "continents" so synthetic grids have both land and ocean.
inline int synthetic_land(double lon, double lat) {
  if (lon >= 180.0) lon -= 360.0;
  if (lon >= -20.0 && lon < 60.0 && lat >= -35.0 && lat < 70.0) return 1;
  if (lon >= -130.0 && lon < -60.0 && lat >= -55.0 && lat < 70.0) return 1;
  if (lon >= 110.0 && lon < 155.0 && lat >= -40.0 && lat < -10.0) return 1;
  return 0;
}

/// Regular cell-centered lon/lat grid between +-lat_limit, with missing rv20.
inline SpatialDataset make_grid(std::size_t n_lon, std::size_t n_lat, double lat_limit = 80.0) {
  if (n_lon == 0 || n_lat == 0) throw ConfigError("grid dimensions must be positive");
  SpatialDataset d;
  std::int64_t id = 1;
  for (std::size_t j = 0; j < n_lat; ++j) {
    const double lat = -lat_limit + (static_cast<double>(j) + 0.5) * (2.0 * lat_limit / static_cast<double>(n_lat));
    for (std::size_t i = 0; i < n_lon; ++i) {
      const double lon = -180.0 + (static_cast<double>(i) + 0.5) * (360.0 / static_cast<double>(n_lon));
      Cell c;
      c.cell_id = id++;
      c.longitude = lon;
      c.latitude = lat;
      c.land = synthetic_land(lon, lat);
      assign_xyz(c);
      d.cells.push_back(c);
    }
  }
  return d;
}

/// Uniformly scattered cells on the sphere (|lat| < lat_limit).
inline SpatialDataset make_scattered(std::size_t n, std::uint64_t seed, double lat_limit = 80.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u_lon(-180.0, 180.0);
  const double zmax = std::sin(deg2rad(lat_limit));
  std::uniform_real_distribution<double> u_z(-zmax, zmax);
  SpatialDataset d;
  for (std::size_t i = 0; i < n; ++i) {
    Cell c;
    c.cell_id = static_cast<std::int64_t>(i) + 1;
    c.longitude = u_lon(rng);
    c.latitude = std::asin(u_z(rng)) * 180.0 / std::numbers::pi;
    c.land = synthetic_land(c.longitude, c.latitude);
    assign_xyz(c);
    d.cells.push_back(c);
  }
  return d;
}

/// One draw of z ~ N(mu 1, C_z) at the given points by dense Cholesky.
inline std::vector<double> simulate_response(std::span<const XyzPoint> points,
                                             const DesignMatrices& design, const ThetaState& theta,
                                             std::uint64_t seed, const KernelConfig& cfg = {}) {
  if (points.size() > kMaxDenseSize)
    throw ConfigError("simulation limited to " + std::to_string(kMaxDenseSize) + " points");
  const auto llt = robust_cholesky(dense_cov_z(points, theta, design, cfg));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd eps(static_cast<Eigen::Index>(points.size()));
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = normal(rng);
  const Eigen::VectorXd field = llt.matrixL() * eps;
  std::vector<double> z(points.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = theta.mu + field(static_cast<Eigen::Index>(i));
  return z;
}

}  // namespace nsgp
