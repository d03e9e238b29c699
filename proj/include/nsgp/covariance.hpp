#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsgp/error.hpp"
#include "nsgp/geo.hpp"

namespace nsgp {

struct KernelConfig {
  double nu = 0.5;      // Matern smoothness
  double jitter = 0.0;  // diagonal inflation applied at assembly
};

using CovarianceMatrix = Eigen::MatrixXd;

/// Unit-range Matern correlation M_nu(d) with the sqrt(2 nu) scaling, so that
/// nu = 1/2 gives exp(-d) and nu = 3/2 gives (1 + sqrt(3) d) exp(-sqrt(3) d).
inline double matern(double d, double nu) {
  if (!(d >= 0.0)) throw DomainError("Matern distance must be nonnegative");
  if (!(nu > 0.0)) throw DomainError("Matern smoothness must be positive");
  if (d == 0.0) return 1.0;
  if (nu == 0.5) return std::exp(-d);
  if (nu == 1.5) {
    const double a = std::sqrt(3.0) * d;
    return (1.0 + a) * std::exp(-a);
  }
  if (nu == 2.5) {
    const double a = std::sqrt(5.0) * d;
    return (1.0 + a + a * a / 3.0) * std::exp(-a);
  }
  const double a = std::sqrt(2.0 * nu) * d;
  const double k = std::cyl_bessel_k(nu, a);
  if (k == 0.0) return 0.0;
  const double logc = (1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(a) + std::log(k);
  return std::min(1.0, std::exp(logc));
}

/// Nonstationary covariance with locally isotropic kernels rho^2 I_3, given
/// the squared separation. With r = 2 rho1 rho2 / (rho1^2 + rho2^2) the
/// determinant prefactor is r^{3/2} and Q = 2 d^2 / (rho1^2 + rho2^2).
inline double ns_cov_sq(double d2, double sigma1, double sigma2, double rho1, double rho2,
                        double nu) {
  const double s = rho1 * rho1 + rho2 * rho2;
  const double r = 2.0 * rho1 * rho2 / s;
  const double q = 2.0 * d2 / s;
  return sigma1 * sigma2 * r * std::sqrt(r) * matern(std::sqrt(q), nu);
}

inline double ns_cov(const XyzPoint& s1, const XyzPoint& s2, double sigma1, double sigma2,
                     double rho1, double rho2, const KernelConfig& cfg = {}) {
  return ns_cov_sq(squared_distance(s1, s2), sigma1, sigma2, rho1, rho2, cfg.nu);
}

/// Dense latent covariance Omega_ij = C_y(s_i, s_j). Only i <= j is computed
/// and mirrored, so the result is exactly symmetric.
inline CovarianceMatrix build_cov_y(std::span<const XyzPoint> points, std::span<const double> sigmas,
                                    std::span<const double> rhos, const KernelConfig& cfg = {}) {
  const std::size_t n = points.size();
  if (sigmas.size() != n || rhos.size() != n)
    throw DomainError("build_cov_y: points, sigmas and rhos differ in length");
  CovarianceMatrix c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = ns_cov(points[i], points[j], sigmas[i], sigmas[j], rhos[i], rhos[j], cfg);
      if (!std::isfinite(v)) {
        throw NumericalError("non-finite covariance entry at (" + std::to_string(i) + ", " +
                             std::to_string(j) + ")");
      }
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  if (cfg.jitter > 0.0) c.diagonal().array() += cfg.jitter;
  return c;
}

inline CovarianceMatrix build_cov_y(std::span<const XyzPoint> points, const Eigen::VectorXd& sigmas,
                                    const Eigen::VectorXd& rhos, const KernelConfig& cfg = {}) {
  return build_cov_y(points, std::span<const double>(sigmas.data(), static_cast<std::size_t>(sigmas.size())),
                     std::span<const double>(rhos.data(), static_cast<std::size_t>(rhos.size())), cfg);
}

/// Marginal covariance of the response: adds the nugget to the diagonal.
inline CovarianceMatrix build_cov_z(CovarianceMatrix cov_y, double tau2) {
  if (!(tau2 >= 0.0)) throw DomainError("nugget variance must be nonnegative");
  cov_y.diagonal().array() += tau2;
  return cov_y;
}

}  // namespace nsgp
