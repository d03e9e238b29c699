#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "nsgp/nsgp.hpp"

namespace nsgp::test {

inline std::vector<XyzPoint> random_points(std::size_t n, std::uint64_t seed) {
  return make_scattered(n, seed).points();
}

/// Points in a cube; useful for neighbor checks independent of the sphere.
inline std::vector<XyzPoint> random_cube(std::size_t n, std::mt19937_64& rng, double side = 1.0) {
  std::uniform_real_distribution<double> u(0.0, side);
  std::vector<XyzPoint> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

/// Design and a random valid theta for a scattered synthetic dataset.
struct Synthetic {
  SpatialDataset data;
  std::vector<XyzPoint> points;
  DesignMatrices design;
  ThetaState theta;
  std::vector<double> z;
};

inline ThetaState random_theta(std::mt19937_64& rng, Eigen::Index n_alpha, Eigen::Index n_phi) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ThetaState t;
  t.mu = 280.0 + 10.0 * u(rng);
  t.tau2 = 0.05 + 0.2 * (u(rng) + 1.0);
  t.alpha = Eigen::VectorXd(n_alpha);
  for (auto& a : t.alpha) a = 0.3 * u(rng);
  t.alpha(0) += 0.5;
  t.phi = Eigen::VectorXd(n_phi);
  t.phi(0) = std::log(0.8) + 0.5 * u(rng);
  for (Eigen::Index j = 1; j < n_phi; ++j) t.phi(j) = 0.5 * u(rng);
  return t;
}

inline Synthetic make_synthetic(std::size_t n, std::uint64_t seed, bool simulate = true) {
  std::mt19937_64 rng(seed);
  Synthetic s;
  s.data = make_scattered(n, seed);
  s.points = s.data.points();
  const auto lats = s.data.latitudes();
  s.design = build_design(s.data, build_spline_basis(lats, 3));
  s.theta = random_theta(rng, s.design.x_sigma.cols(), s.design.x_range.cols());
  if (simulate) s.z = simulate_response(s.points, s.design, s.theta, seed + 17);
  return s;
}

/// Brute-force maxmin check: at every step the chosen point's distance to the
/// chosen set is at least that of every remaining candidate.
inline bool maxmin_definition_holds(const std::vector<XyzPoint>& pts,
                                    const std::vector<std::size_t>& order) {
  std::vector<char> chosen(pts.size(), 0);
  chosen[order[0]] = 1;
  for (std::size_t step = 1; step < order.size(); ++step) {
    auto min_to_chosen = [&](std::size_t i) {
      double best = INFINITY;
      for (std::size_t j = 0; j < pts.size(); ++j)
        if (chosen[j]) best = std::min(best, squared_distance(pts[i], pts[j]));
      return best;
    };
    const double picked = min_to_chosen(order[step]);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (!chosen[i] && min_to_chosen(i) > picked) return false;
    chosen[order[step]] = 1;
  }
  return true;
}

/// O(N^2) conditioning sets: sort predecessors by (distance, position).
inline std::vector<std::vector<std::size_t>> brute_cond_sets(const std::vector<XyzPoint>& pts,
                                                             const std::vector<std::size_t>& order,
                                                             std::size_t k) {
  std::vector<std::vector<std::size_t>> out(order.size());
  for (std::size_t p = 1; p < order.size(); ++p) {
    std::vector<std::pair<double, std::size_t>> c;
    for (std::size_t j = 0; j < p; ++j) c.emplace_back(euclid(pts[order[p]], pts[order[j]]), j);
    std::sort(c.begin(), c.end());
    for (std::size_t j = 0; j < std::min(k, p); ++j) out[p].push_back(order[c[j].second]);
  }
  return out;
}

inline std::vector<std::vector<std::size_t>> brute_knn(const std::vector<XyzPoint>& obs,
                                                       const std::vector<XyzPoint>& pred,
                                                       std::size_t k) {
  std::vector<std::vector<std::size_t>> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> c;
    for (std::size_t j = 0; j < obs.size(); ++j) c.emplace_back(euclid(pred[i], obs[j]), j);
    std::sort(c.begin(), c.end());
    for (std::size_t j = 0; j < k; ++j) out[i].push_back(c[j].second);
  }
  return out;
}

/// Exact Gaussian log density via an explicit inverse and determinant.
inline double inverse_loglik(const Eigen::MatrixXd& cov, const Eigen::VectorXd& r) {
  const Eigen::MatrixXd inv = cov.inverse();
  const double n = static_cast<double>(r.size());
  return -0.5 * (n * std::log(2.0 * M_PI) + std::log(cov.determinant()) + r.dot(inv * r));
}

}  // namespace nsgp::test
