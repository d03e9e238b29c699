#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsgp/covariance.hpp"
#include "nsgp/design.hpp"
#include "nsgp/error.hpp"
#include "nsgp/geo.hpp"
#include "nsgp/neighbors.hpp"
#include "nsgp/parallel.hpp"

namespace nsgp {

/// Natural-log density; -inf encodes a support violation and is never NaN.
struct LogDensity {
  double value = 0.0;

  [[nodiscard]] bool is_finite() const { return std::isfinite(value); }
  static LogDensity neg_inf() { return {-std::numeric_limits<double>::infinity()}; }
};

struct PriorSpec {
  double mu_mean = 0.0;
  double mu_sd = 100.0;
  double tau2_upper = 100.0;
  double alpha_sd = 10.0;
  double phi_sd = 5.0;
  double max_range = kEarthDiameterMm;  // every local range must stay below this
};

inline double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline constexpr double kLog2Pi = 1.8378770664093454836;

/// Independent priors: Normal mean, Uniform(0, upper) nugget, Normal
/// coefficients, and the indicator that no local range reaches max_range.
inline LogDensity log_prior(const ThetaState& theta, const Eigen::MatrixXd& x_range,
                            const PriorSpec& prior = {}) {
  if (!std::isfinite(theta.mu) || !(theta.tau2 > 0.0) || !(theta.tau2 < prior.tau2_upper))
    return LogDensity::neg_inf();
  if (x_range.rows() > 0) {
    const double max_log_range = (x_range * theta.phi).maxCoeff();
    if (!(max_log_range < std::log(prior.max_range))) return LogDensity::neg_inf();
    if (!(std::exp(max_log_range) < prior.max_range)) return LogDensity::neg_inf();
  }
  double lp = normal_logpdf(theta.mu, prior.mu_mean, prior.mu_sd) - std::log(prior.tau2_upper);
  for (double a : theta.alpha) lp += normal_logpdf(a, 0.0, prior.alpha_sd);
  for (double f : theta.phi) lp += normal_logpdf(f, 0.0, prior.phi_sd);
  if (!std::isfinite(lp)) return LogDensity::neg_inf();
  return {lp};
}

/// Conditional variances in (-kVarianceFloor, 0] are treated as roundoff and
/// clamped to kVarianceFloor; anything lower marks an inconsistent theta.
inline constexpr double kVarianceFloor = 1e-12;

/// Per-position kriging weights and conditional variances of the Vecchia
/// factorization of N(mu 1, C_z). Independent of mu.
struct VecchiaFactor {
  std::vector<std::vector<double>> weights;
  std::vector<double> cond_var;
  std::size_t n_clamped = 0;
  std::size_t n_failed = 0;

  [[nodiscard]] bool ok() const { return n_failed == 0; }
};

/// Nearest-neighbor (response) likelihood over a fixed set of locations and a
/// fixed conditioning graph. Squared distances inside every conditioning block
/// are cached at construction; covariances are rebuilt for every theta.
class NngpLikelihood {
 public:
  NngpLikelihood(std::span<const XyzPoint> points, DesignMatrices design, NeighborGraph graph,
                 KernelConfig cfg = {}, std::size_t threads = 1)
      : design_(std::move(design)), graph_(std::move(graph)), cfg_(cfg), threads_(threads) {
    const std::size_t n = points.size();
    if (graph_.size() != n) throw DataError("neighbor graph does not match the number of points");
    if (static_cast<std::size_t>(design_.x_sigma.rows()) != n ||
        static_cast<std::size_t>(design_.x_range.rows()) != n)
      throw DataError("design matrices do not match the number of points");
    offsets_.resize(n + 1, 0);
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t m = graph_.cond_sets[p].size() + 1;
      offsets_[p + 1] = offsets_[p] + m * (m + 1) / 2;
    }
    dist2_.resize(offsets_[n]);
    for (std::size_t p = 0; p < n; ++p) {
      const auto members = block_members(p);
      double* out = dist2_.data() + offsets_[p];
      for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b)
          *out++ = squared_distance(points[members[a]], points[members[b]]);
    }
  }

  [[nodiscard]] std::size_t size() const { return graph_.size(); }
  [[nodiscard]] const NeighborGraph& graph() const { return graph_; }
  [[nodiscard]] const DesignMatrices& design() const { return design_; }
  [[nodiscard]] const KernelConfig& kernel() const { return cfg_; }

  /// Number of full (covariance-rebuilding) evaluations so far.
  [[nodiscard]] std::size_t evaluations() const { return evaluations_; }
  /// Evaluations rejected because a conditional variance was negative.
  [[nodiscard]] std::size_t failures() const { return failures_; }

  [[nodiscard]] VecchiaFactor factorize(const ThetaState& theta) const {
    ++evaluations_;
    const std::size_t n = size();
    const ParameterFields fields = eval_fields(design_, theta);
    VecchiaFactor f;
    f.weights.resize(n);
    f.cond_var.resize(n);
    std::vector<std::size_t> clamped(threads_, 0), failed(threads_, 0);

    parallel_for(n, threads_, [&](std::size_t begin, std::size_t end, std::size_t worker) {
      Eigen::MatrixXd c;
      Eigen::VectorXd cross;
      Eigen::LLT<Eigen::MatrixXd> llt;
      for (std::size_t p = begin; p < end; ++p) {
        const auto& nb = graph_.cond_sets[p];
        const auto m = static_cast<Eigen::Index>(nb.size());
        const std::size_t target = graph_.order[p];
        const double* d2 = dist2_.data() + offsets_[p];
        const double st = fields.sigma(static_cast<Eigen::Index>(target));
        const double rt = fields.range(static_cast<Eigen::Index>(target));
        double var = st * st + theta.tau2;
        auto& w = f.weights[p];
        w.assign(nb.size(), 0.0);
        if (m > 0) {
          c.resize(m, m);
          cross.resize(m);
          // Packed lower triangle: row a of the block (a = 0 is the target).
          for (Eigen::Index a = 1; a <= m; ++a) {
            const double* row = d2 + a * (a + 1) / 2;
            const auto ia = static_cast<Eigen::Index>(nb[static_cast<std::size_t>(a - 1)]);
            const double sa = fields.sigma(ia);
            const double ra = fields.range(ia);
            cross(a - 1) = ns_cov_sq(row[0], st, sa, rt, ra, cfg_.nu);
            for (Eigen::Index b = 1; b < a; ++b) {
              const auto ib = static_cast<Eigen::Index>(nb[static_cast<std::size_t>(b - 1)]);
              const double v = ns_cov_sq(row[b], sa, fields.sigma(ib), ra, fields.range(ib), cfg_.nu);
              c(a - 1, b - 1) = v;
              c(b - 1, a - 1) = v;
            }
            c(a - 1, a - 1) = sa * sa + theta.tau2 + cfg_.jitter;
          }
          llt.compute(c);
          if (llt.info() != Eigen::Success) {
            ++failed[worker];
            f.cond_var[p] = std::numeric_limits<double>::quiet_NaN();
            continue;
          }
          const Eigen::VectorXd sol = llt.solve(cross);
          for (Eigen::Index a = 0; a < m; ++a) w[static_cast<std::size_t>(a)] = sol(a);
          var -= cross.dot(sol);
        }
        var += cfg_.jitter;
        if (!std::isfinite(var) || var < -kVarianceFloor) {
          ++failed[worker];
        } else if (var <= 0.0) {
          var = kVarianceFloor;
          ++clamped[worker];
        }
        f.cond_var[p] = var;
      }
    });
    for (std::size_t t = 0; t < threads_; ++t) {
      f.n_clamped += clamped[t];
      f.n_failed += failed[t];
    }
    if (!f.ok()) ++failures_;
    return f;
  }

  /// Log-likelihood of z (indexed by point) given a factor and the mean.
  [[nodiscard]] LogDensity loglik(const VecchiaFactor& f, std::span<const double> z,
                                  double mu) const {
    if (!f.ok()) return LogDensity::neg_inf();
    const std::size_t n = size();
    if (z.size() != n) throw DataError("response length does not match the likelihood");
    std::vector<double> terms(n);
    parallel_for(n, threads_, [&](std::size_t begin, std::size_t end, std::size_t) {
      for (std::size_t p = begin; p < end; ++p) {
        const auto& nb = graph_.cond_sets[p];
        double r = z[graph_.order[p]] - mu;
        for (std::size_t a = 0; a < nb.size(); ++a) r -= f.weights[p][a] * (z[nb[a]] - mu);
        const double v = f.cond_var[p];
        terms[p] = -0.5 * (kLog2Pi + std::log(v) + r * r / v);
      }
    });
    const double total = pairwise_sum(terms);
    if (!std::isfinite(total)) return LogDensity::neg_inf();
    return {total};
  }

  [[nodiscard]] LogDensity loglik(std::span<const double> z, const ThetaState& theta) const {
    return loglik(factorize(theta), z, theta.mu);
  }

 private:
  [[nodiscard]] std::vector<std::size_t> block_members(std::size_t p) const {
    std::vector<std::size_t> members;
    members.reserve(graph_.cond_sets[p].size() + 1);
    members.push_back(graph_.order[p]);
    members.insert(members.end(), graph_.cond_sets[p].begin(), graph_.cond_sets[p].end());
    return members;
  }

  DesignMatrices design_;
  NeighborGraph graph_;
  KernelConfig cfg_;
  std::size_t threads_ = 1;
  std::vector<std::size_t> offsets_;
  std::vector<double> dist2_;
  mutable std::size_t evaluations_ = 0;
  mutable std::size_t failures_ = 0;
};

/// One-shot NNGP log-likelihood.
inline LogDensity nngp_loglik(std::span<const double> z, const ThetaState& theta,
                              const NeighborGraph& graph, std::span<const XyzPoint> points,
                              const DesignMatrices& design, const KernelConfig& cfg = {}) {
  return NngpLikelihood(points, design, graph, cfg).loglik(z, theta);
}

inline constexpr std::size_t kMaxDenseSize = 4000;

/// Dense covariance of the response at the given points.
inline CovarianceMatrix dense_cov_z(std::span<const XyzPoint> points, const ThetaState& theta,
                                    const DesignMatrices& design, const KernelConfig& cfg = {}) {
  const ParameterFields fields = eval_fields(design, theta);
  return build_cov_z(build_cov_y(points, fields.sigma, fields.range, cfg), theta.tau2);
}

/// Cholesky factor of a covariance; on failure retries once with a jitter of
/// 1e-10 times the mean diagonal.
inline Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::MatrixXd jittered = cov;
  jittered.diagonal().array() += 1e-10 * cov.diagonal().mean();
  llt.compute(jittered);
  if (llt.info() != Eigen::Success)
    throw NumericalError("dense covariance is not positive definite even after jitter");
  return llt;
}

/// Exact Gaussian log-likelihood by dense Cholesky; a reference for small N.
inline LogDensity exact_loglik(std::span<const double> z, const ThetaState& theta,
                               std::span<const XyzPoint> points, const DesignMatrices& design,
                               const KernelConfig& cfg = {}) {
  const std::size_t n = points.size();
  if (n > kMaxDenseSize)
    throw ConfigError("exact likelihood limited to " + std::to_string(kMaxDenseSize) + " points");
  if (z.size() != n) throw DataError("response length does not match the points");
  const auto llt = robust_cholesky(dense_cov_z(points, theta, design, cfg));
  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) r(static_cast<Eigen::Index>(i)) = z[i] - theta.mu;
  const Eigen::VectorXd u = llt.matrixL().solve(r);
  const double logdet = 2.0 * llt.matrixL().nestedExpression().diagonal().array().log().sum();
  return {-0.5 * (static_cast<double>(n) * kLog2Pi + logdet + u.squaredNorm())};
}

/// Unnormalized log posterior; the likelihood is skipped when the prior is -inf.
inline LogDensity log_posterior(std::span<const double> z, const ThetaState& theta,
                                const NngpLikelihood& lik, const PriorSpec& prior = {}) {
  const LogDensity lp = log_prior(theta, lik.design().x_range, prior);
  if (!lp.is_finite()) return lp;
  const LogDensity ll = lik.loglik(z, theta);
  if (!ll.is_finite()) return ll;
  return {lp.value + ll.value};
}

}  // namespace nsgp
