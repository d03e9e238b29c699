#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsgp/covariance.hpp"
#include "nsgp/design.hpp"
#include "nsgp/error.hpp"
#include "nsgp/geo.hpp"
#include "nsgp/mcmc.hpp"
#include "nsgp/parallel.hpp"

namespace nsgp {

enum class PredictTarget { Latent, Response };  // y(.) or z(.)

inline std::string to_string(PredictTarget t) { return t == PredictTarget::Latent ? "y" : "z"; }

inline PredictTarget parse_target(const std::string& s) {
  if (s == "y") return PredictTarget::Latent;
  if (s == "z") return PredictTarget::Response;
  throw ConfigError("prediction target must be 'y' or 'z', got '" + s + "'");
}

struct KrigeResult {
  double mean = 0.0;
  double variance = 0.0;
};

/// Observed locations and their response, with the parameter fields of the
/// current draw evaluated at them.
struct ObservedField {
  std::span<const XyzPoint> points;
  std::span<const double> z;
  const Eigen::VectorXd* sigma = nullptr;
  const Eigen::VectorXd* range = nullptr;
};

/// Conditional-Gaussian prediction at one location from its neighbors. The
/// neighbor block uses C_z (nugget on the diagonal); cross-covariances use
/// C_y because the target is never an observed location.
inline KrigeResult local_krige_one(const XyzPoint& s, double sigma_s, double range_s,
                                   const ThetaState& theta, std::span<const std::size_t> nbrs,
                                   const ObservedField& obs, PredictTarget target,
                                   const KernelConfig& cfg = {}) {
  const auto m = static_cast<Eigen::Index>(nbrs.size());
  const Eigen::VectorXd& sig = *obs.sigma;
  const Eigen::VectorXd& rng = *obs.range;
  Eigen::MatrixXd c(m, m);
  Eigen::VectorXd cross(m);
  Eigen::VectorXd resid(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto ia = static_cast<Eigen::Index>(nbrs[static_cast<std::size_t>(a)]);
    const XyzPoint& pa = obs.points[static_cast<std::size_t>(ia)];
    cross(a) = ns_cov(s, pa, sigma_s, sig(ia), range_s, rng(ia), cfg);
    resid(a) = obs.z[static_cast<std::size_t>(ia)] - theta.mu;
    for (Eigen::Index b = 0; b < a; ++b) {
      const auto ib = static_cast<Eigen::Index>(nbrs[static_cast<std::size_t>(b)]);
      const double v = ns_cov(pa, obs.points[static_cast<std::size_t>(ib)], sig(ia), sig(ib),
                              rng(ia), rng(ib), cfg);
      c(a, b) = v;
      c(b, a) = v;
    }
    c(a, a) = sig(ia) * sig(ia) + theta.tau2 + cfg.jitter;
  }
  KrigeResult out{theta.mu, sigma_s * sigma_s};
  if (m > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success)
      throw NumericalError("neighbor covariance is not positive definite");
    const Eigen::VectorXd w = llt.solve(cross);
    out.mean += w.dot(resid);
    out.variance -= w.dot(cross);
  }
  if (out.variance < -1e-12) throw NumericalError("negative kriging variance");
  if (out.variance < 0.0) out.variance = 0.0;
  if (target == PredictTarget::Response) out.variance += theta.tau2;
  return out;
}

/// Posterior predictive mean and SD per location. `sd` combines the average
/// within-draw variance with the between-draw variance of the means; locations
/// are predicted independently given each draw.
struct PredictionResult {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  std::size_t n_draws = 0;
  PredictTarget target = PredictTarget::Latent;
  Eigen::MatrixXd samples;  // draws x locations, filled only on request
};

struct PredictOptions {
  PredictTarget target = PredictTarget::Latent;
  KernelConfig kernel{};
  std::size_t threads = 1;
  bool sample = false;
  std::uint64_t seed = 1;
};

inline PredictionResult predict_field(std::span<const XyzPoint> pred_points,
                                      const DesignMatrices& pred_design, const ChainSamples& chain,
                                      std::span<const XyzPoint> obs_points,
                                      const DesignMatrices& obs_design, std::span<const double> z_obs,
                                      const std::vector<std::vector<std::size_t>>& pred_nbrs,
                                      const PredictOptions& opts = {}) {
  if (chain.size() == 0) throw DataError("prediction needs at least one posterior draw");
  const std::size_t m = pred_points.size();
  if (pred_nbrs.size() != m || static_cast<std::size_t>(pred_design.x_sigma.rows()) != m)
    throw DataError("prediction points, design and neighbor sets differ in length");
  if (z_obs.size() != obs_points.size() ||
      static_cast<std::size_t>(obs_design.x_sigma.rows()) != obs_points.size())
    throw DataError("observed points, design and response differ in length");

  const auto mi = static_cast<Eigen::Index>(m);
  PredictionResult res;
  res.target = opts.target;
  res.n_draws = chain.size();
  Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(mi);
  Eigen::VectorXd m2_acc = Eigen::VectorXd::Zero(mi);
  Eigen::VectorXd var_acc = Eigen::VectorXd::Zero(mi);
  if (opts.sample) res.samples.resize(static_cast<Eigen::Index>(chain.size()), mi);
  Rng rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<KrigeResult> draw_out(m);
  for (std::size_t l = 0; l < chain.size(); ++l) {
    const ThetaState theta = chain.theta(l);
    const ParameterFields obs_fields = eval_fields(obs_design, theta);
    const ParameterFields pred_fields = eval_fields(pred_design, theta);
    const ObservedField obs{obs_points, z_obs, &obs_fields.sigma, &obs_fields.range};
    parallel_for(m, opts.threads, [&](std::size_t begin, std::size_t end, std::size_t) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        draw_out[i] = local_krige_one(pred_points[i], pred_fields.sigma(ii), pred_fields.range(ii),
                                      theta, pred_nbrs[i], obs, opts.target, opts.kernel);
      }
    });
    const double count = static_cast<double>(l + 1);
    for (std::size_t i = 0; i < m; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double d = draw_out[i].mean - mean_acc(ii);
      mean_acc(ii) += d / count;
      m2_acc(ii) += d * (draw_out[i].mean - mean_acc(ii));
      var_acc(ii) += draw_out[i].variance;
      if (opts.sample) {
        res.samples(static_cast<Eigen::Index>(l), ii) =
            draw_out[i].mean + std::sqrt(draw_out[i].variance) * normal(rng);
      }
    }
  }
  const double n = static_cast<double>(chain.size());
  res.mean = mean_acc;
  res.sd = (var_acc.array() / n + m2_acc.array() / n).max(0.0).sqrt().matrix();
  return res;
}

}  // namespace nsgp
