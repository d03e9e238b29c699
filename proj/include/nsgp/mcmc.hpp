#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsgp/design.hpp"
#include "nsgp/error.hpp"
#include "nsgp/likelihood.hpp"

namespace nsgp {

using Rng = std::mt19937_64;
using LogTarget = std::function<double(const Eigen::VectorXd&)>;

struct SamplerConfig {
  std::size_t n_iter = 20000;
  std::size_t n_burn = 10000;
  std::size_t thin = 5;
  std::size_t adapt_interval = 50;
  double target_accept_univ = 0.44;
  double target_accept_block = 0.234;
  std::uint64_t rng_seed = 1;
  // Initial proposal scales. A nonpositive mu scale means 0.1 * sd(z).
  double mu_scale = 0.0;
  double log_tau2_scale = 0.5;
  double alpha_scale = 0.05;
  double phi_scale = 0.05;

  void validate() const {
    if (n_burn > n_iter) throw ConfigError("burn-in exceeds the number of iterations");
    if (thin < 1) throw ConfigError("thinning interval must be at least 1");
    if (adapt_interval < 1) throw ConfigError("adaptation interval must be at least 1");
  }

  [[nodiscard]] std::size_t saved_count() const { return (n_iter - n_burn) / thin; }
};

/// Adaptation step size at batch t: min(0.01, t^{-1/2}), vanishing as t grows.
inline double adaptation_step(std::size_t batch) {
  if (batch == 0) return 0.01;
  return std::min(0.01, 1.0 / std::sqrt(static_cast<double>(batch)));
}

/// Moves a proposal scale toward the target acceptance rate.
inline double adapt_scale(double scale, double accept_rate, double target, std::size_t batch) {
  const double delta = adaptation_step(batch);
  if (accept_rate > target) return scale * std::exp(delta);
  if (accept_rate < target) return scale * std::exp(-delta);
  return scale;
}

/// Metropolis accept/reject. Proposals with non-finite log density are
/// rejected without consuming randomness.
inline bool metropolis_accept(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio) || log_ratio == -std::numeric_limits<double>::infinity()) return false;
  if (log_ratio >= 0.0) return true;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return std::log(unif(rng)) < log_ratio;
}

/// Univariate adaptive random-walk Metropolis on one coordinate. With
/// `log_scale` the walk runs on log(x) for a positive parameter and the
/// acceptance ratio carries the Jacobian x'/x.
struct UnivariateSampler {
  std::string name;
  Eigen::Index index = 0;
  double scale = 1.0;
  bool log_scale = false;
  double target_rate = 0.44;
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  std::size_t batch_attempts = 0;
  std::size_t batch_accepted = 0;

  bool step(Eigen::VectorXd& x, double& logp, const LogTarget& target, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double eps = normal(rng);
    Eigen::VectorXd prop = x;
    double log_jacobian = 0.0;
    if (log_scale) {
      prop(index) = x(index) * std::exp(scale * eps);
      log_jacobian = scale * eps;
    } else {
      prop(index) = x(index) + scale * eps;
    }
    ++attempts;
    ++batch_attempts;
    const double lp = target(prop);
    if (!std::isfinite(lp) || !metropolis_accept(lp - logp + log_jacobian, rng)) return false;
    x = std::move(prop);
    logp = lp;
    ++accepted;
    ++batch_accepted;
    return true;
  }

  void adapt(std::size_t batch) {
    if (batch_attempts == 0) return;
    const double rate = static_cast<double>(batch_accepted) / static_cast<double>(batch_attempts);
    scale = adapt_scale(scale, rate, target_rate, batch);
    batch_attempts = 0;
    batch_accepted = 0;
  }

  [[nodiscard]] double acceptance_rate() const {
    return attempts ? static_cast<double>(accepted) / static_cast<double>(attempts) : 0.0;
  }
};

/// Block random-walk Metropolis with proposal x' = x + L eps. Adaptation
/// sets L L' = (2.38^2 / d) * (empirical covariance of past draws) + 1e-10 I
/// once the block has moved often enough for that covariance to be usable;
/// before then L is rescaled toward the target rate.
struct BlockSampler {
  std::string name;
  std::vector<Eigen::Index> indices;
  Eigen::MatrixXd chol;
  double target_rate = 0.234;
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  std::size_t batch_attempts = 0;
  std::size_t batch_accepted = 0;
  // Running moments of the block over every recorded iteration.
  std::size_t n_history = 0;
  Eigen::VectorXd hist_mean;
  Eigen::MatrixXd hist_m2;
  bool empirical = false;

  [[nodiscard]] Eigen::Index dim() const { return static_cast<Eigen::Index>(indices.size()); }

  bool step(Eigen::VectorXd& x, double& logp, const LogTarget& target, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd eps(dim());
    for (Eigen::Index j = 0; j < dim(); ++j) eps(j) = normal(rng);
    const Eigen::VectorXd delta = chol.triangularView<Eigen::Lower>() * eps;
    Eigen::VectorXd prop = x;
    for (Eigen::Index j = 0; j < dim(); ++j) prop(indices[static_cast<std::size_t>(j)]) += delta(j);
    ++attempts;
    ++batch_attempts;
    const double lp = target(prop);
    if (!std::isfinite(lp) || !metropolis_accept(lp - logp, rng)) return false;
    x = std::move(prop);
    logp = lp;
    ++accepted;
    ++batch_accepted;
    return true;
  }

  void record(const Eigen::VectorXd& x) {
    Eigen::VectorXd v(dim());
    for (Eigen::Index j = 0; j < dim(); ++j) v(j) = x(indices[static_cast<std::size_t>(j)]);
    if (n_history == 0) {
      hist_mean = Eigen::VectorXd::Zero(dim());
      hist_m2 = Eigen::MatrixXd::Zero(dim(), dim());
    }
    ++n_history;
    const Eigen::VectorXd d0 = v - hist_mean;
    hist_mean += d0 / static_cast<double>(n_history);
    hist_m2 += d0 * (v - hist_mean).transpose();
  }

  [[nodiscard]] Eigen::MatrixXd empirical_covariance() const {
    if (n_history < 2) return Eigen::MatrixXd::Zero(dim(), dim());
    return hist_m2 / static_cast<double>(n_history - 1);
  }

  [[nodiscard]] Eigen::MatrixXd proposal_covariance() const { return chol * chol.transpose(); }

  void adapt(std::size_t batch) {
    if (batch_attempts == 0) return;
    const double rate = static_cast<double>(batch_accepted) / static_cast<double>(batch_attempts);
    batch_attempts = 0;
    batch_accepted = 0;
    const auto d = static_cast<double>(dim());
    if (accepted >= 2 * indices.size() + 2 && n_history > indices.size() + 1) {
      Eigen::MatrixXd cov = (2.38 * 2.38 / d) * empirical_covariance();
      cov.diagonal().array() += 1e-10;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() == Eigen::Success) {
        chol = llt.matrixL();
        empirical = true;
        return;
      }
    }
    chol *= adapt_scale(1.0, rate, target_rate, batch);
  }

  [[nodiscard]] double acceptance_rate() const {
    return attempts ? static_cast<double>(accepted) / static_cast<double>(attempts) : 0.0;
  }
};

/// Posterior draws after burn-in and thinning.
struct ChainSamples {
  std::vector<std::string> names;
  Eigen::MatrixXd draws;  // saved iterations x parameters
  std::vector<std::size_t> iterations;
  std::vector<double> log_post;
  std::map<std::string, double> acceptance;
  Eigen::Index n_alpha = 0;
  Eigen::Index n_phi = 0;
  std::size_t likelihood_evaluations = 0;
  std::size_t likelihood_failures = 0;

  [[nodiscard]] std::size_t size() const { return iterations.size(); }

  [[nodiscard]] ThetaState theta(std::size_t l) const {
    return ThetaState::unpack(draws.row(static_cast<Eigen::Index>(l)).transpose(), n_alpha, n_phi);
  }

  [[nodiscard]] std::vector<double> column(Eigen::Index j) const {
    std::vector<double> v(static_cast<std::size_t>(draws.rows()));
    for (Eigen::Index i = 0; i < draws.rows(); ++i) v[static_cast<std::size_t>(i)] = draws(i, j);
    return v;
  }
};

inline std::vector<std::string> parameter_names(Eigen::Index n_alpha, Eigen::Index n_phi) {
  std::vector<std::string> names{"mu", "tau2"};
  for (Eigen::Index j = 1; j <= n_alpha; ++j) names.push_back("alpha" + std::to_string(j));
  for (Eigen::Index j = 1; j <= n_phi; ++j) names.push_back("phi" + std::to_string(j));
  return names;
}

/// Default starting point: mean of z, nugget at 1% of the sample variance,
/// zero regression coefficients.
inline ThetaState default_init(std::span<const double> z, Eigen::Index n_alpha, Eigen::Index n_phi,
                               const PriorSpec& prior = {}) {
  ThetaState t;
  const double n = static_cast<double>(z.size());
  double mean = 0.0;
  for (double v : z) mean += v;
  mean = z.empty() ? 0.0 : mean / n;
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var = z.size() > 1 ? var / (n - 1.0) : 1.0;
  t.mu = mean;
  t.tau2 = std::clamp(0.01 * var, 1e-8, 0.5 * prior.tau2_upper);
  t.alpha = Eigen::VectorXd::Zero(n_alpha);
  t.phi = Eigen::VectorXd::Zero(n_phi);
  return t;
}

/// Adaptive Metropolis-within-Gibbs for (mu, tau2, alpha, phi). Each sweep
/// updates mu, tau2, the alpha block and the phi block in that order. Moves
/// in mu reuse the current Vecchia factor since it does not depend on mu.
inline ChainSamples run_chain(std::span<const double> z, const NngpLikelihood& lik,
                              const PriorSpec& prior, const SamplerConfig& cfg,
                              const ThetaState* init = nullptr) {
  cfg.validate();
  const Eigen::Index n_alpha = lik.design().x_sigma.cols();
  const Eigen::Index n_phi = lik.design().x_range.cols();
  ThetaState start = init ? *init : default_init(z, n_alpha, n_phi, prior);
  if (start.alpha.size() != n_alpha || start.phi.size() != n_phi)
    throw ConfigError("initial coefficients do not match the design matrices");
  const Eigen::MatrixXd& x_range = lik.design().x_range;

  Eigen::VectorXd x = start.pack();
  auto unpack = [&](const Eigen::VectorXd& v) { return ThetaState::unpack(v, n_alpha, n_phi); };

  VecchiaFactor current_factor;
  VecchiaFactor proposed_factor;
  double current_prior = 0.0;
  double current_lik = 0.0;
  double proposed_prior = 0.0;
  double proposed_lik = 0.0;

  {
    const ThetaState t = unpack(x);
    const LogDensity lp = log_prior(t, x_range, prior);
    if (!lp.is_finite())
      throw NumericalError("initial values violate the prior support; change the initial values");
    current_factor = lik.factorize(t);
    const LogDensity ll = lik.loglik(current_factor, z, t.mu);
    if (!ll.is_finite())
      throw NumericalError("initial log posterior is not finite; change the initial values");
    current_prior = lp.value;
    current_lik = ll.value;
  }
  double logp = current_prior + current_lik;

  // mu: covariance unchanged, only the residuals move.
  const LogTarget mu_target = [&](const Eigen::VectorXd& v) {
    const ThetaState t = unpack(v);
    const LogDensity lp = log_prior(t, x_range, prior);
    if (!lp.is_finite()) return lp.value;
    const LogDensity ll = lik.loglik(current_factor, z, t.mu);
    proposed_prior = lp.value;
    proposed_lik = ll.value;
    return lp.value + ll.value;
  };
  // Everything else rebuilds the factor; the proposal's factor is kept so an
  // accepted move needs no recomputation.
  const LogTarget full_target = [&](const Eigen::VectorXd& v) {
    const ThetaState t = unpack(v);
    const LogDensity lp = log_prior(t, x_range, prior);
    if (!lp.is_finite()) return lp.value;
    proposed_factor = lik.factorize(t);
    const LogDensity ll = lik.loglik(proposed_factor, z, t.mu);
    proposed_prior = lp.value;
    proposed_lik = ll.value;
    return lp.value + ll.value;
  };

  double sd_z = 1.0;
  if (z.size() > 1) {
    const double m = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
    double ss = 0.0;
    for (double v : z) ss += (v - m) * (v - m);
    sd_z = std::sqrt(ss / static_cast<double>(z.size() - 1));
    if (!(sd_z > 0.0)) sd_z = 1.0;
  }

  UnivariateSampler mu_s{"mu", 0, cfg.mu_scale > 0.0 ? cfg.mu_scale : 0.1 * sd_z, false,
                         cfg.target_accept_univ};
  UnivariateSampler tau_s{"tau2", 1, cfg.log_tau2_scale, true, cfg.target_accept_univ};
  BlockSampler alpha_s;
  alpha_s.name = "alpha";
  alpha_s.target_rate = cfg.target_accept_block;
  for (Eigen::Index j = 0; j < n_alpha; ++j) alpha_s.indices.push_back(2 + j);
  alpha_s.chol = cfg.alpha_scale * Eigen::MatrixXd::Identity(n_alpha, n_alpha);
  BlockSampler phi_s;
  phi_s.name = "phi";
  phi_s.target_rate = cfg.target_accept_block;
  for (Eigen::Index j = 0; j < n_phi; ++j) phi_s.indices.push_back(2 + n_alpha + j);
  phi_s.chol = cfg.phi_scale * Eigen::MatrixXd::Identity(n_phi, n_phi);

  Rng rng(cfg.rng_seed);
  ChainSamples out;
  out.names = parameter_names(n_alpha, n_phi);
  out.n_alpha = n_alpha;
  out.n_phi = n_phi;
  out.draws.resize(static_cast<Eigen::Index>(cfg.saved_count()), x.size());
  out.iterations.reserve(cfg.saved_count());
  out.log_post.reserve(cfg.saved_count());

  auto accept_full = [&] {
    std::swap(current_factor, proposed_factor);
    current_prior = proposed_prior;
    current_lik = proposed_lik;
  };

  std::size_t batch = 0;
  for (std::size_t it = 1; it <= cfg.n_iter; ++it) {
    if (mu_s.step(x, logp, mu_target, rng)) {
      current_prior = proposed_prior;
      current_lik = proposed_lik;
    }
    if (tau_s.step(x, logp, full_target, rng)) accept_full();
    if (n_alpha > 0 && alpha_s.step(x, logp, full_target, rng)) accept_full();
    if (n_phi > 0 && phi_s.step(x, logp, full_target, rng)) accept_full();
    if (n_alpha > 0) alpha_s.record(x);
    if (n_phi > 0) phi_s.record(x);

    if (it % cfg.adapt_interval == 0) {
      ++batch;
      mu_s.adapt(batch);
      tau_s.adapt(batch);
      if (n_alpha > 0) alpha_s.adapt(batch);
      if (n_phi > 0) phi_s.adapt(batch);
    }

    if (it > cfg.n_burn && (it - cfg.n_burn) % cfg.thin == 0) {
      const auto row = static_cast<Eigen::Index>(out.iterations.size());
      out.draws.row(row) = x.transpose();
      out.iterations.push_back(it);
      out.log_post.push_back(logp);
    }
  }

  out.acceptance = {{"mu", mu_s.acceptance_rate()},
                    {"tau2", tau_s.acceptance_rate()},
                    {"alpha", alpha_s.acceptance_rate()},
                    {"phi", phi_s.acceptance_rate()}};
  out.likelihood_evaluations = lik.evaluations();
  out.likelihood_failures = lik.failures();
  return out;
}

struct SummaryRow {
  std::string parameter;
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;
};

/// Mean, sample SD and equal-tailed interval (type-7 quantiles) of one
/// parameter's draws.
inline SummaryRow summarize_draws(std::string name, std::span<const double> draws, double level) {
  if (draws.size() < 2) throw DataError("summaries need at least two saved draws");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("credible level must lie in (0, 1)");
  const auto n = static_cast<double>(draws.size());
  const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : draws) ss += (v - mean) * (v - mean);
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  const double tail = 0.5 * (1.0 - level);
  return {std::move(name), mean, std::sqrt(ss / (n - 1.0)), quantile_sorted(sorted, tail),
          quantile_sorted(sorted, 1.0 - tail), level};
}

inline std::vector<SummaryRow> summarize(const ChainSamples& chain, double level) {
  std::vector<SummaryRow> rows;
  for (Eigen::Index j = 0; j < chain.draws.cols(); ++j)
    rows.push_back(summarize_draws(chain.names[static_cast<std::size_t>(j)], chain.column(j), level));
  return rows;
}

/// Split-R-hat: every chain is halved and the classic between/within variance
/// ratio is computed over the halves.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::span<const double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) throw DataError("split R-hat needs at least four draws per chain");
    halves.emplace_back(c.data(), h);
    halves.emplace_back(c.data() + c.size() - h, h);
  }
  const auto n = static_cast<double>(halves.front().size());
  const auto m = static_cast<double>(halves.size());
  std::vector<double> means;
  double w = 0.0;
  for (auto h : halves) {
    const double mu = std::accumulate(h.begin(), h.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : h) ss += (v - mu) * (v - mu);
    w += ss / (n - 1.0);
    means.push_back(mu);
  }
  w /= m;
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= n / (m - 1.0);
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

/// Effective sample size with Geyer's initial positive sequence.
inline double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double c0 = acov(0);
  if (c0 <= 0.0) return static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    const double pair = (acov(lag) + acov(lag + 1)) / c0;
    if (pair <= 0.0) break;
    sum += pair;
  }
  const double tau = std::max(1.0, 2.0 * sum - 1.0);
  return static_cast<double>(n) / tau;
}

}  // namespace nsgp
