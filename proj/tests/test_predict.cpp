#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "nsgp/neighbors.hpp"
#include "nsgp/predict.hpp"
#include "test_utils.hpp"

namespace nsgp {
namespace {

ChainSamples chain_of(const std::vector<ThetaState>& thetas) {
  ChainSamples c;
  c.n_alpha = thetas.front().alpha.size();
  c.n_phi = thetas.front().phi.size();
  c.names = parameter_names(c.n_alpha, c.n_phi);
  c.draws.resize(static_cast<Eigen::Index>(thetas.size()), thetas.front().size());
  for (std::size_t l = 0; l < thetas.size(); ++l) {
    c.draws.row(static_cast<Eigen::Index>(l)) = thetas[l].pack().transpose();
    c.iterations.push_back(l + 1);
    c.log_post.push_back(0.0);
  }
  return c;
}

ThetaState unit_theta(double tau2) {
  ThetaState t;
  t.mu = 0.0;
  t.tau2 = tau2;
  t.alpha = Eigen::VectorXd::Zero(1);
  t.phi = Eigen::VectorXd::Zero(1);
  return t;
}

/// Observed/held-out split of a synthetic dataset.
struct Split {
  std::vector<XyzPoint> obs, pred;
  DesignMatrices obs_design, pred_design;
  std::vector<double> z_obs, z_pred;
};

Split split(const test::Synthetic& s, std::size_t n_pred) {
  Split out;
  std::vector<std::size_t> oi, pi;
  for (std::size_t i = 0; i < s.points.size(); ++i) (i < n_pred ? pi : oi).push_back(i);
  for (auto i : oi) {
    out.obs.push_back(s.points[i]);
    out.z_obs.push_back(s.z[i]);
  }
  for (auto i : pi) {
    out.pred.push_back(s.points[i]);
    out.z_pred.push_back(s.z[i]);
  }
  out.obs_design = select_rows(s.design, oi);
  out.pred_design = select_rows(s.design, pi);
  return out;
}

}  // namespace

TEST(LocalKrige, OnePointClosedForm) {
  const XyzPoint s{0.0, 0.0, 0.0};
  const std::vector<XyzPoint> obs{{0.3, 0.4, 0.0}};  // distance 0.5
  const std::vector<double> z{5.0};
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  const ObservedField f{obs, z, &one, &one};
  const std::vector<std::size_t> nbr{0};
  const auto r = local_krige_one(s, 1.0, 1.0, unit_theta(0.0), nbr, f, PredictTarget::Latent);
  const double corr = std::exp(-0.5);
  EXPECT_NEAR(r.mean, 5.0 * corr, 1e-14);
  EXPECT_NEAR(r.variance, 1.0 - corr * corr, 1e-14);
}

TEST(LocalKrige, CoincidentPointInterpolates) {
  const XyzPoint s{1.0, 2.0, 3.0};
  const std::vector<XyzPoint> obs{s};
  const std::vector<double> z{7.25};
  const Eigen::VectorXd sig = Eigen::VectorXd::Constant(1, 1.7);
  const Eigen::VectorXd rng = Eigen::VectorXd::Constant(1, 0.9);
  const ObservedField f{obs, z, &sig, &rng};
  const std::vector<std::size_t> nbr{0};
  ThetaState t = unit_theta(0.0);
  t.mu = 3.0;
  const auto r = local_krige_one(s, 1.7, 0.9, t, nbr, f, PredictTarget::Latent);
  EXPECT_NEAR(r.mean, 7.25, 1e-12);
  EXPECT_EQ(r.variance, 0.0);
}

TEST(LocalKrige, ResponseTargetAddsNugget) {
  const auto s = test::make_synthetic(60, 8);
  const Split sp = split(s, 5);
  const auto of = eval_fields(sp.obs_design, s.theta);
  const auto pf = eval_fields(sp.pred_design, s.theta);
  const ObservedField obs{sp.obs, sp.z_obs, &of.sigma, &of.range};
  const auto nbrs = knn_predict_sets(sp.obs, sp.pred, 10);
  for (std::size_t i = 0; i < sp.pred.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto y = local_krige_one(sp.pred[i], pf.sigma(ii), pf.range(ii), s.theta, nbrs[i], obs,
                                   PredictTarget::Latent);
    const auto z = local_krige_one(sp.pred[i], pf.sigma(ii), pf.range(ii), s.theta, nbrs[i], obs,
                                   PredictTarget::Response);
    EXPECT_EQ(y.mean, z.mean);
    EXPECT_NEAR(z.variance - y.variance, s.theta.tau2, 1e-12);
  }
}

TEST(LocalKrige, FarFromDataReturnsPrior) {
  const std::vector<XyzPoint> obs{{6.0, 0.0, 0.0}, {0.0, 6.0, 0.0}};
  const std::vector<double> z{10.0, -4.0};
  const Eigen::VectorXd sig = Eigen::VectorXd::Constant(2, 2.0);
  const Eigen::VectorXd rng = Eigen::VectorXd::Constant(2, 0.01);
  const ObservedField f{obs, z, &sig, &rng};
  const std::vector<std::size_t> nbr{0, 1};
  ThetaState t = unit_theta(0.3);
  t.mu = 1.5;
  const XyzPoint s{0.0, 0.0, 6.0};
  const auto y = local_krige_one(s, 2.0, 0.01, t, nbr, f, PredictTarget::Latent);
  EXPECT_NEAR(y.mean, 1.5, 1e-6);
  EXPECT_NEAR(y.variance, 4.0, 1e-6);
  const auto zr = local_krige_one(s, 2.0, 0.01, t, nbr, f, PredictTarget::Response);
  EXPECT_NEAR(zr.variance, 4.3, 1e-6);
}

TEST(PredictField, TargetStrings) {
  EXPECT_EQ(parse_target("y"), PredictTarget::Latent);
  EXPECT_EQ(to_string(parse_target("z")), "z");
  EXPECT_THROW((void)parse_target("x"), ConfigError);
}

class FieldFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    s_ = test::make_synthetic(210, 21);
    sp_ = split(s_, 10);
  }
  PredictionResult predict(const std::vector<ThetaState>& thetas, std::size_t k,
                           PredictOptions opts = {}) {
    const auto nbrs = knn_predict_sets(sp_.obs, sp_.pred, k);
    return predict_field(sp_.pred, sp_.pred_design, chain_of(thetas), sp_.obs, sp_.obs_design,
                         sp_.z_obs, nbrs, opts);
  }
  test::Synthetic s_;
  Split sp_;
};

TEST_F(FieldFixture, SingleDrawEqualsKriging) {
  const auto res = predict({s_.theta}, 15);
  const auto nbrs = knn_predict_sets(sp_.obs, sp_.pred, 15);
  const auto of = eval_fields(sp_.obs_design, s_.theta);
  const auto pf = eval_fields(sp_.pred_design, s_.theta);
  const ObservedField obs{sp_.obs, sp_.z_obs, &of.sigma, &of.range};
  for (std::size_t i = 0; i < sp_.pred.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto r = local_krige_one(sp_.pred[i], pf.sigma(ii), pf.range(ii), s_.theta, nbrs[i], obs,
                                   PredictTarget::Latent);
    EXPECT_DOUBLE_EQ(res.mean(ii), r.mean);
    EXPECT_NEAR(res.sd(ii) * res.sd(ii), r.variance, 1e-12);
  }
  EXPECT_EQ(res.n_draws, 1u);
}

TEST_F(FieldFixture, IdenticalDrawsHaveNoBetweenVariance) {
  const auto one = predict({s_.theta}, 15);
  const auto two = predict({s_.theta, s_.theta}, 15);
  EXPECT_TRUE(one.mean.isApprox(two.mean, 1e-14));
  EXPECT_TRUE(one.sd.isApprox(two.sd, 1e-12));
}

TEST_F(FieldFixture, LawOfTotalVariance) {
  ThetaState b = s_.theta;
  b.mu += 1.0;
  b.tau2 *= 2.0;
  const auto ra = predict({s_.theta}, 15);
  const auto rb = predict({b}, 15);
  const auto both = predict({s_.theta, b}, 15);
  for (Eigen::Index i = 0; i < both.mean.size(); ++i) {
    const double m = 0.5 * (ra.mean(i) + rb.mean(i));
    const double between = 0.25 * (ra.mean(i) - rb.mean(i)) * (ra.mean(i) - rb.mean(i));
    const double within = 0.5 * (ra.sd(i) * ra.sd(i) + rb.sd(i) * rb.sd(i));
    EXPECT_NEAR(both.mean(i), m, 1e-10);
    EXPECT_NEAR(both.sd(i) * both.sd(i), within + between, 1e-10);
  }
}

TEST_F(FieldFixture, PermutationInvariantOverDraws) {
  std::mt19937_64 rng(3);
  std::vector<ThetaState> draws;
  for (int l = 0; l < 6; ++l) draws.push_back(test::random_theta(rng, 8, 2));
  const auto a = predict(draws, 10);
  std::reverse(draws.begin(), draws.end());
  std::swap(draws[1], draws[4]);
  const auto b = predict(draws, 10);
  EXPECT_TRUE(a.mean.isApprox(b.mean, 1e-12));
  EXPECT_TRUE(a.sd.isApprox(b.sd, 1e-10));
}

TEST_F(FieldFixture, ResponseVarianceExceedsLatentByNugget) {
  PredictOptions o;
  o.target = PredictTarget::Response;
  const auto y = predict({s_.theta}, 15);
  const auto z = predict({s_.theta}, 15, o);
  for (Eigen::Index i = 0; i < y.sd.size(); ++i)
    EXPECT_NEAR(z.sd(i) * z.sd(i) - y.sd(i) * y.sd(i), s_.theta.tau2, 1e-10);
}

TEST_F(FieldFixture, FullNeighborhoodMatchesDenseConditional) {
  const auto res = predict({s_.theta}, sp_.obs.size());
  const auto of = eval_fields(sp_.obs_design, s_.theta);
  const auto pf = eval_fields(sp_.pred_design, s_.theta);
  const Eigen::MatrixXd cz = dense_cov_z(sp_.obs, s_.theta, sp_.obs_design);
  const Eigen::VectorXd resid =
      Eigen::Map<const Eigen::VectorXd>(sp_.z_obs.data(), static_cast<Eigen::Index>(sp_.z_obs.size()))
          .array() -
      s_.theta.mu;
  const Eigen::VectorXd w = cz.fullPivLu().solve(resid);
  for (std::size_t i = 0; i < sp_.pred.size(); ++i) {
    Eigen::VectorXd c(static_cast<Eigen::Index>(sp_.obs.size()));
    for (std::size_t j = 0; j < sp_.obs.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const auto ii = static_cast<Eigen::Index>(i);
      c(jj) = ns_cov(sp_.pred[i], sp_.obs[j], pf.sigma(ii), of.sigma(jj), pf.range(ii), of.range(jj));
    }
    const double oracle = s_.theta.mu + c.dot(w);
    EXPECT_NEAR(res.mean(static_cast<Eigen::Index>(i)), oracle, 1e-6 * std::abs(oracle));
  }
}

TEST_F(FieldFixture, ThreadCountDoesNotChangeResult) {
  PredictOptions o;
  o.threads = 3;
  const auto one = predict({s_.theta}, 12);
  const auto three = predict({s_.theta}, 12, o);
  EXPECT_EQ(one.mean, three.mean);
  EXPECT_EQ(one.sd, three.sd);
}

TEST_F(FieldFixture, RequestedSamplesHaveOneRowPerDraw) {
  PredictOptions o;
  o.sample = true;
  const auto r = predict({s_.theta, s_.theta, s_.theta}, 5, o);
  EXPECT_EQ(r.samples.rows(), 3);
  EXPECT_EQ(r.samples.cols(), 10);
  EXPECT_TRUE(r.samples.allFinite());
}

TEST(PredictField, MoreNeighborsPredictBetter) {
  double mae2 = 0.0, mae15 = 0.0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    auto s = test::make_synthetic(220, 500 + rep, false);
    s.theta.alpha.setZero();
    s.theta.phi.setZero();
    s.theta.phi(0) = std::log(6.0);
    s.theta.tau2 = 0.01;
    s.z = simulate_response(s.points, s.design, s.theta, 900 + rep);
    const Split sp = split(s, 20);
    const ChainSamples chain = chain_of({s.theta});
    for (std::size_t k : {std::size_t{2}, std::size_t{15}}) {
      const auto r = predict_field(sp.pred, sp.pred_design, chain, sp.obs, sp.obs_design, sp.z_obs,
                                   knn_predict_sets(sp.obs, sp.pred, k));
      double mae = 0.0;
      for (std::size_t i = 0; i < sp.pred.size(); ++i)
        mae += std::abs(r.mean(static_cast<Eigen::Index>(i)) - sp.z_pred[i]);
      (k == 2 ? mae2 : mae15) += mae / static_cast<double>(sp.pred.size());
    }
  }
  EXPECT_LE(mae15, mae2) << "k=15 " << mae15 << " k=2 " << mae2;
}

TEST(PredictField, RejectsEmptyChainAndMismatchedInputs) {
  auto s = test::make_synthetic(30, 2);
  ChainSamples empty;
  const std::vector<std::vector<std::size_t>> nbrs(s.points.size());
  EXPECT_THROW((void)predict_field(s.points, s.design, empty, s.points, s.design, s.z, nbrs), DataError);
  const std::vector<std::vector<std::size_t>> short_nbrs(3);
  EXPECT_THROW((void)predict_field(s.points, s.design, chain_of({s.theta}), s.points, s.design, s.z,
                                   short_nbrs),
               DataError);
}

}  // namespace nsgp
