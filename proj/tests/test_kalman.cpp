#include <gtest/gtest.h>

#include <random>

#include "codedtrack/errors.hpp"
#include "codedtrack/kalman.hpp"
#include "test_util.hpp"

using namespace codedtrack;

namespace {

Observer scalar_observer(std::size_t id, double h, double r) {
  Observer o;
  o.id = id;
  o.H = Eigen::MatrixXd::Constant(1, 1, h);
  o.R = Eigen::MatrixXd::Constant(1, 1, r);
  return o;
}

ProcessModel scalar_model(double f, double q) {
  ProcessModel m;
  m.F = Eigen::MatrixXd::Constant(1, 1, f);
  m.Q = Eigen::MatrixXd::Constant(1, 1, q);
  return m;
}

StackedObservation stacked(std::span<const Observer> obs, const Eigen::VectorXd& z) {
  return StackedObservation{stack_observers(obs), z};
}

// Information-form batch update: P^-1 = P~^-1 + H^T R^-1 H.
FilterState information_oracle(const ProcessModel& m, const FilterState& fs,
                               const std::vector<Observer>& obs, const Eigen::VectorXd& z) {
  const Eigen::VectorXd xt = m.F * fs.x_hat;
  const Eigen::MatrixXd Pt = m.F * fs.P * m.F.transpose() + m.Q;
  const auto st = stack_observers(obs);
  const Eigen::MatrixXd Rinv = st->R.inverse();
  const Eigen::MatrixXd info = Pt.inverse() + st->H.transpose() * Rinv * st->H;
  const Eigen::MatrixXd P = info.inverse();
  const Eigen::VectorXd x = xt + P * st->H.transpose() * Rinv * (z - st->H * xt);
  return {x, P, fs.t + 1};
}

}  // namespace

TEST(Predict, IdentityModel) {
  const auto m = scalar_model(1.0, 0.0);
  const FilterState fs{Eigen::VectorXd::Constant(1, 3.0), Eigen::MatrixXd::Constant(1, 1, 2.0), 0};
  const auto p = predict(m, fs);
  EXPECT_EQ(p.x, fs.x_hat);
  EXPECT_EQ(p.P, fs.P);
}

TEST(Predict, AdditiveNoise) {
  ProcessModel m;
  m.F = Eigen::Matrix2d::Identity();
  m.Q = Eigen::Matrix2d::Identity();
  const auto p = predict(m, {Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), 0});
  EXPECT_EQ(p.P, Eigen::MatrixXd(2.0 * Eigen::Matrix2d::Identity()));
}

TEST(Predict, ShearTransition) {
  ProcessModel m;
  m.F.resize(2, 2);
  m.F << 1, 1, 0, 1;
  m.Q = Eigen::Matrix2d::Zero();
  const auto p = predict(m, {Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), 0});
  Eigen::Matrix2d expected;
  expected << 2, 1, 1, 1;
  EXPECT_EQ(p.P, Eigen::MatrixXd(expected));
}

TEST(UpdateOne, ScalarHandComputed) {
  const auto r = update_one(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1),
                            scalar_observer(0, 1, 1), Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(r.K(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(r.x(0), 1.0);
  EXPECT_DOUBLE_EQ(r.P(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(r.S(0, 0), 2.0);
}

TEST(UpdateOne, UninformativeObservation) {
  std::mt19937_64 eng(1);
  const Eigen::MatrixXd P = testutil::random_psd(3, 3, eng, 0.5);
  const Eigen::VectorXd x = testutil::random_vector(3, eng);
  Observer o;
  o.H = testutil::random_matrix(2, 3, eng);
  o.R = 1e12 * Eigen::Matrix2d::Identity();
  const auto r = update_one(x, P, o, Eigen::Vector2d(50, -50));
  EXPECT_LT(testutil::rel_err(r.x, x), 1e-6);
  EXPECT_LT(testutil::rel_err(r.P, P), 1e-6);
}

TEST(UpdateOne, ExactObservationLimit) {
  Observer o;
  o.H = Eigen::Matrix2d::Identity();
  o.R = 1e-8 * Eigen::Matrix2d::Identity();
  const Eigen::Vector2d z(3, -4);
  const auto r = update_one(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), o, z);
  EXPECT_LT((r.x - z).norm(), 1e-4);
}

TEST(UpdateOne, SingularInnovationIsFilterError) {
  Observer o;
  o.H = Eigen::Matrix2d::Zero();
  o.R = Eigen::Matrix2d::Zero();
  EXPECT_THROW(update_one(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), o,
                          Eigen::Vector2d::Zero()),
               FilterError);
}

TEST(UpdateAll, NoObserversIsPrediction) {
  const auto m = scalar_model(2.0, 1.0);
  const FilterState fs{Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Ones(1, 1), 4};
  const std::vector<Observer> none;
  const auto out = update_all(m, fs, none, stacked(none, Eigen::VectorXd(0)));
  EXPECT_DOUBLE_EQ(out.x_hat(0), 2.0);
  EXPECT_DOUBLE_EQ(out.P(0, 0), 5.0);
  EXPECT_EQ(out.t, 5);
}

TEST(UpdateAll, OneObserverIsUpdateAfterPredict) {
  std::mt19937_64 eng(2);
  auto sys = testutil::random_system(3, {2}, eng);
  const FilterState fs{testutil::random_vector(3, eng), testutil::random_psd(3, 3, eng, 0.1), 0};
  const Eigen::VectorXd z = testutil::random_vector(2, eng);
  const auto out = update_all(sys.model, fs, sys.observers, stacked(sys.observers, z));
  const auto p = predict(sys.model, fs);
  const auto ref = update_one(p.x, p.P, sys.observers[0], z);
  EXPECT_EQ(out.x_hat, ref.x);
  EXPECT_EQ(out.P, ref.P);
}

TEST(UpdateAll, TwoScalarObserversByHand) {
  const auto m = scalar_model(1.0, 0.0);
  const std::vector<Observer> obs{scalar_observer(0, 1, 1), scalar_observer(1, 1, 1)};
  const FilterState fs{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1), 0};
  const auto out = update_all(m, fs, obs, stacked(obs, Eigen::Vector2d(2, 2)));
  EXPECT_NEAR(out.x_hat(0), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(out.P(0, 0), 1.0 / 3.0, 1e-15);
}

TEST(UncodedWorkerUpdate, AllObserversIsUpdateAll) {
  std::mt19937_64 eng(3);
  auto sys = testutil::random_system(4, {2, 2, 3}, eng);
  const FilterState fs{testutil::random_vector(4, eng), testutil::random_psd(4, 4, eng, 0.1), 0};
  const auto st = stacked(sys.observers, testutil::random_vector(7, eng));
  const std::vector<std::size_t> all{0, 1, 2};
  const auto a = uncoded_worker_update(sys.model, fs, sys.observers, all, st);
  const auto b = update_all(sys.model, fs, sys.observers, st);
  EXPECT_EQ(a.x_hat, b.x_hat);
  EXPECT_EQ(a.P, b.P);
}

TEST(UncodedWorkerUpdate, EmptySubsetIsPrediction) {
  std::mt19937_64 eng(4);
  auto sys = testutil::random_system(3, {2}, eng);
  const FilterState fs{testutil::random_vector(3, eng), testutil::random_psd(3, 3, eng, 0.1), 0};
  const auto st = stacked(sys.observers, testutil::random_vector(2, eng));
  const auto out = uncoded_worker_update(sys.model, fs, sys.observers, {}, st);
  const auto p = predict(sys.model, fs);
  EXPECT_EQ(out.x_hat, p.x);
  EXPECT_EQ(out.P, p.P);
}

TEST(UncodedWorkerUpdate, SubsetMatchesScalarReference) {
  // Two scalar observers of a scalar state; the worker holds only the second.
  const auto m = scalar_model(0.9, 0.2);
  const std::vector<Observer> obs{scalar_observer(0, 1.0, 0.5), scalar_observer(1, 2.0, 0.3)};
  const FilterState fs{Eigen::VectorXd::Constant(1, 1.5), Eigen::MatrixXd::Constant(1, 1, 0.8), 0};
  const Eigen::Vector2d z(1.0, 3.1);
  const std::vector<std::size_t> subset{1};
  const auto out = uncoded_worker_update(m, fs, obs, subset, stacked(obs, z));

  const double xt = 0.9 * 1.5;
  const double pt = 0.81 * 0.8 + 0.2;
  const double s = 0.3 + 4.0 * pt;
  const double k = pt * 2.0 / s;
  EXPECT_NEAR(out.x_hat(0), xt + k * (3.1 - 2.0 * xt), 1e-14);
  EXPECT_NEAR(out.P(0, 0), (1 - 2.0 * k) * pt, 1e-14);
}

TEST(AverageEstimates, Means) {
  const FilterState a{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 3};
  const FilterState b{Eigen::VectorXd::Constant(1, 2.0), 3.0 * Eigen::MatrixXd::Identity(1, 1), 3};
  const std::vector<FilterState> one{a};
  EXPECT_EQ(average_estimates(one).x_hat, a.x_hat);
  const std::vector<FilterState> two{a, b};
  const auto avg = average_estimates(two);
  EXPECT_DOUBLE_EQ(avg.x_hat(0), 1.0);
  EXPECT_DOUBLE_EQ(avg.P(0, 0), 2.0);
  EXPECT_THROW(average_estimates(std::span<const FilterState>{}), ConfigError);
}

TEST(FullUpdateGains, ReproduceUpdateAllCovariance) {
  std::mt19937_64 eng(8);
  auto sys = testutil::random_system(4, {2, 1, 3}, eng);
  const FilterState fs{testutil::random_vector(4, eng), testutil::random_psd(4, 4, eng, 0.1), 0};
  const auto p = predict(sys.model, fs);
  const auto gains = full_update_gains(p.P, sys.observers, 2);
  ASSERT_EQ(gains.size(), 3u);
  Eigen::MatrixXd P = p.P;
  for (std::size_t o = 0; o < 3; ++o) P = apply_gain(P, gains[o], sys.observers[o].H);
  const auto ref = update_all(sys.model, fs, sys.observers,
                              stacked(sys.observers, testutil::random_vector(6, eng)));
  EXPECT_EQ(P, ref.P);
  EXPECT_EQ(gains[0], kalman_gain(p.P, sys.observers[0].H, sys.observers[0].R));
}

// ---------------------------------------------------------------------------

TEST(KalmanProperty, UpdateAllCovarianceIsSymmetricPsd) {
  std::mt19937_64 eng(10);
  for (int trial = 0; trial < 50; ++trial) {
    auto sys = testutil::random_system(5, {2, 3, 1}, eng);
    FilterState fs{testutil::random_vector(5, eng), testutil::random_psd(5, 5, eng, 0.01), 0};
    for (int t = 0; t < 10; ++t) {
      fs = update_all(sys.model, fs, sys.observers,
                      stacked(sys.observers, testutil::random_vector(6, eng)));
      EXPECT_EQ(fs.P, fs.P.transpose());
      EXPECT_GE(testutil::min_eig(fs.P), -1e-12 * fs.P.trace());
    }
  }
}

TEST(KalmanProperty, UpdateAllMatchesInformationFilter) {
  std::mt19937_64 eng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto sys = testutil::random_system(4, {2, 1, 3}, eng);
    const FilterState fs{testutil::random_vector(4, eng), testutil::random_psd(4, 4, eng, 0.1), 0};
    const Eigen::VectorXd z = testutil::random_vector(6, eng);
    const auto out = update_all(sys.model, fs, sys.observers, stacked(sys.observers, z));
    const auto ref = information_oracle(sys.model, fs, sys.observers, z);
    EXPECT_LT(testutil::rel_err(out.x_hat, ref.x_hat), 1e-6);
    EXPECT_LT(testutil::rel_err(out.P, ref.P), 1e-6);
  }
}

TEST(KalmanProperty, UninformativeObservationsGivePrediction) {
  std::mt19937_64 eng(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto sys = testutil::random_system(4, {2, 3}, eng);
    for (auto& o : sys.observers) o.R *= 1e12;
    const FilterState fs{testutil::random_vector(4, eng), testutil::random_psd(4, 4, eng, 0.1), 0};
    const auto out = update_all(sys.model, fs, sys.observers,
                                stacked(sys.observers, testutil::random_vector(5, eng)));
    const auto p = predict(sys.model, fs);
    EXPECT_LT(testutil::rel_err(out.x_hat, p.x), 1e-6);
    EXPECT_LT(testutil::rel_err(out.P, p.P), 1e-6);
  }
}
