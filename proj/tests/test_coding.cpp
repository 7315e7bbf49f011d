#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "codedtrack/coding.hpp"
#include "codedtrack/errors.hpp"
#include "codedtrack/vehicles.hpp"
#include "test_util.hpp"

using namespace codedtrack;

namespace {

std::shared_ptr<const ObservationStack> random_stack(Eigen::Index d,
                                                     const std::vector<Eigen::Index>& rows,
                                                     std::mt19937_64& eng) {
  const auto sys = testutil::random_system(d, rows, eng);
  return stack_observers(sys.observers);
}

}  // namespace

TEST(DesignReplication, SingleWorkerIsCentralized) {
  std::mt19937_64 eng(1);
  const auto st = random_stack(3, {2, 1, 2}, eng);
  const auto cd = design_replication(1, *st, 3);
  EXPECT_EQ(cd.worker_count(), 1u);
  EXPECT_EQ(cd.estimate_count(), 1u);
  EXPECT_TRUE(cd.is_identity_estimate(0));
  EXPECT_EQ(cd.coded_observation_count(), 3u);
  EXPECT_DOUBLE_EQ(cd.rate, 1.0);
  EXPECT_EQ(cd.gains_per_worker, 0u);
  EXPECT_TRUE(verify_design(cd, st->H));
}

TEST(DesignReplication, TwoWorkersHoldEverything) {
  std::mt19937_64 eng(2);
  const auto st = random_stack(3, {2, 2}, eng);
  const auto cd = design_replication(2, *st, 3);
  EXPECT_DOUBLE_EQ(cd.rate, 0.5);
  const Eigen::VectorXd z = testutil::random_vector(4, eng);
  for (std::size_t j = 0; j < 2; ++j) {
    ASSERT_EQ(cd.estimate_observations[j].size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
      const std::size_t i = cd.estimate_observations[j][k];
      EXPECT_EQ(cd.C_blocks[i] * z, z.segment(st->offsets[k], st->block_rows(k)));
      EXPECT_EQ(cd.A_blocks[i], st->H.middleRows(st->offsets[k], st->block_rows(k)));
      EXPECT_EQ(cd.source_observer[i], k);
    }
  }
}

TEST(DesignReplication, Counts) {
  std::mt19937_64 eng(3);
  const auto st = random_stack(2, {1, 1, 1, 1}, eng);
  const auto cd = design_replication(3, *st, 2);
  EXPECT_EQ(cd.coded_observation_count(), 12u);
  EXPECT_EQ(cd.estimate_count(), 3u);
}

TEST(DesignRandomMds, RateOneIdentityH) {
  // H = I_d from d scalar observers.
  std::vector<Observer> obs;
  for (std::size_t o = 0; o < 4; ++o) {
    Observer ob;
    ob.id = o;
    ob.H = Eigen::MatrixXd::Zero(1, 4);
    ob.H(0, static_cast<Eigen::Index>(o)) = 1.0;
    ob.R = Eigen::MatrixXd::Identity(1, 1);
    obs.push_back(ob);
  }
  const auto st = stack_observers(obs);
  RandomStream rng(4);
  const auto cd = design_random_mds(1, *st, 4, 1.0, rng);
  EXPECT_EQ(cd.estimate_count(), 4u);
  EXPECT_EQ(cd.gains_per_worker, 4u);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(cd.B_blocks[j], cd.C_blocks[j]);
}

TEST(DesignRandomMds, GainsPerWorkerVehicleScale) {
  const auto sc = build_scenario(10, 5, 0.1);
  const auto st = stack_observers(sc.observers);
  RandomStream rng(5);
  const auto cd = design_random_mds(16, *st, 40, 1.0 / 3.0, rng);
  EXPECT_EQ(cd.gains_per_worker, 2u);
  EXPECT_EQ(cd.coded_rows(), 720);
}

TEST(DesignRandomMds, EvenSplit) {
  const auto sc = build_scenario(10, 5, 0.1);
  const auto st = stack_observers(sc.observers);
  RandomStream rng(6);
  const auto cd = design_random_mds(16, *st, 40, 0.5, rng);
  EXPECT_EQ(cd.estimate_count(), 480u);
  for (const auto& w : cd.worker_estimates) EXPECT_EQ(w.size(), 30u);
  RandomStream rng2(6);
  const auto uneven = design_random_mds(7, *st, 40, 0.5, rng2);
  for (const auto& w : uneven.worker_estimates) {
    EXPECT_TRUE(w.size() == 480 / 7 || w.size() == 480 / 7 + 1);
  }
}

TEST(DesignRandomMds, ConstructionRules) {
  std::mt19937_64 eng(7);
  const auto st = random_stack(3, {2, 2, 2}, eng);
  RandomStream rng(7);
  const auto cd = design_random_mds(2, *st, 3, 0.5, rng);
  EXPECT_EQ(cd.coded_rows(), 12);
  EXPECT_DOUBLE_EQ(cd.rate, 0.5);
  for (std::size_t i = 0; i < cd.coded_observation_count(); ++i) {
    EXPECT_EQ(cd.C_blocks[i].rows(), 1);
    EXPECT_EQ(cd.A_blocks[i], Eigen::MatrixXd::Identity(1, 1));
    EXPECT_EQ(cd.estimate_observations[i], std::vector<std::size_t>{i});
    EXPECT_LT((cd.B_blocks[i] - cd.C_blocks[i] * st->H).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DesignRandomMds, RejectsBadArguments) {
  std::mt19937_64 eng(8);
  const auto st = random_stack(6, {2, 2}, eng);
  RandomStream rng(8);
  EXPECT_THROW(design_random_mds(0, *st, 6, 0.5, rng), ConfigError);
  EXPECT_THROW(design_random_mds(2, *st, 6, 1.5, rng), ConfigError);
  EXPECT_THROW(design_random_mds(2, *st, 6, 1.0, rng), ConfigError);  // n_C = 4 < d
}

TEST(VerifyDesign, PerturbedAFails) {
  std::mt19937_64 eng(9);
  const auto st = random_stack(3, {2, 1}, eng);
  auto rep = design_replication(2, *st, 3);
  EXPECT_TRUE(verify_design(rep, st->H));
  rep.A_blocks[1](0, 0) += 1e-3;
  EXPECT_FALSE(verify_design(rep, st->H));

  RandomStream rng(9);
  auto mds = design_random_mds(2, *st, 3, 0.5, rng);
  EXPECT_TRUE(verify_design(mds, st->H));
  mds.worker_estimates[0].push_back(mds.worker_estimates[1].front());
  EXPECT_FALSE(verify_design(mds, st->H));
}

TEST(EstimateOps, ReplicationRateHalf) {
  const auto sc = build_scenario(10, 5, 0.1);
  const auto st = stack_observers(sc.observers);
  const auto cd = design_replication(2, *st, 40);
  EXPECT_DOUBLE_EQ(estimate_ops(cd, 24, 2), 276480.0);
}

TEST(EstimateOps, MdsThirdSixteenWorkers) {
  const auto sc = build_scenario(10, 5, 0.1);
  const auto st = stack_observers(sc.observers);
  RandomStream rng(10);
  const auto cd = design_random_mds(16, *st, 40, 1.0 / 3.0, rng);
  EXPECT_DOUBLE_EQ(estimate_ops(cd, 24, 16), 2.0 * 16 * 24 * 24 * 24 + 720);
}

TEST(EstimateOps, ScalarCodeWithoutGains) {
  CodeDesign cd;
  for (std::size_t i = 0; i < 5; ++i) {
    cd.C_blocks.push_back(Eigen::MatrixXd::Ones(1, 5));
    cd.estimate_observations.push_back({i});
  }
  cd.worker_estimates = {{0, 1, 2, 3, 4}};
  EXPECT_DOUBLE_EQ(estimate_ops(cd, 4, 1), 5.0);
}

TEST(DesignFingerprint, DeterministicPerSeed) {
  std::mt19937_64 eng(11);
  const auto st = random_stack(3, {2, 2}, eng);
  RandomStream a(1);
  RandomStream b(1);
  RandomStream c(2);
  const auto d1 = design_random_mds(2, *st, 3, 0.5, a);
  const auto d2 = design_random_mds(2, *st, 3, 0.5, b);
  const auto d3 = design_random_mds(2, *st, 3, 0.5, c);
  EXPECT_EQ(serialize_design(d1), serialize_design(d2));
  EXPECT_EQ(design_fingerprint(d1), design_fingerprint(d2));
  EXPECT_NE(design_fingerprint(d1), design_fingerprint(d3));
}

// ---------------------------------------------------------------------------

TEST(CodingProperty, GeneratedDesignsVerify) {
  std::mt19937_64 eng(20);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = 2 + trial % 5;
    const auto st = random_stack(d, {d, 2, 3}, eng);
    const std::size_t n_w = 1 + static_cast<std::size_t>(trial % 4);
    EXPECT_TRUE(verify_design(design_replication(n_w, *st, d), st->H));
    RandomStream rng(static_cast<std::uint64_t>(trial));
    for (const double rate : {1.0, 0.5, 1.0 / 3.0}) {
      EXPECT_TRUE(verify_design(design_random_mds(n_w, *st, d, rate, rng), st->H));
    }
  }
}

TEST(CodingProperty, AnyDRowsOfMdsBHaveFullRank) {
  std::mt19937_64 eng(21);
  const Eigen::Index d = 8;
  const auto st = random_stack(d, {4, 4, 4}, eng);
  RandomStream rng(21);
  const auto cd = design_random_mds(3, *st, d, 0.5, rng);
  std::vector<std::size_t> idx(cd.estimate_count());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (int trial = 0; trial < 100; ++trial) {
    std::shuffle(idx.begin(), idx.end(), eng);
    Eigen::MatrixXd B(d, d);
    for (Eigen::Index r = 0; r < d; ++r) B.row(r) = cd.B_blocks[idx[static_cast<std::size_t>(r)]];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
    const auto& sv = svd.singularValues();
    EXPECT_GT(sv(d - 1), 1e-8 * sv(0));
  }
}

TEST(CodingProperty, ReplicationBlocksAreIdentities) {
  std::mt19937_64 eng(22);
  const auto st = random_stack(5, {2, 3}, eng);
  const auto cd = design_replication(4, *st, 5);
  for (std::size_t j = 0; j < cd.estimate_count(); ++j) {
    EXPECT_TRUE(cd.is_identity_estimate(j));
    const Eigen::VectorXd x = testutil::random_vector(5, eng);
    EXPECT_EQ(cd.B_blocks[j] * x, x);
  }
}
