#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "codedtrack/model.hpp"

namespace codedtrack {

/// Estimate x_hat_t with error covariance P_t.
struct FilterState {
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd P;
  long t = 0;
};

struct Prediction {
  Eigen::VectorXd x;
  Eigen::MatrixXd P;
};

/// Uncoded Kalman gain K_t^(o) of one observer, generated at step t.
struct GainRecord {
  std::size_t observer_id = 0;
  Eigen::MatrixXd K;
  long t = 0;
};

struct UpdateResult {
  Eigen::VectorXd x;
  Eigen::MatrixXd P;
  Eigen::MatrixXd K;
  Eigen::MatrixXd S;
};

/// Reciprocal condition below which an innovation covariance counts as singular.
inline constexpr double kSingularRcond = 1e-13;

Prediction predict(const ProcessModel& model, const FilterState& fs);

/// Measurement update against observation z = H x + noise, noise ~ N(0, noise_cov).
/// Returns nullopt if S = noise_cov + H P H^T is numerically singular.
/// This is the single code path shared by the uncoded and the coded filters.
std::optional<UpdateResult> try_update(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& P_pred,
                                       const Eigen::MatrixXd& H, const Eigen::MatrixXd& noise_cov,
                                       const Eigen::VectorXd& z);

/// Throws FilterError on a singular innovation covariance.
UpdateResult update_one(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& P_pred,
                        const Observer& obs, const Eigen::VectorXd& z_o);

/// K = P H^T S^-1 with S = R + H P H^T. Throws FilterError if S is singular.
Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& P_pred, const Eigen::MatrixXd& H,
                            const Eigen::MatrixXd& R);

/// Gains K^(o) of the ideal filter's sequential full update started at P_pred,
/// for observers 0..last in id order: observer o's gain is computed from P_pred
/// already updated by observers 0..o-1. Throws FilterError on a singular S.
std::vector<Eigen::MatrixXd> full_update_gains(const Eigen::MatrixXd& P_pred,
                                               std::span<const Observer> observers,
                                               std::size_t last);

/// (I - K H) P, symmetrized.
Eigen::MatrixXd apply_gain(const Eigen::MatrixXd& P, const Eigen::MatrixXd& K,
                           const Eigen::MatrixXd& H);

void symmetrize(Eigen::MatrixXd& P);

/// Ideal centralized filter: predict, then update with every observer in id order.
FilterState update_all(const ProcessModel& model, const FilterState& fs,
                       std::span<const Observer> observers, const StackedObservation& stacked);

/// Same as update_all but only with the observers listed in `subset` (ascending).
FilterState uncoded_worker_update(const ProcessModel& model, const FilterState& fs_prev,
                                  std::span<const Observer> observers,
                                  std::span<const std::size_t> subset,
                                  const StackedObservation& stacked);

/// Elementwise mean of the estimates and of the covariances. Throws on empty input.
FilterState average_estimates(std::span<const FilterState> states);

}  // namespace codedtrack
