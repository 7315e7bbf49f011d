#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "codedtrack/random.hpp"

namespace codedtrack {

/// Linear-Gaussian process x_t = F x_{t-1} + q_t, q_t ~ N(0, Q).
struct ProcessModel {
  Eigen::MatrixXd F;
  Eigen::MatrixXd Q;

  Eigen::Index dim() const { return F.rows(); }
  /// Throws ConfigError unless F, Q are d x d and Q is symmetric PSD (1e-10).
  void validate() const;
};

/// One observer: z^(o) = H x + r, r ~ N(0, R).
struct Observer {
  std::size_t id = 0;
  Eigen::MatrixXd H;
  Eigen::MatrixXd R;

  Eigen::Index rows() const { return H.rows(); }
  void validate(Eigen::Index state_dim) const;
};

/// Vertical stack of all observers in id order. Immutable and shared between
/// the observations of a trajectory.
struct ObservationStack {
  Eigen::MatrixXd H;
  Eigen::MatrixXd R;  // block diagonal
  /// offsets[o] .. offsets[o + 1] are the rows of observer o; size N_o + 1.
  std::vector<Eigen::Index> offsets;

  Eigen::Index rows() const { return H.rows(); }
  std::size_t observer_count() const { return offsets.size() - 1; }
  Eigen::Index block_rows(std::size_t o) const { return offsets[o + 1] - offsets[o]; }
};

std::shared_ptr<const ObservationStack> stack_observers(std::span<const Observer> observers);

/// Stacked observation z_t together with its (shared) stacked model.
struct StackedObservation {
  std::shared_ptr<const ObservationStack> stack;
  Eigen::VectorXd z;

  /// z^(o), the rows of observer o.
  Eigen::VectorXd block(std::size_t o) const;
};

struct Trajectory {
  std::vector<Eigen::VectorXd> states;
  std::vector<StackedObservation> observations;

  std::size_t size() const { return states.size(); }
};

/// Lower factor L with L L^T = cov. Cholesky, retried with 1e-12 I jitter when
/// the factorization fails (rank-deficient covariances).
Eigen::MatrixXd gaussian_factor(const Eigen::MatrixXd& cov);

/// Draw from N(mean, L L^T) given the factor.
Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& factor,
                                RandomStream& rng);

Eigen::VectorXd step_state(const ProcessModel& model, const Eigen::VectorXd& x_prev,
                           RandomStream& rng);

StackedObservation observe(std::span<const Observer> observers, const Eigen::VectorXd& x,
                           RandomStream& rng);

/// States x_1..x_T starting from x0; observation t is drawn from state t.
/// Draw order per step: process noise, then observer noise in id order.
Trajectory simulate(const ProcessModel& model, std::span<const Observer> observers,
                    const Eigen::VectorXd& x0, std::size_t steps, RandomStream& rng);

}  // namespace codedtrack
