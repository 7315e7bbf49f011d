#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "codedtrack/coding.hpp"
#include "codedtrack/kalman.hpp"
#include "codedtrack/model.hpp"
#include "codedtrack/random.hpp"

namespace codedtrack {

/// Everything a worker or the monitor needs to know about the tracked system
/// and its code, with the per-design constants precomputed once.
struct CodedSystem {
  ProcessModel model;
  std::vector<Observer> observers;
  std::shared_ptr<const ObservationStack> stack;
  CodeDesign design;
  std::vector<Eigen::MatrixXd> coded_noise;  ///< C^(i) R C^(i)^T
  Eigen::MatrixXd q_factor;                  ///< Q = q_factor q_factor^T
  /// Per observer: R^(o) = F_o F_o^T. Together they factor the block-diagonal R.
  std::vector<Eigen::MatrixXd> r_factor_blocks;

  Eigen::Index state_dim() const { return model.dim(); }
};

CodedSystem make_coded_system(ProcessModel model, std::vector<Observer> observers,
                              CodeDesign design);

/// Gain and innovation covariance of one coded update, in the order applied.
struct CodedGain {
  std::size_t block = 0;  ///< coded observation index i
  Eigen::MatrixXd K;      ///< K^(i,j), n_B^(j) x n_C^(i)
  Eigen::MatrixXd S;      ///< S^(i,j), n_C^(i) x n_C^(i)
};

/// One symbol of B x_hat_t as produced by a worker.
struct CodedEstimate {
  std::size_t index = 0;  ///< j
  Eigen::VectorXd value;  ///< x_hat^(j), estimate of B^(j) x_t
  std::vector<CodedGain> gains;
  std::vector<std::size_t> skipped;  ///< coded observations dropped for a singular S
  long t = 0;
};

struct WorkerOutput {
  std::size_t worker = 0;
  std::vector<CodedEstimate> estimates;
  std::vector<GainRecord> uncoded_gains;
  long t = 0;
};

/// Coded observations of one step, indexed by i. An empty vector marks a
/// coded observation that was not delivered.
using CodedObservations = std::vector<Eigen::VectorXd>;

/// x~^(j) = (B^(j) F) x_hat_{t-1},
/// P~^(j) = (B^(j) F) P_{t-1} (B^(j) F)^T + B^(j) Q B^(j)^T.
Prediction coded_predict(const CodedSystem& sys, std::size_t j, const Eigen::VectorXd& x_prev,
                         const Eigen::MatrixXd& P_prev);

/// Treats C^(i) z as an observation of B^(j) x with model A^(i,j) and noise
/// covariance C^(i) R C^(i)^T. nullopt when S^(i,j) is singular.
std::optional<UpdateResult> coded_update_one(const Eigen::VectorXd& x_pred,
                                             const Eigen::MatrixXd& P_pred,
                                             const Eigen::MatrixXd& A,
                                             const Eigen::VectorXd& coded_z,
                                             const Eigen::MatrixXd& coded_noise);

/// Computes every estimate in B^(w), then N_K uncoded gains for observers drawn
/// uniformly without replacement. These are the gains the ideal filter's
/// sequential full update from P~_t would use (see full_update_gains).
/// Throws ConfigError if a required coded observation is missing.
WorkerOutput worker_step(const CodedSystem& sys, std::size_t worker, const Eigen::VectorXd& x_prev,
                         const Eigen::MatrixXd& P_prev, const CodedObservations& coded_obs, long t,
                         RandomStream& rng);

}  // namespace codedtrack
