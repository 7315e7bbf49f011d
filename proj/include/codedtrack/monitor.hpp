#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "codedtrack/kalman.hpp"
#include "codedtrack/numerics.hpp"
#include "codedtrack/worker.hpp"

namespace codedtrack {

struct MonitorState {
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd P;
  /// Latest uncoded gain received per observer.
  std::vector<std::optional<GainRecord>> gain_cache;
  /// Rank of the coded-estimate covariance with every worker available.
  Eigen::Index r_full = 0;
  long t = 0;
};

MonitorState make_monitor(const CodedSystem& sys, Eigen::VectorXd x0, Eigen::MatrixXd P0);

/// Coded estimates received in one step, sorted by estimate index.
struct DecodeBatch {
  std::vector<CodedEstimate> received;
  Eigen::MatrixXd B_stack;  ///< B^(j) of the received estimates, stacked
  Eigen::VectorXd y_stack;  ///< x_hat^(j) of the received estimates, stacked
  /// P_y = covariance_factor * covariance_factor^T is the error covariance of y_stack.
  Eigen::MatrixXd covariance_factor;
  /// M B_stack and M y_stack for the PCA whitener M of P_y.
  WhitenedSystem whitened;
  Eigen::Index rank = 0;

  std::size_t size() const { return received.size(); }
  Eigen::MatrixXd covariance() const { return covariance_factor * covariance_factor.transpose(); }
};

/// Error covariance of the stacked received estimates.
///
/// Estimate j's error is G_j e_{t-1} - W_j q_t + V_j r_t, where the maps start at
/// G = B^(j) F, W = B^(j), V = 0 and each applied update (K, A, C) maps
/// G <- (I - K A) G, W <- (I - K A) W, V <- (I - K A) V + K C. Block (j, j') is
/// G_j P G_j'^T + W_j Q W_j'^T + V_j R V_j'^T.
///
/// Estimates whose gain record is incomplete are skipped.
Eigen::MatrixXd assemble_covariance(const CodedSystem& sys, const Eigen::MatrixXd& P_prev,
                                    std::span<const CodedEstimate> received);

/// Factor L = [W Lt, V Lr] of the same matrix, with Lt Lt^T = F P_prev F^T + Q
/// (valid because G = W F for every estimate).
Eigen::MatrixXd assemble_covariance_factor(const CodedSystem& sys, const Eigen::MatrixXd& P_prev,
                                           std::span<const CodedEstimate> received);

DecodeBatch make_batch(const CodedSystem& sys, const Eigen::MatrixXd& P_prev,
                       std::vector<CodedEstimate> received,
                       double rel_tol = kDefaultRankTolerance);

struct DecodeResult {
  Eigen::VectorXd x_hat;
  bool decoded = false;
  Eigen::Index rank = 0;
  std::size_t n_received = 0;
  int lsmr_iterations = 0;
  bool lsmr_converged = true;
};

/// Whitened least squares min ||M (B x - y)|| solved by LSMR from x_tilde. A
/// received identity-coded estimate is returned as is. An empty batch yields
/// x_tilde. decoded iff the batch reaches the full-availability rank.
DecodeResult decode(const MonitorState& ms, const CodedSystem& sys, const DecodeBatch& batch,
                    const Eigen::VectorXd& x_tilde);

/// Stores the uncoded gains carried by the outputs, and the coded gains of
/// identity-coded estimates whose coded observations are raw observer blocks.
void absorb_gains(MonitorState& ms, const CodedSystem& sys, std::span<const WorkerOutput> outputs);

/// P~_t if not decoded or any observer lacks a cached gain; otherwise P~_t
/// updated with (I - K^(o) H^(o)) for every observer in id order. If any cached
/// gain is older than the current step the Joseph form
/// (I - K H) P (I - K H)^T + K R K^T is used instead.
Eigen::MatrixXd update_P_heuristic(const MonitorState& ms, const CodedSystem& sys, bool decoded);

/// Rank of the full-availability covariance at the given covariance.
Eigen::Index compute_r_full(const CodedSystem& sys, const Eigen::MatrixXd& steady_P,
                            double rel_tol = kDefaultRankTolerance);

/// One end-of-step pass: decode, absorb gains, update P, advance t.
DecodeResult monitor_step(MonitorState& ms, const CodedSystem& sys,
                          std::span<const WorkerOutput> outputs);

}  // namespace codedtrack
