#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "codedtrack/model.hpp"
#include "codedtrack/random.hpp"

namespace codedtrack {

enum class CodeKind { kReplication, kRandomMds, kCustom };

/// The two coding layers.
///
/// Observations: the stacked observation z (length h) is encoded as C z and
/// cut into N_C coded observations C^(i) z. States: B is cut into N_B blocks
/// B^(j); estimate j is the coded state estimate B^(j) x_hat. Each coded
/// observation i feeds exactly one estimate, the one with i in C^(j), and is
/// related to it by A^(i,j) B^(j) = C^(i) H.
///
/// Indices are 0-based throughout.
struct CodeDesign {
  CodeKind kind = CodeKind::kCustom;
  std::vector<Eigen::MatrixXd> C_blocks;  ///< N_C blocks, n_C^(i) x h
  std::vector<Eigen::MatrixXd> B_blocks;  ///< N_B blocks, n_B^(j) x d
  /// A_blocks[i] = A^(i,j) for the unique j with i in C^(j).
  std::vector<Eigen::MatrixXd> A_blocks;
  std::vector<std::vector<std::size_t>> worker_estimates;       ///< B^(w)
  std::vector<std::vector<std::size_t>> estimate_observations;  ///< C^(j), ascending
  /// For pure replication: the observer whose raw block C^(i) selects.
  std::vector<std::optional<std::size_t>> source_observer;
  std::size_t gains_per_worker = 0;  ///< N_K
  double rate = 1.0;                 ///< h / n_C

  std::size_t worker_count() const { return worker_estimates.size(); }
  std::size_t estimate_count() const { return B_blocks.size(); }
  std::size_t coded_observation_count() const { return C_blocks.size(); }
  Eigen::Index coded_rows() const;  ///< n_C
  Eigen::Index state_rows() const;  ///< n_B
  /// True if B^(j) is exactly the d x d identity.
  bool is_identity_estimate(std::size_t j) const;
};

/// Every worker tracks the full state from all raw observations.
CodeDesign design_replication(std::size_t n_workers, const ObservationStack& stack,
                              Eigen::Index state_dim);

/// Gaussian C with one-row coded observations, each paired with a scalar coded
/// state estimate B^(j) = C^(j) H. Estimates are dealt round-robin to workers.
CodeDesign design_random_mds(std::size_t n_workers, const ObservationStack& stack,
                             Eigen::Index state_dim, double rate, RandomStream& rng);

/// True iff all structural invariants hold and ||A^(i,j) B^(j) - C^(i) H||_max <= 1e-9.
bool verify_design(const CodeDesign& cd, const Eigen::MatrixXd& H);

/// Worker-side operation count, dominated by innovation-covariance inversions:
/// N_K N_w h_o^3 + sum_w sum_{j in B^(w)} sum_{i in C^(j)} (n_C^(i))^3.
double estimate_ops(const CodeDesign& cd, Eigen::Index observer_rows, std::size_t n_workers);

/// Deterministic text form of a design (17 significant digits).
std::string serialize_design(const CodeDesign& cd);

/// FNV-1a of serialize_design.
std::uint64_t design_fingerprint(const CodeDesign& cd);

}  // namespace codedtrack
