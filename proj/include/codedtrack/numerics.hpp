#pragma once

#include <Eigen/Core>

namespace codedtrack {

inline constexpr double kDefaultRankTolerance = 1e-10;
inline constexpr double kDefaultLsmrTolerance = 1e-8;

/// PCA whitening transform M = Sigma_r^{-1/2} U_r^T of a PSD matrix P = U Sigma U^T,
/// keeping singular values above threshold * sigma_max. M P M^T = I_k.
struct Whitener {
  Eigen::MatrixXd M;        ///< k x m
  Eigen::Index retained = 0;
  double threshold = kDefaultRankTolerance;
};

Whitener build_whitener(const Eigen::MatrixXd& P, double rel_tol = kDefaultRankTolerance);

/// Same transform for P = L L^T, computed from whichever of L L^T and L^T L is
/// smaller. Both have the same nonzero spectrum.
Whitener build_whitener_from_factor(const Eigen::MatrixXd& L,
                                    double rel_tol = kDefaultRankTolerance);

/// M A and M b for the PCA whitener M of P = L L^T, without forming M (which is
/// rank x rows(L)). Same result as build_whitener_from_factor(L).M * A.
struct WhitenedSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::Index retained = 0;
};

WhitenedSystem whiten_system(const Eigen::MatrixXd& L, const Eigen::MatrixXd& A,
                             const Eigen::VectorXd& b, double rel_tol = kDefaultRankTolerance);

/// Number of singular values above rel_tol * sigma_max (0 for a zero matrix).
Eigen::Index numerical_rank(const Eigen::MatrixXd& P, double rel_tol = kDefaultRankTolerance);

/// L with L L^T = P for symmetric PSD P, from the eigendecomposition. Columns
/// for eigenvalues at or below 1e-14 * lambda_max are dropped.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& P);

struct LsmrResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  int stop_reason = 0;  ///< LSMR istop code; 7 means the iteration limit was hit
  double residual_norm = 0.0;         ///< ||b - A x|| estimate
  double normal_residual_norm = 0.0;  ///< ||A^T (b - A x)|| estimate
  double norm_a = 0.0;                ///< running Frobenius-norm estimate of A
};

/// LSMR (Fong & Saunders) for min ||A x - b||_2 started from x0: solves for the
/// correction d in min ||A d - (b - A x0)|| and returns x0 + d. atol = btol = tol,
/// condition limit 1e8. max_iter <= 0 selects 4 * cols(A).
LsmrResult lsmr_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& x0,
                      double tol = kDefaultLsmrTolerance, int max_iter = 0);

}  // namespace codedtrack
