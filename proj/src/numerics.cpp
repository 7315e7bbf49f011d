#include "codedtrack/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include <Eigen/Eigenvalues>

namespace codedtrack {

namespace {

// Eigenvalues in descending order with matching eigenvector columns.
struct Spectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

Spectrum descending_spectrum(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

Eigen::Index count_retained(const Eigen::VectorXd& descending, double rel_tol) {
  if (descending.size() == 0 || !(descending(0) > 0.0)) return 0;
  const double cut = rel_tol * descending(0);
  Eigen::Index k = 0;
  while (k < descending.size() && descending(k) > cut) ++k;
  return k;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

// Stable Givens rotation: returns (c, s, r) with [c s; -s c] [a; b] = [r; 0].
std::tuple<double, double, double> sym_ortho(double a, double b) {
  if (b == 0.0) return {sign(a), 0.0, std::abs(a)};
  if (a == 0.0) return {0.0, sign(b), std::abs(b)};
  if (std::abs(b) > std::abs(a)) {
    const double tau = a / b;
    const double s = sign(b) / std::sqrt(1.0 + tau * tau);
    return {s * tau, s, b / s};
  }
  const double tau = b / a;
  const double c = sign(a) / std::sqrt(1.0 + tau * tau);
  return {c, c * tau, a / c};
}

}  // namespace

Whitener build_whitener(const Eigen::MatrixXd& P, double rel_tol) {
  Whitener w;
  w.threshold = rel_tol;
  if (P.size() == 0) {
    w.M.resize(0, P.cols());
    return w;
  }
  const Spectrum sp = descending_spectrum(P);
  w.retained = count_retained(sp.values, rel_tol);
  w.M = sp.values.head(w.retained).cwiseSqrt().cwiseInverse().asDiagonal() *
        sp.vectors.leftCols(w.retained).transpose();
  return w;
}

Whitener build_whitener_from_factor(const Eigen::MatrixXd& L, double rel_tol) {
  if (L.rows() <= L.cols()) return build_whitener(L * L.transpose(), rel_tol);
  Whitener w;
  w.threshold = rel_tol;
  const Spectrum sp = descending_spectrum(L.transpose() * L);
  w.retained = count_retained(sp.values, rel_tol);
  // U_r = L V_r Lambda_r^{-1/2}, so M = Lambda_r^{-1/2} U_r^T = Lambda_r^{-1} V_r^T L^T.
  w.M = sp.values.head(w.retained).cwiseInverse().asDiagonal() *
        (L * sp.vectors.leftCols(w.retained)).transpose();
  return w;
}

WhitenedSystem whiten_system(const Eigen::MatrixXd& L, const Eigen::MatrixXd& A,
                             const Eigen::VectorXd& b, double rel_tol) {
  WhitenedSystem out;
  if (L.rows() <= L.cols()) {
    const Whitener w = build_whitener(L * L.transpose(), rel_tol);
    out.A = w.M * A;
    out.b = w.M * b;
    out.retained = w.retained;
    return out;
  }
  const Spectrum sp = descending_spectrum(L.transpose() * L);
  out.retained = count_retained(sp.values, rel_tol);
  const auto r = out.retained;
  const Eigen::MatrixXd proj = sp.values.head(r).cwiseInverse().asDiagonal() *
                               sp.vectors.leftCols(r).transpose();
  out.A = proj * (L.transpose() * A);
  out.b = proj * (L.transpose() * b);
  return out;
}

Eigen::Index numerical_rank(const Eigen::MatrixXd& P, double rel_tol) {
  if (P.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
  // P is PSD, so its singular values are the absolute eigenvalues.
  Eigen::VectorXd sv = es.eigenvalues().cwiseAbs();
  std::sort(sv.data(), sv.data() + sv.size(), std::greater<>());
  return count_retained(sv, rel_tol);
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& P) {
  if (P.size() == 0) return Eigen::MatrixXd(P.rows(), 0);
  const Spectrum sp = descending_spectrum(P);
  const Eigen::Index k = count_retained(sp.values, 1e-14);
  return sp.vectors.leftCols(k) * sp.values.head(k).cwiseSqrt().asDiagonal();
}

LsmrResult lsmr_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& x0,
                      double tol, int max_iter) {
  const double atol = tol;
  const double btol = tol;
  const double ctol = 1e-8;  // 1 / conlim
  if (max_iter <= 0) max_iter = static_cast<int>(4 * A.cols());

  LsmrResult res;
  res.x = x0;
  const double normb = b.norm();
  if (normb == 0.0) {
    res.x.setZero();
    res.converged = true;
    return res;
  }

  Eigen::VectorXd u = b - A * x0;
  double beta = u.norm();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(A.cols());
  double alpha = 0.0;
  if (beta > 0.0) {
    u /= beta;
    v = A.transpose() * u;
    alpha = v.norm();
  }
  if (alpha > 0.0) v /= alpha;

  double zetabar = alpha * beta;
  double alphabar = alpha;
  double rho = 1.0, rhobar = 1.0, cbar = 1.0, sbar = 0.0;
  Eigen::VectorXd h = v;
  Eigen::VectorXd hbar = Eigen::VectorXd::Zero(A.cols());

  double betadd = beta, betad = 0.0, rhodold = 1.0;
  double tautildeold = 0.0, thetatilde = 0.0, zeta = 0.0, dsum = 0.0;

  double norm_a2 = alpha * alpha;
  double maxrbar = 0.0, minrbar = 1e100;
  double norm_a = std::sqrt(norm_a2);
  double normr = beta;
  double normar = alpha * beta;
  res.residual_norm = normr;
  res.normal_residual_norm = normar;
  res.norm_a = norm_a;
  if (normar == 0.0) {
    res.converged = true;
    return res;
  }

  int itn = 0;
  int istop = 0;
  while (itn < max_iter) {
    ++itn;
    u = A * v - alpha * u;
    beta = u.norm();
    if (beta > 0.0) {
      u /= beta;
      v = A.transpose() * u - beta * v;
      alpha = v.norm();
      if (alpha > 0.0) v /= alpha;
    }

    // No damping, so the first rotation only normalizes the sign of alphabar.
    const auto [chat, shat, alphahat] = sym_ortho(alphabar, 0.0);
    const double rhoold = rho;
    double c, s;
    std::tie(c, s, rho) = sym_ortho(alphahat, beta);
    const double thetanew = s * alpha;
    alphabar = c * alpha;

    const double rhobarold = rhobar;
    const double zetaold = zeta;
    const double thetabar = sbar * rho;
    const double rhotemp = cbar * rho;
    std::tie(cbar, sbar, rhobar) = sym_ortho(cbar * rho, thetanew);
    zeta = cbar * zetabar;
    zetabar = -sbar * zetabar;

    hbar = h - (thetabar * rho / (rhoold * rhobarold)) * hbar;
    res.x += (zeta / (rho * rhobar)) * hbar;
    h = v - (thetanew / rho) * h;

    // Residual norm estimate.
    const double betaacute = chat * betadd;
    const double betacheck = -shat * betadd;
    const double betahat = c * betaacute;
    betadd = -s * betaacute;
    const double thetatildeold = thetatilde;
    double ctildeold, stildeold, rhotildeold;
    std::tie(ctildeold, stildeold, rhotildeold) = sym_ortho(rhodold, thetabar);
    thetatilde = stildeold * rhobar;
    rhodold = ctildeold * rhobar;
    betad = -stildeold * betad + ctildeold * betahat;
    tautildeold = (zetaold - thetatildeold * tautildeold) / rhotildeold;
    const double taud = (zeta - thetatilde * tautildeold) / rhodold;
    dsum += betacheck * betacheck;
    normr = std::sqrt(dsum + (betad - taud) * (betad - taud) + betadd * betadd);

    norm_a2 += beta * beta;
    norm_a = std::sqrt(norm_a2);
    norm_a2 += alpha * alpha;

    maxrbar = std::max(maxrbar, rhobarold);
    if (itn > 1) minrbar = std::min(minrbar, rhobarold);
    const double cond_a = std::max(maxrbar, rhotemp) / std::min(minrbar, rhotemp);

    normar = std::abs(zetabar);
    const double normx = res.x.norm();

    const double test1 = normr / normb;
    const double test2 = (norm_a * normr != 0.0) ? normar / (norm_a * normr)
                                                 : std::numeric_limits<double>::infinity();
    const double test3 = 1.0 / cond_a;
    const double t1 = test1 / (1.0 + norm_a * normx / normb);
    const double rtol = btol + atol * norm_a * normx / normb;

    if (itn >= max_iter) istop = 7;
    if (1.0 + test3 <= 1.0) istop = 6;
    if (1.0 + test2 <= 1.0) istop = 5;
    if (1.0 + t1 <= 1.0) istop = 4;
    if (test3 <= ctol) istop = 3;
    if (test2 <= atol) istop = 2;
    if (test1 <= rtol) istop = 1;
    if (istop > 0) break;
  }

  res.iterations = itn;
  res.stop_reason = istop;
  res.converged = istop != 7 && istop != 3 && istop != 6;
  res.residual_norm = normr;
  res.normal_residual_norm = normar;
  res.norm_a = norm_a;
  return res;
}

}  // namespace codedtrack
