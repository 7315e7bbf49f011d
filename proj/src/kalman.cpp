#include "codedtrack/kalman.hpp"

#include <string>

#include <Eigen/Cholesky>

#include "codedtrack/errors.hpp"

namespace codedtrack {

namespace {

struct GainSolve {
  Eigen::MatrixXd K;
  Eigen::MatrixXd S;
};

// K = P H^T S^-1 computed as (S^-1 H P)^T, valid because S and P are symmetric.
std::optional<GainSolve> solve_gain(const Eigen::MatrixXd& P_pred, const Eigen::MatrixXd& H,
                                    const Eigen::MatrixXd& noise_cov) {
  const Eigen::MatrixXd HP = H * P_pred;
  Eigen::MatrixXd S = noise_cov + HP * H.transpose();
  symmetrize(S);
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= kSingularRcond)) return std::nullopt;
  return GainSolve{llt.solve(HP).transpose(), std::move(S)};
}

}  // namespace

void symmetrize(Eigen::MatrixXd& P) {
  P = 0.5 * (P + P.transpose()).eval();
}

Prediction predict(const ProcessModel& model, const FilterState& fs) {
  Prediction p{model.F * fs.x_hat, model.F * fs.P * model.F.transpose() + model.Q};
  return p;
}

Eigen::MatrixXd apply_gain(const Eigen::MatrixXd& P, const Eigen::MatrixXd& K,
                           const Eigen::MatrixXd& H) {
  Eigen::MatrixXd out = P - K * (H * P);
  symmetrize(out);
  return out;
}

std::optional<UpdateResult> try_update(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& P_pred,
                                       const Eigen::MatrixXd& H, const Eigen::MatrixXd& noise_cov,
                                       const Eigen::VectorXd& z) {
  auto gain = solve_gain(P_pred, H, noise_cov);
  if (!gain) return std::nullopt;
  UpdateResult r;
  r.x = x_pred + gain->K * (z - H * x_pred);
  r.P = apply_gain(P_pred, gain->K, H);
  r.K = std::move(gain->K);
  r.S = std::move(gain->S);
  return r;
}

UpdateResult update_one(const Eigen::VectorXd& x_pred, const Eigen::MatrixXd& P_pred,
                        const Observer& obs, const Eigen::VectorXd& z_o) {
  auto r = try_update(x_pred, P_pred, obs.H, obs.R, z_o);
  if (!r) {
    throw FilterError("singular innovation covariance for observer " + std::to_string(obs.id));
  }
  return std::move(*r);
}

Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& P_pred, const Eigen::MatrixXd& H,
                            const Eigen::MatrixXd& R) {
  auto gain = solve_gain(P_pred, H, R);
  if (!gain) throw FilterError("singular innovation covariance");
  return std::move(gain->K);
}

std::vector<Eigen::MatrixXd> full_update_gains(const Eigen::MatrixXd& P_pred,
                                               std::span<const Observer> observers,
                                               std::size_t last) {
  std::vector<Eigen::MatrixXd> gains;
  Eigen::MatrixXd P = P_pred;
  for (std::size_t o = 0; o <= last && o < observers.size(); ++o) {
    gains.push_back(kalman_gain(P, observers[o].H, observers[o].R));
    if (o < last) P = apply_gain(P, gains.back(), observers[o].H);
  }
  return gains;
}

FilterState uncoded_worker_update(const ProcessModel& model, const FilterState& fs_prev,
                                  std::span<const Observer> observers,
                                  std::span<const std::size_t> subset,
                                  const StackedObservation& stacked) {
  const Prediction pred = predict(model, fs_prev);
  FilterState out{pred.x, pred.P, fs_prev.t + 1};
  for (const std::size_t o : subset) {
    UpdateResult r = update_one(out.x_hat, out.P, observers[o], stacked.block(o));
    out.x_hat = std::move(r.x);
    out.P = std::move(r.P);
  }
  return out;
}

FilterState update_all(const ProcessModel& model, const FilterState& fs,
                       std::span<const Observer> observers, const StackedObservation& stacked) {
  std::vector<std::size_t> all(observers.size());
  for (std::size_t o = 0; o < all.size(); ++o) all[o] = o;
  return uncoded_worker_update(model, fs, observers, all, stacked);
}

FilterState average_estimates(std::span<const FilterState> states) {
  if (states.empty()) throw ConfigError("average_estimates: no estimates to average");
  FilterState out = states.front();
  for (std::size_t k = 1; k < states.size(); ++k) {
    out.x_hat += states[k].x_hat;
    out.P += states[k].P;
  }
  const double n = static_cast<double>(states.size());
  out.x_hat /= n;
  out.P /= n;
  return out;
}

}  // namespace codedtrack
