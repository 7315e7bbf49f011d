#include "codedtrack/worker.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "codedtrack/errors.hpp"
#include "codedtrack/numerics.hpp"

namespace codedtrack {

CodedSystem make_coded_system(ProcessModel model, std::vector<Observer> observers,
                              CodeDesign design) {
  model.validate();
  for (std::size_t o = 0; o < observers.size(); ++o) {
    observers[o].validate(model.dim());
    if (observers[o].id != o) throw ConfigError("observer ids must equal their position");
  }
  CodedSystem sys;
  sys.stack = stack_observers(observers);
  if (!verify_design(design, sys.stack->H)) {
    throw ConfigError("code design violates its structural invariants");
  }
  sys.coded_noise.reserve(design.C_blocks.size());
  for (const auto& c : design.C_blocks) {
    sys.coded_noise.push_back(c * sys.stack->R * c.transpose());
  }
  sys.q_factor = psd_factor(model.Q);
  for (const auto& obs : observers) sys.r_factor_blocks.push_back(psd_factor(obs.R));
  sys.model = std::move(model);
  sys.observers = std::move(observers);
  sys.design = std::move(design);
  return sys;
}

Prediction coded_predict(const CodedSystem& sys, std::size_t j, const Eigen::VectorXd& x_prev,
                         const Eigen::MatrixXd& P_prev) {
  const Eigen::MatrixXd& B = sys.design.B_blocks[j];
  const Eigen::MatrixXd BF = B * sys.model.F;
  return {BF * x_prev, BF * P_prev * BF.transpose() + B * sys.model.Q * B.transpose()};
}

std::optional<UpdateResult> coded_update_one(const Eigen::VectorXd& x_pred,
                                             const Eigen::MatrixXd& P_pred,
                                             const Eigen::MatrixXd& A,
                                             const Eigen::VectorXd& coded_z,
                                             const Eigen::MatrixXd& coded_noise) {
  return try_update(x_pred, P_pred, A, coded_noise, coded_z);
}

WorkerOutput worker_step(const CodedSystem& sys, std::size_t worker, const Eigen::VectorXd& x_prev,
                         const Eigen::MatrixXd& P_prev, const CodedObservations& coded_obs, long t,
                         RandomStream& rng) {
  const CodeDesign& cd = sys.design;
  if (worker >= cd.worker_count()) throw ConfigError("worker index out of range");

  WorkerOutput out;
  out.worker = worker;
  out.t = t;
  for (const std::size_t j : cd.worker_estimates[worker]) {
    Prediction pred = coded_predict(sys, j, x_prev, P_prev);
    CodedEstimate est;
    est.index = j;
    est.t = t;
    for (const std::size_t i : cd.estimate_observations[j]) {
      if (i >= coded_obs.size() || coded_obs[i].size() != cd.C_blocks[i].rows()) {
        throw ConfigError("worker " + std::to_string(worker) + ": coded observation " +
                          std::to_string(i) + " is missing");
      }
      auto upd = coded_update_one(pred.x, pred.P, cd.A_blocks[i], coded_obs[i], sys.coded_noise[i]);
      if (!upd) {
        est.skipped.push_back(i);
        continue;
      }
      pred.x = std::move(upd->x);
      pred.P = std::move(upd->P);
      est.gains.push_back({i, std::move(upd->K), std::move(upd->S)});
    }
    // P^(j) is not needed past this point.
    est.value = std::move(pred.x);
    out.estimates.push_back(std::move(est));
  }

  const std::size_t n_gains = std::min(cd.gains_per_worker, sys.observers.size());
  if (n_gains > 0) {
    // Partial Fisher-Yates: the first n_gains entries are a uniform sample without replacement.
    std::vector<std::size_t> ids(sys.observers.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    for (std::size_t k = 0; k < n_gains; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, ids.size() - 1);
      std::swap(ids[k], ids[pick(rng.engine())]);
    }
    ids.resize(n_gains);
    std::sort(ids.begin(), ids.end());
    const Prediction common = predict(sys.model, FilterState{x_prev, P_prev, t - 1});
    auto gains = full_update_gains(common.P, sys.observers, ids.back());
    for (const std::size_t o : ids) {
      out.uncoded_gains.push_back({sys.observers[o].id, std::move(gains[o]), t});
    }
  }
  return out;
}

}  // namespace codedtrack
