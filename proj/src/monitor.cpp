#include "codedtrack/monitor.hpp"

#include <algorithm>

namespace codedtrack {

namespace {

// Stacked affine error maps of the received estimates.
struct ErrorMaps {
  Eigen::MatrixXd G;  // n x d, multiplies e_{t-1}
  Eigen::MatrixXd W;  // n x d, multiplies q_t
  Eigen::MatrixXd V;  // n x h, multiplies r_t
};

bool has_complete_gains(const CodedSystem& sys, const CodedEstimate& est) {
  return est.index < sys.design.estimate_count() &&
         est.gains.size() + est.skipped.size() ==
             sys.design.estimate_observations[est.index].size();
}

std::vector<const CodedEstimate*> usable(const CodedSystem& sys,
                                         std::span<const CodedEstimate> received) {
  std::vector<const CodedEstimate*> out;
  for (const auto& est : received) {
    if (has_complete_gains(sys, est)) out.push_back(&est);
  }
  return out;
}

ErrorMaps propagate(const CodedSystem& sys, const std::vector<const CodedEstimate*>& ests) {
  const CodeDesign& cd = sys.design;
  const Eigen::Index d = sys.state_dim();
  const Eigen::Index h = sys.stack->rows();
  Eigen::Index n = 0;
  for (const auto* est : ests) n += cd.B_blocks[est->index].rows();

  ErrorMaps maps{Eigen::MatrixXd(n, d), Eigen::MatrixXd(n, d), Eigen::MatrixXd(n, h)};
  Eigen::Index row = 0;
  for (const auto* est : ests) {
    const Eigen::MatrixXd& B = cd.B_blocks[est->index];
    const Eigen::Index rows = B.rows();
    Eigen::MatrixXd G = B * sys.model.F;
    Eigen::MatrixXd W = B;
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(rows, h);
    for (const auto& gain : est->gains) {
      const Eigen::MatrixXd T =
          Eigen::MatrixXd::Identity(rows, rows) - gain.K * cd.A_blocks[gain.block];
      G = (T * G).eval();
      W = (T * W).eval();
      V = (T * V).eval();
      V.noalias() += gain.K * cd.C_blocks[gain.block];
    }
    maps.G.middleRows(row, rows) = G;
    maps.W.middleRows(row, rows) = W;
    maps.V.middleRows(row, rows) = V;
    row += rows;
  }
  return maps;
}

}  // namespace

MonitorState make_monitor(const CodedSystem& sys, Eigen::VectorXd x0, Eigen::MatrixXd P0) {
  MonitorState ms;
  ms.x_hat = std::move(x0);
  ms.P = std::move(P0);
  ms.gain_cache.assign(sys.observers.size(), std::nullopt);
  return ms;
}

Eigen::MatrixXd assemble_covariance(const CodedSystem& sys, const Eigen::MatrixXd& P_prev,
                                    std::span<const CodedEstimate> received) {
  const ErrorMaps m = propagate(sys, usable(sys, received));
  Eigen::MatrixXd P = m.G * P_prev * m.G.transpose() + m.W * sys.model.Q * m.W.transpose() +
                      m.V * sys.stack->R * m.V.transpose();
  symmetrize(P);
  return P;
}

Eigen::MatrixXd assemble_covariance_factor(const CodedSystem& sys, const Eigen::MatrixXd& P_prev,
                                           std::span<const CodedEstimate> received) {
  const ErrorMaps m = propagate(sys, usable(sys, received));
  // Every map starts with G = W F and both see the same left factors, so
  // G P G^T + W Q W^T = W (F P F^T + Q) W^T.
  Eigen::MatrixXd P_tilde = sys.model.F * P_prev * sys.model.F.transpose() + sys.model.Q;
  symmetrize(P_tilde);
  const Eigen::MatrixXd pt_factor = psd_factor(P_tilde);
  Eigen::Index cols = pt_factor.cols();
  for (const auto& f : sys.r_factor_blocks) cols += f.cols();

  Eigen::MatrixXd L(m.G.rows(), cols);
  Eigen::Index col = 0;
  L.middleCols(col, pt_factor.cols()).noalias() = m.W * pt_factor;
  col += pt_factor.cols();
  const auto& offsets = sys.stack->offsets;
  for (std::size_t o = 0; o < sys.r_factor_blocks.size(); ++o) {
    const auto& f = sys.r_factor_blocks[o];
    L.middleCols(col, f.cols()).noalias() = m.V.middleCols(offsets[o], f.rows()) * f;
    col += f.cols();
  }
  return L;
}

DecodeBatch make_batch(const CodedSystem& sys, const Eigen::MatrixXd& P_prev,
                       std::vector<CodedEstimate> received, double rel_tol) {
  std::erase_if(received, [&](const CodedEstimate& e) { return !has_complete_gains(sys, e); });
  std::sort(received.begin(), received.end(),
            [](const CodedEstimate& a, const CodedEstimate& b) { return a.index < b.index; });

  DecodeBatch batch;
  const CodeDesign& cd = sys.design;
  Eigen::Index n = 0;
  for (const auto& est : received) n += cd.B_blocks[est.index].rows();
  batch.B_stack.resize(n, sys.state_dim());
  batch.y_stack.resize(n);
  Eigen::Index row = 0;
  for (const auto& est : received) {
    const auto& B = cd.B_blocks[est.index];
    batch.B_stack.middleRows(row, B.rows()) = B;
    batch.y_stack.segment(row, B.rows()) = est.value;
    row += B.rows();
  }
  batch.covariance_factor = assemble_covariance_factor(sys, P_prev, received);
  batch.whitened = whiten_system(batch.covariance_factor, batch.B_stack, batch.y_stack, rel_tol);
  batch.rank = batch.whitened.retained;
  batch.received = std::move(received);
  return batch;
}

DecodeResult decode(const MonitorState& ms, const CodedSystem& sys, const DecodeBatch& batch,
                    const Eigen::VectorXd& x_tilde) {
  DecodeResult res;
  res.n_received = batch.size();
  res.rank = batch.rank;
  if (batch.received.empty()) {
    res.x_hat = x_tilde;
    return res;
  }
  res.decoded = batch.rank > 0 && batch.rank == ms.r_full;

  for (const auto& est : batch.received) {
    if (sys.design.is_identity_estimate(est.index)) {
      res.x_hat = est.value;
      return res;
    }
  }
  if (batch.whitened.retained == 0) {
    res.x_hat = x_tilde;
    return res;
  }
  const LsmrResult ls = lsmr_solve(batch.whitened.A, batch.whitened.b, x_tilde);
  res.x_hat = ls.x;
  res.lsmr_iterations = ls.iterations;
  res.lsmr_converged = ls.converged;
  return res;
}

void absorb_gains(MonitorState& ms, const CodedSystem& sys, std::span<const WorkerOutput> outputs) {
  const CodeDesign& cd = sys.design;
  for (const auto& out : outputs) {
    for (const auto& g : out.uncoded_gains) {
      if (g.observer_id < ms.gain_cache.size()) ms.gain_cache[g.observer_id] = g;
    }
    for (const auto& est : out.estimates) {
      if (!cd.is_identity_estimate(est.index)) continue;
      for (const auto& g : est.gains) {
        const auto& o = cd.source_observer[g.block];
        if (o && *o < ms.gain_cache.size()) ms.gain_cache[*o] = GainRecord{*o, g.K, est.t};
      }
    }
  }
}

Eigen::MatrixXd update_P_heuristic(const MonitorState& ms, const CodedSystem& sys, bool decoded) {
  Eigen::MatrixXd P = predict(sys.model, FilterState{ms.x_hat, ms.P, ms.t}).P;
  if (!decoded) return P;
  const bool complete = std::all_of(ms.gain_cache.begin(), ms.gain_cache.end(),
                                    [](const auto& g) { return g.has_value(); });
  if (!complete || ms.gain_cache.size() != sys.observers.size()) return P;
  const bool current = std::all_of(ms.gain_cache.begin(), ms.gain_cache.end(),
                                   [&](const auto& g) { return g->t == ms.t + 1; });
  for (std::size_t o = 0; o < sys.observers.size(); ++o) {
    const Observer& obs = sys.observers[o];
    const Eigen::MatrixXd& K = ms.gain_cache[o]->K;
    if (current) {
      P = apply_gain(P, K, obs.H);
      continue;
    }
    // A stale gain is not optimal for P, and (I - K H) P can lose
    // definiteness; the Joseph form cannot.
    Eigen::MatrixXd T = -K * obs.H;
    T.diagonal().array() += 1.0;
    P = (T * P * T.transpose() + K * obs.R * K.transpose()).eval();
    symmetrize(P);
  }
  return P;
}

Eigen::Index compute_r_full(const CodedSystem& sys, const Eigen::MatrixXd& steady_P,
                            double rel_tol) {
  // Gains depend only on the covariance, so placeholder observations suffice.
  CodedObservations zeros;
  for (const auto& c : sys.design.C_blocks) zeros.push_back(Eigen::VectorXd::Zero(c.rows()));
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(sys.state_dim());
  RandomStream unused(0);
  std::vector<CodedEstimate> all;
  for (std::size_t w = 0; w < sys.design.worker_count(); ++w) {
    WorkerOutput out = worker_step(sys, w, x0, steady_P, zeros, 0, unused);
    for (auto& est : out.estimates) all.push_back(std::move(est));
  }
  const Eigen::MatrixXd L = assemble_covariance_factor(sys, steady_P, all);
  return build_whitener_from_factor(L, rel_tol).retained;
}

DecodeResult monitor_step(MonitorState& ms, const CodedSystem& sys,
                          std::span<const WorkerOutput> outputs) {
  const Eigen::VectorXd x_tilde = sys.model.F * ms.x_hat;
  std::vector<CodedEstimate> received;
  for (const auto& out : outputs) {
    received.insert(received.end(), out.estimates.begin(), out.estimates.end());
  }
  const DecodeBatch batch = make_batch(sys, ms.P, std::move(received));
  DecodeResult res = decode(ms, sys, batch, x_tilde);
  absorb_gains(ms, sys, outputs);
  ms.P = update_P_heuristic(ms, sys, res.decoded);
  ms.x_hat = res.x_hat;
  ++ms.t;
  return res;
}

}  // namespace codedtrack
