#include "codedtrack/model.hpp"

#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "codedtrack/errors.hpp"

namespace codedtrack {

namespace {

constexpr double kPsdTolerance = 1e-10;

bool is_symmetric_psd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kPsdTolerance) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -kPsdTolerance;
}

StackedObservation observe_with(std::span<const Observer> observers,
                                const std::shared_ptr<const ObservationStack>& stack,
                                const std::vector<Eigen::MatrixXd>& factors,
                                const Eigen::VectorXd& x, RandomStream& rng) {
  StackedObservation out{stack, Eigen::VectorXd(stack->rows())};
  for (std::size_t o = 0; o < observers.size(); ++o) {
    out.z.segment(stack->offsets[o], stack->block_rows(o)) =
        sample_gaussian(observers[o].H * x, factors[o], rng);
  }
  return out;
}

}  // namespace

void ProcessModel::validate() const {
  const auto d = dim();
  if (d <= 0 || F.cols() != d) throw ConfigError("process model: F must be square and nonempty");
  if (Q.rows() != d || Q.cols() != d) throw ConfigError("process model: Q must match F");
  if (!is_symmetric_psd(Q)) throw ConfigError("process model: Q must be symmetric PSD");
}

void Observer::validate(Eigen::Index state_dim) const {
  if (H.cols() != state_dim) {
    throw ConfigError("observer " + std::to_string(id) + ": H has " + std::to_string(H.cols()) +
                      " columns, expected " + std::to_string(state_dim));
  }
  if (R.rows() != H.rows() || R.cols() != H.rows()) {
    throw ConfigError("observer " + std::to_string(id) + ": R must be h x h");
  }
  if (!is_symmetric_psd(R)) {
    throw ConfigError("observer " + std::to_string(id) + ": R must be symmetric PSD");
  }
}

std::shared_ptr<const ObservationStack> stack_observers(std::span<const Observer> observers) {
  auto stack = std::make_shared<ObservationStack>();
  const Eigen::Index d = observers.empty() ? 0 : observers.front().H.cols();
  Eigen::Index h = 0;
  stack->offsets.push_back(0);
  for (const auto& obs : observers) {
    if (obs.H.cols() != d) throw ConfigError("observers disagree on the state dimension");
    h += obs.rows();
    stack->offsets.push_back(h);
  }
  stack->H = Eigen::MatrixXd::Zero(h, d);
  stack->R = Eigen::MatrixXd::Zero(h, h);
  for (std::size_t o = 0; o < observers.size(); ++o) {
    const auto off = stack->offsets[o];
    const auto n = observers[o].rows();
    stack->H.middleRows(off, n) = observers[o].H;
    stack->R.block(off, off, n, n) = observers[o].R;
  }
  return stack;
}

Eigen::VectorXd StackedObservation::block(std::size_t o) const {
  return z.segment(stack->offsets[o], stack->block_rows(o));
}

Eigen::MatrixXd gaussian_factor(const Eigen::MatrixXd& cov) {
  const auto n = cov.rows();
  if (n == 0) return {};
  if (cov.isZero(0.0)) return Eigen::MatrixXd::Zero(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    llt.compute(cov + 1e-12 * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() != Eigen::Success) throw ConfigError("covariance is not positive semidefinite");
  }
  return llt.matrixL();
}

Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& factor,
                                RandomStream& rng) {
  return mean + factor * rng.standard_normal(mean.size());
}

Eigen::VectorXd step_state(const ProcessModel& model, const Eigen::VectorXd& x_prev,
                           RandomStream& rng) {
  if (x_prev.size() != model.dim() || model.F.cols() != model.dim()) {
    throw ConfigError("step_state: dimension mismatch");
  }
  return sample_gaussian(model.F * x_prev, gaussian_factor(model.Q), rng);
}

StackedObservation observe(std::span<const Observer> observers, const Eigen::VectorXd& x,
                           RandomStream& rng) {
  std::vector<Eigen::MatrixXd> factors;
  for (const auto& obs : observers) {
    if (obs.H.cols() != x.size()) throw ConfigError("observe: dimension mismatch");
    factors.push_back(gaussian_factor(obs.R));
  }
  return observe_with(observers, stack_observers(observers), factors, x, rng);
}

Trajectory simulate(const ProcessModel& model, std::span<const Observer> observers,
                    const Eigen::VectorXd& x0, std::size_t steps, RandomStream& rng) {
  if (x0.size() != model.dim()) throw ConfigError("simulate: x0 dimension mismatch");
  const Eigen::MatrixXd q_factor = gaussian_factor(model.Q);
  std::vector<Eigen::MatrixXd> r_factors;
  for (const auto& obs : observers) {
    if (obs.H.cols() != model.dim()) throw ConfigError("simulate: observer dimension mismatch");
    r_factors.push_back(gaussian_factor(obs.R));
  }
  const auto stack = stack_observers(observers);

  Trajectory traj;
  traj.states.reserve(steps);
  traj.observations.reserve(steps);
  Eigen::VectorXd x = x0;
  for (std::size_t t = 0; t < steps; ++t) {
    x = sample_gaussian(model.F * x, q_factor, rng);
    traj.observations.push_back(observe_with(observers, stack, r_factors, x, rng));
    traj.states.push_back(x);
  }
  return traj;
}

}  // namespace codedtrack
