#include "codedtrack/vehicles.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include "codedtrack/errors.hpp"

namespace codedtrack {

std::pair<Eigen::Matrix4d, Eigen::Matrix4d> build_fv_qv(double dt, double sigma_a) {
  Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
  F(0, 2) = dt;
  F(1, 3) = dt;
  Eigen::Matrix<double, 4, 2> V = Eigen::Matrix<double, 4, 2>::Zero();
  V(0, 0) = dt * dt / 2.0;
  V(1, 1) = dt * dt / 2.0;
  V(2, 0) = dt;
  V(3, 1) = dt;
  const Eigen::Matrix4d Q = V * (sigma_a * Eigen::Matrix2d::Identity()) * V.transpose();
  return {F, Q};
}

std::vector<std::vector<std::size_t>> build_topology(std::size_t n_vehicles, std::size_t s) {
  if (s < 1 || s >= n_vehicles) {
    throw ConfigError("each vehicle must observe between 1 and N_v - 1 others");
  }
  std::vector<std::vector<std::size_t>> topo(n_vehicles);
  for (std::size_t i = 0; i < n_vehicles; ++i) {
    for (std::size_t j = i + 1; j <= i + s; ++j) topo[i].push_back(j % n_vehicles);
  }
  return topo;
}

Eigen::MatrixXd build_selection(std::size_t i, const std::vector<std::size_t>& observed,
                                std::size_t n_vehicles) {
  const auto n = static_cast<Eigen::Index>(n_vehicles);
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(observed.size()) + 1, n);
  U(0, static_cast<Eigen::Index>(i)) = 1.0;
  for (std::size_t r = 0; r < observed.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r) + 1;
    U(row, static_cast<Eigen::Index>(i)) = -1.0;
    U(row, static_cast<Eigen::Index>(observed[r])) = 1.0;
  }
  return U;
}

Observer build_observer(std::size_t i, const std::vector<std::vector<std::size_t>>& topology,
                        std::size_t n_vehicles, const VehicleSigmas& sigma) {
  const auto& observed = topology.at(i);
  const Eigen::MatrixXd U = build_selection(i, observed, n_vehicles);

  const double g2 = sigma.gnss * sigma.gnss;
  const double v2 = sigma.v2v * sigma.v2v;
  const double s2 = sigma.speed * sigma.speed;
  const Eigen::Vector4d r_gnss(g2, g2, s2, s2);
  const Eigen::Vector4d r_rel(v2, v2, s2, s2);

  const auto rows = 4 * static_cast<Eigen::Index>(observed.size() + 1);
  Eigen::VectorXd diag(rows);
  diag.head<4>() = r_gnss;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    diag.segment<4>(4 * static_cast<Eigen::Index>(k + 1)) = r_rel;
  }

  Observer obs;
  obs.id = i;
  obs.H = Eigen::kroneckerProduct(U, Eigen::Matrix4d::Identity());
  obs.R = diag.asDiagonal();
  return obs;
}

VehicleScenario build_scenario(std::size_t n_vehicles, std::size_t s, double dt,
                               const VehicleSigmas& sigma) {
  if (!(dt >= 0.0)) throw ConfigError("update interval must be nonnegative");
  VehicleScenario sc;
  sc.n_vehicles = n_vehicles;
  sc.observed_per_vehicle = s;
  sc.dt = dt;
  sc.sigma = sigma;
  sc.topology = build_topology(n_vehicles, s);

  const auto [Fv, Qv] = build_fv_qv(dt, sigma.accel);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_vehicles),
                                                      static_cast<Eigen::Index>(n_vehicles));
  sc.model.F = Eigen::kroneckerProduct(I, Fv);
  sc.model.Q = Eigen::kroneckerProduct(I, Qv);
  for (std::size_t i = 0; i < n_vehicles; ++i) {
    sc.observers.push_back(build_observer(i, sc.topology, n_vehicles, sigma));
  }
  return sc;
}

Eigen::VectorXd initial_vehicle_state(std::size_t n_vehicles, RandomStream& rng) {
  Eigen::VectorXd x(4 * static_cast<Eigen::Index>(n_vehicles));
  for (std::size_t v = 0; v < n_vehicles; ++v) {
    const auto base = 4 * static_cast<Eigen::Index>(v);
    x(base + 0) = rng.uniform(0.0, 100.0);
    x(base + 1) = rng.uniform(0.0, 100.0);
    x(base + 2) = rng.uniform(-10.0, 10.0);
    x(base + 3) = rng.uniform(-10.0, 10.0);
  }
  return x;
}

std::vector<Eigen::Index> position_indices(std::size_t n_vehicles) {
  std::vector<Eigen::Index> idx;
  for (std::size_t v = 0; v < n_vehicles; ++v) {
    idx.push_back(4 * static_cast<Eigen::Index>(v));
    idx.push_back(4 * static_cast<Eigen::Index>(v) + 1);
  }
  return idx;
}

}  // namespace codedtrack
