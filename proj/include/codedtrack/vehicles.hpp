#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "codedtrack/model.hpp"
#include "codedtrack/random.hpp"

namespace codedtrack {

/// Noise levels of the vehicle scenario. Defaults are the reference values.
struct VehicleSigmas {
  double accel = 0.3;  ///< enters Q_v unsquared
  double gnss = 2.0;
  double v2v = 0.5;
  double speed = 10.0;
};

/// Vehicle state layout: (p_x, p_y, v_x, v_y) per vehicle, vehicles stacked.
struct VehicleScenario {
  std::size_t n_vehicles = 0;
  std::size_t observed_per_vehicle = 0;  ///< s
  double dt = 0.0;
  VehicleSigmas sigma;
  ProcessModel model;
  std::vector<Observer> observers;  ///< one per vehicle
  std::vector<std::vector<std::size_t>> topology;
};

/// Constant-velocity block F_v and Q_v = V diag(sigma_a, sigma_a) V^T with
/// V = [dt^2/2 0; 0 dt^2/2; dt 0; 0 dt].
std::pair<Eigen::Matrix4d, Eigen::Matrix4d> build_fv_qv(double dt, double sigma_a);

/// Ring topology, 0-based: vehicle i observes (i + 1) mod N_v, ..., (i + s) mod N_v.
/// Throws ConfigError unless 1 <= s < N_v.
std::vector<std::vector<std::size_t>> build_topology(std::size_t n_vehicles, std::size_t s);

/// Selection matrix U^(v_i): first row e_i^T (absolute), then e_k^T - e_i^T per
/// observed vehicle k.
Eigen::MatrixXd build_selection(std::size_t i, const std::vector<std::size_t>& observed,
                                std::size_t n_vehicles);

/// H = U^(v_i) kron I_4, R = diag(R_GNSS, I_s kron R_rel).
Observer build_observer(std::size_t i, const std::vector<std::vector<std::size_t>>& topology,
                        std::size_t n_vehicles, const VehicleSigmas& sigma);

VehicleScenario build_scenario(std::size_t n_vehicles, std::size_t s, double dt,
                               const VehicleSigmas& sigma = {});

/// Positions uniform in a 100 m x 100 m box, speeds uniform in [-10, 10] m/s.
Eigen::VectorXd initial_vehicle_state(std::size_t n_vehicles, RandomStream& rng);

/// Indices of the position entries (2 per vehicle).
std::vector<Eigen::Index> position_indices(std::size_t n_vehicles);

}  // namespace codedtrack
