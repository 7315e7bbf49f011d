#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "codedtrack/coding.hpp"
#include "codedtrack/kalman.hpp"
#include "codedtrack/monitor.hpp"
#include "codedtrack/straggler.hpp"
#include "codedtrack/vehicles.hpp"
#include "codedtrack/worker.hpp"

namespace codedtrack {

enum class Scheme { kReplication, kMds, kUncoded, kIdeal };

Scheme parse_scheme(std::string_view name);
std::string scheme_name(Scheme scheme);

struct RunConfig {
  Scheme scheme = Scheme::kReplication;
  std::size_t n_vehicles = 10;
  std::size_t s = 5;
  std::size_t n_workers = 3;
  double rate = 1.0 / 3.0;
  double dt = 0.1;
  double beta = 10.0;
  std::size_t t_steps = 10000;
  std::size_t n_sims = 10;
  std::uint64_t seed = 1;
  VehicleSigmas sigma;
  std::filesystem::path output_dir;
  /// Test hook: disables straggling.
  bool force_available = false;
  std::size_t warmup_steps = 50;

  /// Checks ranges and applies scheme constraints (replication sets
  /// n_workers = 1 / rate, which must be an integer). Throws ConfigError.
  void validate();
};

/// Flat `key = value` text, '#' starts a comment. Rates may be written as a/b.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

struct StepRecord {
  std::size_t sim_id = 0;
  long t = 0;
  double rmse = 0.0;
  bool decoded = false;
  Eigen::Index rank = 0;
  std::size_t n_received = 0;

  bool operator==(const StepRecord&) const = default;
};

struct SummaryRecord {
  Scheme scheme = Scheme::kIdeal;
  double rate = 1.0;
  std::size_t n_workers = 0;
  double dt = 0.0;
  double beta = 0.0;
  double t0_mean = 0.0;
  double rmse_p90 = 0.0;
  double rmse_mean = 0.0;
  double availability = 0.0;
  std::size_t n_samples = 0;
};

/// C^(i) z for every coded observation i.
CodedObservations encode_observations(const CodeDesign& cd, const Eigen::VectorXd& z);

/// Position RMSE: sqrt(|e_p|^2 / (d / 2)).
double position_rmse(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& x,
                     std::size_t n_vehicles);

/// One simulated run of a scheme over a precomputed trajectory.
class Simulation {
 public:
  Simulation(const RunConfig& config, std::size_t sim_id);
  ~Simulation();
  Simulation(Simulation&&) noexcept;
  Simulation& operator=(Simulation&&) noexcept;

  /// Advances one time step. Throws std::out_of_range past t_steps.
  StepRecord run_step();

  long t() const;
  const Trajectory& trajectory() const;
  const Eigen::VectorXd& estimate() const;
  const Eigen::MatrixXd& covariance() const;
  /// Mean fraction of workers available per step so far (1 for the ideal scheme).
  double availability_fraction() const;
  std::uint64_t seed() const;
  /// Fingerprint of the code design (0 for the uncoded and ideal schemes).
  std::uint64_t design_fingerprint() const;
  /// Full-availability rank used to flag decoding (coded schemes only).
  Eigen::Index r_full() const;
  const CodedSystem* coded_system() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Smallest 1-based t0 such that the means of m[t0..tm] and m[tm+1..T],
/// tm = t0 + floor((T - t0) / 2), differ by at most 10% of the larger one.
/// Returns T when no t0 qualifies. Requires T >= 4.
std::size_t transient_cutoff(std::span<const double> m);

/// Nearest-rank percentile: the ceil(p/100 * N)-th smallest sample.
double nearest_rank_percentile(std::vector<double> samples, double percent);

/// m_{t0}..m_T of one run.
std::vector<double> post_cutoff_samples(std::span<const StepRecord> run, std::size_t* t0 = nullptr);

SummaryRecord aggregate(const RunConfig& config, std::span<const std::vector<StepRecord>> runs,
                        std::span<const double> availability);

struct ExperimentResult {
  SummaryRecord summary;
  std::vector<std::vector<StepRecord>> steps;  ///< per simulation
  std::vector<std::size_t> t0;
  std::vector<double> sim_p90;  ///< 90th percentile per simulation
  std::vector<std::uint64_t> sim_seeds;
  std::vector<std::uint64_t> fingerprints;
};

ExperimentResult run_experiment(const RunConfig& config);

std::string steps_csv(std::span<const std::vector<StepRecord>> runs);
std::string summary_csv_header();
std::string summary_csv_row(const SummaryRecord& s);

/// Writes steps.csv, summary.csv and metadata.txt into dir.
void write_outputs(const std::filesystem::path& dir, const RunConfig& config,
                   const ExperimentResult& result);

}  // namespace codedtrack
