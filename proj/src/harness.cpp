#include "codedtrack/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "codedtrack/errors.hpp"

namespace codedtrack {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

double parse_double(const std::string& key, const std::string& v) {
  const auto slash = v.find('/');
  if (slash != std::string::npos) {
    const double num = parse_double(key, trim(v.substr(0, slash)));
    const double den = parse_double(key, trim(v.substr(slash + 1)));
    if (den == 0.0) throw ConfigError("zero denominator for " + key);
    return num / den;
  }
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + v + "'");
  }
  if (used != v.size()) throw ConfigError("bad number for " + key + ": '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  }
  return out;
}

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Uncoded baseline: observers dealt round-robin to workers.
std::vector<std::vector<std::size_t>> uncoded_assignment(std::size_t n_observers,
                                                         std::size_t n_workers) {
  std::vector<std::vector<std::size_t>> out(n_workers);
  for (std::size_t o = 0; o < n_observers; ++o) out[o % n_workers].push_back(o);
  return out;
}

}  // namespace

Scheme parse_scheme(std::string_view name) {
  if (name == "replication") return Scheme::kReplication;
  if (name == "mds") return Scheme::kMds;
  if (name == "uncoded") return Scheme::kUncoded;
  if (name == "ideal") return Scheme::kIdeal;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

std::string scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::kReplication: return "replication";
    case Scheme::kMds: return "mds";
    case Scheme::kUncoded: return "uncoded";
    case Scheme::kIdeal: return "ideal";
  }
  return "unknown";
}

void RunConfig::validate() {
  if (n_vehicles < 2) throw ConfigError("n_vehicles must be at least 2");
  if (s < 1 || s >= n_vehicles) throw ConfigError("s must be in [1, n_vehicles - 1]");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (t_steps < 4) throw ConfigError("t_steps must be at least 4");
  if (n_sims < 1) throw ConfigError("n_sims must be at least 1");
  switch (scheme) {
    case Scheme::kReplication: {
      if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("rate must be in (0, 1]");
      const double inv = 1.0 / rate;
      const double rounded = std::round(inv);
      if (std::abs(inv - rounded) > 1e-6 * rounded) {
        throw ConfigError("replication needs 1/rate to be an integer");
      }
      n_workers = static_cast<std::size_t>(rounded);
      break;
    }
    case Scheme::kMds:
      if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("rate must be in (0, 1]");
      if (n_workers < 1) throw ConfigError("n_workers must be at least 1");
      break;
    case Scheme::kUncoded:
      if (n_workers < 1) throw ConfigError("n_workers must be at least 1");
      break;
    case Scheme::kIdeal:
      break;
  }
}

RunConfig parse_config(std::string_view text, RunConfig cfg) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string val = trim(std::string_view(body).substr(eq + 1));
    if (val.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty value");

    if (key == "scheme") cfg.scheme = parse_scheme(val);
    else if (key == "n_vehicles") cfg.n_vehicles = parse_u64(key, val);
    else if (key == "s") cfg.s = parse_u64(key, val);
    else if (key == "n_workers") cfg.n_workers = parse_u64(key, val);
    else if (key == "rate") cfg.rate = parse_double(key, val);
    else if (key == "dt") cfg.dt = parse_double(key, val);
    else if (key == "beta") cfg.beta = parse_double(key, val);
    else if (key == "t_steps") cfg.t_steps = parse_u64(key, val);
    else if (key == "n_sims") cfg.n_sims = parse_u64(key, val);
    else if (key == "seed") cfg.seed = parse_u64(key, val);
    else if (key == "sigma_a") cfg.sigma.accel = parse_double(key, val);
    else if (key == "sigma_gnss") cfg.sigma.gnss = parse_double(key, val);
    else if (key == "sigma_v2v") cfg.sigma.v2v = parse_double(key, val);
    else if (key == "sigma_speed") cfg.sigma.speed = parse_double(key, val);
    else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

CodedObservations encode_observations(const CodeDesign& cd, const Eigen::VectorXd& z) {
  CodedObservations out;
  out.reserve(cd.C_blocks.size());
  for (const auto& C : cd.C_blocks) out.push_back(C * z);
  return out;
}

double position_rmse(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& x,
                     std::size_t n_vehicles) {
  double sq = 0.0;
  for (std::size_t v = 0; v < n_vehicles; ++v) {
    const auto b = 4 * static_cast<Eigen::Index>(v);
    sq += (x_hat.segment<2>(b) - x.segment<2>(b)).squaredNorm();
  }
  // d / 2 = 2 N_v.
  return std::sqrt(sq / (2.0 * static_cast<double>(n_vehicles)));
}

// ---------------------------------------------------------------------------

struct Simulation::Impl {
  RunConfig cfg;
  std::size_t sim_id = 0;
  std::uint64_t seed = 0;
  VehicleScenario scenario;
  Trajectory traj;
  long t = 0;

  RandomStream straggler_rng{0};
  std::vector<RandomStream> worker_rngs;
  AvailabilityState availability;
  double available_sum = 0.0;

  // Coded schemes.
  std::unique_ptr<CodedSystem> sys;
  MonitorState monitor;
  // Uncoded and ideal schemes.
  FilterState fs;
  std::vector<std::vector<std::size_t>> uncoded_subsets;

  Impl(const RunConfig& config, std::size_t id) : cfg(config), sim_id(id) {
    cfg.validate();
    seed = mix_seed(cfg.seed, sim_id);
    const RandomStream root(seed);
    scenario = build_scenario(cfg.n_vehicles, cfg.s, cfg.dt, cfg.sigma);

    RandomStream init_rng = root.split(Stream::kInitialState);
    const Eigen::VectorXd x0 = initial_vehicle_state(cfg.n_vehicles, init_rng);
    RandomStream traj_rng = root.split(Stream::kTrajectory);
    traj = simulate(scenario.model, scenario.observers, x0, cfg.t_steps, traj_rng);

    const Eigen::Index d = scenario.model.dim();
    RandomStream mon_rng = root.split(Stream::kMonitorInit);
    const Eigen::VectorXd x_hat0 = x0 + 2.0 * mon_rng.standard_normal(d);
    const Eigen::MatrixXd P0 = 10.0 * Eigen::MatrixXd::Identity(d, d);

    straggler_rng = root.split(Stream::kStraggler);
    const std::size_t n_w = cfg.scheme == Scheme::kIdeal ? 0 : cfg.n_workers;
    availability = make_availability(n_w, cfg.beta, cfg.dt, cfg.force_available);
    const RandomStream worker_root = root.split(Stream::kWorker);
    for (std::size_t w = 0; w < n_w; ++w) worker_rngs.push_back(worker_root.split(w));

    switch (cfg.scheme) {
      case Scheme::kReplication:
      case Scheme::kMds: {
        const auto stack = stack_observers(scenario.observers);
        CodeDesign design;
        if (cfg.scheme == Scheme::kReplication) {
          design = design_replication(cfg.n_workers, *stack, d);
        } else {
          RandomStream code_rng = root.split(Stream::kCode);
          design = design_random_mds(cfg.n_workers, *stack, d, cfg.rate, code_rng);
        }
        sys = std::make_unique<CodedSystem>(
            make_coded_system(scenario.model, scenario.observers, std::move(design)));
        warm_up(root.split(Stream::kWarmup), x0, x_hat0, P0);
        const Eigen::Index r_full = monitor.r_full;
        monitor = make_monitor(*sys, x_hat0, P0);
        monitor.r_full = r_full;
        break;
      }
      case Scheme::kUncoded:
        uncoded_subsets = uncoded_assignment(scenario.observers.size(), cfg.n_workers);
        [[fallthrough]];
      case Scheme::kIdeal:
        fs = FilterState{x_hat0, P0, 0};
        break;
    }
  }

  // All-available run on a separate trajectory; freezes r_full at the
  // resulting covariance.
  void warm_up(RandomStream rng, const Eigen::VectorXd& x0, const Eigen::VectorXd& x_hat0,
               const Eigen::MatrixXd& P0) {
    monitor = make_monitor(*sys, x_hat0, P0);
    monitor.r_full = compute_r_full(*sys, P0);
    RandomStream traj_rng = rng.split(Stream::kTrajectory);
    const Trajectory warm =
        simulate(scenario.model, scenario.observers, x0, cfg.warmup_steps, traj_rng);
    RandomStream worker_rng = rng.split(Stream::kWorker);
    for (std::size_t k = 0; k < warm.size(); ++k) {
      const CodedObservations coded = encode_observations(sys->design, warm.observations[k].z);
      std::vector<WorkerOutput> outputs;
      for (std::size_t w = 0; w < sys->design.worker_count(); ++w) {
        outputs.push_back(worker_step(*sys, w, monitor.x_hat, monitor.P, coded,
                                      static_cast<long>(k) + 1, worker_rng));
      }
      monitor_step(monitor, *sys, outputs);
    }
    monitor.r_full = compute_r_full(*sys, monitor.P);
  }

  StepRecord step() {
    if (t >= static_cast<long>(cfg.t_steps)) throw std::out_of_range("simulation finished");
    ++t;
    const auto k = static_cast<std::size_t>(t - 1);
    const StackedObservation& obs = traj.observations[k];
    StepRecord rec;
    rec.sim_id = sim_id;
    rec.t = t;

    switch (cfg.scheme) {
      case Scheme::kReplication:
      case Scheme::kMds: {
        const CodedObservations coded = encode_observations(sys->design, obs.z);
        const auto avail = step_available(availability, t, straggler_rng);
        available_sum += static_cast<double>(avail.size()) / static_cast<double>(cfg.n_workers);
        std::vector<WorkerOutput> outputs;
        outputs.reserve(avail.size());
        for (const std::size_t w : avail) {
          outputs.push_back(worker_step(*sys, w, monitor.x_hat, monitor.P, coded, t, worker_rngs[w]));
        }
        const DecodeResult res = monitor_step(monitor, *sys, outputs);
        rec.decoded = res.decoded;
        rec.rank = res.rank;
        rec.n_received = res.n_received;
        rec.rmse = position_rmse(monitor.x_hat, traj.states[k], cfg.n_vehicles);
        break;
      }
      case Scheme::kUncoded: {
        const auto avail = step_available(availability, t, straggler_rng);
        available_sum += static_cast<double>(avail.size()) / static_cast<double>(cfg.n_workers);
        std::vector<FilterState> received;
        for (const std::size_t w : avail) {
          received.push_back(uncoded_worker_update(scenario.model, fs, scenario.observers,
                                                   uncoded_subsets[w], obs));
        }
        if (received.empty()) {
          const Prediction p = predict(scenario.model, fs);
          fs = FilterState{p.x, p.P, t};
        } else {
          fs = average_estimates(received);
          fs.t = t;
        }
        rec.decoded = !received.empty();
        rec.rank = rec.decoded ? scenario.model.dim() : 0;
        rec.n_received = received.size();
        rec.rmse = position_rmse(fs.x_hat, traj.states[k], cfg.n_vehicles);
        break;
      }
      case Scheme::kIdeal:
        fs = update_all(scenario.model, fs, scenario.observers, obs);
        available_sum += 1.0;
        rec.decoded = true;
        rec.rank = scenario.model.dim();
        rec.n_received = 1;
        rec.rmse = position_rmse(fs.x_hat, traj.states[k], cfg.n_vehicles);
        break;
    }
    return rec;
  }
};

Simulation::Simulation(const RunConfig& config, std::size_t sim_id)
    : impl_(std::make_unique<Impl>(config, sim_id)) {}
Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

StepRecord Simulation::run_step() { return impl_->step(); }
long Simulation::t() const { return impl_->t; }
const Trajectory& Simulation::trajectory() const { return impl_->traj; }

const Eigen::VectorXd& Simulation::estimate() const {
  return impl_->sys ? impl_->monitor.x_hat : impl_->fs.x_hat;
}

const Eigen::MatrixXd& Simulation::covariance() const {
  return impl_->sys ? impl_->monitor.P : impl_->fs.P;
}

double Simulation::availability_fraction() const {
  return impl_->t == 0 ? 0.0 : impl_->available_sum / static_cast<double>(impl_->t);
}

std::uint64_t Simulation::seed() const { return impl_->seed; }

std::uint64_t Simulation::design_fingerprint() const {
  return impl_->sys ? codedtrack::design_fingerprint(impl_->sys->design) : 0;
}

Eigen::Index Simulation::r_full() const { return impl_->sys ? impl_->monitor.r_full : 0; }
const CodedSystem* Simulation::coded_system() const { return impl_->sys.get(); }

// ---------------------------------------------------------------------------

std::size_t transient_cutoff(std::span<const double> m) {
  const std::size_t T = m.size();
  if (T < 4) throw ConfigError("transient cutoff needs at least 4 samples");
  std::vector<double> prefix(T + 1, 0.0);
  for (std::size_t k = 0; k < T; ++k) prefix[k + 1] = prefix[k] + m[k];
  // Sum of m_a..m_b, 1-based inclusive.
  const auto sum = [&](std::size_t a, std::size_t b) { return prefix[b] - prefix[a - 1]; };
  for (std::size_t t0 = 1; t0 < T; ++t0) {
    const std::size_t tm = t0 + (T - t0) / 2;
    const double first = sum(t0, tm) / static_cast<double>(tm - t0 + 1);
    const double second = sum(tm + 1, T) / static_cast<double>(T - tm);
    const double scale = std::max(first, second);
    if (std::abs(first - second) <= 0.1 * scale) return t0;
  }
  return T;
}

double nearest_rank_percentile(std::vector<double> samples, double percent) {
  if (samples.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(percent > 0.0 && percent <= 100.0)) throw std::invalid_argument("percent out of range");
  const auto n = samples.size();
  auto rank = static_cast<std::size_t>(std::ceil(percent / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   samples.end());
  return samples[rank - 1];
}

std::vector<double> post_cutoff_samples(std::span<const StepRecord> run, std::size_t* t0_out) {
  std::vector<double> m;
  m.reserve(run.size());
  for (const auto& r : run) m.push_back(r.rmse);
  const std::size_t t0 = transient_cutoff(m);
  if (t0_out) *t0_out = t0;
  return {m.begin() + static_cast<std::ptrdiff_t>(t0 - 1), m.end()};
}

SummaryRecord aggregate(const RunConfig& config, std::span<const std::vector<StepRecord>> runs,
                        std::span<const double> availability) {
  if (runs.empty()) throw std::invalid_argument("nothing to aggregate");
  SummaryRecord s;
  s.scheme = config.scheme;
  s.n_workers = config.scheme == Scheme::kIdeal ? 0 : config.n_workers;
  s.rate = config.scheme == Scheme::kReplication || config.scheme == Scheme::kMds ? config.rate : 1.0;
  s.dt = config.dt;
  s.beta = config.beta;

  std::vector<double> all;
  double t0_sum = 0.0;
  for (const auto& run : runs) {
    std::size_t t0 = 0;
    const auto tail = post_cutoff_samples(run, &t0);
    t0_sum += static_cast<double>(t0);
    all.insert(all.end(), tail.begin(), tail.end());
  }
  if (all.empty()) throw std::runtime_error("every sample was discarded");
  s.t0_mean = t0_sum / static_cast<double>(runs.size());
  s.n_samples = all.size();
  double total = 0.0;
  for (const double v : all) total += v;
  s.rmse_mean = total / static_cast<double>(all.size());
  s.rmse_p90 = nearest_rank_percentile(std::move(all), 90.0);

  double av = 0.0;
  for (const double a : availability) av += a;
  s.availability = availability.empty() ? 0.0 : av / static_cast<double>(availability.size());
  return s;
}

ExperimentResult run_experiment(const RunConfig& config_in) {
  RunConfig config = config_in;
  config.validate();
  ExperimentResult out;
  std::vector<double> availability;
  // MDS reports the realized rate h / n_C rather than the requested one.
  std::optional<double> realized_rate;
  for (std::size_t sim = 0; sim < config.n_sims; ++sim) {
    Simulation s(config, sim);
    if (config.scheme == Scheme::kMds) realized_rate = s.coded_system()->design.rate;
    std::vector<StepRecord> run;
    run.reserve(config.t_steps);
    for (std::size_t k = 0; k < config.t_steps; ++k) run.push_back(s.run_step());

    std::size_t t0 = 0;
    out.sim_p90.push_back(nearest_rank_percentile(post_cutoff_samples(run, &t0), 90.0));
    out.t0.push_back(t0);
    out.sim_seeds.push_back(s.seed());
    out.fingerprints.push_back(s.design_fingerprint());
    availability.push_back(s.availability_fraction());
    out.steps.push_back(std::move(run));
  }
  out.summary = aggregate(config, out.steps, availability);
  if (realized_rate) out.summary.rate = *realized_rate;
  return out;
}

std::string steps_csv(std::span<const std::vector<StepRecord>> runs) {
  std::string s = "sim_id,t,rmse,decoded,rank,n_received\n";
  for (const auto& run : runs) {
    for (const auto& r : run) {
      s += std::to_string(r.sim_id) + ',' + std::to_string(r.t) + ',' + fmt9(r.rmse) + ',' +
           (r.decoded ? "1" : "0") + ',' + std::to_string(r.rank) + ',' +
           std::to_string(r.n_received) + '\n';
    }
  }
  return s;
}

std::string summary_csv_header() {
  return "scheme,rate,n_workers,dt,beta,t0_mean,rmse_p90,rmse_mean,availability\n";
}

std::string summary_csv_row(const SummaryRecord& s) {
  return scheme_name(s.scheme) + ',' + fmt9(s.rate) + ',' + std::to_string(s.n_workers) + ',' +
         fmt9(s.dt) + ',' + fmt9(s.beta) + ',' + fmt9(s.t0_mean) + ',' + fmt9(s.rmse_p90) + ',' +
         fmt9(s.rmse_mean) + ',' + fmt9(s.availability) + '\n';
}

void write_outputs(const std::filesystem::path& dir, const RunConfig& config,
                   const ExperimentResult& result) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    f << text;
    if (!f) throw std::runtime_error("write failed for " + (dir / name).string());
  };
  write("steps.csv", steps_csv(result.steps));
  write("summary.csv", summary_csv_header() + summary_csv_row(result.summary));

  std::string meta;
  meta += "scheme = " + scheme_name(config.scheme) + '\n';
  meta += "seed = " + std::to_string(config.seed) + '\n';
  meta += "n_sims = " + std::to_string(config.n_sims) + '\n';
  meta += "t_steps = " + std::to_string(config.t_steps) + '\n';
  for (std::size_t k = 0; k < result.sim_seeds.size(); ++k) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "sim %zu: seed=%llu design=%016llx t0=%zu\n", k,
                  static_cast<unsigned long long>(result.sim_seeds[k]),
                  static_cast<unsigned long long>(result.fingerprints[k]), result.t0[k]);
    meta += buf;
  }
  write("metadata.txt", meta);
}

}  // namespace codedtrack
