#include "codedtrack/coding.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "codedtrack/errors.hpp"

namespace codedtrack {

namespace {

constexpr double kConsistencyTolerance = 1e-9;
constexpr double kZeroRowNorm = 1e-12;

// Checks that `sets` partition 0..n-1.
bool is_partition(const std::vector<std::vector<std::size_t>>& sets, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& set : sets) {
    for (const std::size_t k : set) {
      if (k >= n || seen[k]++ != 0) return false;
    }
  }
  for (const int s : seen) {
    if (s != 1) return false;
  }
  return true;
}

void append_matrix(std::ostringstream& os, const Eigen::MatrixXd& m) {
  char buf[32];
  os << m.rows() << ' ' << m.cols();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, " %.17g", m(r, c));
      os << buf;
    }
  }
  os << '\n';
}

const char* kind_name(CodeKind kind) {
  switch (kind) {
    case CodeKind::kReplication: return "replication";
    case CodeKind::kRandomMds: return "random_mds";
    case CodeKind::kCustom: return "custom";
  }
  return "custom";
}

}  // namespace

Eigen::Index CodeDesign::coded_rows() const {
  Eigen::Index n = 0;
  for (const auto& c : C_blocks) n += c.rows();
  return n;
}

Eigen::Index CodeDesign::state_rows() const {
  Eigen::Index n = 0;
  for (const auto& b : B_blocks) n += b.rows();
  return n;
}

bool CodeDesign::is_identity_estimate(std::size_t j) const {
  const auto& b = B_blocks[j];
  return b.rows() == b.cols() && b.isIdentity(0.0);
}

CodeDesign design_replication(std::size_t n_workers, const ObservationStack& stack,
                              Eigen::Index state_dim) {
  if (n_workers == 0) throw ConfigError("replication needs at least one worker");
  const std::size_t n_obs = stack.observer_count();
  const Eigen::Index h = stack.rows();

  CodeDesign cd;
  cd.kind = CodeKind::kReplication;
  cd.rate = 1.0 / static_cast<double>(n_workers);
  cd.gains_per_worker = 0;
  for (std::size_t j = 0; j < n_workers; ++j) {
    cd.B_blocks.push_back(Eigen::MatrixXd::Identity(state_dim, state_dim));
    cd.worker_estimates.push_back({j});
    std::vector<std::size_t> owned;
    for (std::size_t o = 0; o < n_obs; ++o) {
      const Eigen::Index rows = stack.block_rows(o);
      Eigen::MatrixXd select = Eigen::MatrixXd::Zero(rows, h);
      select.middleCols(stack.offsets[o], rows).setIdentity();
      owned.push_back(cd.C_blocks.size());
      cd.C_blocks.push_back(std::move(select));
      cd.A_blocks.push_back(stack.H.middleRows(stack.offsets[o], rows));
      cd.source_observer.push_back(o);
    }
    cd.estimate_observations.push_back(std::move(owned));
  }
  return cd;
}

CodeDesign design_random_mds(std::size_t n_workers, const ObservationStack& stack,
                             Eigen::Index state_dim, double rate, RandomStream& rng) {
  if (n_workers == 0) throw ConfigError("random MDS design needs at least one worker");
  if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("code rate must lie in (0, 1]");
  const Eigen::Index h = stack.rows();
  const auto n_coded = static_cast<std::size_t>(std::llround(static_cast<double>(h) / rate));
  if (static_cast<Eigen::Index>(n_coded) < state_dim) {
    throw ConfigError("random MDS design: n_C = round(h / rate) must be at least d");
  }

  CodeDesign cd;
  cd.kind = CodeKind::kRandomMds;
  cd.rate = static_cast<double>(h) / static_cast<double>(n_coded);
  cd.worker_estimates.resize(n_workers);
  for (std::size_t i = 0; i < n_coded; ++i) {
    Eigen::RowVectorXd c;
    Eigen::RowVectorXd b;
    do {
      c = rng.standard_normal(h).transpose();
      b = c * stack.H;
    } while (b.norm() < kZeroRowNorm);
    cd.C_blocks.push_back(c);
    cd.B_blocks.push_back(b);
    cd.A_blocks.push_back(Eigen::MatrixXd::Identity(1, 1));
    cd.source_observer.push_back(std::nullopt);
    cd.estimate_observations.push_back({i});
    cd.worker_estimates[i % n_workers].push_back(i);
  }
  // N_K = ceil((N_o / rate) / N_w) with rate = h / n_C, in exact integer arithmetic.
  const std::size_t n_obs = stack.observer_count();
  const auto num = n_obs * n_coded;
  const auto den = static_cast<std::size_t>(h) * n_workers;
  cd.gains_per_worker = std::min(n_obs, (num + den - 1) / den);
  return cd;
}

bool verify_design(const CodeDesign& cd, const Eigen::MatrixXd& H) {
  const std::size_t n_c = cd.C_blocks.size();
  const std::size_t n_b = cd.B_blocks.size();
  if (n_b == 0 || n_b > n_c) return false;
  if (cd.A_blocks.size() != n_c || cd.estimate_observations.size() != n_b) return false;
  if (!is_partition(cd.worker_estimates, n_b)) return false;
  if (!is_partition(cd.estimate_observations, n_c)) return false;

  const Eigen::Index d = H.cols();
  for (const auto& b : cd.B_blocks) {
    if (b.cols() != d || b.rows() == 0) return false;
  }
  for (std::size_t j = 0; j < n_b; ++j) {
    const auto& b = cd.B_blocks[j];
    for (const std::size_t i : cd.estimate_observations[j]) {
      const auto& c = cd.C_blocks[i];
      const auto& a = cd.A_blocks[i];
      if (c.cols() != H.rows() || a.rows() != c.rows() || a.cols() != b.rows()) return false;
      const double err = (a * b - c * H).cwiseAbs().maxCoeff();
      if (!(err <= kConsistencyTolerance)) return false;
    }
  }
  return true;
}

double estimate_ops(const CodeDesign& cd, Eigen::Index observer_rows, std::size_t n_workers) {
  const double h_o = static_cast<double>(observer_rows);
  double ops = static_cast<double>(cd.gains_per_worker) * static_cast<double>(n_workers) *
               h_o * h_o * h_o;
  for (const auto& estimates : cd.worker_estimates) {
    for (const std::size_t j : estimates) {
      for (const std::size_t i : cd.estimate_observations[j]) {
        const double n = static_cast<double>(cd.C_blocks[i].rows());
        ops += n * n * n;
      }
    }
  }
  return ops;
}

std::string serialize_design(const CodeDesign& cd) {
  std::ostringstream os;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", cd.rate);
  os << "kind " << kind_name(cd.kind) << "\nrate " << buf << "\nN_K " << cd.gains_per_worker
     << "\nN_C " << cd.C_blocks.size() << "\nN_B " << cd.B_blocks.size() << '\n';
  for (std::size_t i = 0; i < cd.C_blocks.size(); ++i) {
    os << "C " << i << ' ';
    append_matrix(os, cd.C_blocks[i]);
    os << "A " << i << ' ';
    append_matrix(os, cd.A_blocks[i]);
  }
  for (std::size_t j = 0; j < cd.B_blocks.size(); ++j) {
    os << "B " << j << ' ';
    append_matrix(os, cd.B_blocks[j]);
    os << "obs " << j;
    for (const std::size_t i : cd.estimate_observations[j]) os << ' ' << i;
    os << '\n';
  }
  for (std::size_t w = 0; w < cd.worker_estimates.size(); ++w) {
    os << "worker " << w;
    for (const std::size_t j : cd.worker_estimates[w]) os << ' ' << j;
    os << '\n';
  }
  return os.str();
}

std::uint64_t design_fingerprint(const CodeDesign& cd) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : serialize_design(cd)) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace codedtrack
