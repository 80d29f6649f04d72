#pragma once

// Monte-Carlo harness for the coverage experiments: linear-ramp degree
// parameters, Beta(2,2) and +-1 node attributes, replicated fits and
// aggregation into coverage / interval length / non-existence frequencies.
//
// Node count convention: `nodes` is the total number of nodes. The ramp is
// written for nodes labelled 0..m with m = nodes - 1, i.e. alpha_i = i c log m
// / m and nu = -log m / 4, so a design quoted as "n = 100" uses nodes = 101.

#include "p0/estimator.hpp"
#include "p0/model.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace p0 {

/// Reproducible random stream. The engine is std::mt19937_64 (fully
/// specified by the standard); stream k of a base seed is seeded with
/// splitmix64(base_seed + k * golden_gamma), and every variate is derived
/// from raw 64-bit outputs so results do not depend on the standard
/// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  static Rng stream(std::uint64_t base_seed, std::uint64_t index);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }
  /// Beta(a, b) by Johnk's rejection method (intended for a, b <= ~3).
  double beta(double a, double b);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

struct NodeAttributes {
  Vector x1;  // Beta(2,2)
  Vector x2;  // +1 w.p. 0.3, -1 w.p. 0.7
};

struct GeneratedCovariates {
  NodeAttributes attributes;
  EdgeCovariates z;  // Z_ij = (|x1_i - x1_j|, x2_i * x2_j)
};

/// Draws x1 then x2 for each node in turn.
NodeAttributes generate_attributes(int nodes, Rng& rng);
EdgeCovariates covariates_from_attributes(const NodeAttributes& attr);

GeneratedCovariates generate_covariates(int nodes, Rng& rng);
GeneratedCovariates generate_covariates(int nodes, std::uint64_t seed);

/// Independent Bernoulli(mu(pi_ij)) for every ordered pair i != j.
DirectedNetwork generate_network(const ParamVector& params,
                                 const EdgeCovariates& cov, Rng& rng);
DirectedNetwork generate_network(const ParamVector& params,
                                 const EdgeCovariates& cov,
                                 std::uint64_t seed);

struct SimDesign {
  int nodes = 101;
  double c = 0.0;
  Vector gamma_star = Vector::Constant(2, 1.0);
  std::optional<double> nu_star;  // default -log(nodes - 1) / 4
  /// Overrides the ramp for beta (signal-recovery designs).
  std::optional<Vector> beta_star;
  int replications = 1000;
  std::uint64_t base_seed = 20240101;
  double ci_level = 0.95;
  /// Node pairs whose alpha contrast is monitored; (0, 0) stands for nu.
  std::vector<std::pair<int, int>> pairs = {{1, 2}};
  bool warm_start = false;
  /// Also fit from the truth and record whether existence agrees.
  bool compare_warm_start = false;
  /// Recovery threshold; when set, each record notes exact recovery of
  /// {i : beta*_i > threshold} (beta* under the practical restriction).
  std::optional<double> recovery_threshold;
  int threads = 0;  // 0: hardware concurrency
};

/// Generating parameters of a design (unrestricted).
ParamVector design_truth(const SimDesign& design);

struct PairRecord {
  bool covered = false;
  double length = 0.0;
};

struct ReplicationRecord {
  int index = 0;
  std::string status;  // "exists", "degenerate", "nonexistent_diverged", ...
  bool exists = false;
  std::vector<PairRecord> pairs;
  std::vector<PairRecord> gamma_corrected;
  std::vector<PairRecord> gamma_uncorrected;
  Vector gamma_hat;
  Vector gamma_bc;
  double eta_error = 0.0;    // ||eta_hat - eta*||_inf, theory coordinates
  double gamma_error = 0.0;  // ||gamma_hat - gamma*||_inf
  std::optional<bool> recovered;
  std::optional<bool> warm_start_agrees;
  int outer_iterations = 0;
  int inner_iterations = 0;
};

struct CellSummary {
  std::string target;  // "alpha" (pair i, j), "nu", or "gamma" (coordinate i, 1-based)
  int i = 0;
  int j = 0;
  double coverage = 0.0;
  std::optional<double> coverage_uncorrected;
  double mean_length = 0.0;
};

struct SimReport {
  SimDesign design;
  std::vector<ReplicationRecord> records;
  int existing = 0;
  double nonexistence = 0.0;
  std::vector<CellSummary> cells;
  std::optional<double> recovery_rate;
  std::optional<double> warm_start_agreement;
  double mean_gamma_hat_error = 0.0;  // |mean(gamma_hat) - gamma*| per coord max
};

/// Replications run in parallel; every replication is a deterministic
/// function of (design, index), so the report does not depend on scheduling.
SimReport run_design(const SimDesign& design);

/// One replication, exposed for tests and the CLI.
ReplicationRecord run_replication(const SimDesign& design, int index);

/// Aggregates records into the report fields (order-independent).
SimReport summarize(const SimDesign& design,
                    std::vector<ReplicationRecord> records);

struct RateRow {
  int nodes = 0;
  double median_eta_error = 0.0;
  double median_gamma_error = 0.0;
  int existing = 0;
};

struct RateTable {
  std::vector<RateRow> rows;
  double eta_slope = 0.0;    // least-squares slope of log median vs log(nodes - 1)
  double gamma_slope = 0.0;
};

RateTable rate_sweep(const std::vector<SimDesign>& designs);

double median(std::vector<double> values);

}  // namespace p0
