#pragma once

// Directed-network logistic model with density, sender, receiver and
// homophily terms:
//
//   P(a_ij = 1) = mu(nu + alpha_i + beta_j + Z_ij' gamma),  mu(x) = e^x/(1+e^x)
//
// The types here are immutable after construction and safe to share
// read-only across threads.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace p0 {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ByteMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Logistic link

/// mu(x) = e^x / (1 + e^x), evaluated without overflow.
double mu(double x) noexcept;

/// log(1 + e^x) = max(x, 0) + log1p(e^{-|x|}).
double log1pexp(double x) noexcept;

struct MuDerivatives {
  double first;   // e^x/(1+e^x)^2
  double second;  // e^x(1-e^x)/(1+e^x)^3
  double third;   // e^x(1-4e^x+e^{2x})/(1+e^x)^4
};

MuDerivatives mu_derivatives(double x) noexcept;

// ---------------------------------------------------------------------------
// Data

/// n x n binary adjacency matrix without self-loops, with cached degrees.
class DirectedNetwork {
 public:
  /// Throws InvalidArgument for n < 2, non-binary entries or self-loops.
  explicit DirectedNetwork(ByteMatrix adjacency);

  static DirectedNetwork from_edges(
      int n, std::span<const std::pair<int, int>> edges);

  int size() const noexcept { return static_cast<int>(adjacency_.rows()); }
  bool edge(int i, int j) const { return adjacency_(i, j) != 0; }
  const ByteMatrix& adjacency() const noexcept { return adjacency_; }
  /// d_i = sum_{j != i} a_ij
  const std::vector<int>& out_degrees() const noexcept { return out_; }
  /// b_j = sum_{i != j} a_ij
  const std::vector<int>& in_degrees() const noexcept { return in_; }
  long long edge_count() const noexcept { return edges_; }

  /// Adjacency as doubles (diagonal zero).
  Matrix adjacency_real() const;

 private:
  ByteMatrix adjacency_;
  std::vector<int> out_;
  std::vector<int> in_;
  long long edges_ = 0;
};

/// p-dimensional covariate Z_ij for every ordered pair i != j, stored as p
/// dense n x n layers with zero diagonals.
class EdgeCovariates {
 public:
  /// Throws InvalidArgument on non-square / mismatched layers or non-finite
  /// off-diagonal entries.
  EdgeCovariates(int n, std::vector<Matrix> layers);

  /// p = 0 covariates on n nodes.
  static EdgeCovariates none(int n);

  int size() const noexcept { return n_; }
  int dim() const noexcept { return static_cast<int>(layers_.size()); }
  const Matrix& layer(int k) const { return layers_.at(k); }
  const std::vector<Matrix>& layers() const noexcept { return layers_; }
  Vector z(int i, int j) const;
  /// sup_{i != j} ||Z_ij||_inf
  double z_max() const noexcept { return z_max_; }

  /// sum_k gamma_k Z_k, the covariate part of every linear predictor.
  Matrix offset(const Vector& gamma) const;

  /// Elementwise z -> e^z/(1+e^z), for unbounded covariates.
  EdgeCovariates logistic_transformed() const;

 private:
  int n_;
  std::vector<Matrix> layers_;
  double z_max_ = 0.0;
};

// ---------------------------------------------------------------------------
// Parameters

/// Identification restriction removing the two-dimensional translation
/// invariance (nu, alpha, beta) -> (nu + 2c2, alpha - c1 - c2, beta + c1 - c2).
enum class Restriction {
  Practical,     // alpha_n = beta_n = 0, nu free
  Theory,        // nu = 0, beta_n = 0
  Unrestricted,  // generating values only; normalize before comparing
};

const char* to_string(Restriction r) noexcept;
Restriction restriction_from_string(const std::string& s);

struct ParamVector {
  double nu = 0.0;
  Vector alpha;
  Vector beta;
  Vector gamma;
  Restriction restriction = Restriction::Practical;

  static ParamVector zeros(int n, int p, Restriction r);

  int size() const noexcept { return static_cast<int>(alpha.size()); }
  int dim() const noexcept { return static_cast<int>(gamma.size()); }

  /// Throws ShapeMismatch / RestrictionMismatch when the shapes disagree or
  /// the coordinates pinned by the restriction are not exactly zero.
  void validate() const;

  /// Equivalent parameters (same link probabilities) satisfying `target`.
  ParamVector normalized(Restriction target) const;
};

/// Free degree coordinates shared by both identified parameterizations:
/// (nu + alpha_1, ..., nu + alpha_n, beta_1, ..., beta_{n-1}). Under the
/// theory restriction these are exactly (alpha, beta_{1..n-1}); under the
/// practical restriction the last out-coordinate is nu.
Vector working_eta(const ParamVector& params);

/// Inverse of working_eta for an identified restriction.
ParamVector from_working(const Vector& eta, const Vector& gamma,
                         Restriction restriction);

/// pi_ij = nu + alpha_i + beta_j + Z_ij' gamma
double link_predictor(const ParamVector& params, const EdgeCovariates& cov,
                      int i, int j);

/// mu(pi_ij). Throws SelfLoopRequested for i == j.
double link_probability(const ParamVector& params, const EdgeCovariates& cov,
                        int i, int j);

/// n x n matrix of pi_ij (diagonal set to zero).
Matrix link_predictors(const ParamVector& params, const EdgeCovariates& cov);

double log_likelihood(const DirectedNetwork& net, const EdgeCovariates& cov,
                      const ParamVector& params);

}  // namespace p0
