#pragma once

// Maximum-likelihood estimation by a two-stage Newton scheme: for fixed
// gamma the degree parameters eta solve F_gamma(eta) = 0; the outer loop runs
// Newton on the profile score Q_c(gamma) = Q(eta_hat_gamma, gamma).
//
// Degree coordinates are the 2n-1 "working" coordinates of working_eta():
// out-parameters 1..n followed by in-parameters 1..n-1 (beta_n = 0). F and V
// are indexed the same way. Under the practical restriction the out-block
// carries nu + alpha_i, so nu is the last out-coordinate.

#include "p0/model.hpp"

#include <optional>
#include <vector>

namespace p0 {

/// F_i = sum_{k != i} mu(pi_ik) - d_i for i = 1..n, and
/// F_{n+j} = sum_{k != j} mu(pi_kj) - b_j for j = 1..n-1.
/// F is the negative gradient of the log-likelihood in working coordinates.
Vector score_F(const DirectedNetwork& net, const EdgeCovariates& cov,
               const ParamVector& params);

/// Q = sum_{i != j} Z_ij (mu_ij - a_ij), the negative gamma-gradient.
Vector score_Q(const DirectedNetwork& net, const EdgeCovariates& cov,
               const ParamVector& params);

/// Derivative blocks of (F, Q). V = dF/deta' is never stored densely; it is
/// the arrow-structured matrix
///
///   [ diag(u_i.)   U            ]     U_ij = u_ij, j = 1..n-1
///   [ U'           diag(u_.j)   ]
///
/// with u_ij = mu'(pi_ij), u_ii = 0.
struct FisherBlocks {
  Matrix u;
  Vector row_sums;       // u_i.
  Vector col_sums;       // u_.j, all n columns
  Matrix v_eta_gamma;    // dF/dgamma', (2n-1) x p
  Matrix v_gamma_gamma;  // dQ/dgamma', p x p

  int size() const noexcept { return static_cast<int>(u.rows()); }
  int dim() const noexcept { return static_cast<int>(v_gamma_gamma.rows()); }
  Matrix dense_v() const;
  Vector apply_v(const Vector& x) const;
};

FisherBlocks fisher_blocks(const DirectedNetwork& net,
                           const EdgeCovariates& cov,
                           const ParamVector& params);

/// Exact solves with V. Eliminates the diagonal out-block and factors the
/// (n-1) x (n-1) Schur complement on the in-block with a Cholesky.
class FisherSolver {
 public:
  /// Throws SingularInformation if V is not numerically positive definite.
  explicit FisherSolver(const FisherBlocks& blocks);

  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;

 private:
  int n_;
  Vector inv_row_;    // 1/u_i.
  Matrix u_in_;       // u(:, 0..n-2)
  Eigen::LLT<Matrix> schur_;
};

/// H = V_gg - V_eg' V^{-1} V_eg: the information of the profile likelihood.
Matrix profile_information(const FisherBlocks& blocks);

enum class Algorithm {
  Newton,       // two-stage Newton (default)
  Alternating,  // fixed-point eta sweeps alternated with gamma GLM steps
};

struct SolverOptions {
  double tol_inner = 1e-10;  // on ||F||_inf
  double tol_outer = 1e-8;   // on ||Q_c||_inf
  int max_inner = 100;
  int max_outer = 50;
  /// ||eta||_inf or ||gamma||_inf beyond this means the MLE does not exist.
  double divergence_bound = 30.0;
  /// A converged Newton iterate must also have a step below this; divergent
  /// problems keep O(1) steps while the score vanishes.
  double step_tol = 1e-6;
  Algorithm algorithm = Algorithm::Newton;
  bool record_kantorovich = false;
  std::optional<Vector> eta0;    // working coordinates
  std::optional<Vector> gamma0;
};

struct InnerSolution {
  Vector eta;
  int iterations = 0;
  double score_norm = 0.0;
};

/// Solves F_gamma(eta) = 0 by damped Newton with exact structured solves.
/// Throws NonExistence when the iterates diverge or the iteration budget is
/// exhausted.
InnerSolution solve_eta_given_gamma(const DirectedNetwork& net,
                                    const EdgeCovariates& cov,
                                    const Vector& gamma, const Vector& eta0,
                                    const SolverOptions& options = {});

/// Q(eta_hat_gamma, gamma).
Vector profile_score_Qc(const DirectedNetwork& net, const EdgeCovariates& cov,
                        const Vector& gamma, const SolverOptions& options = {});

/// dQ_c/dgamma' = H(eta_hat_gamma, gamma). Throws SingularInformation if V or
/// H is numerically singular.
Matrix profile_jacobian_Qc(const DirectedNetwork& net,
                           const EdgeCovariates& cov, const Vector& gamma,
                           const SolverOptions& options = {});

enum class Existence { Exists, NonexistentDiverged, NonexistentMaxIter };

const char* to_string(Existence e) noexcept;

/// Per outer iteration: aleph = ||H^{-1}||_inf, delta = ||H^{-1} Q_c||_inf,
/// lambda = finite-difference Lipschitz proxy of H along the Newton step,
/// rho = 2 aleph lambda delta. Heuristic diagnostics only.
struct KantorovichStep {
  double aleph = 0.0;
  double lambda = 0.0;
  double delta = 0.0;
  double rho = 0.0;
};

struct FitResult {
  ParamVector params_hat;
  Vector eta_hat;  // working coordinates
  bool converged = false;
  Existence existence = Existence::NonexistentMaxIter;
  int inner_iterations = 0;
  int outer_iterations = 0;
  double score_norm_F = 0.0;
  double score_norm_Q = 0.0;
  double log_likelihood = 0.0;
  std::vector<KantorovichStep> kantorovich_trace;
};

/// Full MLE. Non-existence is reported through FitResult::existence.
/// Throws DegenerateNetwork when some d_i or b_j is 0 or n-1 (the degree
/// parameters are unbounded), GammaUnidentified when sum Z_ij Z_ij' is
/// singular, SingularInformation when H is singular at an iterate.
FitResult fit(const DirectedNetwork& net, const EdgeCovariates& cov,
              Restriction restriction, const SolverOptions& options = {});

}  // namespace p0
