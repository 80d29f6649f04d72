#pragma once

// Asymptotic inference at a fitted model: the closed-form approximate inverse
// S of the degree information, standard errors, contrast tests, the profile
// information for gamma with its analytical bias correction, and recovery of
// nodes with large in-parameters.

#include "p0/estimator.hpp"
#include "p0/model.hpp"

#include <vector>

namespace p0 {

/// One entry of S in working coordinates:
///   s_ij = delta_ij/u_i. + 1/u_.n           (both out-coordinates)
///   s_ij = -1/u_.n                          (one out, one in)
///   s_ij = delta_ij/u_.j + 1/u_.n           (both in-coordinates)
/// Throws DegenerateVariance if a row or column sum of u is zero.
double s_entry(const FisherBlocks& blocks, int i, int j);

/// Dense S, (2n-1) x (2n-1). Meant for moderate n.
Matrix s_matrix(const FisherBlocks& blocks);

/// sqrt(s_ii) for each working coordinate.
Vector eta_standard_errors(const FisherBlocks& blocks);

/// Standard errors of the reported parameters under `restriction`, obtained
/// by carrying S through the map from working coordinates. Coordinates fixed
/// by the restriction get 0.
struct ParamStandardErrors {
  double nu = 0.0;
  Vector alpha;
  Vector beta;
};

ParamStandardErrors parameter_standard_errors(const FisherBlocks& blocks,
                                              Restriction restriction);

/// Scale of nu_hat under the practical restriction: (1/u_n. + 1/u_.n)^{1/2},
/// the S-variance of the reference out-coordinate. Throws RestrictionMismatch
/// for any other restriction.
double nu_standard_error(const FisherBlocks& blocks, Restriction restriction);

enum class ContrastKind {
  OutOut,  // alpha_i - alpha_j
  OutIn,   // alpha_i + beta_j
  InIn,    // beta_i - beta_j
};

struct ContrastTest {
  double estimate = 0.0;
  double se = 0.0;
  double statistic = 0.0;  // (estimate - null) / se
};

/// Homogeneity statistics with variances from the diagonal of V:
///   xi   = (a_i - a_j - null) / (1/v_ii + 1/v_jj)^{1/2}
///   zeta = (a_i + b_j - null) / (1/v_ii + 1/v_{n+j,n+j})^{1/2}
///   eta  = (b_i - b_j - null) / (1/v_{n+i,n+i} + 1/v_{n+j,n+j})^{1/2}
ContrastTest contrast_test(const FitResult& fit, const FisherBlocks& blocks,
                           ContrastKind kind, int i, int j,
                           double null_value = 0.0);

struct GammaInference {
  Matrix information;  // I_hat = H / (n(n-1))
  Vector bias;         // B_hat
};

GammaInference gamma_information_and_bias(const FitResult& fit,
                                          const FisherBlocks& blocks,
                                          const EdgeCovariates& cov);

/// gamma_hat - I^{-1} B / sqrt(n(n-1)).
Vector bias_corrected_gamma(const FitResult& fit, const Matrix& information,
                            const Vector& bias);

/// sqrt(diag(I^{-1}) / (n(n-1))).
Vector gamma_standard_errors(const Matrix& information, int n);

/// {i : beta_hat_i >= threshold}, ascending.
std::vector<int> recover_signals(const FitResult& fit, double threshold);

/// Two-sided standard-normal critical value, e.g. 1.959964 for 0.95.
double normal_critical_value(double level);

/// Two-sided p-value of a standard-normal statistic.
double two_sided_p_value(double z);

struct InferenceReport {
  double ci_level = 0.95;
  Vector se_eta;  // working coordinates
  ParamStandardErrors se;
  double se_nu = 0.0;  // practical restriction only
  Vector gamma_hat;
  Vector gamma_bc;
  Vector gamma_se;
  Matrix I_hat;
  Vector B_hat;
};

/// Everything above at a converged fit.
InferenceReport infer(const FitResult& fit, const DirectedNetwork& net,
                      const EdgeCovariates& cov, double ci_level = 0.95);

}  // namespace p0
