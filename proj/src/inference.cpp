#include "p0/inference.hpp"

#include "p0/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <string>

namespace p0 {

namespace {

void check_variances(const FisherBlocks& b) {
  if ((b.row_sums.array() <= 0.0).any() || (b.col_sums.array() <= 0.0).any()) {
    throw DegenerateVariance("a row or column sum of u is zero");
  }
}

double n_pairs(int n) { return static_cast<double>(n) * (n - 1); }

}  // namespace

double s_entry(const FisherBlocks& b, int i, int j) {
  const int n = b.size();
  if (i < 0 || j < 0 || i >= 2 * n - 1 || j >= 2 * n - 1) {
    throw ShapeMismatch("s_entry: index out of range");
  }
  const double ref = b.col_sums(n - 1);
  if (ref <= 0.0) throw DegenerateVariance("u_.n is zero");
  const bool out_i = i < n;
  const bool out_j = j < n;
  if (out_i != out_j) return -1.0 / ref;
  double s = 1.0 / ref;
  if (i == j) {
    const double diag = out_i ? b.row_sums(i) : b.col_sums(i - n);
    if (diag <= 0.0) throw DegenerateVariance("zero row or column sum of u");
    s += 1.0 / diag;
  }
  return s;
}

Matrix s_matrix(const FisherBlocks& b) {
  check_variances(b);
  const int n = b.size();
  const double ref = 1.0 / b.col_sums(n - 1);
  Matrix s = Matrix::Constant(2 * n - 1, 2 * n - 1, ref);
  s.topRightCorner(n, n - 1).setConstant(-ref);
  s.bottomLeftCorner(n - 1, n).setConstant(-ref);
  s.diagonal().head(n) += b.row_sums.cwiseInverse();
  s.diagonal().tail(n - 1) += b.col_sums.head(n - 1).cwiseInverse();
  return s;
}

Vector eta_standard_errors(const FisherBlocks& b) {
  check_variances(b);
  const int n = b.size();
  Vector se(2 * n - 1);
  for (int i = 0; i < 2 * n - 1; ++i) se(i) = std::sqrt(s_entry(b, i, i));
  return se;
}

ParamStandardErrors parameter_standard_errors(const FisherBlocks& b,
                                              Restriction restriction) {
  check_variances(b);
  const int n = b.size();
  const int last = n - 1;
  ParamStandardErrors out;
  out.alpha = Vector::Zero(n);
  out.beta = Vector::Zero(n);
  for (int j = 0; j < n - 1; ++j) out.beta(j) = std::sqrt(s_entry(b, n + j, n + j));
  switch (restriction) {
    case Restriction::Theory:
      for (int i = 0; i < n; ++i) out.alpha(i) = std::sqrt(s_entry(b, i, i));
      break;
    case Restriction::Practical:
      // alpha_i = w_i - w_n and nu = w_n in working coordinates w.
      out.nu = std::sqrt(s_entry(b, last, last));
      for (int i = 0; i < n - 1; ++i) {
        out.alpha(i) = std::sqrt(s_entry(b, i, i) + s_entry(b, last, last) -
                                 2.0 * s_entry(b, i, last));
      }
      break;
    case Restriction::Unrestricted:
      throw RestrictionMismatch("standard errors need an identifying restriction");
  }
  return out;
}

double nu_standard_error(const FisherBlocks& b, Restriction restriction) {
  if (restriction != Restriction::Practical) {
    throw RestrictionMismatch("nu is only free under the practical restriction");
  }
  const int last = b.size() - 1;
  if (b.row_sums(last) <= 0.0 || b.col_sums(last) <= 0.0) {
    throw DegenerateVariance("reference node has zero variance sum");
  }
  return std::sqrt(s_entry(b, last, last));
}

ContrastTest contrast_test(const FitResult& fit, const FisherBlocks& b,
                           ContrastKind kind, int i, int j, double null_value) {
  const int n = b.size();
  if (i < 0 || j < 0 || i >= n || j >= n) {
    throw ShapeMismatch("contrast_test: node index out of range");
  }
  const auto& a = fit.params_hat.alpha;
  const auto& be = fit.params_hat.beta;
  double est = 0.0;
  double vi = 0.0;
  double vj = 0.0;
  switch (kind) {
    case ContrastKind::OutOut:
      est = a(i) - a(j);
      vi = b.row_sums(i);
      vj = b.row_sums(j);
      break;
    case ContrastKind::OutIn:
      est = a(i) + be(j);
      vi = b.row_sums(i);
      vj = b.col_sums(j);
      break;
    case ContrastKind::InIn:
      est = be(i) - be(j);
      vi = b.col_sums(i);
      vj = b.col_sums(j);
      break;
  }
  if (vi <= 0.0 || vj <= 0.0) throw DegenerateVariance("zero information in contrast");
  ContrastTest t;
  t.estimate = est;
  t.se = std::sqrt(1.0 / vi + 1.0 / vj);
  t.statistic = (est - null_value) / t.se;
  return t;
}

GammaInference gamma_information_and_bias(const FitResult& fit,
                                          const FisherBlocks& b,
                                          const EdgeCovariates& cov) {
  const int n = b.size();
  const int p = b.dim();
  if (cov.size() != n || cov.dim() != p) {
    throw ShapeMismatch("covariates do not match the information blocks");
  }
  GammaInference out;
  const double pairs = n_pairs(n);
  out.information = profile_information(b) / pairs;
  if (p > 0) {
    Eigen::LLT<Matrix> fac(out.information);
    if (fac.info() != Eigen::Success) {
      throw SingularInformation("gamma information is not positive definite");
    }
  }

  const Matrix pi = link_predictors(fit.params_hat, cov);
  Matrix d1(n, n);
  Matrix d2(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i == j) {
        d1(i, j) = d2(i, j) = 0.0;
        continue;
      }
      const MuDerivatives md = mu_derivatives(pi(i, j));
      d1(i, j) = md.first;
      d2(i, j) = md.second;
    }
  }
  const Vector row1 = d1.rowwise().sum();
  const Vector col1 = d1.colwise().sum().transpose();
  if ((row1.array() <= 0.0).any() || (col1.array() <= 0.0).any()) {
    throw DegenerateVariance("zero variance sum in bias term");
  }
  out.bias = Vector::Zero(p);
  for (int k = 0; k < p; ++k) {
    const Matrix w = d2.cwiseProduct(cov.layer(k));
    out.bias(k) = (w.rowwise().sum().cwiseQuotient(row1)).sum() +
                  (w.colwise().sum().transpose().cwiseQuotient(col1)).sum();
  }
  // Sign chosen so that sqrt(N)(gamma_hat - gamma*) is centred at I^{-1} B,
  // which makes gamma_hat - I^{-1} B / sqrt(N) the bias-reduced estimate.
  out.bias /= -2.0 * std::sqrt(pairs);
  return out;
}

Vector bias_corrected_gamma(const FitResult& fit, const Matrix& information,
                            const Vector& bias) {
  const Vector& g = fit.params_hat.gamma;
  if (information.rows() != g.size() || bias.size() != g.size()) {
    throw ShapeMismatch("bias correction shapes disagree");
  }
  if (g.size() == 0) return g;
  Eigen::LLT<Matrix> fac(information);
  if (fac.info() != Eigen::Success) {
    throw SingularInformation("gamma information is not positive definite");
  }
  return g - fac.solve(bias) / std::sqrt(n_pairs(fit.params_hat.size()));
}

Vector gamma_standard_errors(const Matrix& information, int n) {
  if (information.size() == 0) return Vector();
  Eigen::LLT<Matrix> fac(information);
  if (fac.info() != Eigen::Success) {
    throw SingularInformation("gamma information is not positive definite");
  }
  const Matrix inv = fac.solve(Matrix::Identity(information.rows(), information.cols()));
  return (inv.diagonal() / n_pairs(n)).cwiseSqrt();
}

std::vector<int> recover_signals(const FitResult& fit, double threshold) {
  std::vector<int> out;
  const auto& beta = fit.params_hat.beta;
  for (int i = 0; i < beta.size(); ++i) {
    if (beta(i) >= threshold) out.push_back(i);
  }
  return out;
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw InvalidArgument("confidence level must lie in (0, 1)");
  }
  const boost::math::normal_distribution<double> z;
  return boost::math::quantile(z, 0.5 + 0.5 * level);
}

double two_sided_p_value(double z) {
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

InferenceReport infer(const FitResult& fit, const DirectedNetwork& net,
                      const EdgeCovariates& cov, double ci_level) {
  if (!fit.converged) throw NonExistence(false, "inference needs a converged fit");
  const FisherBlocks blocks = fisher_blocks(net, cov, fit.params_hat);
  InferenceReport r;
  r.ci_level = ci_level;
  r.se_eta = eta_standard_errors(blocks);
  r.se = parameter_standard_errors(blocks, fit.params_hat.restriction);
  if (fit.params_hat.restriction == Restriction::Practical) {
    r.se_nu = nu_standard_error(blocks, Restriction::Practical);
  }
  r.gamma_hat = fit.params_hat.gamma;
  const GammaInference gi = gamma_information_and_bias(fit, blocks, cov);
  r.I_hat = gi.information;
  r.B_hat = gi.bias;
  r.gamma_bc = bias_corrected_gamma(fit, gi.information, gi.bias);
  r.gamma_se = gamma_standard_errors(gi.information, net.size());
  return r;
}

}  // namespace p0
