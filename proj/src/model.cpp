#include "p0/model.hpp"

#include "p0/errors.hpp"

#include <cmath>
#include <string>

namespace p0 {

double mu(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log1pexp(double x) noexcept {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

MuDerivatives mu_derivatives(double x) noexcept {
  // In terms of m = mu(x): mu' = m(1-m), mu'' = mu'(1-2m),
  // mu''' = mu'(1 - 6m + 6m^2). These agree with the closed forms and stay
  // finite for any x.
  const double m = mu(x);
  const double q = mu(-x);  // 1 - m without cancellation
  const double d1 = m * q;
  return {d1, d1 * (q - m), d1 * (1.0 - 6.0 * m * q)};
}

// ---------------------------------------------------------------------------

DirectedNetwork::DirectedNetwork(ByteMatrix adjacency)
    : adjacency_(std::move(adjacency)) {
  const auto n = adjacency_.rows();
  if (adjacency_.cols() != n) throw InvalidArgument("adjacency must be square");
  if (n < 2) throw InvalidArgument("network needs at least 2 nodes");
  out_.assign(n, 0);
  in_.assign(n, 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto a = adjacency_(i, j);
      if (a > 1) throw InvalidArgument("adjacency entries must be 0 or 1");
      if (a == 0) continue;
      if (i == j) {
        throw InvalidArgument("self-loop at node " + std::to_string(i));
      }
      ++out_[i];
      ++in_[j];
      ++edges_;
    }
  }
}

DirectedNetwork DirectedNetwork::from_edges(
    int n, std::span<const std::pair<int, int>> edges) {
  if (n < 2) throw InvalidArgument("network needs at least 2 nodes");
  ByteMatrix a = ByteMatrix::Zero(n, n);
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw InvalidArgument("edge endpoint out of range");
    }
    a(i, j) = 1;
  }
  return DirectedNetwork(std::move(a));
}

Matrix DirectedNetwork::adjacency_real() const {
  return adjacency_.cast<double>();
}

// ---------------------------------------------------------------------------

EdgeCovariates::EdgeCovariates(int n, std::vector<Matrix> layers)
    : n_(n), layers_(std::move(layers)) {
  if (n < 2) throw InvalidArgument("covariates need at least 2 nodes");
  for (auto& layer : layers_) {
    if (layer.rows() != n || layer.cols() != n) {
      throw InvalidArgument("covariate layer must be n x n");
    }
    layer.diagonal().setZero();
    if (!layer.allFinite()) throw InvalidArgument("covariates must be finite");
    z_max_ = std::max(z_max_, layer.cwiseAbs().maxCoeff());
  }
}

EdgeCovariates EdgeCovariates::none(int n) { return EdgeCovariates(n, {}); }

Vector EdgeCovariates::z(int i, int j) const {
  Vector out(dim());
  for (int k = 0; k < dim(); ++k) out(k) = layers_[k](i, j);
  return out;
}

Matrix EdgeCovariates::offset(const Vector& gamma) const {
  if (gamma.size() != dim()) {
    throw ShapeMismatch("gamma has dimension " + std::to_string(gamma.size()) +
                        ", covariates have " + std::to_string(dim()));
  }
  Matrix out = Matrix::Zero(n_, n_);
  for (int k = 0; k < dim(); ++k) out.noalias() += gamma(k) * layers_[k];
  return out;
}

EdgeCovariates EdgeCovariates::logistic_transformed() const {
  std::vector<Matrix> t;
  t.reserve(layers_.size());
  for (const auto& layer : layers_) {
    t.push_back(layer.unaryExpr([](double v) { return mu(v); }));
  }
  return EdgeCovariates(n_, std::move(t));
}

// ---------------------------------------------------------------------------

const char* to_string(Restriction r) noexcept {
  switch (r) {
    case Restriction::Practical: return "practical";
    case Restriction::Theory: return "theory";
    case Restriction::Unrestricted: return "unrestricted";
  }
  return "?";
}

Restriction restriction_from_string(const std::string& s) {
  if (s == "practical") return Restriction::Practical;
  if (s == "theory") return Restriction::Theory;
  if (s == "unrestricted") return Restriction::Unrestricted;
  throw InvalidArgument("unknown restriction '" + s + "'");
}

ParamVector ParamVector::zeros(int n, int p, Restriction r) {
  return {0.0, Vector::Zero(n), Vector::Zero(n), Vector::Zero(p), r};
}

void ParamVector::validate() const {
  if (beta.size() != alpha.size()) {
    throw ShapeMismatch("alpha and beta lengths differ");
  }
  if (alpha.size() < 2) throw ShapeMismatch("need at least 2 nodes");
  const auto last = alpha.size() - 1;
  switch (restriction) {
    case Restriction::Practical:
      if (alpha(last) != 0.0 || beta(last) != 0.0) {
        throw RestrictionMismatch(
            "practical restriction requires alpha_n = beta_n = 0");
      }
      break;
    case Restriction::Theory:
      if (nu != 0.0 || beta(last) != 0.0) {
        throw RestrictionMismatch("theory restriction requires nu = beta_n = 0");
      }
      break;
    case Restriction::Unrestricted:
      break;
  }
}

ParamVector ParamVector::normalized(Restriction target) const {
  const auto last = alpha.size() - 1;
  ParamVector out = *this;
  out.restriction = target;
  switch (target) {
    case Restriction::Practical:
      out.nu = nu + alpha(last) + beta(last);
      out.alpha.array() -= alpha(last);
      out.beta.array() -= beta(last);
      out.alpha(last) = 0.0;
      out.beta(last) = 0.0;
      break;
    case Restriction::Theory:
      out.nu = 0.0;
      out.alpha.array() += nu + beta(last);
      out.beta.array() -= beta(last);
      out.beta(last) = 0.0;
      break;
    case Restriction::Unrestricted:
      break;
  }
  return out;
}

Vector working_eta(const ParamVector& params) {
  const int n = params.size();
  Vector eta(2 * n - 1);
  eta.head(n) = params.alpha.array() + params.nu;
  eta.tail(n - 1) = params.beta.head(n - 1).array() - params.beta(n - 1);
  eta.head(n).array() += params.beta(n - 1);
  return eta;
}

ParamVector from_working(const Vector& eta, const Vector& gamma,
                         Restriction restriction) {
  if (eta.size() < 3 || eta.size() % 2 == 0) {
    throw ShapeMismatch("working eta must have odd length 2n-1");
  }
  const int n = static_cast<int>(eta.size() + 1) / 2;
  ParamVector out = ParamVector::zeros(n, static_cast<int>(gamma.size()),
                                       Restriction::Theory);
  out.alpha = eta.head(n);
  out.beta.head(n - 1) = eta.tail(n - 1);
  out.gamma = gamma;
  if (restriction == Restriction::Theory) return out;
  if (restriction == Restriction::Unrestricted) {
    throw RestrictionMismatch("cannot map working coordinates to unrestricted");
  }
  return out.normalized(Restriction::Practical);
}

double link_predictor(const ParamVector& params, const EdgeCovariates& cov,
                      int i, int j) {
  double pi = params.nu + params.alpha(i) + params.beta(j);
  for (int k = 0; k < cov.dim(); ++k) pi += cov.layer(k)(i, j) * params.gamma(k);
  return pi;
}

double link_probability(const ParamVector& params, const EdgeCovariates& cov,
                        int i, int j) {
  const int n = params.size();
  if (i == j) throw SelfLoopRequested("no link probability for i == j");
  if (i < 0 || j < 0 || i >= n || j >= n) {
    throw ShapeMismatch("node index out of range");
  }
  if (cov.size() != n || cov.dim() != params.dim()) {
    throw ShapeMismatch("parameter and covariate shapes disagree");
  }
  return mu(link_predictor(params, cov, i, j));
}

namespace {

void check_shapes(const DirectedNetwork* net, const EdgeCovariates& cov,
                  const ParamVector& params) {
  if (params.beta.size() != params.alpha.size()) {
    throw ShapeMismatch("alpha and beta lengths differ");
  }
  if (params.size() != cov.size() || params.dim() != cov.dim()) {
    throw ShapeMismatch("parameter and covariate shapes disagree");
  }
  if (net != nullptr && net->size() != cov.size()) {
    throw ShapeMismatch("network and covariates have different node counts");
  }
}

}  // namespace

Matrix link_predictors(const ParamVector& params, const EdgeCovariates& cov) {
  check_shapes(nullptr, cov, params);
  Matrix pi = cov.offset(params.gamma);
  pi.colwise() += params.alpha;
  pi.rowwise() += params.beta.transpose();
  pi.array() += params.nu;
  pi.diagonal().setZero();
  return pi;
}

double log_likelihood(const DirectedNetwork& net, const EdgeCovariates& cov,
                      const ParamVector& params) {
  check_shapes(&net, cov, params);
  const Matrix pi = link_predictors(params, cov);
  const auto& a = net.adjacency();
  const int n = net.size();
  double ll = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      ll -= log1pexp(pi(i, j));
      if (a(i, j)) ll += pi(i, j);
    }
  }
  return ll;
}

}  // namespace p0
