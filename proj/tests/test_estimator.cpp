#include "p0/errors.hpp"
#include "p0/estimator.hpp"
#include "p0/model.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace p0;

namespace {

struct Instance {
  ByteMatrix a;
  std::vector<Matrix> layers;
  DirectedNetwork net;
  EdgeCovariates cov;
};

bool degenerate(const DirectedNetwork& net) {
  const int n = net.size();
  for (int i = 0; i < n; ++i) {
    const int d = net.out_degrees()[i], b = net.in_degrees()[i];
    if (d == 0 || b == 0 || d == n - 1 || b == n - 1) return true;
  }
  return false;
}

// A non-degenerate random network drawn with probability 1/2 per dyad.
Instance instance(std::mt19937_64& g, int n, int p) {
  while (true) {
    ByteMatrix a = oracle::random_adjacency(g, n);
    auto layers = oracle::random_layers(g, n, p);
    DirectedNetwork net(a);
    if (degenerate(net)) continue;
    EdgeCovariates cov(n, layers);
    return {a, layers, net, cov};
  }
}

double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("score_F on complete and empty digraphs") {
  const auto cov = EdgeCovariates::none(3);
  const auto t = ParamVector::zeros(3, 0, Restriction::Theory);
  ByteMatrix full = ByteMatrix::Ones(3, 3);
  full.diagonal().setZero();
  const Vector f_full = score_F(DirectedNetwork(full), cov, t);
  REQUIRE(f_full.size() == 5);
  CHECK((f_full.array() + 1.0).abs().maxCoeff() < 1e-15);
  const Vector f_empty = score_F(DirectedNetwork(ByteMatrix::Zero(3, 3)), cov, t);
  CHECK((f_empty.array() - 1.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("score_Q") {
  std::mt19937_64 g(1);
  const auto a = oracle::random_adjacency(g, 4);
  const EdgeCovariates zero(4, {Matrix::Zero(4, 4)});
  auto t = ParamVector::zeros(4, 1, Restriction::Theory);
  t.alpha << 0.3, -0.2, 0.1, 0.5;
  CHECK(score_Q(DirectedNetwork(a), zero, t)(0) == 0.0);

  ByteMatrix a2(2, 2);
  a2 << 0, 1, 0, 0;
  Matrix z = Matrix::Ones(2, 2);
  const auto t2 = ParamVector::zeros(2, 1, Restriction::Practical);
  CHECK(std::abs(score_Q(DirectedNetwork(a2), EdgeCovariates(2, {z}), t2)(0)) < 1e-15);
}

TEST_CASE("(F, Q) is the negative gradient of the log-likelihood") {
  std::mt19937_64 g(21);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 4 + rep % 3;
    const int p = 1 + rep % 2;
    const auto restriction = rep % 2 ? Restriction::Practical : Restriction::Theory;
    const Instance in = instance(g, n, p);
    const Vector x = oracle::random_vector(g, 2 * n - 1 + p, -1, 1);
    const auto params_of = [&](const Vector& v) {
      return from_working(v.head(2 * n - 1), v.tail(p), restriction);
    };
    const auto ell = [&](const Vector& v) { return log_likelihood(in.net, in.cov, params_of(v)); };
    const Vector grad = oracle::fd_gradient(ell, x);
    Vector analytic(2 * n - 1 + p);
    analytic << score_F(in.net, in.cov, params_of(x)), score_Q(in.net, in.cov, params_of(x));
    CHECK(rel_err(-analytic, grad) <= 1e-5);
  }
}

TEST_CASE("fisher_blocks at zero") {
  const auto t = ParamVector::zeros(3, 0, Restriction::Theory);
  const FisherBlocks b = fisher_blocks(DirectedNetwork(ByteMatrix::Zero(3, 3)),
                                       EdgeCovariates::none(3), t);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(b.u(i, j) == (i == j ? 0.0 : 0.25));
  const Matrix v = b.dense_v();
  CHECK((v.diagonal().array() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("V, V_eta_gamma and V_gamma_gamma are the Jacobians of (F, Q)") {
  std::mt19937_64 g(33);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 4 + rep % 3;
    const int p = 1 + rep % 2;
    const Instance in = instance(g, n, p);
    const Vector x = oracle::random_vector(g, 2 * n - 1 + p, -1, 1);
    const auto params_of = [&](const Vector& v) {
      return from_working(v.head(2 * n - 1), v.tail(p), Restriction::Theory);
    };
    const auto scores = [&](const Vector& v) {
      Vector s(2 * n - 1 + p);
      s << score_F(in.net, in.cov, params_of(v)), score_Q(in.net, in.cov, params_of(v));
      return s;
    };
    const Matrix jac = oracle::fd_jacobian(scores, x);
    const FisherBlocks b = fisher_blocks(in.net, in.cov, params_of(x));
    const int m = 2 * n - 1;
    CHECK(rel_err(b.dense_v(), jac.topLeftCorner(m, m)) <= 1e-4);
    CHECK(rel_err(b.v_eta_gamma, jac.topRightCorner(m, p)) <= 1e-4);
    CHECK(rel_err(b.v_gamma_gamma, jac.bottomRightCorner(p, p)) <= 1e-4);

    // Symmetric, diagonally dominant with non-negative slack.
    const Matrix v = b.dense_v();
    CHECK((v - v.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < m; ++i) {
      const double off = v.row(i).sum() - v(i, i);
      CHECK(v(i, i) - off >= -1e-15);
    }
    // u is the Bernoulli variance.
    const Matrix pi = link_predictors(params_of(x), in.cov);
    const double m01 = mu(pi(0, 1));
    CHECK(b.u(0, 1) == doctest::Approx(m01 * (1 - m01)).epsilon(1e-12));
  }
}

TEST_CASE("FisherSolver agrees with a dense solve") {
  std::mt19937_64 g(44);
  const Instance in = instance(g, 7, 2);
  ParamVector t = ParamVector::zeros(7, 2, Restriction::Theory);
  t.alpha = oracle::random_vector(g, 7, -1, 1);
  t.beta.head(6) = oracle::random_vector(g, 6, -1, 1);
  const FisherBlocks b = fisher_blocks(in.net, in.cov, t);
  const FisherSolver solver(b);
  const Vector rhs = oracle::random_vector(g, 13, -1, 1);
  const Vector dense = b.dense_v().fullPivLu().solve(rhs);
  CHECK((solver.solve(rhs) - dense).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((b.apply_v(rhs) - b.dense_v() * rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("solve_eta_given_gamma") {
  SUBCASE("regular digraph gives exchangeable estimates") {
    // 3-cycle: every node has d = b = 1.
    ByteMatrix a = ByteMatrix::Zero(3, 3);
    a(0, 1) = a(1, 2) = a(2, 0) = 1;
    const auto sol = solve_eta_given_gamma(DirectedNetwork(a), EdgeCovariates::none(3),
                                           Vector(), Vector::Zero(5));
    // Theory coordinates (alpha_1..3, beta_1..2) with beta_3 = 0.
    CHECK(sol.eta(0) == doctest::Approx(sol.eta(1)));
    CHECK(sol.eta(1) == doctest::Approx(sol.eta(2)));
    CHECK(std::abs(sol.eta(3)) < 1e-9);
    CHECK(std::abs(sol.eta(4)) < 1e-9);
  }
  SUBCASE("score vanishes on success") {
    std::mt19937_64 g(5);
    const Instance in = instance(g, 4, 1);
    const Vector gamma = Vector::Constant(1, 0.3);
    const auto sol = solve_eta_given_gamma(in.net, in.cov, gamma, Vector::Zero(7));
    const Vector f = score_F(in.net, in.cov, from_working(sol.eta, gamma, Restriction::Theory));
    CHECK(f.cwiseAbs().maxCoeff() <= 1e-8);
  }
  SUBCASE("matches a dense maximizer at gamma = 0") {
    std::mt19937_64 g(6);
    const Instance in = instance(g, 6, 1);
    const auto sol = solve_eta_given_gamma(in.net, in.cov, Vector::Zero(1), Vector::Zero(11));
    const oracle::DenseDesign d(in.a, {});
    const auto ref = oracle::bfgs_maximize(d);
    REQUIRE(ref.converged);
    CHECK((sol.eta - ref.theta).cwiseAbs().maxCoeff() <= 1e-5);
  }
  SUBCASE("a star-shaped degenerate network diverges") {
    ByteMatrix a = ByteMatrix::Zero(4, 4);
    for (int j = 1; j < 4; ++j) a(0, j) = 1;
    a(1, 2) = a(2, 3) = a(3, 1) = 1;
    CHECK_THROWS_AS(solve_eta_given_gamma(DirectedNetwork(a), EdgeCovariates::none(4), Vector(),
                                          Vector::Zero(7)),
                    NonExistence);
  }
}

TEST_CASE("profile score and its Jacobian") {
  std::mt19937_64 g(77);
  const int n = 6, p = 2;
  const Instance in = instance(g, n, p);
  const Vector gamma = oracle::random_vector(g, p, -0.5, 0.5);

  SUBCASE("composition of the inner solve and score_Q") {
    const auto sol = solve_eta_given_gamma(in.net, in.cov, gamma, Vector::Zero(2 * n - 1));
    const Vector q = score_Q(in.net, in.cov, from_working(sol.eta, gamma, Restriction::Theory));
    CHECK((profile_score_Qc(in.net, in.cov, gamma) - q).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("zero covariates give a zero profile score") {
    const EdgeCovariates zero(n, {Matrix::Zero(n, n)});
    CHECK(profile_score_Qc(in.net, zero, Vector::Constant(1, 0.8)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("Jacobian matches finite differences and a dense Schur complement") {
    const Matrix h = profile_jacobian_Qc(in.net, in.cov, gamma);
    const Matrix fd = oracle::fd_jacobian(
        [&](const Vector& x) { return profile_score_Qc(in.net, in.cov, x); }, gamma, 1e-5);
    CHECK(rel_err(h, fd) <= 1e-4);
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(h).eigenvalues().minCoeff() > 0.0);

    const auto sol = solve_eta_given_gamma(in.net, in.cov, gamma, Vector::Zero(2 * n - 1));
    Vector theta(2 * n - 1 + p);
    theta << sol.eta, gamma;
    const oracle::DenseDesign d(in.a, in.layers);
    const Matrix schur = oracle::dense_schur(oracle::dense_information(d, theta), 2 * n - 1);
    CHECK(rel_err(h, schur) <= 1e-8);
  }
  SUBCASE("a constant covariate is absorbed by the degree parameters") {
    const EdgeCovariates constant(n, {Matrix::Constant(n, n, 1.5)});
    const auto sol = solve_eta_given_gamma(in.net, constant, Vector::Constant(1, 0.2),
                                           Vector::Zero(2 * n - 1));
    Vector theta(2 * n);
    theta << sol.eta, 0.2;
    Matrix z = Matrix::Constant(n, n, 1.5);
    z.diagonal().setZero();
    const oracle::DenseDesign d(in.a, {z});
    const Matrix schur = oracle::dense_schur(oracle::dense_information(d, theta), 2 * n - 1);
    CHECK(std::abs(schur(0, 0)) < 1e-10);
    CHECK_THROWS_AS(profile_jacobian_Qc(in.net, constant, Vector::Constant(1, 0.2)),
                    SingularInformation);
  }
}

TEST_CASE("fit matches a dense BFGS maximizer") {
  std::mt19937_64 g(2024);
  int compared = 0;
  for (int rep = 0; rep < 12; ++rep) {
    const int n = 4 + rep % 3;
    const int p = 1 + rep % 2;
    const Instance in = instance(g, n, p);
    FitResult fr;
    try {
      fr = fit(in.net, in.cov, Restriction::Theory);
    } catch (const GammaUnidentified&) {
      continue;
    }
    const auto ref = oracle::bfgs_maximize(oracle::DenseDesign(in.a, in.layers));
    if (!fr.converged || !ref.converged) continue;
    ++compared;
    Vector mine(2 * n - 1 + p);
    mine << fr.eta_hat, fr.params_hat.gamma;
    CHECK((mine - ref.theta).cwiseAbs().maxCoeff() <= 1e-5);
    CHECK(fr.score_norm_F <= 1e-10);
    CHECK(fr.score_norm_Q <= 1e-8);
    CHECK(profile_score_Qc(in.net, in.cov, fr.params_hat.gamma).cwiseAbs().maxCoeff() <= 1e-8);
  }
  CHECK(compared >= 6);
}

TEST_CASE("fit invariances") {
  std::mt19937_64 g(99);
  const int n = 8, p = 2;
  const Instance in = instance(g, n, p);
  const FitResult a = fit(in.net, in.cov, Restriction::Practical);
  REQUIRE(a.converged);

  SUBCASE("restrictions give the same fitted probabilities") {
    const FitResult b = fit(in.net, in.cov, Restriction::Theory);
    REQUIRE(b.converged);
    const Matrix pa = link_predictors(a.params_hat, in.cov);
    const Matrix pb = link_predictors(b.params_hat, in.cov);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(mu(pa(i, j)) - mu(pb(i, j))));
    CHECK(worst < 1e-8);
    CHECK((a.params_hat.gamma - b.params_hat.gamma).cwiseAbs().maxCoeff() < 1e-8);
  }
  SUBCASE("relabeling nodes permutes the degree parameters") {
    // Keep the reference node last so the restriction is unchanged.
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end() - 1, g);
    ByteMatrix ap(n, n);
    std::vector<Matrix> lp(p, Matrix(n, n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        ap(i, j) = in.a(perm[i], perm[j]);
        for (int k = 0; k < p; ++k) lp[k](i, j) = in.layers[k](perm[i], perm[j]);
      }
    const FitResult b = fit(DirectedNetwork(ap), EdgeCovariates(n, lp), Restriction::Practical);
    REQUIRE(b.converged);
    CHECK((a.params_hat.gamma - b.params_hat.gamma).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(a.params_hat.nu == doctest::Approx(b.params_hat.nu).epsilon(1e-8));
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(b.params_hat.alpha(i) - a.params_hat.alpha(perm[i])) < 1e-8);
      CHECK(std::abs(b.params_hat.beta(i) - a.params_hat.beta(perm[i])) < 1e-8);
    }
  }
  SUBCASE("the alternating algorithm reaches the same MLE") {
    SolverOptions opt;
    opt.algorithm = Algorithm::Alternating;
    const FitResult b = fit(in.net, in.cov, Restriction::Practical, opt);
    REQUIRE(b.converged);
    CHECK((a.eta_hat - b.eta_hat).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((a.params_hat.gamma - b.params_hat.gamma).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("deterministic, and Kantorovich diagnostics on request") {
    SolverOptions opt;
    opt.record_kantorovich = true;
    const FitResult b = fit(in.net, in.cov, Restriction::Practical, opt);
    const FitResult c = fit(in.net, in.cov, Restriction::Practical, opt);
    CHECK(b.eta_hat == c.eta_hat);
    CHECK(b.existence == c.existence);
    REQUIRE(!b.kantorovich_trace.empty());
    CHECK(b.kantorovich_trace.size() == static_cast<std::size_t>(b.outer_iterations) + 1);
    for (const auto& k : b.kantorovich_trace) {
      CHECK(k.aleph > 0.0);
      CHECK(k.rho == doctest::Approx(2 * k.aleph * k.lambda * k.delta));
    }
    // Newton converges quadratically, so the last step is tiny.
    CHECK(b.kantorovich_trace.back().delta < 1e-6);
  }
}

TEST_CASE("fit preconditions") {
  std::mt19937_64 g(4);
  const Instance in = instance(g, 5, 1);
  CHECK_THROWS_AS(fit(in.net, in.cov, Restriction::Unrestricted), RestrictionMismatch);

  const EdgeCovariates zero(5, {Matrix::Zero(5, 5)});
  CHECK_THROWS_AS(fit(in.net, zero, Restriction::Practical), GammaUnidentified);

  ByteMatrix a = in.a;
  a.row(2).setZero();
  CHECK_THROWS_AS(fit(DirectedNetwork(a), in.cov, Restriction::Practical), DegenerateNetwork);

  const FitResult none = fit(in.net, EdgeCovariates::none(5), Restriction::Practical);
  CHECK(none.converged);
  CHECK(none.params_hat.dim() == 0);
}

TEST_CASE("a separable covariate is reported as non-existence") {
  // Every edge has z = 1 and every non-edge z = 0: gamma runs to infinity.
  std::mt19937_64 g(8);
  const int n = 6;
  ByteMatrix a;
  while (true) {
    a = oracle::random_adjacency(g, n);
    if (!degenerate(DirectedNetwork(a))) break;
  }
  Matrix z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) z(i, j) = a(i, j);
  const FitResult fr = fit(DirectedNetwork(a), EdgeCovariates(n, {z}), Restriction::Practical);
  CHECK_FALSE(fr.converged);
  CHECK(fr.existence != Existence::Exists);
}
