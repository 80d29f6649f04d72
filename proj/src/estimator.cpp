#include "p0/estimator.hpp"

#include "p0/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace p0 {

namespace {

// Everything derived from the data that the solvers touch repeatedly.
struct Problem {
  Problem(const DirectedNetwork& network, const EdgeCovariates& covariates)
      : net(network), cov(covariates), n(network.size()), p(covariates.dim()) {
    if (cov.size() != n) {
      throw ShapeMismatch("network and covariates have different node counts");
    }
    adj = net.adjacency_real();
    out_deg.resize(n);
    in_deg.resize(n);
    for (int i = 0; i < n; ++i) {
      out_deg(i) = net.out_degrees()[i];
      in_deg(i) = net.in_degrees()[i];
    }
  }

  const DirectedNetwork& net;
  const EdgeCovariates& cov;
  int n;
  int p;
  Matrix adj;
  Vector out_deg;
  Vector in_deg;
};

struct LinkState {
  Matrix pi;
  Matrix prob;  // mu(pi)
  Matrix var;   // mu'(pi)
};

LinkState evaluate(const Vector& eta, const Matrix& offset) {
  const auto n = offset.rows();
  LinkState s;
  s.pi = offset;
  s.pi.colwise() += eta.head(n);
  s.pi.leftCols(n - 1).rowwise() += eta.tail(n - 1).transpose();
  s.prob = s.pi.unaryExpr([](double x) { return mu(x); });
  s.var = s.prob.cwiseProduct(s.pi.unaryExpr([](double x) { return mu(-x); }));
  s.pi.diagonal().setZero();
  s.prob.diagonal().setZero();
  s.var.diagonal().setZero();
  return s;
}

double log_likelihood(const Problem& pr, const LinkState& s) {
  double soft = 0.0;
  for (int j = 0; j < pr.n; ++j) {
    for (int i = 0; i < pr.n; ++i) {
      if (i != j) soft += log1pexp(s.pi(i, j));
    }
  }
  return pr.adj.cwiseProduct(s.pi).sum() - soft;
}

Vector degree_score(const Problem& pr, const LinkState& s) {
  const int n = pr.n;
  Vector f(2 * n - 1);
  f.head(n) = s.prob.rowwise().sum() - pr.out_deg;
  f.tail(n - 1) = s.prob.colwise().sum().head(n - 1).transpose() -
                  pr.in_deg.head(n - 1);
  return f;
}

Vector covariate_score(const Problem& pr, const LinkState& s) {
  Vector q(pr.p);
  const Matrix resid = s.prob - pr.adj;
  for (int k = 0; k < pr.p; ++k) q(k) = pr.cov.layer(k).cwiseProduct(resid).sum();
  return q;
}

FisherBlocks degree_blocks(const LinkState& s) {
  FisherBlocks b;
  b.u = s.var;
  b.row_sums = b.u.rowwise().sum();
  b.col_sums = b.u.colwise().sum().transpose();
  return b;
}

void add_covariate_blocks(const Problem& pr, FisherBlocks& b) {
  const int n = pr.n;
  b.v_eta_gamma.resize(2 * n - 1, pr.p);
  b.v_gamma_gamma.resize(pr.p, pr.p);
  for (int k = 0; k < pr.p; ++k) {
    const Matrix uz = b.u.cwiseProduct(pr.cov.layer(k));
    b.v_eta_gamma.col(k).head(n) = uz.rowwise().sum();
    b.v_eta_gamma.col(k).tail(n - 1) =
        uz.colwise().sum().head(n - 1).transpose();
    for (int l = 0; l <= k; ++l) {
      const double v = uz.cwiseProduct(pr.cov.layer(l)).sum();
      b.v_gamma_gamma(k, l) = v;
      b.v_gamma_gamma(l, k) = v;
    }
  }
}

FisherBlocks full_blocks(const Problem& pr, const LinkState& s) {
  FisherBlocks b = degree_blocks(s);
  add_covariate_blocks(pr, b);
  return b;
}

LinkState state_for(const Problem& pr, const ParamVector& params) {
  const Matrix offset = pr.cov.offset(params.gamma);
  return evaluate(working_eta(params), offset);
}

void check_params(const Problem& pr, const ParamVector& params) {
  if (params.size() != pr.n || params.beta.size() != pr.n ||
      params.dim() != pr.p) {
    throw ShapeMismatch("parameter shapes do not match the data");
  }
}

double inf_norm(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Inner Newton solve for fixed gamma.

struct InnerRun {
  Vector eta;
  int iterations = 0;
  double score_norm = 0.0;
  double loglik = 0.0;
  LinkState state;
  FisherBlocks blocks;  // degree part only
  std::optional<FisherSolver> solver;
};

bool ascent_accepted(double trial, double current) {
  return trial >= current - 1e-12 * (1.0 + std::abs(current));
}

InnerRun inner_newton(const Problem& pr, const Matrix& offset, Vector eta,
                      const SolverOptions& opt) {
  InnerRun run;
  run.state = evaluate(eta, offset);
  run.loglik = log_likelihood(pr, run.state);
  for (int it = 0;; ++it) {
    const Vector f = degree_score(pr, run.state);
    run.score_norm = inf_norm(f);
    run.blocks = degree_blocks(run.state);
    try {
      run.solver.emplace(run.blocks);
    } catch (const SingularInformation&) {
      throw NonExistence(true, "degree information became singular");
    }
    const Vector step = run.solver->solve(f);
    if (run.score_norm <= opt.tol_inner && inf_norm(step) <= opt.step_tol) {
      run.eta = std::move(eta);
      run.iterations = it;
      return run;
    }
    if (it >= opt.max_inner) {
      throw NonExistence(false, "inner Newton hit the iteration limit");
    }

    double t = 1.0;
    bool accepted = false;
    Vector trial;
    LinkState trial_state;
    double trial_ll = 0.0;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      trial = eta - t * step;
      trial_state = evaluate(trial, offset);
      trial_ll = log_likelihood(pr, trial_state);
      if (ascent_accepted(trial_ll, run.loglik)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (run.score_norm <= 1e3 * opt.tol_inner) {
        // Round-off floor reached; the iterate is as good as it gets.
        run.eta = std::move(eta);
        run.iterations = it;
        return run;
      }
      throw NonExistence(false, "inner line search failed");
    }
    eta = std::move(trial);
    run.state = std::move(trial_state);
    run.loglik = trial_ll;
    if (inf_norm(eta) > opt.divergence_bound) {
      throw NonExistence(true, "degree parameters diverged");
    }
  }
}

Matrix schur_information(const FisherBlocks& b, const FisherSolver& solver) {
  Matrix h = b.v_gamma_gamma - b.v_eta_gamma.transpose() * solver.solve(b.v_eta_gamma);
  return 0.5 * (h + h.transpose());
}

double matrix_inf_norm(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

void check_nondegenerate(const Problem& pr) {
  for (int i = 0; i < pr.n; ++i) {
    const int d = pr.net.out_degrees()[i];
    const int b = pr.net.in_degrees()[i];
    if (d == 0 || d == pr.n - 1 || b == 0 || b == pr.n - 1) {
      throw DegenerateNetwork("node " + std::to_string(i) + " has out-degree " +
                              std::to_string(d) + " and in-degree " +
                              std::to_string(b) +
                              "; its degree parameters are unbounded");
    }
  }
}

void check_identified(const Problem& pr) {
  if (pr.p == 0) return;
  Matrix m(pr.p, pr.p);
  for (int k = 0; k < pr.p; ++k) {
    for (int l = 0; l <= k; ++l) {
      m(k, l) = m(l, k) = pr.cov.layer(k).cwiseProduct(pr.cov.layer(l)).sum();
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues().maxCoeff();
  const double lo = es.eigenvalues().minCoeff();
  if (hi <= 0.0 || lo <= 1e-12 * hi) {
    throw GammaUnidentified("covariate second-moment matrix is singular");
  }
}

Vector initial_eta(const Problem& pr, const SolverOptions& opt) {
  if (!opt.eta0) return Vector::Zero(2 * pr.n - 1);
  if (opt.eta0->size() != 2 * pr.n - 1) {
    throw ShapeMismatch("eta0 must have length 2n-1");
  }
  return *opt.eta0;
}

Vector initial_gamma(const Problem& pr, const SolverOptions& opt) {
  if (!opt.gamma0) return Vector::Zero(pr.p);
  if (opt.gamma0->size() != pr.p) throw ShapeMismatch("gamma0 has wrong length");
  return *opt.gamma0;
}

FitResult finish(const Problem& pr, Restriction restriction, Vector eta,
                 Vector gamma, const LinkState& s, Existence existence) {
  FitResult r;
  r.existence = existence;
  r.converged = existence == Existence::Exists;
  r.score_norm_F = inf_norm(degree_score(pr, s));
  r.score_norm_Q = inf_norm(covariate_score(pr, s));
  r.log_likelihood = log_likelihood(pr, s);
  r.params_hat = from_working(eta, gamma, restriction);
  r.eta_hat = std::move(eta);
  return r;
}

// ---------------------------------------------------------------------------

FitResult fit_newton(const Problem& pr, Restriction restriction,
                     const SolverOptions& opt) {
  Vector gamma = initial_gamma(pr, opt);
  Vector eta = initial_eta(pr, opt);
  int inner_total = 0;
  std::vector<KantorovichStep> trace;

  auto run_at = [&](const Vector& g, const Vector& start) {
    InnerRun run = inner_newton(pr, pr.cov.offset(g), start, opt);
    inner_total += run.iterations;
    return run;
  };

  InnerRun cur;
  try {
    cur = run_at(gamma, eta);
  } catch (const NonExistence& e) {
    FitResult r = finish(pr, restriction, eta, gamma, evaluate(eta, pr.cov.offset(gamma)),
                         e.diverged() ? Existence::NonexistentDiverged
                                      : Existence::NonexistentMaxIter);
    r.inner_iterations = inner_total;
    return r;
  }

  auto give_up = [&](Existence why, int outer) {
    FitResult r = finish(pr, restriction, cur.eta, gamma, cur.state, why);
    r.inner_iterations = inner_total;
    r.outer_iterations = outer;
    r.kantorovich_trace = std::move(trace);
    return r;
  };

  for (int outer = 0;; ++outer) {
    if (pr.p == 0) {
      FitResult r = finish(pr, restriction, cur.eta, gamma, cur.state, Existence::Exists);
      r.inner_iterations = inner_total;
      return r;
    }
    add_covariate_blocks(pr, cur.blocks);
    const Vector qc = covariate_score(pr, cur.state);
    const Matrix h = schur_information(cur.blocks, *cur.solver);
    Eigen::LLT<Matrix> hfac(h);
    if (hfac.info() != Eigen::Success) {
      throw SingularInformation("profile information H is not positive definite");
    }
    const Vector step = hfac.solve(qc);

    if (opt.record_kantorovich) {
      KantorovichStep k;
      k.aleph = matrix_inf_norm(hfac.solve(Matrix::Identity(pr.p, pr.p)));
      k.delta = inf_norm(step);
      if (k.delta > 1e-14) {
        try {
          InnerRun probe = inner_newton(pr, pr.cov.offset(gamma - step), cur.eta, opt);
          add_covariate_blocks(pr, probe.blocks);
          const Matrix h2 = schur_information(probe.blocks, *probe.solver);
          k.lambda = matrix_inf_norm(h2 - h) / k.delta;
        } catch (const NonExistence&) {
          k.lambda = std::numeric_limits<double>::infinity();
        }
      }
      k.rho = 2.0 * k.aleph * k.lambda * k.delta;
      trace.push_back(k);
    }

    if (inf_norm(qc) <= opt.tol_outer && inf_norm(step) <= opt.step_tol) {
      FitResult r = finish(pr, restriction, cur.eta, gamma, cur.state, Existence::Exists);
      r.inner_iterations = inner_total;
      r.outer_iterations = outer;
      r.kantorovich_trace = std::move(trace);
      return r;
    }
    if (outer >= opt.max_outer) return give_up(Existence::NonexistentMaxIter, outer);

    // Backtracking on the profile log-likelihood.
    // A trial gamma at which the inner problem fails is treated like a
    // trial that lowers the likelihood: the step is halved.
    double t = 1.0;
    bool accepted = false;
    std::optional<bool> trial_diverged;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      const Vector trial = gamma - t * step;
      InnerRun next;
      try {
        next = run_at(trial, cur.eta);
      } catch (const NonExistence& e) {
        trial_diverged = e.diverged();
        continue;
      }
      if (ascent_accepted(next.loglik, cur.loglik)) {
        gamma = trial;
        cur = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (inf_norm(qc) <= 1e3 * opt.tol_outer) {
        FitResult r = finish(pr, restriction, cur.eta, gamma, cur.state, Existence::Exists);
        r.inner_iterations = inner_total;
        r.outer_iterations = outer;
        r.kantorovich_trace = std::move(trace);
        return r;
      }
      return give_up(trial_diverged.value_or(false) ? Existence::NonexistentDiverged
                                                    : Existence::NonexistentMaxIter,
                     outer);
    }
    if (inf_norm(gamma) > opt.divergence_bound) {
      return give_up(Existence::NonexistentDiverged, outer + 1);
    }
  }
}

// Fixed-point sweeps on the degree equations alternated with one damped GLM
// Newton step in gamma.
FitResult fit_alternating(const Problem& pr, Restriction restriction,
                          const SolverOptions& opt) {
  const int n = pr.n;
  Vector gamma = initial_gamma(pr, opt);
  Vector eta = initial_eta(pr, opt);
  const int budget = opt.max_inner * opt.max_outer;

  Matrix offset = pr.cov.offset(gamma);
  LinkState s = evaluate(eta, offset);
  for (int it = 0; it < budget; ++it) {
    const Vector f = degree_score(pr, s);
    const Vector q = covariate_score(pr, s);
    if (inf_norm(f) <= opt.tol_inner && inf_norm(q) <= opt.tol_outer) {
      FitResult r = finish(pr, restriction, eta, gamma, s, Existence::Exists);
      r.inner_iterations = it;
      r.outer_iterations = it;
      return r;
    }

    // alpha_i <- alpha_i + log(d_i / sum_k mu_ik), then beta likewise.
    Vector alpha = eta.head(n);
    Vector beta = Vector::Zero(n);
    beta.head(n - 1) = eta.tail(n - 1);
    alpha.array() += (pr.out_deg.array() / s.prob.rowwise().sum().array()).log();
    Vector tmp(2 * n - 1);
    tmp.head(n) = alpha;
    tmp.tail(n - 1) = beta.head(n - 1);
    s = evaluate(tmp, offset);
    beta.array() += (pr.in_deg.array() / s.prob.colwise().sum().transpose().array()).log();
    alpha.array() += beta(n - 1);
    beta.array() -= beta(n - 1);
    eta.head(n) = alpha;
    eta.tail(n - 1) = beta.head(n - 1);
    s = evaluate(eta, offset);

    if (pr.p > 0) {
      FisherBlocks b = full_blocks(pr, s);
      Eigen::LLT<Matrix> fac(b.v_gamma_gamma);
      if (fac.info() != Eigen::Success) {
        throw SingularInformation("covariate information is singular");
      }
      const Vector step = fac.solve(covariate_score(pr, s));
      const double ll = log_likelihood(pr, s);
      double t = 1.0;
      for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
        const Vector trial = gamma - t * step;
        const Matrix trial_offset = pr.cov.offset(trial);
        LinkState ts = evaluate(eta, trial_offset);
        if (ascent_accepted(log_likelihood(pr, ts), ll)) {
          gamma = trial;
          offset = trial_offset;
          s = std::move(ts);
          break;
        }
      }
    }
    if (inf_norm(eta) > opt.divergence_bound ||
        inf_norm(gamma) > opt.divergence_bound) {
      FitResult r = finish(pr, restriction, eta, gamma, s, Existence::NonexistentDiverged);
      r.inner_iterations = it + 1;
      r.outer_iterations = it + 1;
      return r;
    }
  }
  FitResult r = finish(pr, restriction, eta, gamma, s, Existence::NonexistentMaxIter);
  r.inner_iterations = budget;
  r.outer_iterations = budget;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

Vector score_F(const DirectedNetwork& net, const EdgeCovariates& cov,
               const ParamVector& params) {
  const Problem pr(net, cov);
  check_params(pr, params);
  return degree_score(pr, state_for(pr, params));
}

Vector score_Q(const DirectedNetwork& net, const EdgeCovariates& cov,
               const ParamVector& params) {
  const Problem pr(net, cov);
  check_params(pr, params);
  return covariate_score(pr, state_for(pr, params));
}

Matrix FisherBlocks::dense_v() const {
  const int n = size();
  Matrix v = Matrix::Zero(2 * n - 1, 2 * n - 1);
  v.topLeftCorner(n, n).diagonal() = row_sums;
  v.bottomRightCorner(n - 1, n - 1).diagonal() = col_sums.head(n - 1);
  v.topRightCorner(n, n - 1) = u.leftCols(n - 1);
  v.bottomLeftCorner(n - 1, n) = u.leftCols(n - 1).transpose();
  return v;
}

Vector FisherBlocks::apply_v(const Vector& x) const {
  const int n = size();
  if (x.size() != 2 * n - 1) throw ShapeMismatch("apply_v: wrong length");
  Vector y(2 * n - 1);
  y.head(n) = row_sums.cwiseProduct(x.head(n)) + u.leftCols(n - 1) * x.tail(n - 1);
  y.tail(n - 1) = col_sums.head(n - 1).cwiseProduct(x.tail(n - 1)) +
                  u.leftCols(n - 1).transpose() * x.head(n);
  return y;
}

FisherBlocks fisher_blocks(const DirectedNetwork& net,
                           const EdgeCovariates& cov,
                           const ParamVector& params) {
  const Problem pr(net, cov);
  check_params(pr, params);
  return full_blocks(pr, state_for(pr, params));
}

FisherSolver::FisherSolver(const FisherBlocks& blocks) : n_(blocks.size()) {
  const int n = n_;
  if ((blocks.row_sums.array() <= 0.0).any() ||
      (blocks.col_sums.head(n - 1).array() <= 0.0).any()) {
    throw SingularInformation("a row or column of u sums to zero");
  }
  inv_row_ = blocks.row_sums.cwiseInverse();
  u_in_ = blocks.u.leftCols(n - 1);
  // Schur complement on the in-block: diag(u_.j) - U' diag(1/u_i.) U.
  const Matrix scaled = inv_row_.cwiseSqrt().asDiagonal() * u_in_;
  Matrix schur = Matrix::Zero(n - 1, n - 1);
  schur.diagonal() = blocks.col_sums.head(n - 1);
  schur.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose(), -1.0);
  schur_.compute(schur);
  if (schur_.info() != Eigen::Success) {
    throw SingularInformation("degree information V is not positive definite");
  }
}

Matrix FisherSolver::solve(const Matrix& rhs) const {
  const int n = n_;
  if (rhs.rows() != 2 * n - 1) throw ShapeMismatch("FisherSolver: wrong rows");
  const auto ra = rhs.topRows(n);
  const auto rb = rhs.bottomRows(n - 1);
  const Matrix scaled_ra = inv_row_.asDiagonal() * ra;
  Matrix out(rhs.rows(), rhs.cols());
  out.bottomRows(n - 1) = schur_.solve(rb - u_in_.transpose() * scaled_ra);
  out.topRows(n) = inv_row_.asDiagonal() * (ra - u_in_ * out.bottomRows(n - 1));
  return out;
}

Vector FisherSolver::solve(const Vector& rhs) const {
  return solve(Matrix(rhs)).col(0);
}

Matrix profile_information(const FisherBlocks& blocks) {
  const FisherSolver solver(blocks);
  return schur_information(blocks, solver);
}

InnerSolution solve_eta_given_gamma(const DirectedNetwork& net,
                                    const EdgeCovariates& cov,
                                    const Vector& gamma, const Vector& eta0,
                                    const SolverOptions& options) {
  const Problem pr(net, cov);
  if (gamma.size() != pr.p) throw ShapeMismatch("gamma has wrong length");
  if (eta0.size() != 2 * pr.n - 1) throw ShapeMismatch("eta0 must have length 2n-1");
  if (!gamma.allFinite()) throw InvalidArgument("gamma must be finite");
  InnerRun run = inner_newton(pr, cov.offset(gamma), eta0, options);
  return {std::move(run.eta), run.iterations, run.score_norm};
}

Vector profile_score_Qc(const DirectedNetwork& net, const EdgeCovariates& cov,
                        const Vector& gamma, const SolverOptions& options) {
  const Problem pr(net, cov);
  if (gamma.size() != pr.p) throw ShapeMismatch("gamma has wrong length");
  InnerRun run = inner_newton(pr, cov.offset(gamma), initial_eta(pr, options), options);
  return covariate_score(pr, run.state);
}

Matrix profile_jacobian_Qc(const DirectedNetwork& net,
                           const EdgeCovariates& cov, const Vector& gamma,
                           const SolverOptions& options) {
  const Problem pr(net, cov);
  if (gamma.size() != pr.p) throw ShapeMismatch("gamma has wrong length");
  InnerRun run = inner_newton(pr, cov.offset(gamma), initial_eta(pr, options), options);
  add_covariate_blocks(pr, run.blocks);
  const Matrix h = schur_information(run.blocks, *run.solver);
  if (pr.p > 0) {
    Eigen::LLT<Matrix> fac(h);
    const double scale = std::max(1.0, run.blocks.v_gamma_gamma.diagonal().maxCoeff());
    if (fac.info() != Eigen::Success ||
        fac.matrixLLT().diagonal().minCoeff() <= 1e-6 * std::sqrt(scale)) {
      throw SingularInformation("profile information H is numerically singular");
    }
  }
  return h;
}

const char* to_string(Existence e) noexcept {
  switch (e) {
    case Existence::Exists: return "exists";
    case Existence::NonexistentDiverged: return "nonexistent_diverged";
    case Existence::NonexistentMaxIter: return "nonexistent_maxiter";
  }
  return "?";
}

FitResult fit(const DirectedNetwork& net, const EdgeCovariates& cov,
              Restriction restriction, const SolverOptions& options) {
  if (restriction == Restriction::Unrestricted) {
    throw RestrictionMismatch("fit needs an identifying restriction");
  }
  const Problem pr(net, cov);
  check_nondegenerate(pr);
  check_identified(pr);
  return options.algorithm == Algorithm::Newton
             ? fit_newton(pr, restriction, options)
             : fit_alternating(pr, restriction, options);
}

}  // namespace p0
