#include "p0/simulation.hpp"

#include "p0/errors.hpp"
#include "p0/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace p0 {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

Rng Rng::stream(std::uint64_t base_seed, std::uint64_t index) {
  return Rng(base_seed + index * 0x9E3779B97F4A7C15ULL);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::beta(double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw InvalidArgument("beta parameters must be positive");
  for (;;) {
    const double x = std::pow(uniform(), 1.0 / a);
    const double y = std::pow(uniform(), 1.0 / b);
    const double s = x + y;
    if (s <= 1.0 && s > 0.0) return x / s;
  }
}

NodeAttributes generate_attributes(int nodes, Rng& rng) {
  if (nodes < 2) throw InvalidArgument("need at least 2 nodes");
  NodeAttributes attr{Vector(nodes), Vector(nodes)};
  for (int i = 0; i < nodes; ++i) {
    attr.x1(i) = rng.beta(2.0, 2.0);
    attr.x2(i) = rng.bernoulli(0.3) ? 1.0 : -1.0;
  }
  return attr;
}

EdgeCovariates covariates_from_attributes(const NodeAttributes& attr) {
  const int nodes = static_cast<int>(attr.x1.size());
  if (attr.x2.size() != nodes) throw ShapeMismatch("attribute vectors differ in length");
  std::vector<Matrix> layers(2, Matrix::Zero(nodes, nodes));
  for (int j = 0; j < nodes; ++j) {
    for (int i = 0; i < nodes; ++i) {
      if (i == j) continue;
      layers[0](i, j) = std::abs(attr.x1(i) - attr.x1(j));
      layers[1](i, j) = attr.x2(i) * attr.x2(j);
    }
  }
  return EdgeCovariates(nodes, std::move(layers));
}

GeneratedCovariates generate_covariates(int nodes, Rng& rng) {
  NodeAttributes attr = generate_attributes(nodes, rng);
  EdgeCovariates z = covariates_from_attributes(attr);
  return {std::move(attr), std::move(z)};
}

GeneratedCovariates generate_covariates(int nodes, std::uint64_t seed) {
  Rng rng(seed);
  return generate_covariates(nodes, rng);
}

DirectedNetwork generate_network(const ParamVector& params,
                                 const EdgeCovariates& cov, Rng& rng) {
  const Matrix pi = link_predictors(params, cov);
  const int n = params.size();
  ByteMatrix a = ByteMatrix::Zero(n, n);
  // Row-major draw order is part of the reproducibility contract.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && rng.bernoulli(mu(pi(i, j)))) a(i, j) = 1;
    }
  }
  return DirectedNetwork(std::move(a));
}

DirectedNetwork generate_network(const ParamVector& params,
                                 const EdgeCovariates& cov,
                                 std::uint64_t seed) {
  Rng rng(seed);
  return generate_network(params, cov, rng);
}

ParamVector design_truth(const SimDesign& d) {
  if (d.nodes < 3) throw InvalidArgument("design needs at least 3 nodes");
  const int m = d.nodes - 1;
  const double logm = std::log(static_cast<double>(m));
  ParamVector t = ParamVector::zeros(d.nodes, static_cast<int>(d.gamma_star.size()),
                                     Restriction::Unrestricted);
  for (int i = 0; i < d.nodes; ++i) t.alpha(i) = i * d.c * logm / m;
  t.beta = t.alpha;
  if (d.beta_star) {
    if (d.beta_star->size() != d.nodes) throw ShapeMismatch("beta_star has wrong length");
    t.beta = *d.beta_star;
  }
  t.nu = d.nu_star.value_or(-logm / 4.0);
  t.gamma = d.gamma_star;
  return t;
}

namespace {

std::string status_of(Existence e) { return to_string(e); }

void record_inference(const SimDesign& d, const ParamVector& truth,
                      const ParamVector& truth_p, const ParamVector& truth_t,
                      const DirectedNetwork& net, const EdgeCovariates& cov,
                      const FitResult& fr, ReplicationRecord& rec);

}  // namespace

ReplicationRecord run_replication(const SimDesign& d, int index) {
  ReplicationRecord rec;
  rec.index = index;
  Rng rng = Rng::stream(d.base_seed, static_cast<std::uint64_t>(index));
  const GeneratedCovariates gc = generate_covariates(d.nodes, rng);
  const ParamVector truth = design_truth(d);
  if (truth.dim() != gc.z.dim()) {
    throw ShapeMismatch("gamma_star must have dimension 2 for this design");
  }
  const DirectedNetwork net = generate_network(truth, gc.z, rng);
  const ParamVector truth_p = truth.normalized(Restriction::Practical);
  const ParamVector truth_t = truth.normalized(Restriction::Theory);

  SolverOptions opt;
  if (d.warm_start) {
    opt.eta0 = working_eta(truth_t);
    opt.gamma0 = truth.gamma;
  }

  FitResult fr;
  try {
    fr = fit(net, gc.z, Restriction::Practical, opt);
    rec.status = status_of(fr.existence);
  } catch (const DegenerateNetwork&) {
    rec.status = "degenerate";
  } catch (const Error&) {
    rec.status = "numerical_failure";
  }
  rec.exists = rec.status == "exists";
  rec.outer_iterations = fr.outer_iterations;
  rec.inner_iterations = fr.inner_iterations;

  if (d.compare_warm_start && rec.status != "degenerate") {
    SolverOptions other;
    if (!d.warm_start) {
      other.eta0 = working_eta(truth_t);
      other.gamma0 = truth.gamma;
    }
    bool other_exists = false;
    try {
      other_exists = fit(net, gc.z, Restriction::Practical, other).converged;
    } catch (const Error&) {
    }
    rec.warm_start_agrees = other_exists == rec.exists;
  } else if (d.compare_warm_start) {
    rec.warm_start_agrees = true;
  }

  if (!rec.exists) return rec;
  try {
    record_inference(d, truth, truth_p, truth_t, net, gc.z, fr, rec);
  } catch (const Error&) {
    rec = ReplicationRecord{};
    rec.index = index;
    rec.status = "numerical_failure";
  }
  return rec;
}

namespace {

void record_inference(const SimDesign& d, const ParamVector& truth,
                      const ParamVector& truth_p, const ParamVector& truth_t,
                      const DirectedNetwork& net, const EdgeCovariates& cov,
                      const FitResult& fr, ReplicationRecord& rec) {
  const double z = normal_critical_value(d.ci_level);
  const FisherBlocks blocks = fisher_blocks(net, cov, fr.params_hat);
  for (const auto& [i, j] : d.pairs) {
    PairRecord pr;
    if (i == 0 && j == 0) {
      const double se = nu_standard_error(blocks, Restriction::Practical);
      pr.covered = std::abs(fr.params_hat.nu - truth_p.nu) <= z * se;
      pr.length = 2.0 * z * se;
    } else {
      const ContrastTest t =
          contrast_test(fr, blocks, ContrastKind::OutOut, i, j,
                        truth.alpha(i) - truth.alpha(j));
      pr.covered = std::abs(t.statistic) <= z;
      pr.length = 2.0 * z * t.se;
    }
    rec.pairs.push_back(pr);
  }

  const GammaInference gi = gamma_information_and_bias(fr, blocks, cov);
  rec.gamma_hat = fr.params_hat.gamma;
  rec.gamma_bc = bias_corrected_gamma(fr, gi.information, gi.bias);
  const Vector se = gamma_standard_errors(gi.information, d.nodes);
  for (int k = 0; k < truth.dim(); ++k) {
    const double len = 2.0 * z * se(k);
    rec.gamma_uncorrected.push_back(
        {std::abs(rec.gamma_hat(k) - truth.gamma(k)) <= z * se(k), len});
    rec.gamma_corrected.push_back(
        {std::abs(rec.gamma_bc(k) - truth.gamma(k)) <= z * se(k), len});
  }

  rec.eta_error = (working_eta(fr.params_hat) - working_eta(truth_t)).cwiseAbs().maxCoeff();
  rec.gamma_error = truth.dim() == 0 ? 0.0
                                     : (fr.params_hat.gamma - truth.gamma).cwiseAbs().maxCoeff();

  if (d.recovery_threshold) {
    const double thr = *d.recovery_threshold;
    const std::vector<int> got = recover_signals(fr, thr);
    std::vector<int> want;
    for (int i = 0; i < d.nodes; ++i) {
      if (truth_p.beta(i) > thr) want.push_back(i);
    }
    rec.recovered = got == want;
  }
}

}  // namespace

SimReport summarize(const SimDesign& d, std::vector<ReplicationRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });
  SimReport r;
  r.design = d;
  const int total = static_cast<int>(records.size());
  const int p = static_cast<int>(d.gamma_star.size());
  std::vector<int> pair_hits(d.pairs.size(), 0);
  std::vector<double> pair_len(d.pairs.size(), 0.0);
  std::vector<int> gc_hits(p, 0), gu_hits(p, 0);
  std::vector<double> g_len(p, 0.0);
  Vector gamma_sum = Vector::Zero(p);
  int recovered = 0, recovery_seen = 0, agree = 0, agree_seen = 0;

  for (const auto& rec : records) {
    if (rec.warm_start_agrees) {
      ++agree_seen;
      agree += *rec.warm_start_agrees ? 1 : 0;
    }
    if (!rec.exists) continue;
    ++r.existing;
    for (std::size_t k = 0; k < rec.pairs.size(); ++k) {
      pair_hits[k] += rec.pairs[k].covered;
      pair_len[k] += rec.pairs[k].length;
    }
    for (int k = 0; k < p; ++k) {
      gc_hits[k] += rec.gamma_corrected[k].covered;
      gu_hits[k] += rec.gamma_uncorrected[k].covered;
      g_len[k] += rec.gamma_corrected[k].length;
    }
    gamma_sum += rec.gamma_hat;
    if (rec.recovered) {
      ++recovery_seen;
      recovered += *rec.recovered ? 1 : 0;
    }
  }
  r.nonexistence = total == 0 ? 0.0 : static_cast<double>(total - r.existing) / total;
  const double denom = std::max(r.existing, 1);
  for (std::size_t k = 0; k < d.pairs.size(); ++k) {
    CellSummary c;
    const auto [i, j] = d.pairs[k];
    c.target = (i == 0 && j == 0) ? "nu" : "alpha";
    c.i = i;
    c.j = j;
    c.coverage = pair_hits[k] / denom;
    c.mean_length = pair_len[k] / denom;
    r.cells.push_back(c);
  }
  for (int k = 0; k < p; ++k) {
    CellSummary c;
    c.target = "gamma";
    c.i = k + 1;
    c.coverage = gc_hits[k] / denom;
    c.coverage_uncorrected = gu_hits[k] / denom;
    c.mean_length = g_len[k] / denom;
    r.cells.push_back(c);
  }
  if (recovery_seen > 0) r.recovery_rate = static_cast<double>(recovered) / recovery_seen;
  if (agree_seen > 0) r.warm_start_agreement = static_cast<double>(agree) / agree_seen;
  if (r.existing > 0 && p > 0) {
    r.mean_gamma_hat_error = (gamma_sum / r.existing - d.gamma_star).cwiseAbs().maxCoeff();
  }
  r.records = std::move(records);
  return r;
}

SimReport run_design(const SimDesign& d) {
  if (d.replications < 0) throw InvalidArgument("replications must be non-negative");
  std::vector<ReplicationRecord> records(d.replications);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < d.replications; k = next++) {
      records[k] = run_replication(d, k);
    }
  };
  unsigned threads = d.threads > 0 ? static_cast<unsigned>(d.threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, std::max(1, d.replications));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return summarize(d, std::move(records));
}

double median(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median of an empty sample");
  const auto mid = v.begin() + v.size() / 2;
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

namespace {

double loglog_slope(const std::vector<RateRow>& rows, double RateRow::*field) {
  const auto k = static_cast<double>(rows.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    const double x = std::log(static_cast<double>(r.nodes - 1));
    const double y = std::log(r.*field);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

}  // namespace

RateTable rate_sweep(const std::vector<SimDesign>& designs) {
  if (designs.size() < 2) throw InvalidArgument("rate sweep needs at least two sizes");
  RateTable t;
  for (const auto& d : designs) {
    const SimReport rep = run_design(d);
    std::vector<double> eta_err, gamma_err;
    for (const auto& rec : rep.records) {
      if (!rec.exists) continue;
      eta_err.push_back(rec.eta_error);
      gamma_err.push_back(rec.gamma_error);
    }
    RateRow row;
    row.nodes = d.nodes;
    row.existing = rep.existing;
    if (!eta_err.empty()) {
      row.median_eta_error = median(eta_err);
      row.median_gamma_error = median(gamma_err);
    }
    t.rows.push_back(row);
  }
  t.eta_slope = loglog_slope(t.rows, &RateRow::median_eta_error);
  t.gamma_slope = loglog_slope(t.rows, &RateRow::median_gamma_error);
  return t;
}

}  // namespace p0
