#include "p0/report.hpp"

#include "p0/errors.hpp"

#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>

namespace p0 {

using nlohmann::json;

namespace {

json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

json mat(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
  return a;
}

Vector to_vector(const json& a, const std::string& source, const char* key) {
  if (!a.is_array()) throw ParseError(source, 1, 1, std::string("'") + key + "' must be an array");
  Vector v(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].is_number()) {
      throw ParseError(source, 1, 1, std::string("'") + key + "' must hold numbers");
    }
    v(static_cast<Eigen::Index>(k)) = a[k].get<double>();
  }
  return v;
}

json wald(double estimate, double se, double crit) {
  const double z = estimate / se;
  return {{"estimate", estimate},
          {"se", se},
          {"z", z},
          {"p_value", two_sided_p_value(z)},
          {"ci", {estimate - crit * se, estimate + crit * se}}};
}

// Fixed-width text table.
std::string table(const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) {
      width[c] = std::max(width[c], r[c].size());
    }
  }
  std::ostringstream out;
  const auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      out << (c == 0 ? "" : "  ") << std::setw(static_cast<int>(width[c])) << r[c];
    }
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string num(const json& v, int digits = 4) {
  if (v.is_null()) return "-";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number()) return format_sig(v.get<double>(), digits);
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string render_fit(const json& r) {
  std::ostringstream out;
  out << "p0 fit (" << r.at("restriction").get<std::string>() << " restriction, reference node "
      << r.at("reference_node").get<std::string>() << ")\n";
  out << "nodes " << r.at("nodes") << ", edges " << r.at("edges") << ", log-likelihood "
      << num(r.at("log_likelihood"), 8) << ", outer iterations " << r.at("outer_iterations")
      << "\n\n";
  std::vector<std::vector<std::string>> rows;
  if (r.contains("nu")) {
    const auto& n = r["nu"];
    rows.push_back({"nu", num(n["estimate"]), "-", num(n["se"]), num(n["z"]), num(n["p_value"])});
  }
  for (const auto& g : r.at("covariates")) {
    rows.push_back({g["name"].get<std::string>(), num(g["estimate"]), num(g["bias_corrected"]),
                    num(g["se"]), num(g["z"]), num(g["p_value"])});
  }
  out << table({"parameter", "estimate", "corrected", "se", "z", "p"}, rows) << '\n';
  rows.clear();
  for (const auto& n : r.at("node_table")) {
    rows.push_back({n["node"].get<std::string>(), num(n["d"]), num(n["alpha"], 3),
                    num(n["alpha_se"], 2), num(n["b"]), num(n["beta"], 3), num(n["beta_se"], 2)});
  }
  out << table({"node", "d", "alpha", "se", "b", "beta", "se"}, rows);
  return out.str();
}

std::string render_sim(const json& r) {
  std::ostringstream out;
  const auto& d = r.at("design");
  out << "simulation: nodes " << d.at("nodes") << ", c " << num(d.at("c")) << ", "
      << r.at("replications") << " replications, " << r.at("existing") << " with an MLE"
      << " (non-existence " << num(r.at("nonexistence")) << ")\n\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : r.at("cells")) {
    std::string cell = c["target"].get<std::string>();
    if (cell == "alpha") {
      cell += "(" + c["i"].dump() + "," + c["j"].dump() + ")";
    } else if (cell == "gamma") {
      cell += "_" + c["i"].dump();
    }
    rows.push_back({cell, num(c["coverage"]),
                    c.contains("coverage_uncorrected") ? num(c["coverage_uncorrected"]) : "-",
                    num(c["mean_length"])});
  }
  out << table({"cell", "coverage", "uncorrected", "length"}, rows);
  if (r.contains("recovery_rate")) out << "\nexact recovery rate " << num(r["recovery_rate"]) << '\n';
  return out.str();
}

}  // namespace

std::string format_sig(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

FitAnalysis analyze(const Dataset& ds, const AttributeSpec& spec, Restriction restriction,
                    double ci_level, const SolverOptions& options) {
  const EdgeCovariates cov = build_edge_covariates(ds, spec);
  const DirectedNetwork net = ds.network();
  FitAnalysis a;
  a.ids = ds.ids;
  a.out_degrees = net.out_degrees();
  a.in_degrees = net.in_degrees();
  for (const auto& r : spec.rules) a.covariate_names.push_back(r.attribute);
  a.fit = fit(net, cov, restriction, options);
  if (!a.fit.converged) {
    throw NonExistence(a.fit.existence == Existence::NonexistentDiverged,
                       std::string("the maximum likelihood estimate does not exist (") +
                           to_string(a.fit.existence) + ")");
  }
  a.inference = infer(a.fit, net, cov, ci_level);
  return a;
}

json to_json(const FitAnalysis& a) {
  const auto& p = a.fit.params_hat;
  const auto& inf = a.inference;
  const double crit = normal_critical_value(inf.ci_level);
  json r;
  r["kind"] = "fit";
  r["restriction"] = to_string(p.restriction);
  r["ci_level"] = inf.ci_level;
  r["critical_value"] = crit;
  r["nodes"] = a.ids.size();
  long long edges = 0;
  for (int d : a.out_degrees) edges += d;
  r["edges"] = edges;
  r["reference_node"] = a.ids.back();
  r["existence"] = to_string(a.fit.existence);
  r["outer_iterations"] = a.fit.outer_iterations;
  r["inner_iterations"] = a.fit.inner_iterations;
  r["log_likelihood"] = a.fit.log_likelihood;
  r["score_norm_F"] = a.fit.score_norm_F;
  r["score_norm_Q"] = a.fit.score_norm_Q;
  if (p.restriction == Restriction::Practical) r["nu"] = wald(p.nu, inf.se_nu, crit);

  json covs = json::array();
  for (int k = 0; k < p.dim(); ++k) {
    json g = wald(inf.gamma_bc(k), inf.gamma_se(k), crit);
    g["name"] = a.covariate_names.at(k);
    g["bias_corrected"] = inf.gamma_bc(k);
    g["estimate"] = inf.gamma_hat(k);
    g["z_uncorrected"] = inf.gamma_hat(k) / inf.gamma_se(k);
    covs.push_back(std::move(g));
  }
  r["covariates"] = std::move(covs);
  r["information"] = mat(inf.I_hat);
  r["bias"] = vec(inf.B_hat);

  json nodes = json::array();
  for (std::size_t i = 0; i < a.ids.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    nodes.push_back({{"node", a.ids[i]},
                     {"d", a.out_degrees[i]},
                     {"alpha", p.alpha(k)},
                     {"alpha_se", inf.se.alpha(k)},
                     {"b", a.in_degrees[i]},
                     {"beta", p.beta(k)},
                     {"beta_se", inf.se.beta(k)}});
  }
  r["node_table"] = std::move(nodes);
  return r;
}

std::string fit_csv(const FitAnalysis& a) {
  const auto& p = a.fit.params_hat;
  const auto& inf = a.inference;
  std::ostringstream out;
  out << "node,d,alpha,alpha_se,b,beta,beta_se\n";
  for (std::size_t i = 0; i < a.ids.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << a.ids[i] << ',' << a.out_degrees[i] << ',' << format_sig(p.alpha(k)) << ','
        << format_sig(inf.se.alpha(k)) << ',' << a.in_degrees[i] << ','
        << format_sig(p.beta(k)) << ',' << format_sig(inf.se.beta(k)) << '\n';
  }
  out << "\nparameter,estimate,bias_corrected,se,z,p_value\n";
  if (p.restriction == Restriction::Practical) {
    const double z = p.nu / inf.se_nu;
    out << "nu," << format_sig(p.nu) << ",," << format_sig(inf.se_nu) << ',' << format_sig(z)
        << ',' << format_sig(two_sided_p_value(z)) << '\n';
  }
  for (int k = 0; k < p.dim(); ++k) {
    const double z = inf.gamma_bc(k) / inf.gamma_se(k);
    out << a.covariate_names.at(k) << ',' << format_sig(inf.gamma_hat(k)) << ','
        << format_sig(inf.gamma_bc(k)) << ',' << format_sig(inf.gamma_se(k)) << ','
        << format_sig(z) << ',' << format_sig(two_sided_p_value(z)) << '\n';
  }
  return out.str();
}

json recovery_json(const FitAnalysis& a, double delta) {
  json ids = json::array();
  for (int i : recover_signals(a.fit, delta)) ids.push_back(a.ids.at(i));
  json r;
  r["kind"] = "recovery";
  r["delta"] = delta;
  r["restriction"] = to_string(a.fit.params_hat.restriction);
  r["reference_node"] = a.ids.back();
  r["recovered"] = std::move(ids);
  return r;
}

json to_json(const SimDesign& d) {
  json pairs = json::array();
  for (const auto& [i, j] : d.pairs) pairs.push_back({i, j});
  json j;
  j["nodes"] = d.nodes;
  j["c"] = d.c;
  j["gamma_star"] = vec(d.gamma_star);
  j["nu_star"] = d.nu_star ? json(*d.nu_star) : json(nullptr);
  j["beta_star"] = d.beta_star ? vec(*d.beta_star) : json(nullptr);
  j["replications"] = d.replications;
  j["base_seed"] = d.base_seed;
  j["ci_level"] = d.ci_level;
  j["pairs"] = std::move(pairs);
  j["warm_start"] = d.warm_start;
  j["compare_warm_start"] = d.compare_warm_start;
  j["recovery_threshold"] = d.recovery_threshold ? json(*d.recovery_threshold) : json(nullptr);
  j["threads"] = d.threads;
  return j;
}

SimDesign sim_design_from_json(const json& j, const std::string& source) {
  if (!j.is_object()) throw ParseError(source, 1, 1, "design must be a JSON object");
  static const std::set<std::string> known = {
      "nodes", "c", "gamma_star", "nu_star", "beta_star", "replications", "base_seed",
      "ci_level", "pairs", "warm_start", "compare_warm_start", "recovery_threshold", "threads"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ParseError(source, 1, 1, "unknown design field '" + key + "'");
  }
  SimDesign d;
  try {
    if (j.contains("nodes")) d.nodes = j["nodes"].get<int>();
    if (j.contains("c")) d.c = j["c"].get<double>();
    if (j.contains("gamma_star")) d.gamma_star = to_vector(j["gamma_star"], source, "gamma_star");
    if (j.contains("nu_star") && !j["nu_star"].is_null()) d.nu_star = j["nu_star"].get<double>();
    if (j.contains("beta_star") && !j["beta_star"].is_null()) {
      d.beta_star = to_vector(j["beta_star"], source, "beta_star");
    }
    if (j.contains("replications")) d.replications = j["replications"].get<int>();
    if (j.contains("base_seed")) d.base_seed = j["base_seed"].get<std::uint64_t>();
    if (j.contains("ci_level")) d.ci_level = j["ci_level"].get<double>();
    if (j.contains("pairs")) {
      d.pairs.clear();
      for (const auto& pr : j["pairs"]) {
        if (!pr.is_array() || pr.size() != 2) {
          throw ParseError(source, 1, 1, "each pair must be a two-element array");
        }
        d.pairs.emplace_back(pr[0].get<int>(), pr[1].get<int>());
      }
    }
    if (j.contains("warm_start")) d.warm_start = j["warm_start"].get<bool>();
    if (j.contains("compare_warm_start")) d.compare_warm_start = j["compare_warm_start"].get<bool>();
    if (j.contains("recovery_threshold") && !j["recovery_threshold"].is_null()) {
      d.recovery_threshold = j["recovery_threshold"].get<double>();
    }
    if (j.contains("threads")) d.threads = j["threads"].get<int>();
  } catch (const json::exception& e) {
    throw ParseError(source, 1, 1, std::string("bad design field: ") + e.what());
  }
  if (d.nodes < 3) throw InvalidArgument("design needs at least 3 nodes");
  if (d.replications < 0) throw InvalidArgument("replications must be non-negative");
  if (!(d.ci_level > 0.0 && d.ci_level < 1.0)) throw InvalidArgument("ci_level must lie in (0, 1)");
  for (const auto& [a, b] : d.pairs) {
    if (a < 0 || b < 0 || a >= d.nodes || b >= d.nodes) {
      throw InvalidArgument("monitored pair outside 0..nodes-1");
    }
  }
  if (d.beta_star && d.beta_star->size() != d.nodes) {
    throw InvalidArgument("beta_star must have one entry per node");
  }
  return d;
}

json to_json(const SimReport& r, bool include_records) {
  json j;
  j["kind"] = "simulation";
  j["design"] = to_json(r.design);
  j["replications"] = r.records.size();
  j["existing"] = r.existing;
  j["nonexistence"] = r.nonexistence;
  j["mean_gamma_hat_error"] = r.mean_gamma_hat_error;
  if (r.recovery_rate) j["recovery_rate"] = *r.recovery_rate;
  if (r.warm_start_agreement) j["warm_start_agreement"] = *r.warm_start_agreement;
  json cells = json::array();
  for (const auto& c : r.cells) {
    json cell = {{"target", c.target},
                 {"i", c.i},
                 {"j", c.j},
                 {"coverage", c.coverage},
                 {"mean_length", c.mean_length}};
    if (c.coverage_uncorrected) cell["coverage_uncorrected"] = *c.coverage_uncorrected;
    cells.push_back(std::move(cell));
  }
  j["cells"] = std::move(cells);
  if (!include_records) return j;

  const auto hits = [](const std::vector<PairRecord>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back({{"covered", p.covered}, {"length", p.length}});
    return a;
  };
  json records = json::array();
  for (const auto& rec : r.records) {
    json o = {{"index", rec.index},
              {"status", rec.status},
              {"exists", rec.exists},
              {"outer_iterations", rec.outer_iterations},
              {"inner_iterations", rec.inner_iterations}};
    if (rec.exists) {
      o["pairs"] = hits(rec.pairs);
      o["gamma_corrected"] = hits(rec.gamma_corrected);
      o["gamma_uncorrected"] = hits(rec.gamma_uncorrected);
      o["gamma_hat"] = vec(rec.gamma_hat);
      o["gamma_bc"] = vec(rec.gamma_bc);
      o["eta_error"] = rec.eta_error;
      o["gamma_error"] = rec.gamma_error;
    }
    if (rec.recovered) o["recovered"] = *rec.recovered;
    if (rec.warm_start_agrees) o["warm_start_agrees"] = *rec.warm_start_agrees;
    records.push_back(std::move(o));
  }
  j["records"] = std::move(records);
  return j;
}

std::string sim_csv(const SimReport& r) {
  std::ostringstream out;
  out << "nodes,c,target,i,j,coverage,coverage_uncorrected,mean_length,nonexistence,"
         "replications,existing\n";
  for (const auto& c : r.cells) {
    out << r.design.nodes << ',' << format_sig(r.design.c) << ',' << c.target << ',' << c.i
        << ',' << c.j << ',' << format_sig(c.coverage) << ','
        << (c.coverage_uncorrected ? format_sig(*c.coverage_uncorrected) : "") << ','
        << format_sig(c.mean_length) << ',' << format_sig(r.nonexistence) << ','
        << r.records.size() << ',' << r.existing << '\n';
  }
  return out.str();
}

std::string render_text(const json& report) {
  const std::string kind = report.value("kind", "");
  if (kind == "fit") return render_fit(report);
  if (kind == "simulation") return render_sim(report);
  if (kind == "recovery") {
    std::ostringstream out;
    out << "nodes with beta_hat >= " << num(report.at("delta")) << ":";
    for (const auto& id : report.at("recovered")) out << ' ' << id.get<std::string>();
    out << '\n';
    return out.str();
  }
  throw InvalidArgument("unknown report kind '" + kind + "'");
}

}  // namespace p0
