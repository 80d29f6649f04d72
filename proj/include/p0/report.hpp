#pragma once

// Report emission: fitted-model and simulation reports as JSON (full
// precision) and CSV (6 significant digits), a plain-text renderer for stored
// JSON reports, and the JSON form of SimDesign used by `p0cov simulate`.
//
// Fit CSV: a node table "node,d,alpha,alpha_se,b,beta,beta_se", one blank
// line, then "parameter,estimate,bias_corrected,se,z,p_value" with rows for
// nu (practical restriction only) and each covariate.
// Simulation CSV: one row per monitored cell,
// "nodes,c,target,i,j,coverage,coverage_uncorrected,mean_length,nonexistence,replications,existing".

#include "p0/dataset.hpp"
#include "p0/estimator.hpp"
#include "p0/inference.hpp"
#include "p0/simulation.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace p0 {

struct FitAnalysis {
  std::vector<std::string> ids;
  std::vector<int> out_degrees;
  std::vector<int> in_degrees;
  std::vector<std::string> covariate_names;
  FitResult fit;
  InferenceReport inference;
};

/// Fits the model to a dataset and computes inference. The reference node of
/// the restriction is the last node of `ds`. Throws NonExistence when the
/// fit does not converge.
FitAnalysis analyze(const Dataset& ds, const AttributeSpec& spec,
                    Restriction restriction, double ci_level,
                    const SolverOptions& options = {});

nlohmann::json to_json(const FitAnalysis& a);
std::string fit_csv(const FitAnalysis& a);

/// Recovered node ids {i : beta_hat_i >= delta}.
nlohmann::json recovery_json(const FitAnalysis& a, double delta);

nlohmann::json to_json(const SimDesign& d);
/// Strict: unknown keys are rejected with ParseError.
SimDesign sim_design_from_json(const nlohmann::json& j, const std::string& source);

nlohmann::json to_json(const SimReport& r, bool include_records = true);
std::string sim_csv(const SimReport& r);

/// Human-readable rendering of a report produced by one of the to_json
/// functions above (dispatches on its "kind" field).
std::string render_text(const nlohmann::json& report);

/// printf("%.6g")-style formatting used in CSV output.
std::string format_sig(double v, int digits = 6);

}  // namespace p0
