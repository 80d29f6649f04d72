// p0cov: fit the covariate-p0 model to a directed network, run simulation
// designs, recover large in-parameters and render stored reports.
//
// Exit codes: 0 success, 2 input/parse error, 3 the MLE does not exist,
// 4 numerical failure, 1 anything else. Errors are also written to stderr as
// {"error": {"kind": ..., "message": ...}, "exit_code": ...}.

#include "p0/dataset.hpp"
#include "p0/errors.hpp"
#include "p0/report.hpp"
#include "p0/simulation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using nlohmann::json;

struct DataOptions {
  std::string edges;
  std::string attrs;
  std::string lazega;
  std::string spec;
  std::string restriction = "practical";
  double ci_level = 0.95;
  bool no_prune = false;
};

struct OutputOptions {
  std::string out;
  std::string format = "json";
};

int exit_code_for(const std::string& kind) {
  if (kind == "ParseError" || kind == "ReferentialIntegrityError" || kind == "SelfLoopError" ||
      kind == "DuplicateEdgeError" || kind == "RuleKindMismatch" || kind == "InvalidArgument" ||
      kind == "RestrictionMismatch" || kind == "ShapeMismatch") {
    return 2;
  }
  if (kind == "NonExistence" || kind == "DegenerateNetwork" || kind == "EmptyAfterPruning") {
    return 3;
  }
  if (kind == "SingularInformation" || kind == "DegenerateVariance" ||
      kind == "GammaUnidentified") {
    return 4;
  }
  return 1;
}

int report_error(const std::string& kind, const std::string& message, int code) {
  json e = {{"error", {{"kind", kind}, {"message", message}}}, {"exit_code", code}};
  std::cerr << e.dump() << '\n';
  return code;
}

void emit(const OutputOptions& o, const std::string& text) {
  if (o.out.empty() || o.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw p0::InvalidArgument("cannot write '" + o.out + "'");
  f << text;
}

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--edges", d.edges, "edge list file");
  cmd->add_option("--attrs", d.attrs, "attribute table with cat:/num: header");
  cmd->add_option("--lazega", d.lazega, "directory with ELfriend.dat and ELattr.dat");
  cmd->add_option("--spec", d.spec, "covariate spec (JSON); default: match categorical, abs-diff numeric");
  cmd->add_option("--restriction", d.restriction, "practical or theory")
      ->check(CLI::IsMember({"practical", "theory"}));
  cmd->add_option("--ci-level", d.ci_level, "confidence level")->check(CLI::Range(0.0, 1.0));
  cmd->add_flag("--no-prune", d.no_prune, "keep nodes with zero in- or out-degree");
}

void add_output_options(CLI::App* cmd, OutputOptions& o) {
  cmd->add_option("--out", o.out, "output file (default stdout)");
  cmd->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

p0::FitAnalysis run_fit(const DataOptions& d) {
  p0::Dataset ds;
  if (!d.lazega.empty()) {
    ds = p0::load_lazega(d.lazega);
  } else if (!d.edges.empty()) {
    std::optional<std::filesystem::path> attrs;
    if (!d.attrs.empty()) attrs = d.attrs;
    ds = p0::load_dataset(d.edges, attrs);
  } else {
    throw p0::InvalidArgument("either --edges or --lazega is required");
  }
  if (!d.no_prune) ds = p0::prune_zero_degree(ds);
  const p0::AttributeSpec spec =
      d.spec.empty() ? p0::default_attribute_spec(ds) : p0::load_attribute_spec(d.spec);
  return p0::analyze(ds, spec, p0::restriction_from_string(d.restriction), d.ci_level);
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw p0::ParseError(path, 0, 0, "cannot open file");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw p0::ParseError(path, 0, e.byte, "invalid JSON");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse covariate-p0 model for directed networks"};
  app.require_subcommand(1);

  DataOptions fit_data;
  OutputOptions fit_out;
  auto* fit_cmd = app.add_subcommand("fit", "fit a dataset and report estimates");
  add_data_options(fit_cmd, fit_data);
  add_output_options(fit_cmd, fit_out);

  std::string config;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  bool with_records = true;
  OutputOptions sim_out;
  auto* sim_cmd = app.add_subcommand("simulate", "run a simulation design");
  sim_cmd->add_option("--config", config, "design JSON")->required();
  sim_cmd->add_option("--reps", reps, "override the replication count");
  sim_cmd->add_option("--seed", seed, "override the base seed");
  sim_cmd->add_flag("!--no-records", with_records, "omit per-replication records from JSON");
  add_output_options(sim_cmd, sim_out);

  DataOptions rec_data;
  OutputOptions rec_out;
  double delta = 0.0;
  auto* rec_cmd = app.add_subcommand("recover", "nodes whose fitted in-parameter exceeds delta");
  add_data_options(rec_cmd, rec_data);
  add_output_options(rec_cmd, rec_out);
  rec_cmd->add_option("--delta", delta, "threshold")->required();

  std::string report_in;
  OutputOptions report_out;
  auto* rep_cmd = app.add_subcommand("report", "render a stored JSON report as text");
  rep_cmd->add_option("--in", report_in, "JSON report")->required();
  rep_cmd->add_option("--out", report_out.out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("UsageError", e.what(), 2);
  }

  try {
    if (*fit_cmd) {
      const auto a = run_fit(fit_data);
      emit(fit_out, fit_out.format == "csv" ? p0::fit_csv(a) : p0::to_json(a).dump(2) + "\n");
    } else if (*sim_cmd) {
      p0::SimDesign d = p0::sim_design_from_json(read_json_file(config), config);
      if (reps) d.replications = *reps;
      if (seed) d.base_seed = *seed;
      const p0::SimReport r = p0::run_design(d);
      emit(sim_out, sim_out.format == "csv" ? p0::sim_csv(r)
                                            : p0::to_json(r, with_records).dump(2) + "\n");
    } else if (*rec_cmd) {
      const auto a = run_fit(rec_data);
      const json r = p0::recovery_json(a, delta);
      if (rec_out.format == "csv") {
        std::string text = "node\n";
        for (const auto& id : r["recovered"]) text += id.get<std::string>() + "\n";
        emit(rec_out, text);
      } else {
        emit(rec_out, r.dump(2) + "\n");
      }
    } else if (*rep_cmd) {
      emit(report_out, p0::render_text(read_json_file(report_in)));
    }
  } catch (const p0::Error& e) {
    return report_error(e.kind(), e.what(), exit_code_for(e.kind()));
  } catch (const std::exception& e) {
    return report_error("InternalError", e.what(), 1);
  }
  return 0;
}
