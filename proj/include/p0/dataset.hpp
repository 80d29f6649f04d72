#pragma once

// Dataset ingestion for real-network analyses: node ids, a typed attribute
// table and a directed edge list, plus covariate construction from node
// attributes.
//
// File formats
//   edges:      one edge per line, "source target", separated by a comma, a
//               tab or spaces. Blank lines and lines starting with '#' are
//               ignored.
//   attributes: comma-separated (or tab/space-separated) table. The header
//               is "id,<kind>:<name>,..." with kind "cat" (categorical) or
//               "num" (numeric); each following row describes one node.
//
// Node order is the order of the attribute file. Without an attribute file
// it is the order of first appearance in the edge file.

#include "p0/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace p0 {

enum class AttributeKind { Categorical, Numeric };

struct Attribute {
  std::string name;
  AttributeKind kind = AttributeKind::Categorical;
  std::vector<std::string> labels;  // categorical values, one per node
  std::vector<double> values;       // numeric values, one per node

  bool operator==(const Attribute&) const = default;
};

struct Dataset {
  std::vector<std::string> ids;
  std::vector<Attribute> attributes;
  std::vector<std::pair<int, int>> edges;  // (sender, receiver) node indices

  int size() const noexcept { return static_cast<int>(ids.size()); }
  const Attribute& attribute(const std::string& name) const;
  DirectedNetwork network() const;
  std::vector<int> out_degrees() const;
  std::vector<int> in_degrees() const;

  bool operator==(const Dataset&) const = default;
};

/// Parsers over streams; `source` names the input in ParseError messages.
std::vector<std::pair<std::string, std::string>> parse_edge_list(
    std::istream& in, const std::string& source);
Dataset parse_attribute_table(std::istream& in, const std::string& source);

/// Reads the edge list and, if given, the attribute table, and checks that
/// every edge refers to a known node, is not a self-loop and is not repeated.
Dataset load_dataset(const std::filesystem::path& edge_file,
                     const std::optional<std::filesystem::path>& attribute_file);
Dataset make_dataset(Dataset nodes,
                     const std::vector<std::pair<std::string, std::string>>& edges,
                     const std::string& source);

/// Writes files that load_dataset reads back to an identical Dataset.
void write_dataset(const Dataset& ds, const std::filesystem::path& edge_file,
                   const std::filesystem::path& attribute_file);
void write_edge_list(const Dataset& ds, std::ostream& out);
void write_attribute_table(const Dataset& ds, std::ostream& out);

/// Square 0/1 adjacency matrix, whitespace separated, one row per line. Node
/// ids are "1".."n". Diagonal entries must be zero.
Dataset load_adjacency_matrix(const std::filesystem::path& file);

/// The Lazega law-firm files: ELfriend.dat (71 x 71 friendship adjacency)
/// and ELattr.dat (id, status, gender, office, seniority, age, practice,
/// law school). Seniority and age are numeric, the rest categorical.
Dataset load_lazega(const std::filesystem::path& directory);

/// Removes nodes with zero out- or in-degree, repeatedly, until every
/// remaining node has both. Throws EmptyAfterPruning if no node survives.
Dataset prune_zero_degree(const Dataset& ds);

enum class RuleKind { MatchIndicator, AbsDiff };

struct AttributeRule {
  std::string attribute;
  RuleKind rule = RuleKind::MatchIndicator;
};

struct AttributeSpec {
  std::vector<AttributeRule> rules;
  bool logistic_transform = false;
};

/// JSON: {"rules": [{"attribute": "status", "rule": "match"}, ...],
///        "logistic_transform": false}; rule is "match" or "abs-diff".
AttributeSpec parse_attribute_spec(const std::string& json_text,
                                   const std::string& source);
AttributeSpec load_attribute_spec(const std::filesystem::path& file);
/// Match on every categorical attribute, absolute difference on every
/// numeric one, in table order.
AttributeSpec default_attribute_spec(const Dataset& ds);

/// Z_ij,k = 1{X_ik = X_jk} (match) or |X_ik - X_jk| (abs-diff), one layer per
/// rule. Throws RuleKindMismatch if a rule does not fit the attribute kind.
EdgeCovariates build_edge_covariates(const Dataset& ds, const AttributeSpec& spec);

}  // namespace p0
