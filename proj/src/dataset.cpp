#include "p0/dataset.hpp"

#include "p0/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace p0 {

namespace {

struct Token {
  std::string text;
  std::size_t column = 1;  // 1-based
};

// Commas take precedence over whitespace so that "a, b" and "a b" both work.
std::vector<Token> split_line(const std::string& line) {
  std::vector<Token> out;
  const bool commas = line.find(',') != std::string::npos;
  std::size_t pos = 0;
  const auto is_space = [](char c) { return c == ' ' || c == '\t'; };
  if (commas) {
    while (true) {
      const std::size_t end = std::min(line.find(',', pos), line.size());
      std::size_t b = pos;
      std::size_t e = end;
      while (b < e && is_space(line[b])) ++b;
      while (e > b && is_space(line[e - 1])) --e;
      out.push_back({line.substr(b, e - b), b + 1});
      if (end >= line.size()) break;
      pos = end + 1;
    }
    return out;
  }
  while (pos < line.size()) {
    while (pos < line.size() && is_space(line[pos])) ++pos;
    if (pos >= line.size()) break;
    std::size_t e = pos;
    while (e < line.size() && !is_space(line[e])) ++e;
    out.push_back({line.substr(pos, e - pos), pos + 1});
    pos = e;
  }
  return out;
}

// Reads the next meaningful line; false at end of input.
bool next_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

double parse_number(const Token& t, const std::string& source, std::size_t line) {
  double v = 0.0;
  const char* b = t.text.data();
  const char* e = b + t.text.size();
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || !std::isfinite(v)) {
    throw ParseError(source, line, t.column, "expected a finite number, got '" + t.text + "'");
  }
  return v;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void check_writable(const std::string& s, const char* what) {
  if (s.empty() || s.front() == '#' ||
      s.find_first_of(", \t\r\n") != std::string::npos) {
    throw InvalidArgument(std::string(what) + " '" + s +
                          "' cannot be written: empty, or contains a delimiter");
  }
}

std::ifstream open_input(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError(file.string(), 0, 0, "cannot open file");
  return in;
}

}  // namespace

const Attribute& Dataset::attribute(const std::string& name) const {
  for (const auto& a : attributes) {
    if (a.name == name) return a;
  }
  throw InvalidArgument("no attribute named '" + name + "'");
}

DirectedNetwork Dataset::network() const {
  return DirectedNetwork::from_edges(size(), edges);
}

std::vector<int> Dataset::out_degrees() const {
  std::vector<int> d(ids.size(), 0);
  for (const auto& [i, j] : edges) ++d[i];
  return d;
}

std::vector<int> Dataset::in_degrees() const {
  std::vector<int> b(ids.size(), 0);
  for (const auto& [i, j] : edges) ++b[j];
  return b;
}

std::vector<std::pair<std::string, std::string>> parse_edge_list(
    std::istream& in, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line, line_no)) {
    const auto tokens = split_line(line);
    if (tokens.size() != 2) {
      const std::size_t col = tokens.size() > 2 ? tokens[2].column : line.size() + 1;
      throw ParseError(source, line_no, col, "expected two node ids per line");
    }
    for (const auto& t : tokens) {
      if (t.text.empty()) throw ParseError(source, line_no, t.column, "empty node id");
    }
    edges.emplace_back(tokens[0].text, tokens[1].text);
  }
  return edges;
}

Dataset parse_attribute_table(std::istream& in, const std::string& source) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  if (!next_line(in, line, line_no)) {
    throw ParseError(source, line_no + 1, 1, "missing header row");
  }
  const auto header = split_line(line);
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string& h = header[c].text;
    Attribute a;
    if (h.rfind("cat:", 0) == 0) {
      a.kind = AttributeKind::Categorical;
    } else if (h.rfind("num:", 0) == 0) {
      a.kind = AttributeKind::Numeric;
    } else {
      throw ParseError(source, line_no, header[c].column,
                       "column header must start with 'cat:' or 'num:'");
    }
    a.name = h.substr(4);
    if (a.name.empty()) throw ParseError(source, line_no, header[c].column, "empty attribute name");
    for (const auto& prev : ds.attributes) {
      if (prev.name == a.name) {
        throw ParseError(source, line_no, header[c].column, "duplicate attribute '" + a.name + "'");
      }
    }
    ds.attributes.push_back(std::move(a));
  }

  std::set<std::string> seen;
  while (next_line(in, line, line_no)) {
    const auto row = split_line(line);
    if (row.size() != header.size()) {
      const std::size_t col = row.size() > header.size() ? row[header.size()].column
                                                         : line.size() + 1;
      throw ParseError(source, line_no, col,
                       "expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(row.size()));
    }
    if (row[0].text.empty()) throw ParseError(source, line_no, row[0].column, "empty node id");
    if (!seen.insert(row[0].text).second) {
      throw ParseError(source, line_no, row[0].column, "duplicate node id '" + row[0].text + "'");
    }
    ds.ids.push_back(row[0].text);
    for (std::size_t c = 1; c < row.size(); ++c) {
      Attribute& a = ds.attributes[c - 1];
      if (a.kind == AttributeKind::Numeric) {
        a.values.push_back(parse_number(row[c], source, line_no));
      } else {
        if (row[c].text.empty()) throw ParseError(source, line_no, row[c].column, "empty value");
        a.labels.push_back(row[c].text);
      }
    }
  }
  return ds;
}

Dataset make_dataset(Dataset nodes,
                     const std::vector<std::pair<std::string, std::string>>& edges,
                     const std::string& source) {
  const bool fixed_nodes = !nodes.ids.empty() || !nodes.attributes.empty();
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < nodes.ids.size(); ++i) index.emplace(nodes.ids[i], static_cast<int>(i));

  const auto lookup = [&](const std::string& id) {
    const auto it = index.find(id);
    if (it != index.end()) return it->second;
    if (fixed_nodes) {
      throw ReferentialIntegrityError(source + ": edge refers to unknown node '" + id + "'");
    }
    const int k = static_cast<int>(nodes.ids.size());
    nodes.ids.push_back(id);
    index.emplace(id, k);
    return k;
  };

  std::set<std::pair<int, int>> seen;
  nodes.edges.clear();
  for (const auto& [a, b] : edges) {
    if (a == b) throw SelfLoopError(source + ": self-loop on node '" + a + "'");
    const int i = lookup(a);
    const int j = lookup(b);
    if (!seen.emplace(i, j).second) {
      throw DuplicateEdgeError(source + ": duplicate edge '" + a + "' -> '" + b + "'");
    }
    nodes.edges.emplace_back(i, j);
  }
  return nodes;
}

Dataset load_dataset(const std::filesystem::path& edge_file,
                     const std::optional<std::filesystem::path>& attribute_file) {
  Dataset nodes;
  if (attribute_file) {
    auto in = open_input(*attribute_file);
    nodes = parse_attribute_table(in, attribute_file->string());
  }
  auto in = open_input(edge_file);
  const auto edges = parse_edge_list(in, edge_file.string());
  return make_dataset(std::move(nodes), edges, edge_file.string());
}

void write_edge_list(const Dataset& ds, std::ostream& out) {
  for (const auto& [i, j] : ds.edges) out << ds.ids.at(i) << ',' << ds.ids.at(j) << '\n';
}

void write_attribute_table(const Dataset& ds, std::ostream& out) {
  out << "id";
  for (const auto& a : ds.attributes) {
    check_writable(a.name, "attribute name");
    out << ',' << (a.kind == AttributeKind::Numeric ? "num:" : "cat:") << a.name;
  }
  out << '\n';
  for (int i = 0; i < ds.size(); ++i) {
    check_writable(ds.ids[i], "node id");
    out << ds.ids[i];
    for (const auto& a : ds.attributes) {
      if (a.kind == AttributeKind::Numeric) {
        out << ',' << format_number(a.values.at(i));
      } else {
        check_writable(a.labels.at(i), "label");
        out << ',' << a.labels[i];
      }
    }
    out << '\n';
  }
}

void write_dataset(const Dataset& ds, const std::filesystem::path& edge_file,
                   const std::filesystem::path& attribute_file) {
  std::ofstream attrs(attribute_file);
  std::ofstream edges(edge_file);
  if (!attrs || !edges) throw InvalidArgument("cannot open output files for writing");
  write_attribute_table(ds, attrs);
  write_edge_list(ds, edges);
}

Dataset load_adjacency_matrix(const std::filesystem::path& file) {
  auto in = open_input(file);
  const std::string source = file.string();
  std::vector<std::vector<bool>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line, line_no)) {
    std::vector<bool> row;
    for (const auto& t : split_line(line)) {
      if (t.text != "0" && t.text != "1") {
        throw ParseError(source, line_no, t.column, "adjacency entries must be 0 or 1");
      }
      row.push_back(t.text == "1");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(source, line_no, 1, "rows have different lengths");
    }
    rows.push_back(std::move(row));
  }
  const std::size_t n = rows.size();
  if (n == 0 || rows.front().size() != n) {
    throw ParseError(source, line_no, 1, "adjacency matrix must be square and non-empty");
  }
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) ds.ids.push_back(std::to_string(i + 1));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i][i]) throw SelfLoopError(source + ": nonzero diagonal at node " + ds.ids[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (rows[i][j]) ds.edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return ds;
}

Dataset load_lazega(const std::filesystem::path& directory) {
  Dataset ds = load_adjacency_matrix(directory / "ELfriend.dat");
  const auto attr_file = directory / "ELattr.dat";
  auto in = open_input(attr_file);
  const std::string source = attr_file.string();

  static const char* names[] = {"status", "gender", "office", "seniority",
                                "age", "practice", "school"};
  for (int k = 0; k < 7; ++k) {
    Attribute a;
    a.name = names[k];
    a.kind = (k == 3 || k == 4) ? AttributeKind::Numeric : AttributeKind::Categorical;
    ds.attributes.push_back(std::move(a));
  }
  std::string line;
  std::size_t line_no = 0;
  int row_count = 0;
  while (next_line(in, line, line_no)) {
    const auto row = split_line(line);
    if (row.size() != 8) {
      throw ParseError(source, line_no, 1, "expected 8 columns (id and 7 attributes)");
    }
    if (row_count >= ds.size() || row[0].text != ds.ids[row_count]) {
      throw ReferentialIntegrityError(source + ": attribute rows must list nodes 1..n in order");
    }
    for (int k = 0; k < 7; ++k) {
      Attribute& a = ds.attributes[k];
      const Token& t = row[k + 1];
      if (a.kind == AttributeKind::Numeric) {
        a.values.push_back(parse_number(t, source, line_no));
      } else {
        parse_number(t, source, line_no);  // codes are numeric in this file
        a.labels.push_back(t.text);
      }
    }
    ++row_count;
  }
  if (row_count != ds.size()) {
    throw ReferentialIntegrityError(source + ": attribute table and adjacency sizes differ");
  }
  return ds;
}

Dataset prune_zero_degree(const Dataset& ds) {
  const int n = ds.size();
  std::vector<bool> alive(n, true);
  while (true) {
    std::vector<int> d(n, 0);
    std::vector<int> b(n, 0);
    for (const auto& [i, j] : ds.edges) {
      if (alive[i] && alive[j]) {
        ++d[i];
        ++b[j];
      }
    }
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      if (alive[i] && (d[i] == 0 || b[i] == 0)) {
        alive[i] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }

  std::vector<int> remap(n, -1);
  Dataset out;
  for (int i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    remap[i] = out.size();
    out.ids.push_back(ds.ids[i]);
  }
  if (out.ids.empty()) throw EmptyAfterPruning("no node has both positive in- and out-degree");
  for (const auto& a : ds.attributes) {
    Attribute kept;
    kept.name = a.name;
    kept.kind = a.kind;
    for (int i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      if (a.kind == AttributeKind::Numeric) {
        kept.values.push_back(a.values.at(i));
      } else {
        kept.labels.push_back(a.labels.at(i));
      }
    }
    out.attributes.push_back(std::move(kept));
  }
  for (const auto& [i, j] : ds.edges) {
    if (alive[i] && alive[j]) out.edges.emplace_back(remap[i], remap[j]);
  }
  return out;
}

AttributeSpec parse_attribute_spec(const std::string& json_text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    // Translate the byte offset into a line and column.
    const std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, json_text.size());
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t k = 0; k < at; ++k) {
      if (json_text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(source, line, col, "invalid JSON");
  }
  const auto fail = [&](const std::string& what) { return ParseError(source, 1, 1, what); };
  if (!j.is_object() || !j.contains("rules") || !j["rules"].is_array()) {
    throw fail("spec must be an object with a 'rules' array");
  }
  AttributeSpec spec;
  for (const auto& r : j["rules"]) {
    if (!r.is_object() || !r.contains("attribute") || !r.contains("rule") ||
        !r["attribute"].is_string() || !r["rule"].is_string()) {
      throw fail("each rule needs string fields 'attribute' and 'rule'");
    }
    AttributeRule rule;
    rule.attribute = r["attribute"].get<std::string>();
    const std::string kind = r["rule"].get<std::string>();
    if (kind == "match") {
      rule.rule = RuleKind::MatchIndicator;
    } else if (kind == "abs-diff") {
      rule.rule = RuleKind::AbsDiff;
    } else {
      throw fail("unknown rule '" + kind + "' (expected 'match' or 'abs-diff')");
    }
    spec.rules.push_back(std::move(rule));
  }
  if (j.contains("logistic_transform")) {
    if (!j["logistic_transform"].is_boolean()) throw fail("'logistic_transform' must be a boolean");
    spec.logistic_transform = j["logistic_transform"].get<bool>();
  }
  return spec;
}

AttributeSpec load_attribute_spec(const std::filesystem::path& file) {
  auto in = open_input(file);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_attribute_spec(ss.str(), file.string());
}

AttributeSpec default_attribute_spec(const Dataset& ds) {
  AttributeSpec spec;
  for (const auto& a : ds.attributes) {
    spec.rules.push_back({a.name, a.kind == AttributeKind::Numeric ? RuleKind::AbsDiff
                                                                   : RuleKind::MatchIndicator});
  }
  return spec;
}

EdgeCovariates build_edge_covariates(const Dataset& ds, const AttributeSpec& spec) {
  const int n = ds.size();
  std::vector<Matrix> layers;
  for (const auto& rule : spec.rules) {
    const Attribute& a = ds.attribute(rule.attribute);
    Matrix z = Matrix::Zero(n, n);
    if (rule.rule == RuleKind::MatchIndicator) {
      if (a.kind != AttributeKind::Categorical) {
        throw RuleKindMismatch("match rule on numeric attribute '" + a.name + "'");
      }
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) z(i, j) = (i != j && a.labels[i] == a.labels[j]) ? 1.0 : 0.0;
      }
    } else {
      if (a.kind != AttributeKind::Numeric) {
        throw RuleKindMismatch("abs-diff rule on categorical attribute '" + a.name + "'");
      }
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) z(i, j) = std::abs(a.values[i] - a.values[j]);
      }
    }
    layers.push_back(std::move(z));
  }
  EdgeCovariates cov(n, std::move(layers));
  return spec.logistic_transform ? cov.logistic_transformed() : cov;
}

}  // namespace p0
