#include "p0/dataset.hpp"
#include "p0/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

using namespace p0;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("p0cov_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

Dataset from_text(const std::string& edges, const std::string& attrs = "") {
  Dataset nodes;
  if (!attrs.empty()) {
    std::istringstream a(attrs);
    nodes = parse_attribute_table(a, "attrs");
  }
  std::istringstream e(edges);
  return make_dataset(nodes, parse_edge_list(e, "edges"), "edges");
}

template <class F>
ParseError parse_error_of(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a ParseError");
  return ParseError("", 0, 0, "");
}

}  // namespace

TEST_CASE("toy edge list") {
  const Dataset ds = from_text("a b\n# comment\n\nb,c\r\n");
  CHECK(ds.ids == std::vector<std::string>{"a", "b", "c"});
  CHECK(ds.out_degrees() == std::vector<int>{1, 1, 0});
  CHECK(ds.in_degrees() == std::vector<int>{0, 1, 1});
  CHECK(ds.network().edge_count() == 2);
}

TEST_CASE("edge list errors") {
  CHECK_THROWS_AS(from_text("a a\n"), SelfLoopError);
  CHECK_THROWS_AS(from_text("a b\nb c\na b\n"), DuplicateEdgeError);
  CHECK_NOTHROW(from_text("a b\nb a\n"));

  const ParseError e = parse_error_of([] { from_text("a b\nb c d\n"); });
  CHECK(e.line() == 2);
  CHECK(e.column() == 5);
  const ParseError one = parse_error_of([] { from_text("a b\n\nlonely\n"); });
  CHECK(one.line() == 3);

  const std::string attrs = "id,cat:group\na,x\nb,y\n";
  CHECK_THROWS_AS(from_text("a c\n", attrs), ReferentialIntegrityError);
}

TEST_CASE("attribute table parsing") {
  const Dataset ds = from_text("a b\n", "id,cat:group,num:years\na,x,10\nb,x,7\nc,y,2.5\n");
  CHECK(ds.size() == 3);
  CHECK(ds.ids[2] == "c");
  CHECK(ds.attribute("group").kind == AttributeKind::Categorical);
  CHECK(ds.attribute("years").values == std::vector<double>{10, 7, 2.5});
  CHECK_THROWS_AS(ds.attribute("missing"), InvalidArgument);

  SUBCASE("tab separated") {
    const Dataset t = from_text("a\tb\n", "id\tnum:x\na\t1\nb\t2\n");
    CHECK(t.attribute("x").values == std::vector<double>{1, 2});
  }
  SUBCASE("bad header") {
    const ParseError e = parse_error_of([] { from_text("", "id,group\na,x\n"); });
    CHECK(e.line() == 1);
    CHECK(e.column() == 4);
  }
  SUBCASE("bad number") {
    const ParseError e = parse_error_of([] { from_text("", "id,num:x\na,1\nb,oops\n"); });
    CHECK(e.line() == 3);
    CHECK(e.column() == 3);
  }
  SUBCASE("wrong field count") {
    const ParseError e = parse_error_of([] { from_text("", "id,num:x\na,1,2\n"); });
    CHECK(e.line() == 2);
  }
  SUBCASE("duplicate id") {
    CHECK_THROWS_AS(from_text("", "id,num:x\na,1\na,2\n"), ParseError);
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(from_text("", "\n"), ParseError);
  }
}

TEST_CASE("files and round trip") {
  TempDir dir;
  const auto edges = dir.write("e.csv", "n1,n2\nn2,n3\nn3,n1\nn1,n3\n");
  const auto attrs = dir.write("a.csv", "id,cat:g,num:v\nn1,x,0.1\nn2,y,1e-300\nn3,x,-2.75\n");
  const Dataset ds = load_dataset(edges, attrs);
  CHECK(ds.size() == 3);
  CHECK(ds.edges.size() == 4);

  write_dataset(ds, dir.path / "e2.csv", dir.path / "a2.csv");
  const Dataset back = load_dataset(dir.path / "e2.csv", dir.path / "a2.csv");
  CHECK(back == ds);

  // Full-precision numbers survive.
  Dataset odd = ds;
  odd.attributes[1].values = {0.1 + 0.2, 1.0 / 3.0, -123456.789e-7};
  write_dataset(odd, dir.path / "e3.csv", dir.path / "a3.csv");
  CHECK(load_dataset(dir.path / "e3.csv", dir.path / "a3.csv") == odd);

  // Edge-only datasets take node order from first appearance.
  const Dataset bare = load_dataset(edges, std::nullopt);
  CHECK(bare.ids == std::vector<std::string>{"n1", "n2", "n3"});

  CHECK_THROWS_AS(load_dataset(dir.path / "missing.csv", std::nullopt), ParseError);

  Dataset bad = ds;
  bad.ids[0] = "has space";
  std::ostringstream sink;
  CHECK_THROWS_AS(write_attribute_table(bad, sink), InvalidArgument);
}

TEST_CASE("pruning zero-degree nodes") {
  SUBCASE("all degrees positive: unchanged") {
    const Dataset ds = from_text("a b\nb c\nc a\n");
    CHECK(prune_zero_degree(ds) == ds);
  }
  SUBCASE("a directed path is removed completely") {
    CHECK_THROWS_AS(prune_zero_degree(from_text("1 2\n2 3\n")), EmptyAfterPruning);
  }
  SUBCASE("removal cascades") {
    // d is only reached from e, which has no in-edges; after e goes, d has
    // in-degree 0 as well.
    const Dataset ds = from_text("a b\nb c\nc a\ne d\nd a\n",
                                 "id,num:x\na,1\nb,2\nc,3\nd,4\ne,5\n");
    const Dataset once = prune_zero_degree(ds);
    CHECK(once.ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(once.attribute("x").values == std::vector<double>{1, 2, 3});
    CHECK(once.edges.size() == 3);
    CHECK(prune_zero_degree(once) == once);
  }
}

TEST_CASE("edge covariates from attributes") {
  const Dataset ds = from_text("a b\n", "id,cat:group,num:years\na,x,10\nb,x,7\nc,y,2\n");
  AttributeSpec spec;
  spec.rules = {{"group", RuleKind::MatchIndicator}, {"years", RuleKind::AbsDiff}};
  const EdgeCovariates cov = build_edge_covariates(ds, spec);
  CHECK(cov.dim() == 2);
  CHECK(cov.layer(0)(0, 1) == 1.0);
  CHECK(cov.layer(0)(0, 2) == 0.0);
  CHECK(cov.layer(0)(1, 1) == 0.0);
  CHECK(cov.layer(1)(0, 1) == 3.0);
  CHECK(cov.layer(1)(1, 0) == 3.0);

  spec.logistic_transform = true;
  const EdgeCovariates t = build_edge_covariates(ds, spec);
  CHECK(t.layer(1)(0, 1) == doctest::Approx(mu(3.0)));

  AttributeSpec wrong;
  wrong.rules = {{"years", RuleKind::MatchIndicator}};
  CHECK_THROWS_AS(build_edge_covariates(ds, wrong), RuleKindMismatch);
  wrong.rules = {{"group", RuleKind::AbsDiff}};
  CHECK_THROWS_AS(build_edge_covariates(ds, wrong), RuleKindMismatch);

  const AttributeSpec def = default_attribute_spec(ds);
  REQUIRE(def.rules.size() == 2);
  CHECK(def.rules[0].rule == RuleKind::MatchIndicator);
  CHECK(def.rules[1].rule == RuleKind::AbsDiff);
}

TEST_CASE("attribute spec JSON") {
  const AttributeSpec s = parse_attribute_spec(
      R"({"rules": [{"attribute": "status", "rule": "match"},
                    {"attribute": "age", "rule": "abs-diff"}],
          "logistic_transform": true})",
      "spec");
  REQUIRE(s.rules.size() == 2);
  CHECK(s.rules[1].attribute == "age");
  CHECK(s.rules[1].rule == RuleKind::AbsDiff);
  CHECK(s.logistic_transform);

  const ParseError e = parse_error_of([] { parse_attribute_spec("{\n  \"rules\": [,]\n}", "s"); });
  CHECK(e.line() == 2);
  CHECK_THROWS_AS(parse_attribute_spec(R"({"rules": [{"attribute": "a", "rule": "near"}]})", "s"),
                  ParseError);
  CHECK_THROWS_AS(parse_attribute_spec(R"({"rule": []})", "s"), ParseError);
}

TEST_CASE("adjacency matrix and Lazega-format files") {
  TempDir dir;
  const int n = 71;
  std::mt19937_64 g(71);
  std::bernoulli_distribution coin(0.1);
  std::ostringstream adj;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) adj << (j ? " " : "") << (i != j && coin(g) ? 1 : 0);
    adj << '\n';
  }
  dir.write("ELfriend.dat", adj.str());
  std::ostringstream attr;
  for (int i = 0; i < n; ++i) {
    attr << i + 1 << ' ' << 1 + i % 2 << ' ' << 1 + i % 3 % 2 << ' ' << 1 + i % 3 << ' '
         << 1 + i % 30 << ' ' << 26 + i % 40 << ' ' << 1 + i % 2 << ' ' << 1 + i % 3 << '\n';
  }
  dir.write("ELattr.dat", attr.str());

  const Dataset ds = load_lazega(dir.path);
  CHECK(ds.size() == 71);
  CHECK(ds.attributes.size() == 7);
  CHECK(ds.attribute("seniority").kind == AttributeKind::Numeric);
  CHECK(ds.attribute("age").kind == AttributeKind::Numeric);
  CHECK(ds.attribute("status").kind == AttributeKind::Categorical);

  AttributeSpec spec;
  for (const char* a : {"status", "gender", "office", "practice", "school"}) {
    spec.rules.push_back({a, RuleKind::MatchIndicator});
  }
  for (const char* a : {"seniority", "age"}) spec.rules.push_back({a, RuleKind::AbsDiff});
  CHECK(build_edge_covariates(ds, spec).dim() == 7);

  dir.write("bad.dat", "0 1\n1 1\n");
  CHECK_THROWS_AS(load_adjacency_matrix(dir.path / "bad.dat"), SelfLoopError);
  dir.write("ragged.dat", "0 1 0\n1 0\n");
  CHECK_THROWS_AS(load_adjacency_matrix(dir.path / "ragged.dat"), ParseError);
  dir.write("two.dat", "0 2\n1 0\n");
  CHECK_THROWS_AS(load_adjacency_matrix(dir.path / "two.dat"), ParseError);
}
