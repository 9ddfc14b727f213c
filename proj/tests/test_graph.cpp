// Copyright 2026 The Hete-CF Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <random>

#include "hetecf/error.hpp"
#include "hetecf/graph.hpp"
#include "hetecf/metapath.hpp"
#include "hetecf/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hetecf;

namespace {

const char* kApcSchema =
    "# authors, papers, conferences\n"
    "type Author user\n"
    "type Paper\n"
    "type Conf item\n"
    "relation writes Author Paper\n"
    "relation published_in Paper Conf\n";

std::string edges_text(const std::vector<oracle::Edge>& edges) {
  std::string out;
  for (const auto& e : edges) {
    out += e.src + "\t" + e.dst + "\t" + e.relation + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("load_graph reads the smallest valid instance") {
  testing::TempDir dir;
  const auto g = load_graph(
      dir.write("nodes.tsv", "a1\tAuthor\np1\tPaper\n# comment\n\nc1\tConf\n"),
      dir.write("edges.tsv", "a1\tp1\twrites\np1\tc1\tpublished_in\n"),
      dir.write("schema.txt", kApcSchema));
  CHECK(g.total_nodes() == 3);
  CHECK(g.total_edges() == 2);
  CHECK(g.node_count("Author") == 1);
  CHECK(g.adjacency("writes").coeff(0, 0) == 1.0);
}

TEST_CASE("unknown node ids in edges are errors naming the id and line") {
  testing::TempDir dir;
  const auto nodes = dir.write("nodes.tsv", "a1\tAuthor\np1\tPaper\nc1\tConf\n");
  const auto edges =
      dir.write("edges.tsv", "a1\tp1\twrites\na9\tp1\twrites\n");
  const auto schema = dir.write("schema.txt", kApcSchema);
  try {
    load_graph(nodes, edges, schema);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    const std::string what = e.what();
    CHECK(what.find("a9") != std::string::npos);
    CHECK(what.find(":2:") != std::string::npos);
  }
}

TEST_CASE("ingestion errors") {
  testing::TempDir dir;
  const auto schema = dir.write("schema.txt", kApcSchema);
  const auto nodes = dir.write("nodes.tsv", "a1\tAuthor\np1\tPaper\nc1\tConf\n");

  SUBCASE("duplicate node id") {
    const auto dup = dir.write("dup.tsv", "a1\tAuthor\na1\tPaper\n");
    const auto edges = dir.write("e.tsv", "");
    CHECK_THROWS_WITH_AS(load_graph(dup, edges, schema),
                         doctest::Contains("duplicate node id 'a1'"),
                         InputError);
  }
  SUBCASE("edge endpoints violate the relation's types") {
    const auto edges = dir.write("e.tsv", "p1\ta1\twrites\n");
    CHECK_THROWS_WITH_AS(load_graph(nodes, edges, schema),
                         doctest::Contains("does not match relation 'writes'"),
                         InputError);
  }
  SUBCASE("malformed record") {
    const auto edges = dir.write("e.tsv", "a1\tp1\n");
    CHECK_THROWS_WITH_AS(load_graph(nodes, edges, schema),
                         doctest::Contains(":1:"), InputError);
  }
  SUBCASE("bad weight") {
    const auto edges = dir.write("e.tsv", "a1\tp1\twrites\tlots\n");
    CHECK_THROWS_AS(load_graph(nodes, edges, schema), InputError);
  }
  SUBCASE("negative weight") {
    const auto edges = dir.write("e.tsv", "a1\tp1\twrites\t-1\n");
    CHECK_THROWS_AS(load_graph(nodes, edges, schema), InputError);
  }
  SUBCASE("unknown relation") {
    const auto edges = dir.write("e.tsv", "a1\tp1\treads\n");
    CHECK_THROWS_WITH_AS(load_graph(nodes, edges, schema),
                         doctest::Contains("reads"), InputError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_graph(nodes, dir / "nope.tsv", schema),
                         doctest::Contains("nope.tsv"), InputError);
  }
}

TEST_CASE("schema invariants") {
  CHECK_THROWS_AS(Schema::parse("type A user\n"), InputError);
  CHECK_THROWS_AS(Schema::parse("type A user\ntype B\n"), InputError);
  CHECK_THROWS_AS(Schema::parse("type A user\ntype B user\n"), InputError);
  CHECK_THROWS_AS(Schema::parse("type A user\ntype B item\nrelation r A C\n"),
                  InputError);
  CHECK_THROWS_AS(Schema::parse("type A user\ntype B item\nwidget\n"),
                  InputError);
  CHECK_THROWS_WITH(Schema::parse("type A user\ntype B item\nrelation r A\n"),
                    doctest::Contains("line 3"));

  SUBCASE("bibliographic schema is accepted") {
    const auto s = Schema::parse(
        "type Author user\ntype Paper\ntype Conf item\ntype Term\n"
        "relation writes Author Paper\nrelation published_in Paper Conf\n"
        "relation contains Paper Term\nrelation cites Paper Paper\n");
    CHECK(s.node_types().size() == 4);
    CHECK(s.relations().size() == 4);
    CHECK(s == dblp_schema());
    CHECK(Schema::parse(s.to_string()) == s);
  }
}

TEST_CASE("edge semantics: default weight, parallel edges, self-loops") {
  HeteroGraph::Builder b(dblp_schema());
  b.add_node("a", "Author");
  b.add_node("p", "Paper");
  b.add_node("q", "Paper");
  b.add_node("c", "Conf");
  b.add_node("t", "Term");
  b.add_edge("a", "p", "writes");
  b.add_edge("a", "p", "writes", 2.5);
  b.add_edge("p", "q", "cites");
  CHECK_THROWS_AS(b.add_edge("p", "p", "cites"), InputError);
  CHECK_THROWS_AS(b.add_edge("a", "c", "writes"), InputError);
  CHECK_THROWS_AS(b.add_node("a", "Paper"), InputError);
  const auto g = std::move(b).build();
  CHECK(g.adjacency("writes").coeff(0, 0) == doctest::Approx(3.5));
  CHECK(g.edge_count("writes") == 1);
  CHECK(g.adjacency("cites").coeff(0, 1) == 1.0);
}

TEST_CASE("adjacency shapes and transposition") {
  HeteroGraph::Builder b(dblp_schema());
  for (auto id : {"a1", "a2"}) b.add_node(id, "Author");
  for (auto id : {"p1", "p2", "p3"}) b.add_node(id, "Paper");
  b.add_node("c1", "Conf");
  b.add_node("t1", "Term");
  b.add_edge("a1", "p1", "writes");
  const auto g = std::move(b).build();

  const auto empty = adjacency(g, "contains", false);
  CHECK(empty.rows() == 3);
  CHECK(empty.cols() == 1);
  CHECK(empty.nonZeros() == 0);

  const auto w = adjacency(g, "writes", false);
  CHECK(w.rows() == 2);
  CHECK(w.cols() == 3);
  CHECK(w.nonZeros() == 1);
  CHECK(w.coeff(0, 0) == 1.0);

  const auto wt = adjacency(g, "writes", true);
  CHECK(wt.rows() == 3);
  CHECK(wt.cols() == 2);
  CHECK(SparseMatrix(wt - SparseMatrix(w.transpose())).norm() == 0.0);
  CHECK_THROWS_AS(adjacency(g, "reads", false), InputError);
}

TEST_CASE("save/load round-trips random graphs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto raw = oracle::random_graph(rng, 24, 0.2);
    for (auto& e : raw.edges) e.weight = 0.5 + (rng() % 7) * 0.25;
    const auto g = raw.build();
    testing::TempDir dir;
    save_graph(g, dir / "n.tsv", dir / "e.tsv", dir / "s.txt");
    const auto back = load_graph(dir / "n.tsv", dir / "e.tsv", dir / "s.txt");
    CHECK(back == g);
    CHECK(back.content_hash() == g.content_hash());
  }
}

TEST_CASE("rating matrix invariants") {
  CHECK_THROWS_AS(RatingMatrix(2, 2, {{0, 0, 0.5}, {0, 0, 0.2}}), InputError);
  CHECK_THROWS_AS(RatingMatrix(2, 2, {{0, 0, 1.5}}), InputError);
  CHECK_THROWS_AS(RatingMatrix(2, 2, {{2, 0, 0.5}}), InputError);
  const RatingMatrix r(3, 5, {{2, 4, 0.1}, {0, 1, 0.2}, {1, 1, 1.0}});
  CHECK(r.entries().front().user == 0);
  CHECK(r.density() == doctest::Approx(0.2));
  CHECK(r.user_counts() == std::vector<std::size_t>{1, 1, 1});
  CHECK(r.item_counts() == std::vector<std::size_t>{0, 2, 0, 0, 1});
}

// ---------------------------------------------------------------------------

TEST_CASE("derive_ratings") {
  const auto schema = Schema::parse(kApcSchema);
  const auto target =
      MetaPath::parse(schema, "Author -writes-> Paper -published_in-> Conf");

  SUBCASE("single conference author") {
    HeteroGraph::Builder b(schema);
    b.add_node("a", "Author");
    for (auto id : {"p1", "p2"}) b.add_node(id, "Paper");
    for (auto id : {"c0", "c1", "c2"}) b.add_node(id, "Conf");
    b.add_edge("a", "p1", "writes");
    b.add_edge("a", "p2", "writes");
    b.add_edge("p1", "c1", "published_in");
    b.add_edge("p2", "c1", "published_in");
    const auto r = derive_ratings(std::move(b).build(), target);
    REQUIRE(r.observed() == 1);
    CHECK(r.entries()[0].item == 1);
    CHECK(r.entries()[0].value > 0.0);
  }

  SUBCASE("no path instances") {
    HeteroGraph::Builder b(schema);
    b.add_node("a", "Author");
    b.add_node("p", "Paper");
    b.add_node("c", "Conf");
    b.add_edge("a", "p", "writes");
    const auto r = derive_ratings(std::move(b).build(), target);
    CHECK(r.empty());
    CHECK(r.density() == 0.0);
  }

  SUBCASE("endpoint types are checked") {
    HeteroGraph::Builder b(schema);
    b.add_node("a", "Author");
    b.add_node("c", "Conf");
    const auto g = std::move(b).build();
    CHECK_THROWS_AS(
        derive_ratings(g, MetaPath::parse(schema, "Author -writes-> Paper")),
        InputError);
  }

  SUBCASE("ten authors, three conferences: equals DFS enumeration") {
    oracle::RawGraph raw{schema, {}, {}};
    for (int a = 0; a < 10; ++a) raw.nodes.emplace_back("a" + std::to_string(a), "Author");
    for (int p = 0; p < 16; ++p) raw.nodes.emplace_back("p" + std::to_string(p), "Paper");
    for (int c = 0; c < 3; ++c) raw.nodes.emplace_back("c" + std::to_string(c), "Conf");
    for (int p = 0; p < 16; ++p) {
      const auto paper = "p" + std::to_string(p);
      raw.edges.push_back({"a" + std::to_string(p % 10), paper, "writes"});
      if (p % 3 == 0) raw.edges.push_back({"a" + std::to_string((p + 4) % 10), paper, "writes"});
      raw.edges.push_back({paper, "c" + std::to_string((p * 7) % 3), "published_in"});
    }
    const auto g = raw.build();
    const auto r = derive_ratings(g, target);
    const auto counts = oracle::dfs_path_count(raw, target);

    std::size_t observed = 0;
    for (int a = 0; a < 10; ++a) {
      for (int c = 0; c < 3; ++c) {
        const double want = oracle::rowcol_pathsim(counts, "a" + std::to_string(a),
                                                   "c" + std::to_string(c));
        observed += want > 0.0;
        double got = 0.0;
        for (const auto& e : r.entries()) {
          if (e.user == static_cast<std::size_t>(a) && e.item == static_cast<std::size_t>(c)) {
            got = e.value;
          }
        }
        CHECK(got == doctest::Approx(want).epsilon(1e-14));
      }
    }
    CHECK(r.observed() == observed);
  }
}

TEST_CASE("derive_ratings is invariant under edge-file line order") {
  std::mt19937_64 rng(5);
  testing::TempDir dir;
  auto raw = oracle::random_graph(rng, 30, 0.25);
  const auto schema_path = dir.write("s.txt", raw.schema.to_string());
  std::string nodes;
  for (const auto& [id, type] : raw.nodes) nodes += id + "\t" + type + "\n";
  const auto nodes_path = dir.write("n.tsv", nodes);
  const auto target = MetaPath::parse(raw.schema, "U -ux-> X -xi-> I");

  const auto base = derive_ratings(
      load_graph(nodes_path, dir.write("e0.tsv", edges_text(raw.edges)), schema_path),
      target);
  for (int k = 1; k <= 5; ++k) {
    std::shuffle(raw.edges.begin(), raw.edges.end(), rng);
    const auto g = load_graph(
        nodes_path, dir.write("e" + std::to_string(k) + ".tsv", edges_text(raw.edges)),
        schema_path);
    const auto r = derive_ratings(g, target);
    REQUIRE(r.observed() == base.observed());
    for (std::size_t i = 0; i < r.observed(); ++i) {
      CHECK(r.entries()[i].user == base.entries()[i].user);
      CHECK(r.entries()[i].item == base.entries()[i].item);
      CHECK(r.entries()[i].value == base.entries()[i].value);
    }
  }
}
