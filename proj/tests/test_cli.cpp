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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hetecf/cli.hpp"
#include "hetecf/graph.hpp"
#include "hetecf/model.hpp"
#include "test_util.hpp"

using namespace hetecf;
namespace fs = std::filesystem;

namespace {

const fs::path kToy = HETECF_TOY_DIR;
const std::string kTarget = "Author -writes-> Paper -published_in-> Conf";

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> graph_args(const fs::path& dir = kToy) {
  return {"--nodes", (dir / "nodes.tsv").string(), "--edges",
          (dir / "edges.tsv").string(), "--schema", (dir / "schema.txt").string()};
}

std::vector<std::string> cat(std::vector<std::string> a,
                             const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<std::string> train_args(const fs::path& model) {
  return cat(cat({"train"}, graph_args()),
             {"--metapaths", (kToy / "metapaths.txt").string(), "--target", kTarget,
              "--model", model.string(), "-d", "3", "--max-outer", "5"});
}

void copy_toy(const fs::path& dir) {
  for (auto name : {"nodes.tsv", "edges.tsv", "schema.txt", "metapaths.txt"}) {
    fs::copy_file(kToy / name, dir / name);
  }
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"train", "--model", "x"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("validate") {
  SUBCASE("toy dataset") {
    const auto r = cli(cat(cat({"validate"}, graph_args()),
                           {"--metapaths", (kToy / "metapaths.txt").string()}));
    CHECK(r.code == 0);
    CHECK(r.out.find("Author (user): 10") != std::string::npos);
    CHECK(r.out.find("writes (Author -> Paper)") != std::string::npos);
    CHECK(r.out.find("meta-paths UU=2 II=2 UI=1") != std::string::npos);
  }
  SUBCASE("bad edge cites the line") {
    testing::TempDir dir;
    copy_toy(dir.path());
    std::ofstream(dir / "edges.tsv", std::ios::app) << "a1\tnowhere\twrites\n";
    const auto r = cli(cat({"validate"}, graph_args(dir.path())));
    CHECK(r.code == 2);
    CHECK(r.err.find("edges.tsv:129:") != std::string::npos);
    CHECK(r.err.find("nowhere") != std::string::npos);
  }
  SUBCASE("missing schema names the path") {
    testing::TempDir dir;
    copy_toy(dir.path());
    fs::remove(dir / "schema.txt");
    const auto r = cli(cat({"validate"}, graph_args(dir.path())));
    CHECK(r.code == 2);
    CHECK(r.err.find((dir / "schema.txt").string()) != std::string::npos);
  }
  SUBCASE("incompatible meta-path names its spec line") {
    testing::TempDir dir;
    const auto spec = dir.write("m.txt", "UU: Author -writes-> Paper <-writes- Author\n"
                                         "II: Author -writes-> Paper <-writes- Author\n");
    const auto r = cli(cat(cat({"validate"}, graph_args()), {"--metapaths", spec.string()}));
    CHECK(r.code == 2);
    CHECK(r.err.find("m.txt:2") != std::string::npos);
  }
}

TEST_CASE("similarity cache") {
  testing::TempDir dir;
  const auto spec = dir.write(
      "m.txt",
      "UU: Author -writes-> Paper <-writes- Author\n"
      "II: Conf <-published_in- Paper -contains-> Term <-contains- Paper -published_in-> Conf\n"
      "UI: Author -writes-> Paper -cites-> Paper -published_in-> Conf\n");
  const auto cache = dir / "cache";
  const auto args = cat(cat({"similarity"}, graph_args()),
                        {"--metapaths", spec.string(), "--cache-dir", cache.string()});

  const auto first = cli(args);
  REQUIRE(first.code == 0);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(cache)) files.push_back(e.path());
  CHECK(files.size() == 3);
  CHECK(first.out.find("wrote UU") != std::string::npos);

  const auto second = cli(args);
  CHECK(second.code == 0);
  CHECK(second.out.find("wrote") == std::string::npos);
  CHECK(second.out.find("skipped UU") != std::string::npos);
  CHECK(second.out.find("skipped II") != std::string::npos);
  CHECK(second.out.find("skipped UI") != std::string::npos);

  std::ofstream(files[0], std::ios::trunc) << "# hetecf-similarity 1\ngarbage\n";
  const auto third = cli(args);
  CHECK(third.code == 0);
  CHECK(third.err.find("warning") != std::string::npos);
  CHECK(third.out.find("wrote") != std::string::npos);
  CHECK(cli(args).out.find("wrote") == std::string::npos);

  SUBCASE("diagonal variant on a non-palindromic path is an input error") {
    const auto r = cli(cat(args, {"--variant", "diagonal"}));
    CHECK(r.code == 2);
  }
}

TEST_CASE("train, evaluate, predict") {
  testing::TempDir dir;
  const auto model = dir / "toy.model";

  const auto trained = cli(cat(train_args(model), {"--weights", (dir / "w.csv").string()}));
  REQUIRE_MESSAGE(trained.code == 0, trained.err);
  CHECK(fs::exists(model));
  CHECK(fs::exists(dir / "toy.model.log.csv"));
  CHECK(fs::exists(dir / "w.csv"));
  CHECK(trained.out.find("(rating density)") != std::string::npos);
  const auto log = testing::read(dir / "toy.model.log.csv");
  CHECK(log.rfind("iteration,objective,change_U", 0) == 0);
  for (const auto& e : fs::directory_iterator(dir.path())) {
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
  }

  SUBCASE("mu override is logged") {
    const auto r = cli(cat(train_args(dir / "m2"), {"--mu", "0.5"}));
    CHECK(r.code == 0);
    CHECK(r.out.find("mu = 0.5 (override)") != std::string::npos);
  }

  SUBCASE("same seed gives identical model files") {
    REQUIRE(cli(train_args(dir / "again.model")).code == 0);
    CHECK(testing::read(dir / "again.model") == testing::read(model));
    REQUIRE(cli(cat(train_args(dir / "other.model"), {"--seed", "5"})).code == 0);
    CHECK(testing::read(dir / "other.model") != testing::read(model));
  }

  SUBCASE("config file with flag overrides") {
    const auto cfg = dir.write(
        "c.toml", "[train]\nnodes = \"" + (kToy / "nodes.tsv").string() +
                      "\"\nedges = \"" + (kToy / "edges.tsv").string() +
                      "\"\nschema = \"" + (kToy / "schema.txt").string() +
                      "\"\ntarget = \"" + kTarget + "\"\nmu = 0.25\nmax-outer = 2\n");
    const auto r = cli({"--config", cfg.string(), "train", "--model",
                        (dir / "c.model").string(), "--mu", "0.75"});
    CHECK_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("mu = 0.75 (override)") != std::string::npos);
    CHECK(r.out.find("after 2 outer") != std::string::npos);
  }

  SUBCASE("evaluate writes a parseable report") {
    const auto report = dir / "report.csv";
    const auto r = cli(cat(cat({"evaluate"}, graph_args()),
                           {"--metapaths", (kToy / "metapaths.txt").string(), "--target",
                            kTarget, "--report", report.string(), "--trials", "2",
                            "--max-outer", "3"}));
    REQUIRE_MESSAGE(r.code == 0, r.err);
    std::istringstream csv(testing::read(report));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "method,fraction,d,metric,mean,sd");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
      ++rows;
      CHECK(std::count(line.begin(), line.end(), ',') == 5);
    }
    CHECK(rows == 4 * 2 * 2 * 2);
  }

  SUBCASE("predict ranks every item when k is large") {
    const auto r = cli(cat(cat({"predict"}, graph_args()),
                           {"--model", model.string(), "--user", "a1", "-k", "10"}));
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string id;
    double score = 0.0, prev = 1.0;
    std::size_t n = 0;
    while (lines >> id >> score) {
      CHECK(score > 0.0);
      CHECK(score < 1.0);
      CHECK(score <= prev);
      prev = score;
      ++n;
    }
    CHECK(n == 3);
  }

  SUBCASE("predict errors") {
    auto base = cat(cat({"predict"}, graph_args()), {"--model", model.string()});
    CHECK(cli(cat(base, {"--user", "a99"})).code == 2);
    CHECK(cli(cat(base, {"--user", "kdd"})).code == 2);

    testing::TempDir other;
    copy_toy(other.path());
    std::ofstream(other / "edges.tsv", std::ios::app) << "a2\tp1\twrites\n";
    const auto r = cli(cat(cat({"predict"}, graph_args(other.path())),
                           {"--model", model.string(), "--user", "a1"}));
    CHECK(r.code == 2);
    CHECK(r.err.find("different graph") != std::string::npos);
  }
}

TEST_CASE("predict breaks ties by item id") {
  testing::TempDir dir;
  dir.write("schema.txt", "type U user\ntype I item\nrelation likes U I\n");
  dir.write("nodes.tsv", "u\tU\nzeta\tI\nbeta\tI\nalpha\tI\n");
  dir.write("edges.tsv", "u\tzeta\tlikes\n");
  const auto g = load_graph(dir / "nodes.tsv", dir / "edges.tsv", dir / "schema.txt");
  ModelFile f;
  f.model.U = Matrix::Ones(1, 1);
  f.model.V = Matrix(3, 1);
  f.model.V << 0.5, 0.5, 2.0;  // zeta, beta tie; alpha lower index wins anyway
  f.model.V(2, 0) = -1.0;
  f.graph_hash = g.content_hash();
  save_model(dir / "m", f);
  const auto r = cli(cat(cat({"predict"}, graph_args(dir.path())),
                         {"--model", (dir / "m").string(), "--user", "u", "-k", "2"}));
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("beta\t", 0) == 0);
  CHECK(r.out.find("zeta\t") != std::string::npos);
  CHECK(r.out.find("alpha") == std::string::npos);
}

TEST_CASE("numerical failures exit 3") {
  testing::TempDir dir;
  copy_toy(dir.path());
  auto edges = testing::read(dir / "edges.tsv");
  edges += "a1\tp24\twrites\t1e300\n";
  std::ofstream(dir / "edges.tsv") << edges;
  const auto r = cli(cat(cat({"train"}, graph_args(dir.path())),
                         {"--metapaths", (dir / "metapaths.txt").string(), "--target",
                          kTarget, "--model", (dir / "m").string()}));
  CHECK(r.code == 3);
  CHECK(r.err.find("not finite") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "m"));
}

TEST_CASE("benchmark") {
  testing::TempDir dir;
  const auto out = dir / "t.csv";
  const auto r = cli({"benchmark", "--out", out.string(), "--count", "Author=20",
                      "--count", "Paper=30", "--count", "Conf=5", "--count", "Term=5",
                      "--d-values", "2", "4", "--multipliers", "1", "--repeats", "1",
                      "--max-outer", "1", "--max-inner", "2"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto csv = testing::read(out);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(cli({"benchmark", "--out", out.string(), "--count", "Nope=3"}).code == 2);
}
