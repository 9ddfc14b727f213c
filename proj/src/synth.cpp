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

#include "hetecf/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "hetecf/error.hpp"
#include "io_util.hpp"

namespace hetecf {

Schema dblp_schema() {
  return Schema({"Author", "Paper", "Conf", "Term"}, "Author", "Conf",
                {{"writes", "Author", "Paper"},
                 {"published_in", "Paper", "Conf"},
                 {"contains", "Paper", "Term"},
                 {"cites", "Paper", "Paper"}});
}

MetaPathSpecs dblp_metapaths(const Schema& schema) {
  auto p = [&](const char* text) { return MetaPath::parse(schema, text); };
  MetaPathSpecs specs;
  specs.user_user = {
      p("Author -writes-> Paper <-writes- Author"),
      p("Author -writes-> Paper -published_in-> Conf <-published_in- Paper "
        "<-writes- Author"),
      p("Author -writes-> Paper -contains-> Term <-contains- Paper "
        "<-writes- Author"),
  };
  specs.item_item = {
      p("Conf <-published_in- Paper <-writes- Author -writes-> Paper "
        "-published_in-> Conf"),
      p("Conf <-published_in- Paper -cites-> Paper -published_in-> Conf"),
      p("Conf <-published_in- Paper -contains-> Term <-contains- Paper "
        "-published_in-> Conf"),
  };
  specs.user_item = {
      p("Author -writes-> Paper -contains-> Term <-contains- Paper "
        "-published_in-> Conf"),
      p("Author -writes-> Paper -cites-> Paper -published_in-> Conf"),
  };
  return specs;
}

MetaPath dblp_target(const Schema& schema) {
  return MetaPath::parse(schema, "Author -writes-> Paper -published_in-> Conf");
}

Schema meetup_schema() {
  return Schema({"User", "Group", "Event", "Location"}, "User", "Group",
                {{"friend", "User", "User"},
                 {"member", "User", "Group"},
                 {"attends", "User", "Event"},
                 {"lives_in", "User", "Location"},
                 {"hosts", "Group", "Event"},
                 {"held_at", "Event", "Location"}});
}

MetaPathSpecs meetup_metapaths(const Schema& schema) {
  auto p = [&](const char* text) { return MetaPath::parse(schema, text); };
  MetaPathSpecs specs;
  specs.user_user = {
      p("User -lives_in-> Location <-lives_in- User"),
      p("User -member-> Group <-member- User"),
      p("User -attends-> Event <-attends- User"),
      p("User -friend-> User"),
  };
  specs.item_item = {
      p("Group <-member- User -member-> Group"),
      p("Group -hosts-> Event -held_at-> Location <-held_at- Event "
        "<-hosts- Group"),
      p("Group <-member- User -friend-> User -member-> Group"),
  };
  specs.user_item = {
      p("User -friend-> User -member-> Group"),
      p("User -attends-> Event <-hosts- Group"),
      p("User -lives_in-> Location <-held_at- Event <-hosts- Group"),
  };
  return specs;
}

MetaPath meetup_target(const Schema& schema) {
  return MetaPath::parse(schema, "User -member-> Group");
}

void SynthSpec::validate() const {
  for (const auto& type : schema.node_types()) {
    auto it = counts.find(type);
    if (it == counts.end() || it->second == 0) {
      throw InputError("synthetic spec: count for type '" + type +
                       "' must be >= 1");
    }
  }
  auto check = [](double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InputError("synthetic spec: link probability must be in [0, 1]");
    }
  };
  check(default_probability);
  for (const auto& [rel, p] : link_probability) {
    schema.relation(rel);
    check(p);
  }
}

double SynthSpec::probability(const std::string& relation) const {
  auto it = link_probability.find(relation);
  return it == link_probability.end() ? default_probability : it->second;
}

SynthSpec SynthSpec::scaled(double factor) const {
  SynthSpec out = *this;
  for (auto& [type, count] : out.counts) {
    count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(count) * factor)));
  }
  return out;
}

HeteroGraph generate(const SynthSpec& spec) {
  spec.validate();
  HeteroGraph::Builder builder(spec.schema);
  for (const auto& type : spec.schema.node_types()) {
    const auto n = spec.counts.at(type);
    for (std::size_t k = 0; k < n; ++k) {
      builder.add_node(type + std::to_string(k), type);
    }
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (const auto& rel : spec.schema.relations()) {
    const double p = spec.probability(rel.name);
    const auto ns = spec.counts.at(rel.source);
    const auto nt = spec.counts.at(rel.target);
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t t = 0; t < nt; ++t) {
        if (rel.source == rel.target && s == t) continue;
        // Always draw so the stream layout does not depend on p.
        if (coin(rng) < p) {
          builder.add_edge(rel.source + std::to_string(s),
                           rel.target + std::to_string(t), rel.name);
        }
      }
    }
  }
  return std::move(builder).build();
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

struct Cell {
  TimingRow row;
  std::optional<TrainingData> data;
  Hyperparams hp;
  std::vector<double> times;
};

Cell prepare_cell(const std::string& sweep, const SynthSpec& spec, std::size_t d,
                  const BenchmarkConfig& config) {
  Cell cell;
  cell.row.sweep = sweep;
  cell.row.d = d;
  cell.row.iterations = config.hp.max_outer;
  try {
    const auto graph = generate(spec);
    const auto& schema = graph.schema();
    cell.row.n = graph.node_count(schema.user_type());
    cell.row.m = graph.node_count(schema.item_type());
    cell.row.edges = graph.total_edges();
    // The preset paths only exist for the preset schemas.
    const bool dblp = schema == dblp_schema();
    const auto specs = dblp ? dblp_metapaths(schema) : meetup_metapaths(schema);
    const auto target = dblp ? dblp_target(schema) : meetup_target(schema);
    const auto relations =
        build_relation_set(graph, specs, PathSimVariant::kRowCol);
    cell.data = make_training_data(derive_ratings(graph, target), relations);
    cell.hp = config.hp;
    cell.hp.dim = d;
    cell.hp.inner_tol = 0.0;
    cell.hp.outer_tol = 0.0;
    cell.hp.validate();
  } catch (const std::exception& e) {
    cell.row.error = e.what();
    cell.data.reset();
  }
  return cell;
}

void time_cell(Cell& cell) {
  if (!cell.data) return;
  try {
    const auto start = std::chrono::steady_clock::now();
    const auto result = train(*cell.data, cell.hp);
    cell.times.push_back(seconds_since(start));
  } catch (const std::exception& e) {
    cell.row.error = e.what();
    cell.data.reset();
  }
}

TimingRow finish_cell(Cell& cell) {
  auto row = cell.row;
  if (!row.error.empty() || cell.times.empty()) {
    row.seconds_median = row.seconds_min = row.seconds_max =
        std::numeric_limits<double>::quiet_NaN();
    return row;
  }
  auto& t = cell.times;
  std::sort(t.begin(), t.end());
  row.seconds_min = t.front();
  row.seconds_max = t.back();
  row.seconds_median = t.size() % 2 ? t[t.size() / 2]
                                    : 0.5 * (t[t.size() / 2 - 1] + t[t.size() / 2]);
  return row;
}

}  // namespace

// Repeats are interleaved across cells so slow periods on a shared machine
// hit every cell alike.
std::vector<TimingRow> scaling_benchmark(const BenchmarkConfig& config) {
  std::vector<Cell> cells;
  if (config.d_sweep) {
    for (auto d : config.d_values) {
      cells.push_back(prepare_cell("d", config.base, d, config));
    }
  }
  if (config.size_sweep) {
    for (double factor : config.size_multipliers) {
      cells.push_back(
          prepare_cell("size", config.base.scaled(factor), config.fixed_d, config));
    }
  }
  for (std::size_t r = 0; r < std::max<std::size_t>(1, config.repeats); ++r) {
    for (auto& cell : cells) time_cell(cell);
  }
  std::vector<TimingRow> rows;
  for (auto& cell : cells) rows.push_back(finish_cell(cell));
  return rows;
}

std::string timings_to_csv(const std::vector<TimingRow>& rows) {
  std::ostringstream out;
  out << "d,n,m,edges,iterations,seconds_median,seconds_min,seconds_max\n";
  for (const auto& r : rows) {
    out << r.d << ',' << r.n << ',' << r.m << ',' << r.edges << ','
        << r.iterations << ',' << detail::format_double(r.seconds_median) << ','
        << detail::format_double(r.seconds_min) << ','
        << detail::format_double(r.seconds_max) << '\n';
  }
  return out.str();
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InputError("fit_line: need at least two (x, y) pairs");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  LinearFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 0.0;
  return fit;
}

}  // namespace hetecf
