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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hetecf/graph.hpp"
#include "hetecf/learner.hpp"
#include "hetecf/metapath.hpp"

namespace hetecf {

// Bibliographic schema: Author (user), Paper, Conf (item), Term with
// writes, published_in, contains and cites.
Schema dblp_schema();
// The three user-user, three item-item and two user-item paths used for the
// bibliographic network, plus the Author-Paper-Conf target path.
MetaPathSpecs dblp_metapaths(const Schema& schema);
MetaPath dblp_target(const Schema& schema);

// Event-based social network: User (user), Group (item), Event, Location.
Schema meetup_schema();
MetaPathSpecs meetup_metapaths(const Schema& schema);
MetaPath meetup_target(const Schema& schema);

struct SynthSpec {
  Schema schema = dblp_schema();
  std::map<std::string, std::size_t> counts;  // per node type, >= 1
  std::map<std::string, double> link_probability;  // per relation
  double default_probability = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
  double probability(const std::string& relation) const;
  // Same spec with every type count multiplied by `factor` (rounded, >= 1).
  SynthSpec scaled(double factor) const;
};

// Every (source, target) pair of every relation is linked independently
// with the relation's probability (no self-loops for same-type relations).
// Node ids are "<Type><index>". Deterministic under spec.seed.
HeteroGraph generate(const SynthSpec& spec);

struct BenchmarkConfig {
  SynthSpec base;
  std::vector<std::size_t> d_values{5, 10, 20, 40};
  std::vector<double> size_multipliers{1.0, 1.5, 2.0, 2.5};
  std::size_t fixed_d = 10;
  std::size_t repeats = 3;
  // Iteration caps; tolerances are forced to 0 so every cell runs exactly
  // max_outer x max_inner proposals per phase.
  Hyperparams hp;
  bool d_sweep = true;
  bool size_sweep = true;
};

struct TimingRow {
  std::string sweep;  // "d" or "size"
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t edges = 0;
  std::size_t iterations = 0;  // outer iterations
  double seconds_median = 0.0;
  double seconds_min = 0.0;
  double seconds_max = 0.0;
  std::string error;
};

// Wall-clock training time per cell; cells run sequentially. Similarity
// computation and Laplacian assembly are outside the timed region.
std::vector<TimingRow> scaling_benchmark(const BenchmarkConfig& config);

// Columns: d,n,m,edges,iterations,seconds_median,seconds_min,seconds_max
std::string timings_to_csv(const std::vector<TimingRow>& rows);

// Ordinary least squares y = a + b x. Returns {slope, r_squared}.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace hetecf
