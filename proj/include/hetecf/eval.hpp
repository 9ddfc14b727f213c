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
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hetecf/graph.hpp"
#include "hetecf/learner.hpp"
#include "hetecf/metapath.hpp"
#include "hetecf/model.hpp"

namespace hetecf {

struct SplitSpec {
  double train_fraction = 0.4;
  std::size_t trials = 10;
  std::uint64_t seed = 1;

  void validate() const;
};

// Random hold-out split of the observed entries. The train side receives
// round(fraction * N) entries, clamped to [1, N - 1]. Deterministic in
// (spec.seed, trial).
std::pair<RatingMatrix, RatingMatrix> split(const RatingMatrix& ratings,
                                            const SplitSpec& spec,
                                            std::size_t trial);

double mae(std::span<const double> pred, std::span<const double> truth);
double rmse(std::span<const double> pred, std::span<const double> truth);

using Predictor = std::function<double(std::size_t user, std::size_t item)>;

// Mean of the user's (item's) training ratings; the global training mean for
// cold rows, and 0.5 when the training set is empty.
Predictor baseline_user_mean(const RatingMatrix& train);
Predictor baseline_item_mean(const RatingMatrix& train);

struct NmfOptions {
  std::size_t dim = 5;
  std::size_t max_iterations = 1000;
  double tol = 1e-7;  // relative improvement of training RMSE
  std::uint64_t seed = 7;
};

struct NmfModel {
  Matrix W;  // users x d, >= 0
  Matrix H;  // d x items, >= 0
  double train_rmse = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::string warning;

  // (W H)_ij clipped to [0, 1].
  double predict(std::size_t user, std::size_t item) const;
};

// Masked multiplicative updates (Lee-Seung, squared loss over observed
// entries only). Returns the iterate with the lowest training RMSE; sets
// `warning` when max_iterations is reached first.
NmfModel baseline_nmf(const RatingMatrix& train, const NmfOptions& options);

enum class Method { kUserMean, kItemMean, kNmf, kHeteCF };

std::string to_string(Method m);
Method parse_method(const std::string& name);

struct ExperimentConfig {
  std::vector<Method> methods{Method::kUserMean, Method::kItemMean,
                              Method::kNmf, Method::kHeteCF};
  std::vector<double> fractions{0.4, 0.6};
  std::vector<std::size_t> dims{5, 10};
  std::size_t trials = 10;
  std::uint64_t seed = 1;
  Hyperparams hp;
  std::size_t nmf_max_iterations = 1000;
  // Trials run concurrently on up to this many threads and are joined in
  // trial order.
  std::size_t jobs = 1;
};

struct MetricCell {
  Method method;
  double fraction = 0.0;
  std::size_t dim = 0;
  std::vector<double> mae;   // one per trial
  std::vector<double> rmse;  // one per trial
  std::string error;         // non-empty if the method failed
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

// Sample standard deviation (n - 1); 0 for a single value.
MeanSd mean_sd(std::span<const double> values);

struct MetricReport {
  std::vector<MetricCell> cells;

  // Columns: method,fraction,d,metric,mean,sd
  std::string to_csv() const;
  // Rows (fraction, d, metric), one column per method, "mean +- sd".
  std::string to_table() const;
};

// For each (fraction, trial): split, fit every method on the training side
// for each d and score MAE/RMSE on the held-out side. A method that throws
// is recorded in its cell and does not stop the others.
MetricReport run_experiment(const RatingMatrix& ratings,
                            const RelationSet& relations,
                            const ExperimentConfig& config);

struct WeightReportRow {
  PathGroup group;
  std::string path;
  double raw = 0.0;
  double normalized = 0.0;  // raw / group max; 0 for an all-zero group
};

std::vector<WeightReportRow> report_weights(const PathWeights& weights,
                                            const MetaPathSpecs& specs);

std::string weights_to_csv(const std::vector<WeightReportRow>& rows);

}  // namespace hetecf
