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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "hetecf/error.hpp"
#include "hetecf/model.hpp"

namespace hetecf {

struct TrainState {
  FactorModel model;
  PathWeights weights;
  double learn_rate = 0.1;
  double objective = 0.0;
  std::size_t outer_iterations = 0;
  std::size_t inner_iterations = 0;  // proposals made in the last phase
  bool converged = false;
};

// U, V ~ U[-0.01, 0.01]; weights ~ U[0, 1]. Draw order: U row-major, V
// row-major, alpha, beta, w, all from one mt19937_64 seeded with hp.seed.
// Throws InputError for d == 0.
TrainState init(const Hyperparams& hp, std::size_t users, std::size_t items,
                std::size_t user_paths, std::size_t item_paths,
                std::size_t user_item_paths);

struct FactorGradient {
  Matrix dU;
  Matrix dV;
};

struct WeightGradient {
  Vector alpha;
  Vector beta;
  Vector w;
};

// Exact gradient of J with respect to U and V.
FactorGradient grad_factors(const FactorModel& model,
                            const PathWeights& weights,
                            const TrainingData& data, double lambda, double mu);

// Exact gradient of the weight-phase objective J1.
WeightGradient grad_weights(const PathStatistics& stats,
                            const PathWeights& weights, double lambda,
                            double mu);
WeightGradient grad_weights(const FactorModel& model,
                            const PathWeights& weights,
                            const TrainingData& data, double lambda, double mu);

// |new - old|_F / (|old|_F + 1e-12)
double relative_change(const Matrix& next, const Matrix& prev);
double relative_change(const Vector& next, const Vector& prev);

// Thrown when J refuses to decrease after repeated step halving. Carries the
// accepted-step J trace for diagnosis.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::vector<double> trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

// Context shared by the phase updates.
struct PhaseContext {
  const TrainingData& data;
  const Hyperparams& hp;
  double mu;
  // Appended with J after every accepted step, when non-null.
  std::vector<double>* step_trace = nullptr;
};

// Inner loop over (U, V) with weights fixed. Full-batch: a proposal that
// raises J is rejected and the step size halved; more than 10 consecutive
// halvings throws DivergenceError. A rejected proposal smaller than
// inner_tol counts as convergence. Stochastic: one proposal is an epoch of
// per-entry updates; the step size is halved after 5 consecutive epochs
// that raise J.
void update_factors(TrainState& state, const PhaseContext& ctx);

// Inner loop over (alpha, beta, w) with U, V fixed: projected gradient steps
// max(0, theta - lr * grad) with the full-batch guard above.
void update_weights(TrainState& state, const PhaseContext& ctx);

struct OuterLogRow {
  std::size_t iteration = 0;
  double objective = 0.0;
  double change_U = 0.0;
  double change_V = 0.0;
  double change_alpha = 0.0;
  double change_beta = 0.0;
  double change_w = 0.0;
  double learn_rate = 0.0;
};

// CSV header and row for the training log.
std::string training_log_header();
std::string training_log_line(const OuterLogRow& row);

struct TrainResult {
  FactorModel model;
  PathWeights weights;
  double mu = 0.0;
  double learn_rate = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;  // initial J, then one per outer step
  std::vector<double> step_trace;       // initial J, then each accepted step
  std::vector<OuterLogRow> log;
};

using OuterCallback = std::function<void(const OuterLogRow&)>;

// Alternates update_factors / update_weights until every block's relative
// change over an outer iteration is below outer_tol, or max_outer.
TrainResult train(const TrainingData& data, const Hyperparams& hp,
                  const OuterCallback& on_outer = {});

// Builds TrainingData (Laplacians etc.) from the relation set and trains.
TrainResult train(const RatingMatrix& ratings, const RelationSet& relations,
                  const Hyperparams& hp, const OuterCallback& on_outer = {});

}  // namespace hetecf
