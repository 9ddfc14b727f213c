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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hetecf/graph.hpp"
#include "hetecf/metapath.hpp"

namespace hetecf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// 1 / (1 + exp(-x)), evaluated without overflow for any finite x.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// d/dx logistic(x) given y = logistic(x).
inline double logistic_slope(double y) { return y * (1.0 - y); }

// Latent user factors U (users x d) and item factors V (items x d).
struct FactorModel {
  Matrix U;
  Matrix V;

  std::size_t users() const { return static_cast<std::size_t>(U.rows()); }
  std::size_t items() const { return static_cast<std::size_t>(V.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(U.cols()); }
};

// logistic(U_i . V_j). Throws std::out_of_range on bad indices.
double predict(const FactorModel& model, std::size_t user, std::size_t item);

// Importance of each meta-path: alpha for user-user paths, beta for
// item-item paths, w for user-item paths.
struct PathWeights {
  Vector alpha;
  Vector beta;
  Vector w;
};

enum class Optimizer { kFullBatch, kStochastic };

struct Hyperparams {
  double lambda = 0.001;
  // nullopt: use mu_from_density() of the training ratings.
  std::optional<double> mu;
  double learn_rate = 0.1;
  double inner_tol = 1e-4;
  double outer_tol = 1e-4;
  std::size_t max_inner = 100;
  std::size_t max_outer = 50;
  std::size_t dim = 10;
  std::uint64_t seed = 42;
  Optimizer optimizer = Optimizer::kFullBatch;

  // Range checks applied to user-supplied settings. Throws InputError.
  void validate() const;
};

// Fraction of observed entries, sum(I) / (n m).
double mu_from_density(const RatingMatrix& ratings);

double effective_mu(const Hyperparams& hp, const RatingMatrix& ratings);

// D - S with D(i,i) = sum_j S(i,j). Throws InputError if S is not square,
// has negative entries, or is asymmetric beyond 1e-9.
SparseMatrix laplacian(const SparseMatrix& similarity);

// Everything the objective needs besides the parameters, precomputed once
// per training run.
struct TrainingData {
  RatingMatrix ratings;
  std::vector<SparseMatrix> user_laplacians;  // L_A^k
  std::vector<SparseMatrix> item_laplacians;  // L_B^k
  std::vector<RatingMatrix> side_ratings;     // user-item relation graphs
  // Weighted-lambda row weights: rating counts, 1 for cold rows.
  Vector user_reg;
  Vector item_reg;

  std::size_t users() const { return ratings.users(); }
  std::size_t items() const { return ratings.items(); }
};

TrainingData make_training_data(RatingMatrix ratings,
                                const RelationSet& relations);

struct ObjectiveTerms {
  double fit = 0.0;         // sum over observed R of (f - R)^2
  double user_graph = 0.0;  // sum_k alpha_k Tr(U^T L_A^k U)
  double item_graph = 0.0;  // sum_k beta_k Tr(V^T L_B^k V)
  double side_fit = 0.0;    // mu sum_k w_k sum over observed R^k
  double regularization = 0.0;

  double total() const {
    return fit + user_graph + item_graph + side_fit + regularization;
  }
};

// Everything J depends on through U and V. Given these, J is linear in the
// path weights plus the lambda |.|^2 terms.
struct PathStatistics {
  double fit = 0.0;          // sum over observed R of (f(U_i.V_j) - R_ij)^2
  double factor_norm = 0.0;  // sum_i n_i |U_i|^2 + sum_j n_j |V_j|^2
  Vector user_trace;         // Tr(U^T L_A^k U)
  Vector item_trace;         // Tr(V^T L_B^k V)
  Vector side_residual;      // sum over observed R^k of (f - R^k_ij)^2
};

PathStatistics path_statistics(const FactorModel& model,
                               const TrainingData& data);

// J from precomputed statistics. objective_terms() is exactly this applied to
// path_statistics(), so both routes agree to the last bit.
ObjectiveTerms assemble_objective(const PathStatistics& stats,
                                  const PathWeights& weights, double lambda,
                                  double mu);

// The unified objective J. Throws NumericalError naming the first
// non-finite term.
ObjectiveTerms objective_terms(const FactorModel& model,
                               const PathWeights& weights,
                               const TrainingData& data, double lambda,
                               double mu);

double objective(const FactorModel& model, const PathWeights& weights,
                 const TrainingData& data, double lambda, double mu);

// The weight-phase objective J1 (U, V fixed):
// sum alpha_k T_A^k + sum beta_k T_B^k + mu sum w_k E_k
//   + lambda (|A|^2 + |B|^2 + |W|^2).
double weight_objective(const PathWeights& weights,
                        const PathStatistics& stats, double lambda, double mu);

// --- model file ------------------------------------------------------------

// Plain-text, versioned. Floating point values are written as C99 hex
// floats so a save/load cycle is bit-exact:
//
//   hetecf-model 1
//   shape <n> <m> <d>
//   paths <N_A> <N_B> <N_W>
//   graph <16 hex digits>
//   lambda <x>
//   mu <x>
//   learn_rate <x>
//   seed <s>
//   U
//   <n lines of d values>
//   V
//   <m lines of d values>
//   alpha <N_A values>
//   beta <N_B values>
//   w <N_W values>
//   end
struct ModelFile {
  FactorModel model;
  PathWeights weights;
  std::uint64_t graph_hash = 0;
  double lambda = 0.0;
  double mu = 0.0;
  double learn_rate = 0.0;
  std::uint64_t seed = 0;
};

void save_model(const std::filesystem::path& path, const ModelFile& file);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace hetecf
