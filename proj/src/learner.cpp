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

#include "hetecf/learner.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "hetecf/error.hpp"
#include "io_util.hpp"

namespace hetecf {

namespace {

constexpr std::size_t kMaxHalvings = 10;
constexpr std::size_t kSgdPatience = 5;

Vector uniform_vector(std::mt19937_64& rng, std::size_t n, double lo,
                      double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = dist(rng);
  return v;
}

Matrix uniform_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                      double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  }
  return m;
}

// Adds 2 * scale * f'(x) (f(x) - r) times the partner row for every observed
// entry of `ratings`.
void accumulate_fit(const FactorModel& model, const RatingMatrix& ratings,
                    double scale, Matrix& dU, Matrix& dV) {
  for (const auto& e : ratings.entries()) {
    const auto i = static_cast<Eigen::Index>(e.user);
    const auto j = static_cast<Eigen::Index>(e.item);
    const double y = logistic(model.U.row(i).dot(model.V.row(j)));
    const double s = 2.0 * scale * logistic_slope(y) * (y - e.value);
    dU.row(i) += s * model.V.row(j);
    dV.row(j) += s * model.U.row(i);
  }
}

double total_weights(const PathWeights& w) {
  return static_cast<double>(w.alpha.size() + w.beta.size() + w.w.size());
}

// J at a proposal, NaN if any term is not finite.
double try_objective(const FactorModel& model, const PathWeights& weights,
                     const PhaseContext& ctx) {
  try {
    return objective(model, weights, ctx.data, ctx.hp.lambda, ctx.mu);
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

[[noreturn]] void diverged(const char* phase, const PhaseContext& ctx) {
  throw DivergenceError(
      std::string(phase) + ": objective kept increasing after " +
          std::to_string(kMaxHalvings) + " step-size halvings",
      ctx.step_trace ? *ctx.step_trace : std::vector<double>{});
}

void record(const PhaseContext& ctx, double j) {
  if (ctx.step_trace) ctx.step_trace->push_back(j);
}

void update_factors_sgd(TrainState& state, const PhaseContext& ctx) {
  const auto& data = ctx.data;
  const auto& hp = ctx.hp;

  struct Entry {
    std::size_t user, item;
    double value, scale;
  };
  std::vector<Entry> entries;
  for (const auto& e : data.ratings.entries()) {
    entries.push_back({e.user, e.item, e.value, 1.0});
  }
  for (std::size_t k = 0; k < data.side_ratings.size(); ++k) {
    const double scale = ctx.mu * state.weights.w[static_cast<Eigen::Index>(k)];
    if (scale == 0.0) continue;
    for (const auto& e : data.side_ratings[k].entries()) {
      entries.push_back({e.user, e.item, e.value, scale});
    }
  }

  std::mt19937_64 rng(hp.seed ^ (0x9e3779b97f4a7c15ULL *
                                 (state.outer_iterations + 1)));
  double lr = state.learn_rate;
  double j = try_objective(state.model, state.weights, ctx);
  std::size_t rises = 0, halvings = 0;
  state.converged = false;
  state.inner_iterations = 0;

  for (std::size_t it = 0; it < hp.max_inner; ++it) {
    ++state.inner_iterations;
    const FactorModel prev = state.model;
    auto& U = state.model.U;
    auto& V = state.model.V;
    std::shuffle(entries.begin(), entries.end(), rng);
    for (const auto& e : entries) {
      const auto i = static_cast<Eigen::Index>(e.user);
      const auto k = static_cast<Eigen::Index>(e.item);
      const double y = logistic(U.row(i).dot(V.row(k)));
      const double s = 2.0 * e.scale * logistic_slope(y) * (y - e.value);
      const Eigen::RowVectorXd ui = U.row(i);
      U.row(i) -= lr * s * V.row(k);
      V.row(k) -= lr * s * ui;
    }
    Matrix gU = 2.0 * hp.lambda * data.user_reg.asDiagonal() * U;
    Matrix gV = 2.0 * hp.lambda * data.item_reg.asDiagonal() * V;
    for (std::size_t k = 0; k < data.user_laplacians.size(); ++k) {
      gU += 2.0 * state.weights.alpha[static_cast<Eigen::Index>(k)] *
            (data.user_laplacians[k] * U);
    }
    for (std::size_t k = 0; k < data.item_laplacians.size(); ++k) {
      gV += 2.0 * state.weights.beta[static_cast<Eigen::Index>(k)] *
            (data.item_laplacians[k] * V);
    }
    U -= lr * gU;
    V -= lr * gV;
    if (!U.allFinite() || !V.allFinite()) {
      throw NumericalError("stochastic update produced non-finite factors");
    }

    const double next = try_objective(state.model, state.weights, ctx);
    if (!std::isfinite(next)) {
      throw NumericalError("stochastic update produced a non-finite objective");
    }
    record(ctx, next);
    rises = next > j ? rises + 1 : 0;
    j = next;
    if (rises == kSgdPatience) {
      if (halvings == kMaxHalvings) diverged("stochastic factor update", ctx);
      lr *= 0.5;
      ++halvings;
      rises = 0;
    }
    if (relative_change(U, prev.U) < hp.inner_tol &&
        relative_change(V, prev.V) < hp.inner_tol) {
      state.converged = true;
      break;
    }
  }
  state.objective = j;
  state.learn_rate = lr;
}

}  // namespace

TrainState init(const Hyperparams& hp, std::size_t users, std::size_t items,
                std::size_t user_paths, std::size_t item_paths,
                std::size_t user_item_paths) {
  if (hp.dim == 0) throw InputError("latent dimension d must be >= 1");
  std::mt19937_64 rng(hp.seed);
  TrainState s;
  s.model.U = uniform_matrix(rng, users, hp.dim, -0.01, 0.01);
  s.model.V = uniform_matrix(rng, items, hp.dim, -0.01, 0.01);
  s.weights.alpha = uniform_vector(rng, user_paths, 0.0, 1.0);
  s.weights.beta = uniform_vector(rng, item_paths, 0.0, 1.0);
  s.weights.w = uniform_vector(rng, user_item_paths, 0.0, 1.0);
  s.learn_rate = hp.learn_rate;
  return s;
}

FactorGradient grad_factors(const FactorModel& model,
                            const PathWeights& weights,
                            const TrainingData& data, double lambda,
                            double mu) {
  FactorGradient g{Matrix::Zero(model.U.rows(), model.U.cols()),
                   Matrix::Zero(model.V.rows(), model.V.cols())};
  accumulate_fit(model, data.ratings, 1.0, g.dU, g.dV);
  for (std::size_t k = 0; k < data.user_laplacians.size(); ++k) {
    g.dU += 2.0 * weights.alpha[static_cast<Eigen::Index>(k)] *
            (data.user_laplacians[k] * model.U);
  }
  for (std::size_t k = 0; k < data.item_laplacians.size(); ++k) {
    g.dV += 2.0 * weights.beta[static_cast<Eigen::Index>(k)] *
            (data.item_laplacians[k] * model.V);
  }
  for (std::size_t k = 0; k < data.side_ratings.size(); ++k) {
    const double scale = mu * weights.w[static_cast<Eigen::Index>(k)];
    if (scale != 0.0) {
      accumulate_fit(model, data.side_ratings[k], scale, g.dU, g.dV);
    }
  }
  g.dU += 2.0 * lambda * data.user_reg.asDiagonal() * model.U;
  g.dV += 2.0 * lambda * data.item_reg.asDiagonal() * model.V;
  if (!g.dU.allFinite() || !g.dV.allFinite()) {
    throw NumericalError("factor gradient is not finite");
  }
  return g;
}

WeightGradient grad_weights(const PathStatistics& stats,
                            const PathWeights& weights, double lambda,
                            double mu) {
  WeightGradient g;
  g.alpha = stats.user_trace + 2.0 * lambda * weights.alpha;
  g.beta = stats.item_trace + 2.0 * lambda * weights.beta;
  g.w = mu * stats.side_residual + 2.0 * lambda * weights.w;
  if (!g.alpha.allFinite() || !g.beta.allFinite() || !g.w.allFinite()) {
    throw NumericalError("weight gradient is not finite");
  }
  return g;
}

WeightGradient grad_weights(const FactorModel& model,
                            const PathWeights& weights,
                            const TrainingData& data, double lambda,
                            double mu) {
  return grad_weights(path_statistics(model, data), weights, lambda, mu);
}

double relative_change(const Matrix& next, const Matrix& prev) {
  return (next - prev).norm() / (prev.norm() + 1e-12);
}

double relative_change(const Vector& next, const Vector& prev) {
  return (next - prev).norm() / (prev.norm() + 1e-12);
}

void update_factors(TrainState& state, const PhaseContext& ctx) {
  if (ctx.hp.optimizer == Optimizer::kStochastic) {
    update_factors_sgd(state, ctx);
    return;
  }
  const auto& hp = ctx.hp;
  double lr = state.learn_rate;
  double j = objective(state.model, state.weights, ctx.data, hp.lambda, ctx.mu);
  auto g = grad_factors(state.model, state.weights, ctx.data, hp.lambda, ctx.mu);
  std::size_t halvings = 0;
  state.converged = false;
  state.inner_iterations = 0;

  for (std::size_t it = 0; it < hp.max_inner; ++it) {
    ++state.inner_iterations;
    FactorModel next{state.model.U - lr * g.dU, state.model.V - lr * g.dV};
    const bool small = relative_change(next.U, state.model.U) < hp.inner_tol &&
                       relative_change(next.V, state.model.V) < hp.inner_tol;
    const double candidate = try_objective(next, state.weights, ctx);
    if (candidate <= j) {
      state.model = std::move(next);
      j = candidate;
      record(ctx, j);
      halvings = 0;
      if (small) {
        state.converged = true;
        break;
      }
      g = grad_factors(state.model, state.weights, ctx.data, hp.lambda, ctx.mu);
    } else {
      if (small) {
        state.converged = true;
        break;
      }
      if (halvings == kMaxHalvings) diverged("factor update", ctx);
      lr *= 0.5;
      ++halvings;
    }
  }
  state.objective = j;
  state.learn_rate = lr;
}

void update_weights(TrainState& state, const PhaseContext& ctx) {
  state.inner_iterations = 0;
  if (total_weights(state.weights) == 0.0) {
    state.converged = true;
    return;
  }
  const auto& hp = ctx.hp;
  const auto stats = path_statistics(state.model, ctx.data);
  auto eval = [&](const PathWeights& w) {
    try {
      return assemble_objective(stats, w, hp.lambda, ctx.mu).total();
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  auto project = [](const Vector& v) -> Vector { return v.cwiseMax(0.0); };

  double lr = state.learn_rate;
  double j = eval(state.weights);
  auto g = grad_weights(stats, state.weights, hp.lambda, ctx.mu);
  std::size_t halvings = 0;
  state.converged = false;

  for (std::size_t it = 0; it < hp.max_inner; ++it) {
    ++state.inner_iterations;
    const auto& w = state.weights;
    PathWeights next{project(w.alpha - lr * g.alpha),
                     project(w.beta - lr * g.beta), project(w.w - lr * g.w)};
    const bool small = relative_change(next.alpha, w.alpha) < hp.inner_tol &&
                       relative_change(next.beta, w.beta) < hp.inner_tol &&
                       relative_change(next.w, w.w) < hp.inner_tol;
    const double candidate = eval(next);
    if (candidate <= j) {
      state.weights = std::move(next);
      j = candidate;
      record(ctx, j);
      halvings = 0;
      if (small) {
        state.converged = true;
        break;
      }
      g = grad_weights(stats, state.weights, hp.lambda, ctx.mu);
    } else {
      if (small) {
        state.converged = true;
        break;
      }
      if (halvings == kMaxHalvings) diverged("weight update", ctx);
      lr *= 0.5;
      ++halvings;
    }
  }
  state.objective = j;
  state.learn_rate = lr;
}

std::string training_log_header() {
  return "iteration,objective,change_U,change_V,change_alpha,change_beta,"
         "change_w,learn_rate";
}

std::string training_log_line(const OuterLogRow& row) {
  std::ostringstream out;
  out << row.iteration << ',' << detail::format_double(row.objective) << ','
      << detail::format_double(row.change_U) << ','
      << detail::format_double(row.change_V) << ','
      << detail::format_double(row.change_alpha) << ','
      << detail::format_double(row.change_beta) << ','
      << detail::format_double(row.change_w) << ','
      << detail::format_double(row.learn_rate);
  return out.str();
}

TrainResult train(const TrainingData& data, const Hyperparams& hp,
                  const OuterCallback& on_outer) {
  hp.validate();
  TrainResult result;
  result.mu = effective_mu(hp, data.ratings);
  TrainState state =
      init(hp, data.users(), data.items(), data.user_laplacians.size(),
           data.item_laplacians.size(), data.side_ratings.size());
  state.objective =
      objective(state.model, state.weights, data, hp.lambda, result.mu);
  result.objective_trace.push_back(state.objective);
  result.step_trace.push_back(state.objective);
  const PhaseContext ctx{data, hp, result.mu, &result.step_trace};

  for (std::size_t t = 1; t <= hp.max_outer; ++t) {
    const TrainState before = state;
    update_factors(state, ctx);
    update_weights(state, ctx);
    state.outer_iterations = t;

    OuterLogRow row;
    row.iteration = t;
    row.objective = state.objective;
    row.change_U = relative_change(state.model.U, before.model.U);
    row.change_V = relative_change(state.model.V, before.model.V);
    row.change_alpha = relative_change(state.weights.alpha, before.weights.alpha);
    row.change_beta = relative_change(state.weights.beta, before.weights.beta);
    row.change_w = relative_change(state.weights.w, before.weights.w);
    row.learn_rate = state.learn_rate;
    result.objective_trace.push_back(state.objective);
    result.log.push_back(row);
    if (on_outer) on_outer(row);

    const double worst = std::max({row.change_U, row.change_V, row.change_alpha,
                                   row.change_beta, row.change_w});
    if (worst < hp.outer_tol) {
      result.converged = true;
      break;
    }
  }
  result.model = std::move(state.model);
  result.weights = std::move(state.weights);
  result.learn_rate = state.learn_rate;
  return result;
}

TrainResult train(const RatingMatrix& ratings, const RelationSet& relations,
                  const Hyperparams& hp, const OuterCallback& on_outer) {
  return train(make_training_data(ratings, relations), hp, on_outer);
}

}  // namespace hetecf
