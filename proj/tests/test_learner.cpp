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

#include <limits>
#include <random>

#include "hetecf/error.hpp"
#include "hetecf/learner.hpp"
#include "oracles.hpp"

using namespace hetecf;
using oracle::Dense;

namespace {

struct Instance {
  oracle::NaiveProblem problem;
  TrainingData data;
  FactorModel model;
  PathWeights weights;
};

Instance random_instance(std::uint64_t seed, std::size_t n, std::size_t m,
                         std::size_t d, std::size_t na, std::size_t nb,
                         std::size_t nw, double scale = 0.7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  auto p = oracle::random_problem(rng, n, m, na, nb, nw, 0.5);
  auto data = oracle::to_training_data(p);
  FactorModel model{Dense::NullaryExpr(n, d, [&] { return g(rng); }),
                    Dense::NullaryExpr(m, d, [&] { return g(rng); })};
  PathWeights w{Vector::NullaryExpr(na, [&] { return u(rng); }),
                Vector::NullaryExpr(nb, [&] { return u(rng); }),
                Vector::NullaryExpr(nw, [&] { return u(rng); })};
  return {std::move(p), std::move(data), std::move(model), std::move(w)};
}

}  // namespace

TEST_CASE("init") {
  Hyperparams hp;
  hp.dim = 4;
  const auto a = init(hp, 5, 6, 2, 1, 3);
  const auto b = init(hp, 5, 6, 2, 1, 3);
  CHECK(a.model.U == b.model.U);
  CHECK(a.model.V == b.model.V);
  CHECK(a.weights.w == b.weights.w);
  CHECK(a.model.U.cwiseAbs().maxCoeff() <= 0.01);
  CHECK(a.weights.alpha.minCoeff() >= 0.0);
  CHECK(a.weights.alpha.maxCoeff() <= 1.0);
  CHECK(a.weights.beta.size() == 1);

  const auto empty = init(hp, 5, 6, 0, 0, 0);
  CHECK(empty.weights.alpha.size() == 0);
  CHECK(empty.weights.w.size() == 0);

  hp.seed = 43;
  CHECK(init(hp, 5, 6, 2, 1, 3).model.U != a.model.U);
  hp.dim = 0;
  CHECK_THROWS_AS(init(hp, 5, 6, 0, 0, 0), InputError);
}

TEST_CASE("factor gradients match central differences") {
  const double lambda = 0.01, mu = 0.4, h = 1e-6;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto inst = random_instance(seed, 6, 5, 3, 2, 2, 2);
    const auto g = grad_factors(inst.model, inst.weights, inst.data, lambda, mu);
    auto J = [&] { return objective(inst.model, inst.weights, inst.data, lambda, mu); };
    for (Eigen::Index i = 0; i < inst.model.U.rows(); ++i) {
      for (Eigen::Index c = 0; c < inst.model.U.cols(); ++c) {
        const double fd = oracle::central_difference(J, inst.model.U(i, c), h);
        CHECK_MESSAGE(oracle::gradient_close(g.dU(i, c), fd),
                      "dU(" << i << "," << c << ") " << g.dU(i, c) << " vs " << fd);
      }
    }
    for (Eigen::Index j = 0; j < inst.model.V.rows(); ++j) {
      for (Eigen::Index c = 0; c < inst.model.V.cols(); ++c) {
        const double fd = oracle::central_difference(J, inst.model.V(j, c), h);
        CHECK_MESSAGE(oracle::gradient_close(g.dV(j, c), fd),
                      "dV(" << j << "," << c << ") " << g.dV(j, c) << " vs " << fd);
      }
    }
  }
}

TEST_CASE("weight gradients match central differences") {
  const double lambda = 0.01, mu = 0.4, h = 1e-6;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto inst = random_instance(seed, 6, 5, 3, 2, 2, 2);
    const auto stats = path_statistics(inst.model, inst.data);
    const auto g = grad_weights(stats, inst.weights, lambda, mu);
    auto J1 = [&] { return weight_objective(inst.weights, stats, lambda, mu); };
    for (auto [vec, grad] : {std::pair{&inst.weights.alpha, &g.alpha},
                             std::pair{&inst.weights.beta, &g.beta},
                             std::pair{&inst.weights.w, &g.w}}) {
      for (Eigen::Index k = 0; k < vec->size(); ++k) {
        const double fd = oracle::central_difference(J1, (*vec)(k), h);
        CHECK(oracle::gradient_close((*grad)(k), fd));
      }
    }
    // The full objective differs from J1 only by weight-free terms.
    auto J = [&] { return objective(inst.model, inst.weights, inst.data, lambda, mu); };
    const double fd = oracle::central_difference(J, inst.weights.alpha(0), h);
    CHECK(oracle::gradient_close(g.alpha(0), fd));
  }
}

TEST_CASE("gradient special cases") {
  auto inst = random_instance(4, 6, 5, 3, 2, 2, 2);
  const double lambda = 0.01;

  SUBCASE("zero factors leave only weight decay in the weight gradient") {
    inst.model.U.setZero();
    inst.model.V.setZero();
    const auto g = grad_weights(inst.model, inst.weights, inst.data, lambda, 0.0);
    CHECK(g.alpha.isApprox(2.0 * lambda * inst.weights.alpha));
    CHECK(g.beta.isApprox(2.0 * lambda * inst.weights.beta));
    CHECK(g.w.isApprox(2.0 * lambda * inst.weights.w));
  }

  SUBCASE("mu = 0 leaves only decay on w") {
    const auto g = grad_weights(inst.model, inst.weights, inst.data, lambda, 0.0);
    CHECK(g.w.isApprox(2.0 * lambda * inst.weights.w));
  }

  SUBCASE("stationary configuration") {
    // Ratings exactly 0.5 everywhere observed, zero factors, no paths.
    const RatingMatrix r(3, 3, {{0, 0, 0.5}, {1, 2, 0.5}, {2, 1, 0.5}});
    const auto data = make_training_data(r, {});
    const FactorModel zero{Matrix::Zero(3, 2), Matrix::Zero(3, 2)};
    const auto g = grad_factors(zero, {}, data, lambda, 0.0);
    CHECK(g.dU.isZero());
    CHECK(g.dV.isZero());
  }

  SUBCASE("disconnected user keeps only the regularizer row") {
    // User 2: no ratings, no similarity mass, no side entries.
    std::mt19937_64 rng(8);
    auto p = oracle::random_problem(rng, 5, 4, 1, 1, 1, 0.6);
    p.ratings.row(2).setZero();
    p.side[0].row(2).setZero();
    p.user_sim[0].row(2).setZero();
    p.user_sim[0].col(2).setZero();
    const auto data = oracle::to_training_data(p);
    std::normal_distribution<double> g(0.0, 0.5);
    const FactorModel model{Dense::NullaryExpr(5, 3, [&] { return g(rng); }),
                            Dense::NullaryExpr(4, 3, [&] { return g(rng); })};
    const PathWeights w{Vector::Ones(1), Vector::Ones(1), Vector::Ones(1)};
    const auto grad = grad_factors(model, w, data, lambda, 0.5);
    const Eigen::RowVectorXd want = 2.0 * lambda * 1.0 * model.U.row(2);
    CHECK((grad.dU.row(2) - want).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("update_factors") {
  auto inst = random_instance(6, 8, 7, 3, 1, 1, 1);
  Hyperparams hp;
  hp.lambda = 0.01;
  const double mu = 0.5;

  SUBCASE("zero step size leaves the state unchanged") {
    hp.learn_rate = 0.0;
    TrainState s{inst.model, inst.weights, 0.0};
    update_factors(s, {inst.data, hp, mu});
    CHECK(s.model.U == inst.model.U);
    CHECK(s.model.V == inst.model.V);
  }

  SUBCASE("infinite tolerance stops after one sweep") {
    hp.inner_tol = std::numeric_limits<double>::infinity();
    TrainState s{inst.model, inst.weights, hp.learn_rate};
    update_factors(s, {inst.data, hp, mu});
    CHECK(s.inner_iterations == 1);
    CHECK(s.converged);
  }

  SUBCASE("single step is plain gradient descent") {
    hp.max_inner = 1;
    TrainState s{inst.model, inst.weights, hp.learn_rate};
    const auto g = grad_factors(inst.model, inst.weights, inst.data, hp.lambda, mu);
    update_factors(s, {inst.data, hp, mu});
    CHECK(s.model.U.isApprox(inst.model.U - hp.learn_rate * g.dU));
    CHECK(s.model.V.isApprox(inst.model.V - hp.learn_rate * g.dV));
  }

  SUBCASE("stochastic mode decreases the objective") {
    hp.optimizer = Optimizer::kStochastic;
    hp.learn_rate = 0.05;
    hp.max_inner = 30;
    TrainState s{inst.model, inst.weights, hp.learn_rate};
    const double before = objective(s.model, s.weights, inst.data, hp.lambda, mu);
    update_factors(s, {inst.data, hp, mu});
    CHECK(s.objective < before);
  }
}

TEST_CASE("accepted-step objective is non-increasing") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto inst = random_instance(seed * 31, 7, 6, 2, 2, 1, 1);
    Hyperparams hp;
    hp.dim = 2;
    hp.seed = seed;
    hp.lambda = 0.01;
    hp.learn_rate = 0.5;
    hp.max_outer = 5;
    hp.max_inner = 20;
    const auto r = train(inst.data, hp);
    for (std::size_t k = 1; k < r.step_trace.size(); ++k) {
      CHECK(r.step_trace[k] <= r.step_trace[k - 1]);
    }
    CHECK(r.objective_trace.back() <= r.objective_trace.front());
    CHECK(r.weights.alpha.minCoeff() >= 0.0);
    CHECK(r.weights.w.minCoeff() >= 0.0);
  }
}

TEST_CASE("update_weights") {
  auto inst = random_instance(12, 6, 5, 3, 2, 2, 1);
  Hyperparams hp;
  hp.lambda = 0.01;

  SUBCASE("pure decay is geometric") {
    inst.model.U.setZero();
    inst.model.V.setZero();
    hp.max_inner = 5;
    TrainState s{inst.model, inst.weights, hp.learn_rate};
    update_weights(s, {inst.data, hp, 0.0});
    const double factor = std::pow(1.0 - 2.0 * hp.lambda * hp.learn_rate, 5);
    CHECK(s.weights.alpha.isApprox(factor * inst.weights.alpha, 1e-12));
    CHECK(s.weights.beta.isApprox(factor * inst.weights.beta, 1e-12));
    CHECK(s.weights.w.isApprox(factor * inst.weights.w, 1e-12));
  }

  SUBCASE("negative proposals are clamped to exactly zero") {
    inst.weights.alpha(0) = 1e-6;
    hp.max_inner = 1;
    TrainState s{inst.model, inst.weights, hp.learn_rate};
    const auto stats = path_statistics(inst.model, inst.data);
    REQUIRE(stats.user_trace(0) * hp.learn_rate > 1e-6);
    update_weights(s, {inst.data, hp, 0.5});
    CHECK(s.weights.alpha(0) == 0.0);
    CHECK(s.weights.alpha.minCoeff() >= 0.0);
  }

  SUBCASE("weight phase reuses the factor-phase objective") {
    hp.max_inner = 3;
    TrainState s{inst.model, inst.weights, hp.learn_rate};
    update_weights(s, {inst.data, hp, 0.5});
    CHECK(s.objective == objective(s.model, s.weights, inst.data, hp.lambda, 0.5));
  }

  SUBCASE("no paths is a no-op") {
    const auto data = make_training_data(inst.data.ratings, {});
    TrainState s{inst.model, {}, hp.learn_rate};
    update_weights(s, {data, hp, 0.5});
    CHECK(s.weights.alpha.size() == 0);
    CHECK(s.model.U == inst.model.U);
  }
}

TEST_CASE("train") {
  auto inst = random_instance(77, 10, 8, 3, 2, 2, 1);
  Hyperparams hp;
  hp.dim = 3;
  hp.max_outer = 4;

  SUBCASE("deterministic") {
    const auto a = train(inst.data, hp);
    const auto b = train(inst.data, hp);
    CHECK(a.model.U == b.model.U);
    CHECK(a.model.V == b.model.V);
    CHECK(a.weights.alpha == b.weights.alpha);
    CHECK(a.objective_trace == b.objective_trace);
  }

  SUBCASE("max_outer = 0 returns the initial state") {
    hp.max_outer = 0;
    const auto r = train(inst.data, hp);
    const auto s = init(hp, 10, 8, 2, 2, 1);
    CHECK(r.model.U == s.model.U);
    CHECK(r.weights.beta == s.weights.beta);
    CHECK(r.objective_trace.size() == 1);
    CHECK(r.log.empty());
  }

  SUBCASE("log rows and callback") {
    std::vector<std::size_t> seen;
    const auto r = train(inst.data, hp, [&](const OuterLogRow& row) {
      seen.push_back(row.iteration);
    });
    CHECK(seen.size() == r.log.size());
    CHECK(r.objective_trace.size() == r.log.size() + 1);
    CHECK(training_log_header().rfind("iteration,objective,", 0) == 0);
    const auto line = training_log_line(r.log.front());
    CHECK(std::count(line.begin(), line.end(), ',') == 7);
  }

  SUBCASE("mu defaults to rating density") {
    const auto r = train(inst.data, hp);
    CHECK(r.mu == mu_from_density(inst.data.ratings));
    hp.mu = 0.25;
    CHECK(train(inst.data, hp).mu == 0.25);
  }
}

TEST_CASE("without meta-paths the learner is plain logistic MF") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    const auto p = oracle::random_problem(rng, 12, 9, 0, 0, 0, 0.35);
    const auto data = oracle::to_training_data(p);
    Hyperparams hp;
    hp.dim = 3;
    hp.seed = seed;
    hp.learn_rate = 0.5;
    hp.mu = 0.9;  // no effect without side relations
    for (std::size_t outer : {1, 2, 5, 20}) {
      hp.max_outer = outer;
      const auto got = train(data, hp);
      const auto want = oracle::plain_mf(p.ratings, hp);
      CHECK((got.model.U - want.U).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((got.model.V - want.V).cwiseAbs().maxCoeff() < 1e-12);
      REQUIRE(got.objective_trace.size() == want.trace.size());
      for (std::size_t k = 0; k < want.trace.size(); ++k) {
        CHECK(got.objective_trace[k] == doctest::Approx(want.trace[k]).epsilon(1e-12));
      }
    }
  }
}
