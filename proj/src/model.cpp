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

#include "hetecf/model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "hetecf/error.hpp"
#include "io_util.hpp"

namespace hetecf {

double predict(const FactorModel& model, std::size_t user, std::size_t item) {
  if (user >= model.users() || item >= model.items()) {
    throw std::out_of_range("predict: index (" + std::to_string(user) + ", " +
                            std::to_string(item) + ") out of range");
  }
  const auto i = static_cast<Eigen::Index>(user);
  const auto j = static_cast<Eigen::Index>(item);
  return logistic(model.U.row(i).dot(model.V.row(j)));
}

void Hyperparams::validate() const {
  auto fail = [](const std::string& what) { throw InputError(what); };
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail("lambda must be > 0");
  if (mu && !(*mu >= 0.0 && *mu <= 1.0)) fail("mu must be in [0, 1]");
  if (!(learn_rate > 0.0 && learn_rate < 1.0)) {
    fail("learn_rate must be in (0, 1)");
  }
  if (!(inner_tol >= 0.0 && inner_tol < 1.0)) {
    fail("inner_tol must be in [0, 1)");
  }
  if (!(outer_tol >= 0.0 && outer_tol < 1.0)) {
    fail("outer_tol must be in [0, 1)");
  }
  if (dim == 0) fail("latent dimension d must be >= 1");
}

double mu_from_density(const RatingMatrix& ratings) {
  if (ratings.users() == 0 || ratings.items() == 0) {
    throw InputError("mu_from_density: rating matrix has an empty dimension");
  }
  std::size_t observed = 0;
  for (const auto& e : ratings.entries()) {
    if (e.value != 0.0) ++observed;
  }
  return static_cast<double>(observed) /
         (static_cast<double>(ratings.users()) *
          static_cast<double>(ratings.items()));
}

double effective_mu(const Hyperparams& hp, const RatingMatrix& ratings) {
  return hp.mu ? *hp.mu : mu_from_density(ratings);
}

SparseMatrix laplacian(const SparseMatrix& similarity) {
  const auto& s = similarity;
  if (s.rows() != s.cols()) throw InputError("laplacian: matrix not square");
  const SparseMatrix t = s.transpose();
  const SparseMatrix diff = s - t;
  for (Eigen::Index r = 0; r < diff.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(diff, r); it; ++it) {
      if (std::abs(it.value()) > 1e-9) {
        throw InputError("laplacian: similarity matrix is not symmetric at (" +
                         std::to_string(it.row()) + ", " +
                         std::to_string(it.col()) + ")");
      }
    }
  }
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(s.nonZeros() + s.rows()));
  for (Eigen::Index r = 0; r < s.outerSize(); ++r) {
    double degree = 0.0;
    for (SparseMatrix::InnerIterator it(s, r); it; ++it) {
      if (it.value() < 0.0) {
        throw InputError("laplacian: negative similarity");
      }
      degree += it.value();
      out.emplace_back(it.row(), it.col(), -it.value());
    }
    out.emplace_back(r, r, degree);
  }
  SparseMatrix l(s.rows(), s.cols());
  l.setFromTriplets(out.begin(), out.end());
  l.prune(0.0);
  l.makeCompressed();
  return l;
}

namespace {

Vector reg_weights(const std::vector<std::size_t>& counts) {
  Vector w(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t k = 0; k < counts.size(); ++k) {
    w[static_cast<Eigen::Index>(k)] =
        counts[k] == 0 ? 1.0 : static_cast<double>(counts[k]);
  }
  return w;
}

double squared_residual(const FactorModel& model, const RatingMatrix& r) {
  double sum = 0.0;
  for (const auto& e : r.entries()) {
    const double y = logistic(
        model.U.row(static_cast<Eigen::Index>(e.user))
            .dot(model.V.row(static_cast<Eigen::Index>(e.item))));
    sum += (y - e.value) * (y - e.value);
  }
  return sum;
}

double trace_form(const Matrix& x, const SparseMatrix& l) {
  return x.cwiseProduct(l * x).sum();
}

void check_shapes(const FactorModel& model, const PathWeights& weights,
                  const TrainingData& data) {
  if (model.users() != data.users() || model.items() != data.items() ||
      model.U.cols() != model.V.cols()) {
    throw InputError("factor matrix shapes do not match the rating matrix");
  }
  if (static_cast<std::size_t>(weights.alpha.size()) !=
          data.user_laplacians.size() ||
      static_cast<std::size_t>(weights.beta.size()) !=
          data.item_laplacians.size() ||
      static_cast<std::size_t>(weights.w.size()) != data.side_ratings.size()) {
    throw InputError("path weight vectors do not match the relation set");
  }
}

void require_finite(double v, const char* term) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("objective term '") + term +
                         "' is not finite");
  }
}

}  // namespace

TrainingData make_training_data(RatingMatrix ratings,
                                const RelationSet& relations) {
  TrainingData data;
  const auto n = static_cast<Eigen::Index>(ratings.users());
  const auto m = static_cast<Eigen::Index>(ratings.items());
  for (const auto& s : relations.user_user) {
    if (s.values.rows() != n || s.values.cols() != n) {
      throw InputError("user-user similarity '" + s.path + "' has wrong shape");
    }
    data.user_laplacians.push_back(laplacian(s.values));
  }
  for (const auto& s : relations.item_item) {
    if (s.values.rows() != m || s.values.cols() != m) {
      throw InputError("item-item similarity '" + s.path + "' has wrong shape");
    }
    data.item_laplacians.push_back(laplacian(s.values));
  }
  for (const auto& s : relations.user_item) {
    if (s.values.rows() != n || s.values.cols() != m) {
      throw InputError("user-item relation '" + s.path + "' has wrong shape");
    }
    data.side_ratings.push_back(RatingMatrix::from_sparse(s.values));
  }
  data.user_reg = reg_weights(ratings.user_counts());
  data.item_reg = reg_weights(ratings.item_counts());
  data.ratings = std::move(ratings);
  return data;
}

PathStatistics path_statistics(const FactorModel& model,
                               const TrainingData& data) {
  PathStatistics stats;
  stats.fit = squared_residual(model, data.ratings);
  stats.factor_norm = data.user_reg.dot(model.U.rowwise().squaredNorm()) +
                      data.item_reg.dot(model.V.rowwise().squaredNorm());
  stats.user_trace.resize(static_cast<Eigen::Index>(data.user_laplacians.size()));
  stats.item_trace.resize(static_cast<Eigen::Index>(data.item_laplacians.size()));
  stats.side_residual.resize(static_cast<Eigen::Index>(data.side_ratings.size()));
  for (Eigen::Index k = 0; k < stats.user_trace.size(); ++k) {
    stats.user_trace[k] =
        trace_form(model.U, data.user_laplacians[static_cast<std::size_t>(k)]);
  }
  for (Eigen::Index k = 0; k < stats.item_trace.size(); ++k) {
    stats.item_trace[k] =
        trace_form(model.V, data.item_laplacians[static_cast<std::size_t>(k)]);
  }
  for (Eigen::Index k = 0; k < stats.side_residual.size(); ++k) {
    stats.side_residual[k] = squared_residual(
        model, data.side_ratings[static_cast<std::size_t>(k)]);
  }
  return stats;
}

ObjectiveTerms assemble_objective(const PathStatistics& stats,
                                  const PathWeights& weights, double lambda,
                                  double mu) {
  ObjectiveTerms t;
  t.fit = stats.fit;
  require_finite(t.fit, "rating fit");
  t.user_graph = weights.alpha.dot(stats.user_trace);
  require_finite(t.user_graph, "user-user graph regularizer");
  t.item_graph = weights.beta.dot(stats.item_trace);
  require_finite(t.item_graph, "item-item graph regularizer");
  t.side_fit = mu * weights.w.dot(stats.side_residual);
  require_finite(t.side_fit, "user-item relation fit");
  t.regularization =
      lambda * (stats.factor_norm + weights.alpha.squaredNorm() +
                weights.beta.squaredNorm() + weights.w.squaredNorm());
  require_finite(t.regularization, "regularization");
  return t;
}

ObjectiveTerms objective_terms(const FactorModel& model,
                               const PathWeights& weights,
                               const TrainingData& data, double lambda,
                               double mu) {
  check_shapes(model, weights, data);
  return assemble_objective(path_statistics(model, data), weights, lambda, mu);
}

double objective(const FactorModel& model, const PathWeights& weights,
                 const TrainingData& data, double lambda, double mu) {
  return objective_terms(model, weights, data, lambda, mu).total();
}

double weight_objective(const PathWeights& weights,
                        const PathStatistics& stats, double lambda,
                        double mu) {
  const double value =
      weights.alpha.dot(stats.user_trace) + weights.beta.dot(stats.item_trace) +
      mu * weights.w.dot(stats.side_residual) +
      lambda * (weights.alpha.squaredNorm() + weights.beta.squaredNorm() +
                weights.w.squaredNorm());
  require_finite(value, "weight objective");
  return value;
}

// --- model file ------------------------------------------------------------

namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

void write_row(std::ostringstream& out, const auto& row) {
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    if (c) out << ' ';
    out << hex(row[c]);
  }
}

}  // namespace

void save_model(const std::filesystem::path& path, const ModelFile& file) {
  const auto& m = file.model;
  const auto& w = file.weights;
  std::ostringstream out;
  out << "hetecf-model 1\n"
      << "shape " << m.U.rows() << ' ' << m.V.rows() << ' ' << m.U.cols()
      << '\n'
      << "paths " << w.alpha.size() << ' ' << w.beta.size() << ' '
      << w.w.size() << '\n'
      << "graph " << detail::to_hex(file.graph_hash) << '\n'
      << "lambda " << hex(file.lambda) << '\n'
      << "mu " << hex(file.mu) << '\n'
      << "learn_rate " << hex(file.learn_rate) << '\n'
      << "seed " << file.seed << '\n'
      << "U\n";
  for (Eigen::Index r = 0; r < m.U.rows(); ++r) {
    write_row(out, m.U.row(r));
    out << '\n';
  }
  out << "V\n";
  for (Eigen::Index r = 0; r < m.V.rows(); ++r) {
    write_row(out, m.V.row(r));
    out << '\n';
  }
  out << "alpha" << (w.alpha.size() ? " " : "");
  write_row(out, w.alpha);
  out << "\nbeta" << (w.beta.size() ? " " : "");
  write_row(out, w.beta);
  out << "\nw" << (w.w.size() ? " " : "");
  write_row(out, w.w);
  out << "\nend\n";
  detail::write_atomic(path, out.str());
}

ModelFile load_model(const std::filesystem::path& path) {
  std::istringstream in(detail::read_file(path));
  std::size_t lineno = 0;
  std::string line;
  auto next = [&]() -> std::vector<std::string> {
    if (!std::getline(in, line)) {
      throw detail::line_error(path, lineno + 1, "unexpected end of file");
    }
    ++lineno;
    return detail::split_ws(line);
  };
  auto fail = [&](const std::string& why) {
    return detail::line_error(path, lineno, why);
  };
  auto expect = [&](const std::string& tag, std::size_t values) {
    auto f = next();
    if (f.empty() || f[0] != tag || f.size() != values + 1) {
      throw fail("expected '" + tag + "' with " + std::to_string(values) +
                 " value(s)");
    }
    f.erase(f.begin());
    return f;
  };
  auto to_size = [&](const std::string& s) {
    std::size_t v = 0;
    if (!detail::parse_size(s, v)) throw fail("bad integer '" + s + "'");
    return v;
  };
  auto to_double = [&](const std::string& s) {
    double v = 0.0;
    if (!detail::parse_double(s, v)) throw fail("bad number '" + s + "'");
    return v;
  };
  auto read_vector = [&](const std::vector<std::string>& f) {
    Vector v(static_cast<Eigen::Index>(f.size()));
    for (std::size_t k = 0; k < f.size(); ++k) {
      v[static_cast<Eigen::Index>(k)] = to_double(f[k]);
    }
    return v;
  };

  const auto magic = next();
  if (magic.size() != 2 || magic[0] != "hetecf-model") {
    throw fail("not a hetecf model file");
  }
  if (magic[1] != "1") throw fail("unsupported model version " + magic[1]);

  const auto shape = expect("shape", 3);
  const auto n = to_size(shape[0]), m = to_size(shape[1]), d = to_size(shape[2]);
  const auto paths = expect("paths", 3);
  const auto na = to_size(paths[0]), nb = to_size(paths[1]),
             nw = to_size(paths[2]);

  ModelFile file;
  const auto graph = expect("graph", 1)[0];
  try {
    file.graph_hash = std::stoull(graph, nullptr, 16);
  } catch (const std::exception&) {
    throw fail("bad graph hash");
  }
  file.lambda = to_double(expect("lambda", 1)[0]);
  file.mu = to_double(expect("mu", 1)[0]);
  file.learn_rate = to_double(expect("learn_rate", 1)[0]);
  file.seed = to_size(expect("seed", 1)[0]);

  auto read_matrix = [&](const std::string& tag, std::size_t rows) {
    expect(tag, 0);
    Matrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < rows; ++r) {
      const auto f = next();
      if (f.size() != d) throw fail("expected " + std::to_string(d) + " values");
      x.row(static_cast<Eigen::Index>(r)) = read_vector(f).transpose();
    }
    return x;
  };
  file.model.U = read_matrix("U", n);
  file.model.V = read_matrix("V", m);
  file.weights.alpha = read_vector(expect("alpha", na));
  file.weights.beta = read_vector(expect("beta", nb));
  file.weights.w = read_vector(expect("w", nw));
  expect("end", 0);
  return file;
}

}  // namespace hetecf
