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

#include "hetecf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "hetecf/error.hpp"
#include "io_util.hpp"

namespace hetecf {

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InputError("train fraction must be strictly between 0 and 1");
  }
  if (trials == 0) throw InputError("trial count must be >= 1");
}

std::pair<RatingMatrix, RatingMatrix> split(const RatingMatrix& ratings,
                                            const SplitSpec& spec,
                                            std::size_t trial) {
  spec.validate();
  const auto& entries = ratings.entries();
  const std::size_t total = entries.size();
  if (total < 2) {
    throw InputError("split: need at least 2 observed ratings, have " +
                     std::to_string(total));
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed),
                    static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);

  auto n_train = static_cast<std::size_t>(
      std::llround(spec.train_fraction * static_cast<double>(total)));
  n_train = std::clamp<std::size_t>(n_train, 1, total - 1);

  std::vector<Rating> train, test;
  train.reserve(n_train);
  test.reserve(total - n_train);
  for (std::size_t k = 0; k < total; ++k) {
    (k < n_train ? train : test).push_back(entries[order[k]]);
  }
  return {RatingMatrix(ratings.users(), ratings.items(), std::move(train)),
          RatingMatrix(ratings.users(), ratings.items(), std::move(test))};
}

namespace {

void check_pairs(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw InputError("metric: prediction and truth lengths differ");
  }
  if (pred.empty()) throw InputError("metric: empty input");
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_pairs(pred, truth);
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    sum += std::abs(truth[k] - pred[k]);
  }
  return sum / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_pairs(pred, truth);
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double r = truth[k] - pred[k];
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

namespace {

// Per-row means with a global-mean fallback; `by_user` picks the row key.
Predictor row_mean(const RatingMatrix& train, bool by_user) {
  const std::size_t rows = by_user ? train.users() : train.items();
  std::vector<double> sum(rows, 0.0);
  std::vector<std::size_t> count(rows, 0);
  double total = 0.0;
  for (const auto& e : train.entries()) {
    const auto r = by_user ? e.user : e.item;
    sum[r] += e.value;
    ++count[r];
    total += e.value;
  }
  const double global =
      train.empty() ? 0.5 : total / static_cast<double>(train.observed());
  std::vector<double> mean(rows, global);
  for (std::size_t r = 0; r < rows; ++r) {
    if (count[r] > 0) mean[r] = sum[r] / static_cast<double>(count[r]);
  }
  return [mean = std::move(mean), global, by_user](std::size_t user,
                                                   std::size_t item) {
    const auto r = by_user ? user : item;
    return r < mean.size() ? std::clamp(mean[r], 0.0, 1.0) : global;
  };
}

}  // namespace

Predictor baseline_user_mean(const RatingMatrix& train) {
  return row_mean(train, true);
}

Predictor baseline_item_mean(const RatingMatrix& train) {
  return row_mean(train, false);
}

double NmfModel::predict(std::size_t user, std::size_t item) const {
  const double v = W.row(static_cast<Eigen::Index>(user))
                       .dot(H.col(static_cast<Eigen::Index>(item)));
  return std::clamp(v, 0.0, 1.0);
}

NmfModel baseline_nmf(const RatingMatrix& train, const NmfOptions& options) {
  if (options.dim == 0) throw InputError("NMF dimension must be >= 1");
  const auto n = static_cast<Eigen::Index>(train.users());
  const auto m = static_cast<Eigen::Index>(train.items());
  const auto d = static_cast<Eigen::Index>(options.dim);
  const SparseMatrix R = train.to_sparse();
  const SparseMatrix Rt = R.transpose();

  double mean = 0.5;
  if (!train.empty()) {
    mean = 0.0;
    for (const auto& e : train.entries()) mean += e.value;
    mean /= static_cast<double>(train.observed());
  }
  // Uniform init scaled so that E[(WH)_ij] matches the mean rating.
  const double scale = 2.0 * std::sqrt(std::max(mean, 1e-3) / static_cast<double>(d));
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> dist(0.0, scale);
  NmfModel model;
  model.W = Matrix::NullaryExpr(n, d, [&] { return dist(rng); });
  model.H = Matrix::NullaryExpr(d, m, [&] { return dist(rng); });

  // Masked reconstruction: (WH) at the observed entries of R.
  auto reconstruct = [&](const Matrix& W, const Matrix& H) {
    SparseMatrix P = R;
    for (Eigen::Index r = 0; r < P.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(P, r); it; ++it) {
        it.valueRef() = W.row(it.row()).dot(H.col(it.col()));
      }
    }
    return P;
  };
  auto train_rmse = [&](const SparseMatrix& P) {
    if (train.empty()) return 0.0;
    return std::sqrt((P - R).squaredNorm() /
                     static_cast<double>(train.observed()));
  };

  constexpr double kEps = 1e-12;
  SparseMatrix P = reconstruct(model.W, model.H);
  double best = train_rmse(P);
  NmfModel best_model = model;
  best_model.train_rmse = best;
  double prev = best;

  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    // W <- W .* (R H^T) ./ (P H^T)
    const Matrix numW = R * model.H.transpose();
    const Matrix denW = P * model.H.transpose();
    model.W = model.W.cwiseProduct(numW).cwiseQuotient(denW.array().max(kEps).matrix());
    P = reconstruct(model.W, model.H);
    // H <- H .* (W^T R) ./ (W^T P), computed as transposes of R^T W.
    const SparseMatrix Pt = P.transpose();
    const Matrix numH = (Rt * model.W).transpose();
    const Matrix denH = (Pt * model.W).transpose();
    model.H = model.H.cwiseProduct(numH).cwiseQuotient(denH.array().max(kEps).matrix());
    P = reconstruct(model.W, model.H);

    const double err = train_rmse(P);
    model.iterations = it;
    if (!std::isfinite(err)) break;
    if (err < best) {
      best = err;
      best_model = model;
      best_model.train_rmse = err;
    }
    if (prev - err <= options.tol * std::max(prev, 1e-12) && err <= prev) {
      best_model.converged = true;
      best_model.iterations = it;
      return best_model;
    }
    prev = err;
  }
  best_model.iterations = model.iterations;
  best_model.warning = "NMF did not converge in " +
                       std::to_string(options.max_iterations) +
                       " iterations; returning the best iterate";
  return best_model;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kUserMean: return "UserMean";
    case Method::kItemMean: return "ItemMean";
    case Method::kNmf: return "NMF";
    case Method::kHeteCF: return "Hete-CF";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  std::string key;
  for (char c : name) {
    if (c != '-' && c != '_') key += static_cast<char>(std::tolower(c));
  }
  if (key == "usermean") return Method::kUserMean;
  if (key == "itemmean") return Method::kItemMean;
  if (key == "nmf") return Method::kNmf;
  if (key == "hetecf") return Method::kHeteCF;
  throw InputError("unknown method '" + name + "'");
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  if (values.empty()) {
    out.mean = out.sd = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

std::string MetricReport::to_csv() const {
  std::ostringstream out;
  out << "method,fraction,d,metric,mean,sd\n";
  for (const auto& c : cells) {
    for (const auto& [metric, values] :
         {std::pair{"MAE", &c.mae}, std::pair{"RMSE", &c.rmse}}) {
      const auto s = c.error.empty()
                         ? mean_sd(*values)
                         : MeanSd{std::numeric_limits<double>::quiet_NaN(),
                                  std::numeric_limits<double>::quiet_NaN()};
      out << to_string(c.method) << ',' << detail::format_double(c.fraction)
          << ',' << c.dim << ',' << metric << ','
          << detail::format_double(s.mean) << ','
          << detail::format_double(s.sd) << '\n';
    }
  }
  return out.str();
}

std::string MetricReport::to_table() const {
  std::vector<Method> methods;
  std::vector<std::pair<double, std::size_t>> rows;
  for (const auto& c : cells) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) {
      methods.push_back(c.method);
    }
    const std::pair key{c.fraction, c.dim};
    if (std::find(rows.begin(), rows.end(), key) == rows.end()) {
      rows.push_back(key);
    }
  }
  auto find = [&](Method m, double f, std::size_t d) -> const MetricCell* {
    for (const auto& c : cells) {
      if (c.method == m && c.fraction == f && c.dim == d) return &c;
    }
    return nullptr;
  };

  std::ostringstream out;
  out << std::left << std::setw(10) << "%Train" << std::setw(8) << "d"
      << std::setw(8) << "Metric";
  for (auto m : methods) out << std::setw(20) << to_string(m);
  out << '\n';
  std::vector<std::string> errors;
  for (const auto& [f, d] : rows) {
    for (const char* metric : {"MAE", "RMSE"}) {
      std::ostringstream pct;
      pct << std::fixed << std::setprecision(0) << f * 100.0 << '%';
      out << std::setw(10) << pct.str() << std::setw(8) << d << std::setw(8)
          << metric;
      for (auto m : methods) {
        const auto* c = find(m, f, d);
        std::ostringstream cell;
        if (c == nullptr) {
          cell << "-";
        } else if (!c->error.empty()) {
          cell << "failed";
          errors.push_back(to_string(m) + " (" + pct.str() + ", d=" +
                           std::to_string(d) + "): " + c->error);
        } else {
          const auto s = mean_sd(metric[0] == 'M' ? c->mae : c->rmse);
          cell << std::fixed << std::setprecision(4) << s.mean << " +- "
               << s.sd;
        }
        out << std::setw(20) << cell.str();
      }
      out << '\n';
    }
  }
  std::sort(errors.begin(), errors.end());
  errors.erase(std::unique(errors.begin(), errors.end()), errors.end());
  for (const auto& e : errors) out << "error: " << e << '\n';
  return out.str();
}

namespace {

struct TrialScores {
  // Indexed like ExperimentConfig: [method][dim] -> (mae, rmse) or error.
  std::vector<std::vector<std::pair<double, double>>> scores;
  std::vector<std::vector<std::string>> errors;
};

TrialScores run_trial(const RatingMatrix& ratings, const RelationSet& relations,
                      const ExperimentConfig& config, double fraction,
                      std::size_t trial) {
  const auto [train_set, test_set] =
      split(ratings, SplitSpec{fraction, config.trials, config.seed}, trial);
  std::vector<double> truth;
  truth.reserve(test_set.observed());
  for (const auto& e : test_set.entries()) truth.push_back(e.value);

  auto score = [&](const Predictor& p) {
    std::vector<double> pred;
    pred.reserve(truth.size());
    for (const auto& e : test_set.entries()) pred.push_back(p(e.user, e.item));
    return std::pair{mae(pred, truth), rmse(pred, truth)};
  };

  TrialScores out;
  out.scores.assign(config.methods.size(),
                    std::vector<std::pair<double, double>>(config.dims.size()));
  out.errors.assign(config.methods.size(),
                    std::vector<std::string>(config.dims.size()));
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    for (std::size_t di = 0; di < config.dims.size(); ++di) {
      const auto d = config.dims[di];
      const auto trial_seed = config.seed * 1000003ULL + trial * 7919ULL + d;
      try {
        switch (config.methods[mi]) {
          case Method::kUserMean:
            out.scores[mi][di] = score(baseline_user_mean(train_set));
            break;
          case Method::kItemMean:
            out.scores[mi][di] = score(baseline_item_mean(train_set));
            break;
          case Method::kNmf: {
            const auto nmf = baseline_nmf(
                train_set, {d, config.nmf_max_iterations, 1e-7, trial_seed});
            out.scores[mi][di] = score([&](std::size_t u, std::size_t i) {
              return nmf.predict(u, i);
            });
            break;
          }
          case Method::kHeteCF: {
            Hyperparams hp = config.hp;
            hp.dim = d;
            hp.seed = trial_seed;
            const auto result = train(train_set, relations, hp);
            out.scores[mi][di] = score([&](std::size_t u, std::size_t i) {
              return predict(result.model, u, i);
            });
            break;
          }
        }
      } catch (const std::exception& e) {
        out.errors[mi][di] = e.what();
      }
    }
  }
  return out;
}

}  // namespace

MetricReport run_experiment(const RatingMatrix& ratings,
                            const RelationSet& relations,
                            const ExperimentConfig& config) {
  if (config.trials == 0) throw InputError("trial count must be >= 1");
  for (double f : config.fractions) SplitSpec{f, config.trials, config.seed}.validate();

  MetricReport report;
  for (double fraction : config.fractions) {
    std::vector<TrialScores> trials(config.trials);
    if (config.jobs > 1) {
      for (std::size_t start = 0; start < config.trials; start += config.jobs) {
        std::vector<std::future<TrialScores>> running;
        const auto end = std::min(config.trials, start + config.jobs);
        for (std::size_t t = start; t < end; ++t) {
          running.push_back(std::async(std::launch::async, run_trial,
                                       std::cref(ratings), std::cref(relations),
                                       std::cref(config), fraction, t));
        }
        for (std::size_t t = start; t < end; ++t) {
          trials[t] = running[t - start].get();
        }
      }
    } else {
      for (std::size_t t = 0; t < config.trials; ++t) {
        trials[t] = run_trial(ratings, relations, config, fraction, t);
      }
    }

    for (std::size_t di = 0; di < config.dims.size(); ++di) {
      for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
        MetricCell cell{config.methods[mi], fraction, config.dims[di], {}, {}, {}};
        for (const auto& t : trials) {
          if (!t.errors[mi][di].empty()) {
            if (cell.error.empty()) cell.error = t.errors[mi][di];
            continue;
          }
          cell.mae.push_back(t.scores[mi][di].first);
          cell.rmse.push_back(t.scores[mi][di].second);
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

std::vector<WeightReportRow> report_weights(const PathWeights& weights,
                                            const MetaPathSpecs& specs) {
  std::vector<WeightReportRow> rows;
  auto group = [&](PathGroup g, const Vector& w,
                   const std::vector<MetaPath>& paths) {
    if (static_cast<std::size_t>(w.size()) != paths.size()) {
      throw InputError(to_string(g) + " weight count does not match the "
                       "meta-path list");
    }
    const double top = w.size() ? w.maxCoeff() : 0.0;
    for (std::size_t k = 0; k < paths.size(); ++k) {
      const double raw = w[static_cast<Eigen::Index>(k)];
      rows.push_back({g, paths[k].to_string(), raw,
                      top > 0.0 ? std::max(raw, 0.0) / top : 0.0});
    }
  };
  group(PathGroup::kUserUser, weights.alpha, specs.user_user);
  group(PathGroup::kItemItem, weights.beta, specs.item_item);
  group(PathGroup::kUserItem, weights.w, specs.user_item);
  return rows;
}

std::string weights_to_csv(const std::vector<WeightReportRow>& rows) {
  std::ostringstream out;
  out << "group,path,weight,normalized\n";
  for (const auto& r : rows) {
    out << to_string(r.group) << ',' << r.path << ','
        << detail::format_double(r.raw) << ','
        << detail::format_double(r.normalized) << '\n';
  }
  return out.str();
}

}  // namespace hetecf
