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

#include "hetecf/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "hetecf/error.hpp"
#include "hetecf/eval.hpp"
#include "hetecf/graph.hpp"
#include "hetecf/learner.hpp"
#include "hetecf/metapath.hpp"
#include "hetecf/model.hpp"
#include "hetecf/synth.hpp"
#include "io_util.hpp"

namespace hetecf {

namespace {

struct GraphPaths {
  std::string nodes;
  std::string edges;
  std::string schema;
};

struct HyperparamFlags {
  Hyperparams hp;
  std::string optimizer = "full";

  Hyperparams resolve() const {
    Hyperparams out = hp;
    if (optimizer == "full") {
      out.optimizer = Optimizer::kFullBatch;
    } else if (optimizer == "sgd") {
      out.optimizer = Optimizer::kStochastic;
    } else {
      throw InputError("unknown optimizer '" + optimizer +
                       "' (expected full or sgd)");
    }
    out.validate();
    return out;
  }
};

struct Options {
  GraphPaths graph;
  std::string metapaths;
  std::string target;
  std::string variant = "rowcol";
  std::string cache_dir;
  HyperparamFlags hyper;
  bool verbose = false;

  // train
  std::string model_path;
  std::string log_path;
  std::string weights_path;

  // evaluate
  std::string report_path;
  std::vector<std::string> methods{"UserMean", "ItemMean", "NMF", "Hete-CF"};
  std::vector<double> fractions{0.4, 0.6};
  std::vector<std::size_t> dims{5, 10};
  std::size_t trials = 10;
  std::size_t jobs = 1;
  std::uint64_t split_seed = 1;

  // benchmark
  std::string bench_out;
  std::string preset = "dblp";
  std::vector<std::string> counts;
  double probability = 0.2;
  std::vector<std::size_t> d_values{5, 10, 20, 40};
  std::vector<double> multipliers{1.0, 1.5, 2.0, 2.5};
  std::size_t fixed_d = 10;
  std::size_t repeats = 3;

  // predict
  std::string user;
  std::size_t top_k = 10;
};

void add_graph_options(CLI::App* app, GraphPaths& paths) {
  app->add_option("--nodes", paths.nodes, "Nodes file (<id>\\t<type>)")
      ->required();
  app->add_option("--edges", paths.edges,
                  "Edges file (<src>\\t<dst>\\t<relation>[\\t<weight>])")
      ->required();
  app->add_option("--schema", paths.schema, "Schema file")->required();
}

void add_hyper_options(CLI::App* app, HyperparamFlags& f) {
  auto& hp = f.hp;
  app->add_option("--lambda", hp.lambda, "Regularization weight")
      ->capture_default_str();
  app->add_option("--mu", hp.mu,
                  "User-item relation weight (default: rating density)");
  app->add_option("--learn-rate", hp.learn_rate, "Initial step size")
      ->capture_default_str();
  app->add_option("--inner-tol", hp.inner_tol, "Inner relative-change tolerance")
      ->capture_default_str();
  app->add_option("--outer-tol", hp.outer_tol, "Outer relative-change tolerance")
      ->capture_default_str();
  app->add_option("--max-inner", hp.max_inner, "Inner iteration cap")
      ->capture_default_str();
  app->add_option("--max-outer", hp.max_outer, "Outer iteration cap")
      ->capture_default_str();
  app->add_option("-d,--dim", hp.dim, "Latent dimension")->capture_default_str();
  app->add_option("--seed", hp.seed, "Random seed")->capture_default_str();
  app->add_option("--optimizer", f.optimizer, "full (batch) or sgd")
      ->capture_default_str();
}

HeteroGraph load(const GraphPaths& p) {
  return load_graph(p.nodes, p.edges, p.schema);
}

MetaPathSpecs load_specs(const Options& o, const Schema& schema) {
  if (o.metapaths.empty()) return {};
  return load_metapath_specs(schema, o.metapaths);
}

MetaPath load_target(const Options& o, const Schema& schema) {
  if (o.target.empty()) throw InputError("--target meta-path is required");
  try {
    return MetaPath::parse(schema, o.target);
  } catch (const InputError& e) {
    throw InputError(std::string("--target: ") + e.what());
  }
}

// Relation set, reading and refreshing the similarity cache when a cache
// directory is configured.
RelationSet relations_for(const Options& o, const HeteroGraph& graph,
                          const MetaPathSpecs& specs, std::ostream& err) {
  const auto variant = parse_variant(o.variant);
  if (o.cache_dir.empty()) return build_relation_set(graph, specs, variant);
  const auto hash = graph.content_hash();
  return build_relation_set(
      graph, specs, variant,
      [&](PathGroup, const MetaPath& p) -> std::optional<SimilarityMatrix> {
        const SimilarityCacheKey key{hash, p.to_string(), variant};
        const auto file = cache_file_name(o.cache_dir, key);
        try {
          if (auto hit = read_similarity_cache(file, key)) return hit;
        } catch (const InputError& e) {
          err << "warning: " << e.what() << "; recomputing\n";
        }
        auto sim = similarity(graph, p, variant);
        write_similarity_cache(file, key, sim);
        return sim;
      });
}

int cmd_validate(const Options& o, std::ostream& out) {
  const auto graph = load(o.graph);
  const auto& schema = graph.schema();
  out << "graph " << detail::to_hex(graph.content_hash()) << '\n';
  out << "nodes " << graph.total_nodes() << '\n';
  for (const auto& t : schema.node_types()) {
    out << "  " << t;
    if (t == schema.user_type()) out << " (user)";
    if (t == schema.item_type()) out << " (item)";
    out << ": " << graph.node_count(t) << '\n';
  }
  out << "edges " << graph.total_edges() << '\n';
  for (const auto& r : schema.relations()) {
    out << "  " << r.name << " (" << r.source << " -> " << r.target
        << "): " << graph.edge_count(r.name) << '\n';
  }
  if (!o.metapaths.empty()) {
    const auto specs = load_specs(o, schema);
    out << "meta-paths UU=" << specs.user_user.size()
        << " II=" << specs.item_item.size() << " UI=" << specs.user_item.size()
        << '\n';
  }
  return kExitOk;
}

int cmd_similarity(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.cache_dir.empty()) throw InputError("--cache-dir is required");
  const auto graph = load(o.graph);
  const auto specs = load_specs(o, graph.schema());
  const auto variant = parse_variant(o.variant);
  const auto hash = graph.content_hash();
  auto run = [&](PathGroup g, const std::vector<MetaPath>& paths) {
    for (const auto& p : paths) {
      check_group(graph.schema(), g, p);
      const SimilarityCacheKey key{hash, p.to_string(), variant};
      const auto file = cache_file_name(o.cache_dir, key);
      try {
        if (read_similarity_cache(file, key)) {
          out << "skipped " << to_string(g) << ": " << key.path << " ("
              << file.string() << " up to date)\n";
          continue;
        }
      } catch (const InputError& e) {
        err << "warning: " << e.what() << "; recomputing\n";
      }
      const auto sim = similarity(graph, p, variant);
      write_similarity_cache(file, key, sim);
      out << "wrote " << to_string(g) << ": " << key.path << " -> "
          << file.string() << " (" << sim.values.nonZeros() << " entries)\n";
    }
  };
  run(PathGroup::kUserUser, specs.user_user);
  run(PathGroup::kItemItem, specs.item_item);
  run(PathGroup::kUserItem, specs.user_item);
  return kExitOk;
}

std::string trace_csv(const std::vector<double>& trace) {
  std::ostringstream s;
  s << "step,objective\n";
  for (std::size_t k = 0; k < trace.size(); ++k) {
    s << k << ',' << detail::format_double(trace[k]) << '\n';
  }
  return s.str();
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.model_path.empty()) throw InputError("--model output path is required");
  const auto hp = o.hyper.resolve();
  const auto graph = load(o.graph);
  const auto specs = load_specs(o, graph.schema());
  const auto ratings =
      derive_ratings(graph, load_target(o, graph.schema()), parse_variant(o.variant));
  if (ratings.empty()) throw InputError("target meta-path yields no ratings");
  const auto relations = relations_for(o, graph, specs, err);
  const auto data = make_training_data(ratings, relations);
  const double mu = effective_mu(hp, ratings);
  out << "ratings " << ratings.observed() << " (" << ratings.users() << " x "
      << ratings.items() << ", density " << ratings.density() << ")\n";
  out << "mu = " << mu << (hp.mu ? " (override)" : " (rating density)")
      << '\n';

  std::ostringstream log;
  log << training_log_header() << '\n';
  TrainResult result;
  try {
    result = train(data, hp, [&](const OuterLogRow& row) {
      log << training_log_line(row) << '\n';
      if (o.verbose) err << training_log_line(row) << '\n';
    });
  } catch (const DivergenceError& e) {
    const std::string trace_path = o.model_path + ".jtrace.csv";
    detail::write_atomic(trace_path, trace_csv(e.trace()));
    err << "error: " << e.what() << "\nobjective trace: " << trace_path << '\n';
    return kExitNumericalError;
  }

  ModelFile file{result.model, result.weights, graph.content_hash(),
                 hp.lambda,    result.mu,      result.learn_rate,
                 hp.seed};
  save_model(o.model_path, file);
  const auto log_path = o.log_path.empty() ? o.model_path + ".log.csv" : o.log_path;
  detail::write_atomic(log_path, log.str());
  const auto rows = report_weights(result.weights, specs);
  if (!o.weights_path.empty()) {
    detail::write_atomic(o.weights_path, weights_to_csv(rows));
  }
  out << "objective " << result.objective_trace.front() << " -> "
      << result.objective_trace.back() << " after " << result.log.size()
      << " outer iterations" << (result.converged ? " (converged)" : "")
      << '\n';
  for (const auto& r : rows) {
    out << "  " << to_string(r.group) << "  " << std::fixed
        << std::setprecision(3) << r.normalized << "  " << r.path << '\n';
    out.unsetf(std::ios::floatfield);
    out << std::setprecision(6);
  }
  out << "model " << o.model_path << "\nlog " << log_path << '\n';
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.report_path.empty()) throw InputError("--report output path is required");
  ExperimentConfig config;
  config.hp = o.hyper.resolve();
  config.methods.clear();
  for (const auto& m : o.methods) config.methods.push_back(parse_method(m));
  config.fractions = o.fractions;
  config.dims = o.dims;
  config.trials = o.trials;
  config.seed = o.split_seed;
  config.jobs = std::max<std::size_t>(1, o.jobs);

  const auto graph = load(o.graph);
  const auto specs = load_specs(o, graph.schema());
  const auto ratings =
      derive_ratings(graph, load_target(o, graph.schema()), parse_variant(o.variant));
  const auto relations = relations_for(o, graph, specs, err);
  const auto report = run_experiment(ratings, relations, config);
  detail::write_atomic(o.report_path, report.to_csv());
  out << report.to_table() << "report " << o.report_path << '\n';
  return kExitOk;
}

int cmd_benchmark(const Options& o, std::ostream& out) {
  if (o.bench_out.empty()) throw InputError("--out timing CSV path is required");
  BenchmarkConfig config;
  if (o.preset == "dblp") {
    config.base.schema = dblp_schema();
    config.base.counts = {{"Author", 200}, {"Paper", 400}, {"Conf", 40}, {"Term", 60}};
  } else if (o.preset == "meetup") {
    config.base.schema = meetup_schema();
    config.base.counts = {{"User", 200}, {"Group", 40}, {"Event", 100}, {"Location", 20}};
  } else {
    throw InputError("unknown preset '" + o.preset + "' (dblp or meetup)");
  }
  for (const auto& c : o.counts) {
    const auto eq = c.find('=');
    std::size_t v = 0;
    if (eq == std::string::npos || !detail::parse_size(c.substr(eq + 1), v)) {
      throw InputError("--count expects Type=N, got '" + c + "'");
    }
    const auto type = c.substr(0, eq);
    config.base.schema.type_index(type);
    config.base.counts[type] = v;
  }
  config.base.default_probability = o.probability;
  config.base.seed = o.hyper.hp.seed;
  config.d_values = o.d_values;
  config.size_multipliers = o.multipliers;
  config.fixed_d = o.fixed_d;
  config.repeats = o.repeats;
  config.hp = o.hyper.resolve();
  config.base.validate();

  const auto rows = scaling_benchmark(config);
  detail::write_atomic(o.bench_out, timings_to_csv(rows));
  int status = kExitOk;
  for (const auto& r : rows) {
    out << r.sweep << "  d=" << r.d << "  n=" << r.n << "  m=" << r.m
        << "  " << r.seconds_median << " s";
    if (!r.error.empty()) {
      out << "  FAILED: " << r.error;
      status = kExitNumericalError;
    }
    out << '\n';
  }
  out << "timings " << o.bench_out << '\n';
  return status;
}

int cmd_predict(const Options& o, std::ostream& out) {
  if (o.model_path.empty()) throw InputError("--model is required");
  const auto graph = load(o.graph);
  const auto file = load_model(o.model_path);
  if (file.graph_hash != graph.content_hash()) {
    throw InputError("model was trained on a different graph (hash " +
                     detail::to_hex(file.graph_hash) + ", graph " +
                     detail::to_hex(graph.content_hash()) + ")");
  }
  const auto& schema = graph.schema();
  const auto user = graph.find_node(schema.user_type(), o.user);
  if (!user) throw InputError("unknown user id '" + o.user + "'");
  const auto& items = graph.node_ids(schema.item_type());
  if (file.model.users() != graph.node_count(schema.user_type()) ||
      file.model.items() != items.size()) {
    throw InputError("model shape does not match the graph");
  }
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t j = 0; j < items.size(); ++j) {
    scored.emplace_back(predict(file.model, *user, j), j);
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return items[a.second] < items[b.second];
  });
  const auto k = std::min(o.top_k, scored.size());
  for (std::size_t r = 0; r < k; ++r) {
    out << items[scored[r].second] << '\t'
        << detail::format_double(scored[r].first) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"hetecf: meta-path regularized matrix factorization"};
  app.set_config("--config", "", "TOML/INI config file; flags override it");
  app.require_subcommand(1);
  Options o;

  auto* validate = app.add_subcommand("validate", "Load and check a graph");
  add_graph_options(validate, o.graph);
  validate->add_option("--metapaths", o.metapaths, "Meta-path spec file");

  auto* sim = app.add_subcommand("similarity", "Precompute PathSim caches");
  add_graph_options(sim, o.graph);
  sim->add_option("--metapaths", o.metapaths, "Meta-path spec file")->required();
  sim->add_option("--cache-dir", o.cache_dir, "Cache directory")->required();
  sim->add_option("--variant", o.variant, "rowcol or diagonal")
      ->capture_default_str();

  auto add_model_inputs = [&](CLI::App* cmd) {
    add_graph_options(cmd, o.graph);
    cmd->add_option("--metapaths", o.metapaths, "Meta-path spec file");
    cmd->add_option("--target", o.target,
                    "User -> item meta-path defining the ratings")
        ->required();
    cmd->add_option("--variant", o.variant, "rowcol or diagonal")
        ->capture_default_str();
    cmd->add_option("--cache-dir", o.cache_dir, "Similarity cache directory");
    add_hyper_options(cmd, o.hyper);
  };

  auto* trn = app.add_subcommand("train", "Train a Hete-CF model");
  add_model_inputs(trn);
  trn->add_option("--model", o.model_path, "Output model file")->required();
  trn->add_option("--log", o.log_path, "Training log CSV (default <model>.log.csv)");
  trn->add_option("--weights", o.weights_path, "Normalized meta-path weights CSV");
  trn->add_flag("-v,--verbose", o.verbose, "Echo the training log");

  auto* ev = app.add_subcommand("evaluate", "Hold-out comparison against baselines");
  add_model_inputs(ev);
  ev->add_option("--report", o.report_path, "Output report CSV")->required();
  ev->add_option("--methods", o.methods, "UserMean ItemMean NMF Hete-CF")
      ->capture_default_str();
  ev->add_option("--fractions", o.fractions, "Training fractions")
      ->capture_default_str();
  ev->add_option("--dims", o.dims, "Latent dimensions")->capture_default_str();
  ev->add_option("--trials", o.trials, "Trials per fraction")->capture_default_str();
  ev->add_option("--split-seed", o.split_seed, "Split seed")->capture_default_str();
  ev->add_option("--jobs", o.jobs, "Concurrent trials")->capture_default_str();

  auto* bench = app.add_subcommand("benchmark", "Synthetic runtime scaling");
  bench->add_option("--out", o.bench_out, "Timing CSV")->required();
  bench->add_option("--preset", o.preset, "dblp or meetup")->capture_default_str();
  bench->add_option("--count", o.counts, "Node count override, Type=N");
  bench->add_option("--probability", o.probability, "Link probability")
      ->capture_default_str();
  bench->add_option("--d-values", o.d_values, "Dimensions for the d sweep")
      ->capture_default_str();
  bench->add_option("--multipliers", o.multipliers, "Size multipliers")
      ->capture_default_str();
  bench->add_option("--fixed-d", o.fixed_d, "d for the size sweep")
      ->capture_default_str();
  bench->add_option("--repeats", o.repeats, "Runs per cell (median reported)")
      ->capture_default_str();
  add_hyper_options(bench, o.hyper);

  auto* pred = app.add_subcommand("predict", "Top-k items for a user");
  add_graph_options(pred, o.graph);
  pred->add_option("--model", o.model_path, "Model file")->required();
  pred->add_option("--user", o.user, "User id")->required();
  pred->add_option("-k,--top", o.top_k, "Number of items")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (*validate) return cmd_validate(o, out);
    if (*sim) return cmd_similarity(o, out, err);
    if (*trn) return cmd_train(o, out, err);
    if (*ev) return cmd_evaluate(o, out, err);
    if (*bench) return cmd_benchmark(o, out);
    if (*pred) return cmd_predict(o, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumericalError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace hetecf
