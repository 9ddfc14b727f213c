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

#include "hetecf/metapath.hpp"

#include <algorithm>
#include <sstream>

#include "hetecf/error.hpp"
#include "io_util.hpp"

namespace hetecf {

MetaPath::MetaPath(const Schema& schema, std::vector<PathStep> steps)
    : steps_(std::move(steps)) {
  if (steps_.empty()) throw InputError("meta-path needs at least one step");
  types_.reserve(steps_.size() + 1);
  for (std::size_t k = 0; k < steps_.size(); ++k) {
    const auto& rel = schema.relation(steps_[k].relation);
    const auto& from = steps_[k].reversed ? rel.target : rel.source;
    const auto& to = steps_[k].reversed ? rel.source : rel.target;
    if (k == 0) {
      types_.push_back(from);
    } else if (types_.back() != from) {
      throw InputError("meta-path step " + std::to_string(k + 1) + " ('" +
                       rel.name + "') starts at " + from +
                       " but the previous step ends at " + types_.back());
    }
    types_.push_back(to);
  }
}

MetaPath MetaPath::parse(const Schema& schema, const std::string& text) {
  const auto tokens = detail::split_ws(text);
  if (tokens.size() < 3 || tokens.size() % 2 == 0) {
    throw InputError("malformed meta-path '" + text +
                     "': expected 'T1 -rel-> T2 ...'");
  }
  std::vector<PathStep> steps;
  for (std::size_t k = 1; k < tokens.size(); k += 2) {
    const auto& arrow = tokens[k];
    PathStep step;
    if (arrow.size() > 3 && arrow.rfind("<-", 0) == 0 && arrow.back() == '-') {
      step.relation = arrow.substr(2, arrow.size() - 3);
      step.reversed = true;
    } else if (arrow.size() > 3 && arrow.front() == '-' &&
               arrow.compare(arrow.size() - 2, 2, "->") == 0) {
      step.relation = arrow.substr(1, arrow.size() - 3);
    } else {
      throw InputError("malformed meta-path '" + text + "': bad arrow '" +
                       arrow + "'");
    }
    steps.push_back(std::move(step));
  }
  MetaPath path(schema, std::move(steps));
  for (std::size_t k = 0; k < path.types_.size(); ++k) {
    if (tokens[2 * k] != path.types_[k]) {
      throw InputError("meta-path '" + text + "': expected type " +
                       path.types_[k] + " at position " +
                       std::to_string(k + 1) + ", found " + tokens[2 * k]);
    }
  }
  return path;
}

bool MetaPath::palindromic() const { return *this == reverse(*this); }

std::string MetaPath::to_string() const {
  std::string out = types_.empty() ? std::string() : types_.front();
  for (std::size_t k = 0; k < steps_.size(); ++k) {
    out += steps_[k].reversed ? " <-" + steps_[k].relation + "- "
                              : " -" + steps_[k].relation + "-> ";
    out += types_[k + 1];
  }
  return out;
}

MetaPath reverse(const MetaPath& path) {
  MetaPath out;
  out.steps_.assign(path.steps_.rbegin(), path.steps_.rend());
  for (auto& s : out.steps_) s.reversed = !s.reversed;
  out.types_.assign(path.types_.rbegin(), path.types_.rend());
  return out;
}

// ---------------------------------------------------------------------------

PathCountMatrix path_count(const HeteroGraph& graph, const MetaPath& path) {
  if (path.length() == 0) throw InputError("empty meta-path");
  // Re-resolve against this graph's schema; throws on incompatibility.
  const MetaPath checked(graph.schema(), path.steps());
  if (checked.types() != path.types()) {
    throw InputError("meta-path '" + path.to_string() +
                     "' is not type-compatible with the graph schema");
  }
  const auto& first = path.steps().front();
  SparseMatrix counts = adjacency(graph, first.relation, first.reversed);
  for (std::size_t k = 1; k < path.length(); ++k) {
    const auto& step = path.steps()[k];
    const SparseMatrix next = adjacency(graph, step.relation, step.reversed);
    counts = (counts * next).pruned();
  }
  counts.makeCompressed();
  return {path.source_type(), path.target_type(), path.palindromic(),
          std::move(counts)};
}

std::string to_string(PathSimVariant v) {
  return v == PathSimVariant::kRowCol ? "rowcol" : "diagonal";
}

PathSimVariant parse_variant(const std::string& text) {
  if (text == "rowcol") return PathSimVariant::kRowCol;
  if (text == "diagonal") return PathSimVariant::kDiagonal;
  throw InputError("unknown PathSim variant '" + text +
                   "' (expected rowcol or diagonal)");
}

SimilarityMatrix pathsim(const PathCountMatrix& pc, PathSimVariant variant,
                         std::string path_name) {
  const auto& c = pc.counts;
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(c.nonZeros()));

  if (variant == PathSimVariant::kRowCol) {
    Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(c.rows());
    Eigen::VectorXd colsum = Eigen::VectorXd::Zero(c.cols());
    for (Eigen::Index r = 0; r < c.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(c, r); it; ++it) {
        rowsum[it.row()] += it.value();
        colsum[it.col()] += it.value();
      }
    }
    for (Eigen::Index r = 0; r < c.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(c, r); it; ++it) {
        const double denom = rowsum[it.row()] + colsum[it.col()];
        if (it.value() > 0.0 && denom > 0.0) {
          out.emplace_back(it.row(), it.col(), 2.0 * it.value() / denom);
        }
      }
    }
  } else {
    if (!pc.palindromic) {
      throw InputError("diagonal PathSim requires a palindromic meta-path" +
                       (path_name.empty() ? std::string()
                                          : " ('" + path_name + "')"));
    }
    const Eigen::VectorXd diag = SparseMatrix(c).diagonal();
    for (Eigen::Index r = 0; r < c.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(c, r); it; ++it) {
        const double denom = diag[it.row()] + diag[it.col()];
        if (it.value() > 0.0 && denom > 0.0) {
          out.emplace_back(it.row(), it.col(),
                           std::min(1.0, 2.0 * it.value() / denom));
        }
      }
    }
  }

  SparseMatrix values(c.rows(), c.cols());
  values.setFromTriplets(out.begin(), out.end());
  values.makeCompressed();
  return {std::move(path_name), std::move(values)};
}

SimilarityMatrix similarity(const HeteroGraph& graph, const MetaPath& path,
                            PathSimVariant variant) {
  return pathsim(path_count(graph, path), variant, path.to_string());
}

SparseMatrix symmetrize(const SparseMatrix& s) {
  SparseMatrix t = s.transpose();
  SparseMatrix out = 0.5 * (s + t);
  out.makeCompressed();
  return out;
}

std::string to_string(PathGroup g) {
  switch (g) {
    case PathGroup::kUserUser: return "UU";
    case PathGroup::kItemItem: return "II";
    case PathGroup::kUserItem: return "UI";
  }
  return "?";
}

void check_group(const Schema& schema, PathGroup group, const MetaPath& path) {
  const auto& user = schema.user_type();
  const auto& item = schema.item_type();
  const auto& [want_src, want_dst] =
      group == PathGroup::kUserUser   ? std::pair{user, user}
      : group == PathGroup::kItemItem ? std::pair{item, item}
                                      : std::pair{user, item};
  if (path.source_type() != want_src || path.target_type() != want_dst) {
    throw InputError(to_string(group) + " meta-path '" + path.to_string() +
                     "' must run from " + want_src + " to " + want_dst);
  }
}

MetaPathSpecs parse_metapath_specs(const Schema& schema,
                                   const std::string& text,
                                   const std::string& origin) {
  MetaPathSpecs specs;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = detail::strip_comment(line);
    if (body.empty()) continue;
    const auto where = origin + ":" + std::to_string(lineno) + ": ";
    const auto colon = body.find(':');
    if (colon == std::string_view::npos) {
      throw InputError(where + "expected 'GROUP: path'");
    }
    const std::string group(detail::trim(body.substr(0, colon)));
    const std::string rest(detail::trim(body.substr(colon + 1)));
    try {
      PathGroup g;
      if (group == "UU") g = PathGroup::kUserUser;
      else if (group == "II") g = PathGroup::kItemItem;
      else if (group == "UI") g = PathGroup::kUserItem;
      else throw InputError("unknown group '" + group + "'");
      auto path = MetaPath::parse(schema, rest);
      check_group(schema, g, path);
      auto& dst = g == PathGroup::kUserUser   ? specs.user_user
                  : g == PathGroup::kItemItem ? specs.item_item
                                              : specs.user_item;
      dst.push_back(std::move(path));
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    }
  }
  return specs;
}

MetaPathSpecs load_metapath_specs(const Schema& schema,
                                  const std::filesystem::path& path) {
  return parse_metapath_specs(schema, detail::read_file(path), path.string());
}

RelationSet build_relation_set(const HeteroGraph& graph,
                               const MetaPathSpecs& specs,
                               PathSimVariant variant,
                               const SimilarityLookup& lookup) {
  const auto& schema = graph.schema();
  auto compute = [&](PathGroup g, const MetaPath& p) {
    check_group(schema, g, p);
    if (lookup) {
      if (auto hit = lookup(g, p)) return std::move(*hit);
    }
    return similarity(graph, p, variant);
  };

  RelationSet set;
  for (const auto& p : specs.user_user) {
    auto s = compute(PathGroup::kUserUser, p);
    s.values = symmetrize(s.values);
    set.user_user.push_back(std::move(s));
  }
  for (const auto& p : specs.item_item) {
    auto s = compute(PathGroup::kItemItem, p);
    s.values = symmetrize(s.values);
    set.item_item.push_back(std::move(s));
  }
  for (const auto& p : specs.user_item) {
    set.user_item.push_back(compute(PathGroup::kUserItem, p));
  }
  return set;
}

RatingMatrix derive_ratings(const HeteroGraph& graph,
                            const MetaPath& target_path,
                            PathSimVariant variant) {
  check_group(graph.schema(), PathGroup::kUserItem, target_path);
  return RatingMatrix::from_sparse(
      similarity(graph, target_path, variant).values);
}

// ---------------------------------------------------------------------------

std::filesystem::path cache_file_name(const std::filesystem::path& dir,
                                      const SimilarityCacheKey& key) {
  detail::Fnv1a h;
  h.update(key.path);
  h.update("|");
  h.update(to_string(key.variant));
  return dir / ("sim-" + detail::to_hex(h.digest()) + ".tsv");
}

void write_similarity_cache(const std::filesystem::path& file,
                            const SimilarityCacheKey& key,
                            const SimilarityMatrix& sim) {
  std::ostringstream out;
  const auto& v = sim.values;
  out << "# hetecf-similarity 1\n"
      << "# path " << key.path << '\n'
      << "# variant " << to_string(key.variant) << '\n'
      << "# graph " << detail::to_hex(key.graph_hash) << '\n'
      << "# shape " << v.rows() << ' ' << v.cols() << ' ' << v.nonZeros()
      << '\n';
  for (Eigen::Index r = 0; r < v.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(v, r); it; ++it) {
      out << it.row() << '\t' << it.col() << '\t'
          << detail::format_double(it.value()) << '\n';
    }
  }
  out << "# end\n";
  detail::write_atomic(file, out.str());
}

std::optional<SimilarityMatrix> read_similarity_cache(
    const std::filesystem::path& file, const SimilarityCacheKey& key) {
  if (!std::filesystem::exists(file)) return std::nullopt;
  std::istringstream in(detail::read_file(file));
  auto corrupt = [&](const std::string& why) {
    return InputError(file.string() + ": corrupted similarity cache (" + why +
                      ")");
  };
  std::string line;
  auto header = [&](const std::string& tag) -> std::string {
    if (!std::getline(in, line)) throw corrupt("truncated header");
    const auto prefix = "# " + tag;
    if (line.rfind(prefix, 0) != 0) throw corrupt("expected '" + prefix + "'");
    return std::string(detail::trim(std::string_view(line).substr(prefix.size())));
  };
  if (header("hetecf-similarity") != "1") throw corrupt("unknown version");
  const auto path = header("path");
  const auto variant = header("variant");
  const auto graph = header("graph");
  const auto shape = detail::split_ws(header("shape"));
  if (path != key.path || variant != to_string(key.variant) ||
      graph != detail::to_hex(key.graph_hash)) {
    return std::nullopt;
  }
  std::size_t rows = 0, cols = 0, nnz = 0;
  if (shape.size() != 3 || !detail::parse_size(shape[0], rows) ||
      !detail::parse_size(shape[1], cols) || !detail::parse_size(shape[2], nnz)) {
    throw corrupt("bad shape line");
  }
  std::vector<Triplet> triplets;
  triplets.reserve(nnz);
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "# end") {
      ended = true;
      break;
    }
    const auto f = detail::split_tabs(line);
    std::size_t r = 0, c = 0;
    double value = 0.0;
    if (f.size() != 3 || !detail::parse_size(f[0], r) ||
        !detail::parse_size(f[1], c) || !detail::parse_double(f[2], value) ||
        r >= rows || c >= cols || !(value >= 0.0 && value <= 1.0)) {
      throw corrupt("bad entry '" + line + "'");
    }
    triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), value);
  }
  if (!ended) throw corrupt("missing end marker");
  if (triplets.size() != nnz) throw corrupt("entry count mismatch");
  SparseMatrix values(static_cast<Eigen::Index>(rows),
                      static_cast<Eigen::Index>(cols));
  values.setFromTriplets(triplets.begin(), triplets.end());
  values.makeCompressed();
  if (static_cast<std::size_t>(values.nonZeros()) != nnz) {
    throw corrupt("duplicate entries");
  }
  return SimilarityMatrix{path, std::move(values)};
}

}  // namespace hetecf
