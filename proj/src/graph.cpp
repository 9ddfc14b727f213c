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

#include "hetecf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

#include "hetecf/error.hpp"
#include "io_util.hpp"

namespace hetecf {

bool operator==(const Relation& a, const Relation& b) {
  return std::tie(a.name, a.source, a.target) ==
         std::tie(b.name, b.source, b.target);
}

Schema::Schema(std::vector<std::string> node_types, std::string user_type,
               std::string item_type, std::vector<Relation> relations)
    : node_types_(std::move(node_types)),
      user_type_(std::move(user_type)),
      item_type_(std::move(item_type)),
      relations_(std::move(relations)) {
  if (node_types_.size() < 2) {
    throw InputError("schema: at least 2 node types are required");
  }
  for (std::size_t i = 0; i < node_types_.size(); ++i) {
    for (std::size_t j = i + 1; j < node_types_.size(); ++j) {
      if (node_types_[i] == node_types_[j]) {
        throw InputError("schema: duplicate node type '" + node_types_[i] +
                         "'");
      }
    }
  }
  if (user_type_.empty() || !has_type(user_type_)) {
    throw InputError("schema: exactly one node type must be flagged 'user'");
  }
  if (item_type_.empty() || !has_type(item_type_)) {
    throw InputError("schema: exactly one node type must be flagged 'item'");
  }
  if (user_type_ == item_type_) {
    throw InputError("schema: user and item type must differ");
  }
  for (std::size_t r = 0; r < relations_.size(); ++r) {
    const auto& rel = relations_[r];
    if (!has_type(rel.source) || !has_type(rel.target)) {
      throw InputError("schema: relation '" + rel.name +
                       "' references an undeclared node type");
    }
    for (std::size_t q = 0; q < r; ++q) {
      if (relations_[q].name == rel.name) {
        throw InputError("schema: duplicate relation '" + rel.name + "'");
      }
    }
  }
}

Schema Schema::parse(const std::string& text) {
  std::vector<std::string> types;
  std::string user, item;
  std::vector<Relation> relations;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = detail::split_ws(detail::strip_comment(line));
    if (fields.empty()) continue;
    const auto where = "schema line " + std::to_string(lineno) + ": ";
    if (fields[0] == "type") {
      if (fields.size() < 2 || fields.size() > 3) {
        throw InputError(where + "expected 'type <Name> [user|item]'");
      }
      types.push_back(fields[1]);
      if (fields.size() == 3) {
        auto& slot = fields[2] == "user"   ? user
                     : fields[2] == "item" ? item
                                           : throw InputError(
                                                 where + "unknown flag '" +
                                                 fields[2] + "'");
        if (!slot.empty()) {
          throw InputError(where + "more than one type flagged '" +
                           fields[2] + "'");
        }
        slot = fields[1];
      }
    } else if (fields[0] == "relation") {
      if (fields.size() != 4) {
        throw InputError(where + "expected 'relation <name> <Src> <Dst>'");
      }
      relations.push_back({fields[1], fields[2], fields[3]});
    } else {
      throw InputError(where + "unknown declaration '" + fields[0] + "'");
    }
  }
  return Schema(std::move(types), std::move(user), std::move(item),
                std::move(relations));
}

std::string Schema::to_string() const {
  std::ostringstream out;
  for (const auto& t : node_types_) {
    out << "type " << t;
    if (t == user_type_) out << " user";
    if (t == item_type_) out << " item";
    out << '\n';
  }
  for (const auto& r : relations_) {
    out << "relation " << r.name << ' ' << r.source << ' ' << r.target << '\n';
  }
  return out.str();
}

bool Schema::has_type(const std::string& type) const {
  return std::find(node_types_.begin(), node_types_.end(), type) !=
         node_types_.end();
}

std::size_t Schema::type_index(const std::string& type) const {
  auto it = std::find(node_types_.begin(), node_types_.end(), type);
  if (it == node_types_.end()) {
    throw InputError("unknown node type '" + type + "'");
  }
  return static_cast<std::size_t>(it - node_types_.begin());
}

std::size_t Schema::relation_index(const std::string& name) const {
  auto it = std::find_if(relations_.begin(), relations_.end(),
                         [&](const Relation& r) { return r.name == name; });
  if (it == relations_.end()) {
    throw InputError("unknown relation '" + name + "'");
  }
  return static_cast<std::size_t>(it - relations_.begin());
}

const Relation& Schema::relation(const std::string& name) const {
  return relations_[relation_index(name)];
}

bool operator==(const Schema& a, const Schema& b) {
  return a.node_types_ == b.node_types_ && a.user_type_ == b.user_type_ &&
         a.item_type_ == b.item_type_ && a.relations_ == b.relations_;
}

// ---------------------------------------------------------------------------

std::size_t HeteroGraph::node_count(const std::string& type) const {
  return ids_[schema_.type_index(type)].size();
}

std::size_t HeteroGraph::total_nodes() const {
  std::size_t total = 0;
  for (const auto& ids : ids_) total += ids.size();
  return total;
}

std::size_t HeteroGraph::edge_count(const std::string& relation) const {
  return static_cast<std::size_t>(
      adjacency_[schema_.relation_index(relation)].nonZeros());
}

std::size_t HeteroGraph::total_edges() const {
  std::size_t total = 0;
  for (const auto& a : adjacency_) total += static_cast<std::size_t>(a.nonZeros());
  return total;
}

const std::vector<std::string>& HeteroGraph::node_ids(
    const std::string& type) const {
  return ids_[schema_.type_index(type)];
}

std::optional<std::size_t> HeteroGraph::find_node(const std::string& type,
                                                  const std::string& id) const {
  const auto& index = index_[schema_.type_index(type)];
  auto it = index.find(id);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

const SparseMatrix& HeteroGraph::adjacency(const std::string& relation) const {
  return adjacency_[schema_.relation_index(relation)];
}

std::uint64_t HeteroGraph::content_hash() const {
  detail::Fnv1a h;
  h.update(schema_.to_string());
  for (std::size_t t = 0; t < ids_.size(); ++t) {
    h.update("#type");
    for (const auto& id : ids_[t]) {
      h.update(id);
      h.update("\n");
    }
  }
  // Adjacency matrices are compressed, so iteration order is canonical.
  for (const auto& a : adjacency_) {
    h.update("#rel");
    for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(a, r); it; ++it) {
        h.update_pod(static_cast<std::uint64_t>(it.row()));
        h.update_pod(static_cast<std::uint64_t>(it.col()));
        h.update_pod(it.value());
      }
    }
  }
  return h.digest();
}

bool operator==(const HeteroGraph& a, const HeteroGraph& b) {
  if (!(a.schema_ == b.schema_) || a.ids_ != b.ids_) return false;
  for (std::size_t r = 0; r < a.adjacency_.size(); ++r) {
    const auto& x = a.adjacency_[r];
    const auto& y = b.adjacency_[r];
    if (x.rows() != y.rows() || x.cols() != y.cols() ||
        x.nonZeros() != y.nonZeros()) {
      return false;
    }
    if (SparseMatrix(x - y).norm() != 0.0) return false;
  }
  return true;
}

HeteroGraph::Builder::Builder(Schema schema)
    : schema_(std::move(schema)),
      ids_(schema_.node_types().size()),
      index_(schema_.node_types().size()),
      edges_(schema_.relations().size()) {}

std::size_t HeteroGraph::Builder::add_node(const std::string& id,
                                           const std::string& type) {
  if (id.empty()) throw InputError("empty node id");
  const auto t = schema_.type_index(type);
  if (global_.count(id) != 0) {
    throw InputError("duplicate node id '" + id + "'");
  }
  const auto index = ids_[t].size();
  ids_[t].push_back(id);
  index_[t].emplace(id, index);
  global_.emplace(id, NodeRef{t, index});
  return index;
}

void HeteroGraph::Builder::add_edge(const std::string& src,
                                    const std::string& dst,
                                    const std::string& relation,
                                    double weight) {
  const auto r = schema_.relation_index(relation);
  const auto& rel = schema_.relations()[r];
  auto s = global_.find(src);
  if (s == global_.end()) throw InputError("unknown node id '" + src + "'");
  auto d = global_.find(dst);
  if (d == global_.end()) throw InputError("unknown node id '" + dst + "'");
  if (schema_.node_types()[s->second.type] != rel.source ||
      schema_.node_types()[d->second.type] != rel.target) {
    throw InputError("edge (" + src + ", " + dst + ") does not match relation '" +
                     relation + "' (" + rel.source + " -> " + rel.target + ")");
  }
  if (src == dst) {
    throw InputError("self-loop on '" + src + "' in relation '" + relation +
                     "'");
  }
  if (!std::isfinite(weight) || weight < 0.0) {
    throw InputError("edge (" + src + ", " + dst +
                     ") has a negative or non-finite weight");
  }
  edges_[r].emplace_back(static_cast<int>(s->second.index),
                         static_cast<int>(d->second.index), weight);
}

HeteroGraph HeteroGraph::Builder::build() && {
  HeteroGraph g;
  g.adjacency_.reserve(edges_.size());
  for (std::size_t r = 0; r < edges_.size(); ++r) {
    const auto& rel = schema_.relations()[r];
    SparseMatrix a(
        static_cast<Eigen::Index>(ids_[schema_.type_index(rel.source)].size()),
        static_cast<Eigen::Index>(ids_[schema_.type_index(rel.target)].size()));
    // setFromTriplets sums duplicates.
    a.setFromTriplets(edges_[r].begin(), edges_[r].end());
    a.prune(0.0);
    a.makeCompressed();
    g.adjacency_.push_back(std::move(a));
  }
  g.schema_ = std::move(schema_);
  g.ids_ = std::move(ids_);
  g.index_ = std::move(index_);
  return g;
}

// ---------------------------------------------------------------------------

HeteroGraph load_graph(const std::filesystem::path& nodes_path,
                       const std::filesystem::path& edges_path,
                       const std::filesystem::path& schema_path) {
  Schema schema = [&] {
    const auto text = detail::read_file(schema_path);
    try {
      return Schema::parse(text);
    } catch (const InputError& e) {
      throw InputError(schema_path.string() + ": " + e.what());
    }
  }();
  HeteroGraph::Builder builder(std::move(schema));

  detail::for_each_record(
      nodes_path, [&](std::size_t lineno, const std::vector<std::string>& f) {
        if (f.size() != 2) {
          throw detail::line_error(nodes_path, lineno,
                                   "expected '<node_id>\\t<node_type>'");
        }
        try {
          builder.add_node(f[0], f[1]);
        } catch (const InputError& e) {
          throw detail::line_error(nodes_path, lineno, e.what());
        }
      });

  detail::for_each_record(
      edges_path, [&](std::size_t lineno, const std::vector<std::string>& f) {
        if (f.size() != 3 && f.size() != 4) {
          throw detail::line_error(
              edges_path, lineno,
              "expected '<src_id>\\t<dst_id>\\t<relation>[\\t<weight>]'");
        }
        double weight = 1.0;
        if (f.size() == 4 && !detail::parse_double(f[3], weight)) {
          throw detail::line_error(edges_path, lineno,
                                   "bad weight '" + f[3] + "'");
        }
        try {
          builder.add_edge(f[0], f[1], f[2], weight);
        } catch (const InputError& e) {
          throw detail::line_error(edges_path, lineno, e.what());
        }
      });

  return std::move(builder).build();
}

void save_graph(const HeteroGraph& graph,
                const std::filesystem::path& nodes_path,
                const std::filesystem::path& edges_path,
                const std::filesystem::path& schema_path) {
  const auto& schema = graph.schema();
  detail::write_atomic(schema_path, schema.to_string());

  std::ostringstream nodes;
  for (const auto& type : schema.node_types()) {
    for (const auto& id : graph.node_ids(type)) {
      nodes << id << '\t' << type << '\n';
    }
  }
  detail::write_atomic(nodes_path, nodes.str());

  std::ostringstream edges;
  for (const auto& rel : schema.relations()) {
    const auto& src = graph.node_ids(rel.source);
    const auto& dst = graph.node_ids(rel.target);
    const auto& a = graph.adjacency(rel.name);
    for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(a, r); it; ++it) {
        edges << src[static_cast<std::size_t>(it.row())] << '\t'
              << dst[static_cast<std::size_t>(it.col())] << '\t' << rel.name
              << '\t' << detail::format_double(it.value()) << '\n';
      }
    }
  }
  detail::write_atomic(edges_path, edges.str());
}

SparseMatrix adjacency(const HeteroGraph& graph, const std::string& relation,
                       bool transposed) {
  const auto& a = graph.adjacency(relation);
  if (!transposed) return a;
  SparseMatrix t = a.transpose();
  t.makeCompressed();
  return t;
}

// ---------------------------------------------------------------------------

RatingMatrix::RatingMatrix(std::size_t users, std::size_t items,
                           std::vector<Rating> entries)
    : users_(users), items_(items), entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const Rating& a, const Rating& b) {
              return std::tie(a.user, a.item) < std::tie(b.user, b.item);
            });
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const auto& e = entries_[k];
    if (e.user >= users_ || e.item >= items_) {
      throw InputError("rating (" + std::to_string(e.user) + ", " +
                       std::to_string(e.item) + ") out of range");
    }
    if (!std::isfinite(e.value) || e.value < 0.0 || e.value > 1.0) {
      throw InputError("rating (" + std::to_string(e.user) + ", " +
                       std::to_string(e.item) + ") not in [0, 1]");
    }
    if (k > 0 && entries_[k - 1].user == e.user &&
        entries_[k - 1].item == e.item) {
      throw InputError("duplicate rating (" + std::to_string(e.user) + ", " +
                       std::to_string(e.item) + ")");
    }
  }
}

RatingMatrix RatingMatrix::from_sparse(const SparseMatrix& values) {
  std::vector<Rating> entries;
  entries.reserve(static_cast<std::size_t>(values.nonZeros()));
  for (Eigen::Index r = 0; r < values.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(values, r); it; ++it) {
      if (it.value() != 0.0) {
        entries.push_back({static_cast<std::size_t>(it.row()),
                           static_cast<std::size_t>(it.col()), it.value()});
      }
    }
  }
  return RatingMatrix(static_cast<std::size_t>(values.rows()),
                      static_cast<std::size_t>(values.cols()),
                      std::move(entries));
}

double RatingMatrix::density() const {
  if (users_ == 0 || items_ == 0) return 0.0;
  return static_cast<double>(entries_.size()) /
         (static_cast<double>(users_) * static_cast<double>(items_));
}

std::vector<std::size_t> RatingMatrix::user_counts() const {
  std::vector<std::size_t> counts(users_, 0);
  for (const auto& e : entries_) ++counts[e.user];
  return counts;
}

std::vector<std::size_t> RatingMatrix::item_counts() const {
  std::vector<std::size_t> counts(items_, 0);
  for (const auto& e : entries_) ++counts[e.item];
  return counts;
}

SparseMatrix RatingMatrix::to_sparse() const {
  std::vector<Triplet> t;
  t.reserve(entries_.size());
  for (const auto& e : entries_) {
    t.emplace_back(static_cast<int>(e.user), static_cast<int>(e.item), e.value);
  }
  SparseMatrix m(static_cast<Eigen::Index>(users_),
                 static_cast<Eigen::Index>(items_));
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

}  // namespace hetecf
