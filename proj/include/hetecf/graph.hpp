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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

namespace hetecf {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

struct Relation {
  std::string name;
  std::string source;
  std::string target;
};

// Declared node types and relations of a heterogeneous social network.
//
// Schema file grammar (one declaration per line, '#' starts a comment,
// fields separated by whitespace):
//
//   type <TypeName> [user|item]
//   relation <name> <SourceType> <TargetType>
//
// Exactly one type carries the `user` flag and one the `item` flag. A
// relation whose source and target type coincide (e.g. friendship between
// users) must be declared like any other relation.
class Schema {
 public:
  Schema() = default;

  // Throws InputError if the invariants do not hold.
  Schema(std::vector<std::string> node_types, std::string user_type,
         std::string item_type, std::vector<Relation> relations);

  static Schema parse(const std::string& text);
  std::string to_string() const;

  const std::vector<std::string>& node_types() const { return node_types_; }
  const std::vector<Relation>& relations() const { return relations_; }
  const std::string& user_type() const { return user_type_; }
  const std::string& item_type() const { return item_type_; }

  bool has_type(const std::string& type) const;
  std::size_t type_index(const std::string& type) const;
  const Relation& relation(const std::string& name) const;
  std::size_t relation_index(const std::string& name) const;

  friend bool operator==(const Schema& a, const Schema& b);

 private:
  std::vector<std::string> node_types_;
  std::string user_type_;
  std::string item_type_;
  std::vector<Relation> relations_;
};

bool operator==(const Relation& a, const Relation& b);

// Typed nodes with per-type dense index spaces and one weighted sparse
// adjacency matrix per relation (source count x target count). Immutable
// once built.
class HeteroGraph {
 public:
  HeteroGraph() = default;

  class Builder;

  const Schema& schema() const { return schema_; }

  std::size_t node_count(const std::string& type) const;
  std::size_t total_nodes() const;
  std::size_t edge_count(const std::string& relation) const;
  std::size_t total_edges() const;

  const std::vector<std::string>& node_ids(const std::string& type) const;
  std::optional<std::size_t> find_node(const std::string& type,
                                       const std::string& id) const;

  // Entry (s, t) is the summed weight of s -relation-> t edges.
  const SparseMatrix& adjacency(const std::string& relation) const;

  // 64-bit FNV-1a over a canonical serialization. Independent of the order
  // in which edges were read.
  std::uint64_t content_hash() const;

  friend bool operator==(const HeteroGraph& a, const HeteroGraph& b);

 private:
  Schema schema_;
  std::vector<std::vector<std::string>> ids_;  // per type
  std::vector<std::unordered_map<std::string, std::size_t>> index_;
  std::vector<SparseMatrix> adjacency_;  // per relation
};

class HeteroGraph::Builder {
 public:
  explicit Builder(Schema schema);

  // Returns the node's index within its type. Throws on duplicate id.
  std::size_t add_node(const std::string& id, const std::string& type);

  // Throws InputError for unknown ids/relations, type mismatches, self-loops
  // and negative or non-finite weights. Parallel edges are summed.
  void add_edge(const std::string& src, const std::string& dst,
                const std::string& relation, double weight = 1.0);

  HeteroGraph build() &&;

 private:
  struct NodeRef {
    std::size_t type;
    std::size_t index;
  };

  Schema schema_;
  std::vector<std::vector<std::string>> ids_;
  std::vector<std::unordered_map<std::string, std::size_t>> index_;
  std::unordered_map<std::string, NodeRef> global_;
  std::vector<std::vector<Triplet>> edges_;
};

// Reads the three text files described in the README. Errors carry the file
// path and line number.
HeteroGraph load_graph(const std::filesystem::path& nodes_path,
                       const std::filesystem::path& edges_path,
                       const std::filesystem::path& schema_path);

void save_graph(const HeteroGraph& graph,
                const std::filesystem::path& nodes_path,
                const std::filesystem::path& edges_path,
                const std::filesystem::path& schema_path);

// Adjacency of `relation`; `transposed` gives the reverse relation's matrix.
SparseMatrix adjacency(const HeteroGraph& graph, const std::string& relation,
                       bool transposed);

struct Rating {
  std::size_t user;
  std::size_t item;
  double value;
};

// Sparse user-item matrix with values in [0, 1]. Only nonzero entries are
// observed; entries are kept sorted by (user, item) with no duplicates.
class RatingMatrix {
 public:
  RatingMatrix() = default;
  RatingMatrix(std::size_t users, std::size_t items,
               std::vector<Rating> entries);

  static RatingMatrix from_sparse(const SparseMatrix& values);

  std::size_t users() const { return users_; }
  std::size_t items() const { return items_; }
  const std::vector<Rating>& entries() const { return entries_; }
  std::size_t observed() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double density() const;

  std::vector<std::size_t> user_counts() const;
  std::vector<std::size_t> item_counts() const;

  SparseMatrix to_sparse() const;

 private:
  std::size_t users_ = 0;
  std::size_t items_ = 0;
  std::vector<Rating> entries_;
};

}  // namespace hetecf
