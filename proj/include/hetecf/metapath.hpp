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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hetecf/graph.hpp"

namespace hetecf {

struct PathStep {
  std::string relation;
  bool reversed = false;  // traverse target -> source

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

// An ordered chain of relations, e.g. Author -writes-> Paper <-writes-
// Author. Node types are resolved against a schema on construction so a
// MetaPath is always type-compatible.
class MetaPath {
 public:
  MetaPath() = default;
  MetaPath(const Schema& schema, std::vector<PathStep> steps);

  // Parses `T1 -rel1-> T2 <-rel2- T3 ...`.
  static MetaPath parse(const Schema& schema, const std::string& text);

  const std::vector<PathStep>& steps() const { return steps_; }
  const std::vector<std::string>& types() const { return types_; }
  const std::string& source_type() const { return types_.front(); }
  const std::string& target_type() const { return types_.back(); }
  std::size_t length() const { return steps_.size(); }

  // Equal to its own reverse, step for step. Path counts along such paths
  // factor as M * M^T and are symmetric.
  bool palindromic() const;

  std::string to_string() const;

  friend bool operator==(const MetaPath&, const MetaPath&) = default;
  friend MetaPath reverse(const MetaPath& path);

 private:
  std::vector<PathStep> steps_;
  std::vector<std::string> types_;
};

MetaPath reverse(const MetaPath& path);

struct PathCountMatrix {
  std::string source_type;
  std::string target_type;
  bool palindromic = false;
  SparseMatrix counts;
};

// Ordered product of the per-step adjacency matrices. Path instances may
// revisit nodes.
PathCountMatrix path_count(const HeteroGraph& graph, const MetaPath& path);

enum class PathSimVariant {
  // 2 PC(s,t) / (sum_t' PC(s,t') + sum_s' PC(s',t))
  kRowCol,
  // 2 PC(s,t) / (PC(s,s) + PC(t,t)); palindromic paths only
  kDiagonal,
};

std::string to_string(PathSimVariant v);
PathSimVariant parse_variant(const std::string& text);

struct SimilarityMatrix {
  std::string path;  // MetaPath::to_string()
  SparseMatrix values;
};

SimilarityMatrix pathsim(const PathCountMatrix& pc, PathSimVariant variant,
                         std::string path_name = {});

// Convenience: path_count followed by pathsim.
SimilarityMatrix similarity(const HeteroGraph& graph, const MetaPath& path,
                            PathSimVariant variant);

// (S + S^T) / 2
SparseMatrix symmetrize(const SparseMatrix& s);

enum class PathGroup { kUserUser, kItemItem, kUserItem };

std::string to_string(PathGroup g);

struct MetaPathSpecs {
  std::vector<MetaPath> user_user;
  std::vector<MetaPath> item_item;
  std::vector<MetaPath> user_item;

  std::size_t size() const {
    return user_user.size() + item_item.size() + user_item.size();
  }
};

// Meta-path spec file: one path per line, `GROUP: T1 -rel-> T2 ...` with
// GROUP one of UU, II, UI. '#' starts a comment. Errors cite the line.
MetaPathSpecs parse_metapath_specs(const Schema& schema,
                                   const std::string& text,
                                   const std::string& origin = "metapaths");
MetaPathSpecs load_metapath_specs(const Schema& schema,
                                  const std::filesystem::path& path);

// Similarity inputs to training: S_A^k (user-user), S_B^k (item-item) and
// the user-item relation graphs. Intra-type matrices are symmetrized.
struct RelationSet {
  std::vector<SimilarityMatrix> user_user;
  std::vector<SimilarityMatrix> item_item;
  std::vector<SimilarityMatrix> user_item;

  std::size_t num_user_paths() const { return user_user.size(); }
  std::size_t num_item_paths() const { return item_item.size(); }
  std::size_t num_user_item_paths() const { return user_item.size(); }
};

// Validates group endpoint types, then computes one similarity matrix per
// path. `lookup` may supply precomputed matrices (e.g. from a disk cache);
// it returns nullopt to request computation.
using SimilarityLookup = std::function<std::optional<SimilarityMatrix>(
    PathGroup, const MetaPath&)>;

void check_group(const Schema& schema, PathGroup group, const MetaPath& path);

RelationSet build_relation_set(const HeteroGraph& graph,
                               const MetaPathSpecs& specs,
                               PathSimVariant variant,
                               const SimilarityLookup& lookup = {});

// Ratings along a user -> item target path: R(i, j) = PathSim(i, j), zero
// similarity meaning unobserved.
RatingMatrix derive_ratings(const HeteroGraph& graph,
                            const MetaPath& target_path,
                            PathSimVariant variant = PathSimVariant::kRowCol);

// On-disk similarity cache, keyed by (graph hash, path, variant).
//
//   # hetecf-similarity 1
//   # path <MetaPath::to_string()>
//   # variant rowcol|diagonal
//   # graph <16 hex digits>
//   # shape <rows> <cols> <nnz>
//   <row>\t<col>\t<value>      (one line per stored entry)
//   # end
struct SimilarityCacheKey {
  std::uint64_t graph_hash = 0;
  std::string path;
  PathSimVariant variant = PathSimVariant::kRowCol;
};

std::filesystem::path cache_file_name(const std::filesystem::path& dir,
                                      const SimilarityCacheKey& key);

void write_similarity_cache(const std::filesystem::path& file,
                            const SimilarityCacheKey& key,
                            const SimilarityMatrix& sim);

// nullopt if the file is missing or stale (key mismatch). Throws InputError
// if it exists but is corrupted.
std::optional<SimilarityMatrix> read_similarity_cache(
    const std::filesystem::path& file, const SimilarityCacheKey& key);

}  // namespace hetecf
