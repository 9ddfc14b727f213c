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

// Small text-file helpers shared by the readers and writers in src/.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "hetecf/error.hpp"

namespace hetecf::detail {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file then renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& data);

std::string_view strip_comment(std::string_view line);
std::vector<std::string> split_ws(std::string_view line);
std::vector<std::string> split_tabs(std::string_view line);
std::string_view trim(std::string_view s);

// Calls `fn(lineno, fields)` for each tab-separated record, skipping blank
// lines and lines whose first non-blank character is '#'.
void for_each_record(
    const std::filesystem::path& path,
    const std::function<void(std::size_t, const std::vector<std::string>&)>&
        fn);

InputError line_error(const std::filesystem::path& path, std::size_t lineno,
                      const std::string& message);

bool parse_double(std::string_view text, double& out);
bool parse_size(std::string_view text, std::size_t& out);

// Shortest round-trip decimal representation.
std::string format_double(double v);

std::string to_hex(std::uint64_t v);

class Fnv1a {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void update_pod(const T& v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    update(std::string_view(buf, sizeof(T)));
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace hetecf::detail
