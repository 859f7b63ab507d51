// Copyright 2026 The mmctl Authors.
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

// Strict accessors over yaml-cpp nodes. Every failure is a FormatError
// carrying the 1-based line of the offending node.
#pragma once

#include <yaml-cpp/yaml.h>

#include <initializer_list>
#include <string>
#include <vector>

#include "mmctl/types.hpp"

namespace mmctl::yaml {

inline int line(const YAML::Node& n) { return n && n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

inline void check_keys(const YAML::Node& node, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw FormatError("expected a mapping", line(node));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) {
      std::string list;
      for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      throw FormatError("unknown key '" + key + "' (allowed: " + list + ")", line(kv.first));
    }
  }
}

inline YAML::Node require(const YAML::Node& node, const char* key) {
  YAML::Node v = node[key];
  if (!v) throw FormatError(std::string("missing required key '") + key + "'", line(node));
  return v;
}

template <typename T>
T as(const YAML::Node& v, const std::string& what) {
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw FormatError("bad value for '" + what + "'", line(v));
  }
}

template <typename T>
T get(const YAML::Node& node, const char* key) {
  return as<T>(require(node, key), key);
}

template <typename T>
T get(const YAML::Node& node, const char* key, const T& fallback) {
  YAML::Node v = node[key];
  return v ? as<T>(v, key) : fallback;
}

inline std::vector<double> vector(const YAML::Node& v, std::size_t expected = 0) {
  if (!v.IsSequence()) throw FormatError("expected a sequence of numbers", line(v));
  if (expected != 0 && v.size() != expected) {
    throw FormatError("expected " + std::to_string(expected) + " numbers, got " +
                          std::to_string(v.size()),
                      line(v));
  }
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as<double>(e, "number"));
  return out;
}

inline Vec3 vec3(const YAML::Node& v) {
  const auto d = vector(v, 3);
  return {d[0], d[1], d[2]};
}

}  // namespace mmctl::yaml
