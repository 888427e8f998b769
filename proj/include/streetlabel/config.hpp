// Copyright 2026 The streetlabel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "streetlabel/augment.hpp"
#include "streetlabel/context.hpp"
#include "streetlabel/error.hpp"
#include "streetlabel/mrf.hpp"
#include "streetlabel/scorer.hpp"
#include "streetlabel/slic.hpp"

namespace streetlabel {

// Reader for the TOML subset used by pipeline configs: [table] headers,
// key = value pairs, basic strings, integers, floats, booleans and
// single-line arrays of those. Keys come back as "table.key".
namespace toml {

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, Array> v;
};

using Document = std::map<std::string, Value>;

namespace detail {

class Parser {
public:
  Parser(const std::string& text, int line) : s_(text), line_(line) {}

  Value value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return {string()};
    if (c == '[') return {array()};
    if (s_.compare(pos_, 4, "true") == 0) return pos_ += 4, Value{true};
    if (s_.compare(pos_, 5, "false") == 0) return pos_ += 5, Value{false};
    return number();
  }

  void finish() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] != '#') fail("unexpected trailing characters");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error("config line " + std::to_string(line_) + ": " + what);
  }

private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  std::string string() {
    std::string out;
    for (++pos_; pos_ < s_.size(); ++pos_) {
      char c = s_[pos_];
      if (c == '"') {
        ++pos_;
        return out;
      }
      if (c == '\\') {
        if (++pos_ >= s_.size()) break;
        switch (s_[pos_]) {
        case 'n': c = '\n'; break;
        case 't': c = '\t'; break;
        case '"': c = '"'; break;
        case '\\': c = '\\'; break;
        default: fail("unsupported escape");
        }
      }
      out += c;
    }
    fail("unterminated string");
  }

  Array array() {
    Array out;
    ++pos_;
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      out.push_back(value());
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',') ++pos_;
      else if (pos_ >= s_.size() || s_[pos_] != ']') fail("expected ',' or ']' in array");
    }
  }

  Value number() {
    std::size_t end = pos_;
    while (end < s_.size() && std::string_view("+-0123456789.eE_").find(s_[end]) != std::string_view::npos) ++end;
    std::string token;
    for (std::size_t i = pos_; i < end; ++i)
      if (s_[i] != '_') token += s_[i];
    if (token.empty()) fail("invalid value");
    if (token[0] == '+') token.erase(0, 1);
    pos_ = end;
    const bool is_float = token.find_first_of(".eE") != std::string::npos;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (is_float) {
      double d = 0;
      auto [p, ec] = std::from_chars(first, last, d);
      if (ec != std::errc() || p != last) fail("invalid float '" + token + "'");
      return {d};
    }
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(first, last, i);
    if (ec != std::errc() || p != last) fail("invalid integer '" + token + "'");
    return {i};
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline bool bare_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

} // namespace detail

inline Document parse(const std::string& text) {
  Document doc;
  std::string table;
  std::istringstream in(text);
  std::string raw;
  for (int line = 1; std::getline(in, raw); ++line) {
    const std::string s = detail::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s[0] == '[') {
      const auto close = s.find(']');
      if (close == std::string::npos) throw Error("config line " + std::to_string(line) + ": unterminated table header");
      table = detail::trim(s.substr(1, close - 1));
      if (!detail::bare_key(table)) throw Error("config line " + std::to_string(line) + ": bad table name");
      const std::string rest = detail::trim(s.substr(close + 1));
      if (!rest.empty() && rest[0] != '#') throw Error("config line " + std::to_string(line) + ": junk after table header");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(line) + ": expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    if (!detail::bare_key(key)) throw Error("config line " + std::to_string(line) + ": bad key '" + key + "'");
    const std::string rhs = s.substr(eq + 1);
    detail::Parser p(rhs, line);
    Value v = p.value();
    p.finish();
    const std::string full = table.empty() ? key : table + "." + key;
    if (!doc.emplace(full, std::move(v)).second)
      throw Error("config line " + std::to_string(line) + ": duplicate key '" + full + "'");
  }
  return doc;
}

inline std::string format_double(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  std::string s(buf, p);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

} // namespace toml

struct PipelineConfig {
  // [segmentation]
  int main_param = 150;
  double compactness = 10.0;
  int iterations = 10;
  int image_size = 256; // 0 keeps the native resolution

  // [augmentation]
  TierThresholds thresholds;
  AugmentationPlan plan;

  // [scorer]
  std::string provider = "baseline"; // or "score-files"
  BaselineHyperparams hyper;
  bool shift_ablation = false;
  std::uint64_t displacement_seed = 7;

  // [retrieval]
  std::size_t k = 50;
  std::string corpus; // optional packed GFEC file, rows in train order

  // [context]
  CooccurrenceParams cooccurrence;

  // [mrf]
  bool mrf = true;
  double lambda = 0.5;
  bool hard_mrf = false;
  MoveKind move = MoveKind::kSwap;

  // [run]
  std::string manifest;
  std::string output = "out";
  unsigned workers = 0; // 0 = all cores

  SlicParams slic(int k) const { return {k, compactness, iterations}; }

  void validate() const {
    if (main_param < 1) throw Error("config: main_param must be >= 1");
    if (image_size < 0) throw Error("config: image_size must be >= 0");
    slic(main_param).validate();
    thresholds.validate();
    AugmentationPlan p = plan;
    p.main_param = main_param;
    p.validate();
    if (provider != "baseline" && provider != "score-files")
      throw Error("config: scorer provider must be 'baseline' or 'score-files'");
    if (!(hyper.learning_rate > 0.0)) throw Error("config: learning_rate must be > 0");
    if (hyper.epochs < 0) throw Error("config: epochs must be >= 0");
    if (k < 1) throw Error("config: retrieval k must be >= 1");
    if (cooccurrence.alpha < 0.0 || cooccurrence.floor < 0.0) throw Error("config: alpha and epsilon must be >= 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("config: lambda must be finite and >= 0");
  }

  AugmentationPlan effective_plan() const {
    AugmentationPlan p = plan;
    p.main_param = main_param;
    return p;
  }
};

namespace config_detail {

template <typename T>
T get(const toml::Value& v, const std::string& key);

template <>
inline bool get<bool>(const toml::Value& v, const std::string& key) {
  if (auto* b = std::get_if<bool>(&v.v)) return *b;
  throw Error("config: " + key + " must be a boolean");
}

template <>
inline std::int64_t get<std::int64_t>(const toml::Value& v, const std::string& key) {
  if (auto* i = std::get_if<std::int64_t>(&v.v)) return *i;
  throw Error("config: " + key + " must be an integer");
}

template <>
inline double get<double>(const toml::Value& v, const std::string& key) {
  if (auto* d = std::get_if<double>(&v.v)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v.v)) return static_cast<double>(*i);
  throw Error("config: " + key + " must be a number");
}

template <>
inline std::string get<std::string>(const toml::Value& v, const std::string& key) {
  if (auto* s = std::get_if<std::string>(&v.v)) return *s;
  throw Error("config: " + key + " must be a string");
}

inline std::int64_t get_int(const toml::Value& v, const std::string& key, std::int64_t lo, std::int64_t hi) {
  const auto i = get<std::int64_t>(v, key);
  if (i < lo || i > hi) throw Error("config: " + key + " out of range");
  return i;
}

inline const toml::Array& get_array(const toml::Value& v, const std::string& key) {
  if (auto* a = std::get_if<toml::Array>(&v.v)) return *a;
  throw Error("config: " + key + " must be an array");
}

inline std::vector<int> get_ints(const toml::Value& v, const std::string& key) {
  std::vector<int> out;
  for (const auto& e : get_array(v, key)) out.push_back(static_cast<int>(get_int(e, key, 1, 1 << 24)));
  return out;
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}

} // namespace config_detail

inline MoveKind parse_move(const std::string& s) {
  if (s == "swap") return MoveKind::kSwap;
  if (s == "expansion") return MoveKind::kExpansion;
  throw Error("unknown MRF move kind '" + s + "' (expected swap or expansion)");
}

inline const char* move_name(MoveKind m) { return m == MoveKind::kSwap ? "swap" : "expansion"; }

// Applies every key of the document on top of the given base config; unknown
// keys are errors.
inline PipelineConfig apply_config(const toml::Document& doc, PipelineConfig c = {}) {
  using namespace config_detail;
  constexpr std::int64_t kMaxInt = 1 << 30;
  for (const auto& [key, v] : doc) {
    if (key == "segmentation.main_param") c.main_param = static_cast<int>(get_int(v, key, 1, kMaxInt));
    else if (key == "segmentation.compactness") c.compactness = get<double>(v, key);
    else if (key == "segmentation.iterations") c.iterations = static_cast<int>(get_int(v, key, 0, kMaxInt));
    else if (key == "segmentation.image_size") c.image_size = static_cast<int>(get_int(v, key, 0, 1 << 15));
    else if (key == "augmentation.common_min") c.thresholds.common_min = get<double>(v, key);
    else if (key == "augmentation.unusual_min") c.thresholds.unusual_min = get<double>(v, key);
    else if (key == "augmentation.majority_classes") {
      c.thresholds.majority_classes.clear();
      for (const auto& e : get_array(v, key)) c.thresholds.majority_classes.insert(get<std::string>(e, key));
    } else if (key == "augmentation.common_params") c.plan.tier_params[Tier::kCommon] = get_ints(v, key);
    else if (key == "augmentation.unusual_params") c.plan.tier_params[Tier::kUnusual] = get_ints(v, key);
    else if (key == "augmentation.scarce_params") c.plan.tier_params[Tier::kScarce] = get_ints(v, key);
    else if (key == "augmentation.flip_common") c.plan.flip_enabled[Tier::kCommon] = get<bool>(v, key);
    else if (key == "augmentation.flip_unusual") c.plan.flip_enabled[Tier::kUnusual] = get<bool>(v, key);
    else if (key == "augmentation.flip_scarce") c.plan.flip_enabled[Tier::kScarce] = get<bool>(v, key);
    else if (key == "scorer.provider") c.provider = get<std::string>(v, key);
    else if (key == "scorer.learning_rate") c.hyper.learning_rate = get<double>(v, key);
    else if (key == "scorer.epochs") c.hyper.epochs = static_cast<int>(get_int(v, key, 0, kMaxInt));
    else if (key == "scorer.seed") c.hyper.seed = static_cast<std::uint64_t>(get_int(v, key, 0, INT64_MAX));
    else if (key == "scorer.shift_ablation") c.shift_ablation = get<bool>(v, key);
    else if (key == "scorer.displacement_seed")
      c.displacement_seed = static_cast<std::uint64_t>(get_int(v, key, 0, INT64_MAX));
    else if (key == "retrieval.k") c.k = static_cast<std::size_t>(get_int(v, key, 1, kMaxInt));
    else if (key == "retrieval.corpus") c.corpus = get<std::string>(v, key);
    else if (key == "context.alpha") c.cooccurrence.alpha = get<double>(v, key);
    else if (key == "context.epsilon") c.cooccurrence.floor = get<double>(v, key);
    else if (key == "mrf.enabled") c.mrf = get<bool>(v, key);
    else if (key == "mrf.lambda") c.lambda = get<double>(v, key);
    else if (key == "mrf.hard") c.hard_mrf = get<bool>(v, key);
    else if (key == "mrf.move") c.move = parse_move(get<std::string>(v, key));
    else if (key == "run.manifest") c.manifest = get<std::string>(v, key);
    else if (key == "run.output") c.output = get<std::string>(v, key);
    else if (key == "run.workers") c.workers = static_cast<unsigned>(get_int(v, key, 0, 4096));
    else throw Error("config: unknown key '" + key + "'");
  }
  return c;
}

inline PipelineConfig parse_config(const std::string& text, PipelineConfig base = {}) {
  return apply_config(toml::parse(text), std::move(base));
}

inline PipelineConfig load_config(const std::string& path, PipelineConfig base = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

inline std::string config_to_toml(const PipelineConfig& c) {
  using config_detail::join_ints;
  using toml::format_double;
  using toml::quote;
  std::ostringstream o;
  auto b = [](bool v) { return v ? "true" : "false"; };
  o << "[segmentation]\n"
    << "main_param = " << c.main_param << "\n"
    << "compactness = " << format_double(c.compactness) << "\n"
    << "iterations = " << c.iterations << "\n"
    << "image_size = " << c.image_size << "\n\n";
  o << "[augmentation]\n"
    << "common_min = " << format_double(c.thresholds.common_min) << "\n"
    << "unusual_min = " << format_double(c.thresholds.unusual_min) << "\n"
    << "majority_classes = [";
  bool first = true;
  for (const auto& name : c.thresholds.majority_classes) o << (std::exchange(first, false) ? "" : ", ") << quote(name);
  o << "]\n"
    << "common_params = " << join_ints(c.plan.extras(Tier::kCommon)) << "\n"
    << "unusual_params = " << join_ints(c.plan.extras(Tier::kUnusual)) << "\n"
    << "scarce_params = " << join_ints(c.plan.extras(Tier::kScarce)) << "\n"
    << "flip_common = " << b(c.plan.flips(Tier::kCommon)) << "\n"
    << "flip_unusual = " << b(c.plan.flips(Tier::kUnusual)) << "\n"
    << "flip_scarce = " << b(c.plan.flips(Tier::kScarce)) << "\n\n";
  o << "[scorer]\n"
    << "provider = " << quote(c.provider) << "\n"
    << "learning_rate = " << format_double(c.hyper.learning_rate) << "\n"
    << "epochs = " << c.hyper.epochs << "\n"
    << "seed = " << c.hyper.seed << "\n"
    << "shift_ablation = " << b(c.shift_ablation) << "\n"
    << "displacement_seed = " << c.displacement_seed << "\n\n";
  o << "[retrieval]\n"
    << "k = " << c.k << "\n"
    << "corpus = " << quote(c.corpus) << "\n\n";
  o << "[context]\n"
    << "alpha = " << format_double(c.cooccurrence.alpha) << "\n"
    << "epsilon = " << format_double(c.cooccurrence.floor) << "\n\n";
  o << "[mrf]\n"
    << "enabled = " << b(c.mrf) << "\n"
    << "lambda = " << format_double(c.lambda) << "\n"
    << "hard = " << b(c.hard_mrf) << "\n"
    << "move = " << quote(move_name(c.move)) << "\n\n";
  o << "[run]\n"
    << "manifest = " << quote(c.manifest) << "\n"
    << "output = " << quote(c.output) << "\n"
    << "workers = " << c.workers << "\n";
  return o.str();
}

} // namespace streetlabel
