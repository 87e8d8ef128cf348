//
// Copyright 2026 The dpfl-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "dpfl/config.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dpfl {
namespace {

using json = nlohmann::json;

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

json ParseJson(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + " is not valid JSON: " + e.what());
  }
}

// Strict view of one JSON object: every key must be consumed.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_null() && !j_.is_object()) throw ConfigError(Where() + " must be an object");
  }

  Block Child(const char* key) {
    consumed_.insert(key);
    static const json kNull;
    if (j_.is_null() || !j_.contains(key)) return Block(kNull, Join(key));
    return Block(j_.at(key), Join(key));
  }

  void Get(const char* key, bool& out) {
    if (const json* v = Find(key)) {
      if (!v->is_boolean()) throw TypeError(key, "a boolean");
      out = v->get<bool>();
    }
  }
  void Get(const char* key, int& out) {
    if (const json* v = Find(key)) {
      if (!v->is_number_integer()) throw TypeError(key, "an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw TypeError(key, "a 32-bit integer");
      }
      out = static_cast<int>(x);
    }
  }
  void Get(const char* key, std::uint64_t& out) {
    if (const json* v = Find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
        throw TypeError(key, "a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void Get(const char* key, double& out) {
    if (const json* v = Find(key)) {
      if (v->is_number()) {
        out = v->get<double>();
      } else if (v->is_string() && v->get<std::string>() == "inf") {
        out = std::numeric_limits<double>::infinity();
      } else {
        throw TypeError(key, "a number");
      }
    }
  }
  void Get(const char* key, std::string& out) {
    if (const json* v = Find(key)) {
      if (!v->is_string()) throw TypeError(key, "a string");
      out = v->get<std::string>();
    }
  }
  void Get(const char* key, std::vector<int>& out) {
    if (const json* v = Find(key)) {
      if (!v->is_array()) throw TypeError(key, "an array of integers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number_integer()) throw TypeError(key, "an array of integers");
        out.push_back(x.get<int>());
      }
    }
  }
  template <typename Enum, typename ParseFn>
  void GetEnum(const char* key, Enum& out, ParseFn parse) {
    std::string s;
    if (Find(key) == nullptr) return;
    Get(key, s);
    try {
      out = parse(s);
    } catch (const ParameterError& e) {
      throw ConfigError(Join(key) + ": " + e.what());
    }
  }

  void Finish() const {
    if (j_.is_null()) return;
    for (const auto& [key, value] : j_.items()) {
      if (!consumed_.contains(key)) throw ConfigError("unknown config key '" + Join(key) + "'");
    }
  }

 private:
  const json* Find(const char* key) {
    consumed_.insert(key);
    if (j_.is_null() || !j_.contains(key)) return nullptr;
    return &j_.at(key);
  }
  std::string Join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  std::string Where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }
  ConfigError TypeError(const char* key, const char* expected) const {
    return ConfigError("config key '" + Join(key) + "' must be " + expected);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> consumed_;
};

json Number(double x) {
  if (std::isinf(x)) return x > 0 ? json("inf") : json("-inf");
  return json(x);
}

json ToJson(const ExperimentConfig& c) {
  json j;
  const auto& d = c.dataset;
  j["dataset"] = {{"source", d.source},
                  {"num_classes", d.num_classes},
                  {"dim", d.dim},
                  {"samples_per_class", d.samples_per_class},
                  {"separation", d.separation},
                  {"images", d.images},
                  {"labels", d.labels},
                  {"test_images", d.test_images},
                  {"test_labels", d.test_labels},
                  {"test_fraction", d.test_fraction},
                  {"shift", {{"kind", ToString(d.shift_kind)}, {"magnitude", d.shift_magnitude}}}};
  j["model"] = {{"kind", ToString(c.model.kind)}, {"hidden_dims", c.model.hidden_dims}};
  const auto& f = c.federation;
  j["federation"] = {{"num_clients", f.num_clients},
                     {"total_rounds", f.total_rounds},
                     {"lr_init", f.lr_init},
                     {"lr_decay", f.lr_decay},
                     {"alpha", f.alpha},
                     {"strategy", ToString(f.strategy)},
                     {"master_seed", f.master_seed},
                     {"twin_run", f.twin_run},
                     {"pretrain_epochs", f.pretrain_epochs},
                     {"pretrain_lr", f.pretrain_lr},
                     {"init_scale", f.init_scale},
                     {"workers", f.workers}};
  const auto& p = c.privacy;
  j["privacy"] = {{"epsilon", Number(p.epsilon)},
                  {"delta", p.delta},
                  {"clip_norm", Number(p.clip_norm)},
                  {"sampling_prob", p.sampling_prob},
                  {"calib_const", p.calib_const}};
  j["attack"] = {{"enabled", c.attack.enabled},
                 {"per_client", c.attack.per_client},
                 {"non_member_count", c.attack.non_member_count}};
  j["output"] = {{"directory", c.output.directory},
                 {"checkpoint_interval", c.output.checkpoint_interval},
                 {"retain_gradients", c.output.retain_gradients}};
  return j;
}

ExperimentConfig FromJson(const json& root) {
  ExperimentConfig c;
  Block top(root, "");
  {
    Block b = top.Child("dataset");
    auto& d = c.dataset;
    b.Get("source", d.source);
    b.Get("num_classes", d.num_classes);
    b.Get("dim", d.dim);
    b.Get("samples_per_class", d.samples_per_class);
    b.Get("separation", d.separation);
    b.Get("images", d.images);
    b.Get("labels", d.labels);
    b.Get("test_images", d.test_images);
    b.Get("test_labels", d.test_labels);
    b.Get("test_fraction", d.test_fraction);
    Block s = b.Child("shift");
    s.GetEnum("kind", d.shift_kind, ParseShiftKind);
    s.Get("magnitude", d.shift_magnitude);
    s.Finish();
    b.Finish();
  }
  {
    Block b = top.Child("model");
    b.GetEnum("kind", c.model.kind, ParseModelKind);
    b.Get("hidden_dims", c.model.hidden_dims);
    b.Finish();
  }
  {
    Block b = top.Child("federation");
    auto& f = c.federation;
    b.Get("num_clients", f.num_clients);
    b.Get("total_rounds", f.total_rounds);
    b.Get("lr_init", f.lr_init);
    b.Get("lr_decay", f.lr_decay);
    b.Get("alpha", f.alpha);
    b.GetEnum("strategy", f.strategy, ParseStrategy);
    b.Get("master_seed", f.master_seed);
    b.Get("twin_run", f.twin_run);
    b.Get("pretrain_epochs", f.pretrain_epochs);
    b.Get("pretrain_lr", f.pretrain_lr);
    b.Get("init_scale", f.init_scale);
    b.Get("workers", f.workers);
    b.Finish();
  }
  {
    Block b = top.Child("privacy");
    auto& p = c.privacy;
    b.Get("epsilon", p.epsilon);
    b.Get("delta", p.delta);
    b.Get("clip_norm", p.clip_norm);
    b.Get("sampling_prob", p.sampling_prob);
    b.Get("calib_const", p.calib_const);
    b.Finish();
  }
  {
    Block b = top.Child("attack");
    b.Get("enabled", c.attack.enabled);
    b.Get("per_client", c.attack.per_client);
    b.Get("non_member_count", c.attack.non_member_count);
    b.Finish();
  }
  {
    Block b = top.Child("output");
    b.Get("directory", c.output.directory);
    b.Get("checkpoint_interval", c.output.checkpoint_interval);
    b.Get("retain_gradients", c.output.retain_gradients);
    b.Finish();
  }
  top.Finish();
  c.privacy.total_rounds = c.federation.total_rounds;
  c.Validate();
  return c;
}

void SetPath(json& root, const std::string& path, json value) {
  json* node = &root;
  std::istringstream in(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(in, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty override key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override key '" + path + "' crosses a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigError("override key '" + path + "' crosses a non-object");
  (*node)[parts.back()] = std::move(value);
}

json ParseValue(const std::string& value) {
  try {
    return json::parse(value);
  } catch (const json::parse_error&) {
    return json(value);
  }
}

std::string ResolveAlias(const std::string& name) {
  static const std::map<std::string, std::string> kAliases = {
      {"epsilon", "privacy.epsilon"},       {"total_rounds", "federation.total_rounds"},
      {"T", "federation.total_rounds"},     {"num_clients", "federation.num_clients"},
      {"N", "federation.num_clients"},      {"alpha", "federation.alpha"},
      {"strategy", "federation.strategy"},  {"model_kind", "model.kind"}};
  auto it = kAliases.find(name);
  return it == kAliases.end() ? name : it->second;
}

}  // namespace

void ExperimentConfig::Validate() const {
  try {
    if (dataset.source != "mixture" && dataset.source != "idx") {
      throw ConfigError("dataset.source must be \"mixture\" or \"idx\"");
    }
    if (dataset.source == "mixture") {
      if (dataset.num_classes < 2) throw ConfigError("dataset.num_classes must be >= 2");
      if (dataset.dim < 2) throw ConfigError("dataset.dim must be >= 2");
      if (dataset.samples_per_class < 1) throw ConfigError("dataset.samples_per_class must be >= 1");
      if (!(dataset.separation >= 0.0)) throw ConfigError("dataset.separation must be >= 0");
    } else if (dataset.images.empty() || dataset.labels.empty()) {
      throw ConfigError("dataset.images and dataset.labels are required when dataset.source is \"idx\"");
    }
    if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0)) {
      throw ConfigError("dataset.test_fraction must be in (0, 1)");
    }
    if (!(dataset.shift_magnitude >= 0.0)) throw ConfigError("dataset.shift.magnitude must be >= 0");
    ModelSpec probe{model.kind, 1, model.hidden_dims, 2};
    probe.Validate();
    federation.Validate();
    privacy.Validate();
    if (privacy.total_rounds != federation.total_rounds) {
      throw ConfigError("privacy.total_rounds must equal federation.total_rounds");
    }
    if (attack.per_client < 0) throw ConfigError("attack.per_client must be >= 0");
    if (attack.non_member_count < 0) throw ConfigError("attack.non_member_count must be >= 0");
    if (output.checkpoint_interval < 0) throw ConfigError("output.checkpoint_interval must be >= 0");
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

ExperimentConfig ParseConfig(const std::string& json_text,
                             const std::vector<std::string>& overrides) {
  json root = ParseJson(json_text.empty() ? "{}" : json_text, "config");
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    SetPath(root, ResolveAlias(o.substr(0, eq)), ParseValue(o.substr(eq + 1)));
  }
  return FromJson(root);
}

ExperimentConfig ParseConfigFile(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides) {
  return ParseConfig(ReadFile(path), overrides);
}

std::string SerializeConfig(const ExperimentConfig& config) {
  return ToJson(config).dump(2) + "\n";
}

std::string ConfigHash(const ExperimentConfig& config) {
  json j = ToJson(config);
  j.erase("output");
  // The worker count never changes results.
  j["federation"].erase("workers");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ApplyOverride(const std::string& json_text, const std::string& path,
                          const std::string& value) {
  json root = ParseJson(json_text.empty() ? "{}" : json_text, "config");
  SetPath(root, ResolveAlias(path), ParseValue(value));
  return root.dump();
}

SweepSpec ParseSweepSpec(const std::string& json_text) {
  const json root = ParseJson(json_text, "sweep spec");
  if (!root.is_object()) throw ConfigError("sweep spec must be an object");
  SweepSpec spec;
  for (const auto& [key, value] : root.items()) {
    if (key != "base" && key != "axes" && key != "seeds" && key != "max_cells" && key != "workers") {
      throw ConfigError("unknown sweep key '" + key + "'");
    }
  }
  const json base = root.value("base", json::object());
  spec.base_json = base.dump();
  spec.base = FromJson(base);
  if (root.contains("axes")) {
    const json& axes = root.at("axes");
    if (!axes.is_object()) throw ConfigError("sweep 'axes' must be an object of arrays");
    for (const auto& [name, values] : axes.items()) {
      if (!values.is_array() || values.empty()) {
        throw ConfigError("sweep axis '" + name + "' must be a non-empty array");
      }
      SweepAxis axis{ResolveAlias(name), {}};
      for (const auto& v : values) axis.values.push_back(v.dump());
      spec.axes.push_back(std::move(axis));
    }
  }
  if (root.contains("seeds")) {
    spec.seeds.clear();
    for (const auto& s : root.at("seeds")) {
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
        throw ConfigError("sweep 'seeds' must be non-negative integers");
      }
      spec.seeds.push_back(s.get<std::uint64_t>());
    }
    if (spec.seeds.empty()) throw ConfigError("sweep 'seeds' must not be empty");
  }
  if (root.contains("max_cells")) spec.max_cells = root.at("max_cells").get<int>();
  if (root.contains("workers")) spec.workers = root.at("workers").get<int>();
  if (spec.workers < 1) throw ConfigError("sweep 'workers' must be >= 1");

  std::size_t cells = spec.seeds.size();
  for (const auto& axis : spec.axes) cells *= axis.values.size();
  if (cells > static_cast<std::size_t>(spec.max_cells)) {
    throw ConfigError("sweep has " + std::to_string(cells) + " cells, above max_cells=" +
                      std::to_string(spec.max_cells));
  }
  // Every axis value must yield a valid config on its own.
  for (const auto& axis : spec.axes) {
    for (const auto& v : axis.values) {
      ParseConfig(ApplyOverride(spec.base_json, axis.path, v));
    }
  }
  return spec;
}

SweepSpec ParseSweepSpecFile(const std::filesystem::path& path) {
  return ParseSweepSpec(ReadFile(path));
}

}  // namespace dpfl
