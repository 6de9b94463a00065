/* Copyright 2026 The TSCFormer Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "tscformer/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "tscformer/error.hpp"
#include "tscformer/io.hpp"

namespace tsc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key '" + key + "': invalid value '" + value + "' (expected " + expected + ")");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (value.empty() || ec != std::errc() || ptr != last) bad_value(key, value, expected);
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return parse_number<std::size_t>(key, value, "a non-negative integer");
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  if (value == "none") return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  return out;
}

template <typename Range>
std::string join(const Range& values) {
  if (values.empty()) return "none";
  std::string out;
  for (const auto& v : values) out += (out.empty() ? "" : ",") + std::to_string(v);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::array<std::size_t, 4> parse_four(const std::string& key, const std::string& value) {
  const auto v = parse_sizes(key, value);
  if (v.size() != 4) bad_value(key, value, "four comma-separated integers");
  return {v[0], v[1], v[2], v[3]};
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define TSC_SIZE_FIELD(name, member)                                                              \
  Field {                                                                                          \
    name, [](const RunConfig& c) { return std::to_string(c.member); },                              \
        [](RunConfig& c, const std::string& v) { c.member = parse_size(name, v); }                  \
  }
#define TSC_BOOL_FIELD(name, member)                                                              \
  Field {                                                                                          \
    name, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); },             \
        [](RunConfig& c, const std::string& v) { c.member = parse_bool(name, v); }                  \
  }
#define TSC_DOUBLE_FIELD(name, member)                                                            \
  Field {                                                                                          \
    name, [](const RunConfig& c) { return format_double(c.member); },                              \
        [](RunConfig& c, const std::string& v) { c.member = parse_number<double>(name, v, "a number"); } \
  }
#define TSC_U64_FIELD(name, member)                                                               \
  Field {                                                                                          \
    name, [](const RunConfig& c) { return std::to_string(c.member); },                              \
        [](RunConfig& c, const std::string& v) {                                                    \
          c.member = parse_number<std::uint64_t>(name, v, "a non-negative integer");               \
        }                                                                                          \
  }
#define TSC_INT_FIELD(name, member)                                                               \
  Field {                                                                                          \
    name, [](const RunConfig& c) { return std::to_string(c.member); },                              \
        [](RunConfig& c, const std::string& v) { c.member = parse_number<int>(name, v, "an integer"); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      TSC_SIZE_FIELD("model.frames", model.frames),
      TSC_SIZE_FIELD("model.height", model.height),
      TSC_SIZE_FIELD("model.width", model.width),
      Field{"model.channels", [](const RunConfig& c) { return join(c.model.channels); },
            [](RunConfig& c, const std::string& v) { c.model.channels = parse_four("model.channels", v); }},
      Field{"model.blocks", [](const RunConfig& c) { return join(c.model.blocks); },
            [](RunConfig& c, const std::string& v) { c.model.blocks = parse_four("model.blocks", v); }},
      TSC_SIZE_FIELD("model.bottleneck_expansion", model.bottleneck_expansion),
      TSC_SIZE_FIELD("model.num_classes", model.num_classes),
      TSC_BOOL_FIELD("model.use_shift", model.use_shift),
      TSC_SIZE_FIELD("model.shift_divisions", model.shift.divisions),
      Field{"model.inputs", [](const RunConfig& c) { return std::string(input_pair_name(c.model.inputs)); },
            [](RunConfig& c, const std::string& v) { c.model.inputs = parse_input_pair(v); }},
      TSC_U64_FIELD("model.init_seed", model.init_seed),
      TSC_SIZE_FIELD("bridge.tokens", model.bridge.tokens),
      TSC_SIZE_FIELD("bridge.token_dim", model.bridge.token_dim),
      TSC_SIZE_FIELD("bridge.depth", model.bridge.depth),
      TSC_SIZE_FIELD("bridge.heads", model.bridge.heads),
      TSC_SIZE_FIELD("bridge.ffn_expansion", model.bridge.ffn_expansion),
      Field{"bridge.insertion", [](const RunConfig& c) { return join(c.model.bridge.insertion_blocks); },
            [](RunConfig& c, const std::string& v) {
              c.model.bridge.insertion_blocks.clear();
              for (std::size_t b : parse_sizes("bridge.insertion", v)) {
                if (b < 1 || b > 4) bad_value("bridge.insertion", v, "blocks in 1..4 or none");
                c.model.bridge.insertion_blocks.insert(static_cast<int>(b));
              }
            }},
      TSC_BOOL_FIELD("bridge.cross_attention", model.bridge.use_cross_attention),
      TSC_BOOL_FIELD("bridge.former", model.bridge.use_former),
      TSC_BOOL_FIELD("bridge.positional_encoding", model.bridge.positional_encoding),
      Field{"fusion.mode", [](const RunConfig& c) { return std::string(fusion_mode_name(c.model.fusion.mode)); },
            [](RunConfig& c, const std::string& v) { c.model.fusion.mode = parse_fusion_mode(v); }},
      TSC_SIZE_FIELD("train.batch_size", train.batch_size),
      TSC_SIZE_FIELD("train.epochs", train.epochs),
      TSC_DOUBLE_FIELD("train.lr", train.lr),
      TSC_DOUBLE_FIELD("train.momentum", train.momentum),
      TSC_DOUBLE_FIELD("train.weight_decay", train.weight_decay),
      Field{"train.milestones", [](const RunConfig& c) { return join(c.train.milestones); },
            [](RunConfig& c, const std::string& v) { c.train.milestones = parse_sizes("train.milestones", v); }},
      TSC_DOUBLE_FIELD("train.gamma", train.gamma),
      TSC_SIZE_FIELD("train.max_steps", train.max_steps),
      TSC_BOOL_FIELD("train.augment", train.augment),
      TSC_U64_FIELD("train.seed", train.seed),
      Field{"data.source",
            [](const RunConfig& c) { return std::string(c.data.source == DataSource::kSynth ? "synth" : "file"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "synth") {
                c.data.source = DataSource::kSynth;
              } else if (v == "file") {
                c.data.source = DataSource::kFile;
              } else {
                bad_value("data.source", v, "synth or file");
              }
            }},
      Field{"data.path", [](const RunConfig& c) { return c.data.path.string(); },
            [](RunConfig& c, const std::string& v) { c.data.path = v; }},
      Field{"data.heldout_path", [](const RunConfig& c) { return c.data.heldout_path.string(); },
            [](RunConfig& c, const std::string& v) { c.data.heldout_path = v; }},
      TSC_U64_FIELD("data.seed", data.seed),
      TSC_INT_FIELD("data.samples_per_class", data.samples_per_class),
      TSC_INT_FIELD("data.heldout_samples_per_class", data.heldout_samples_per_class),
      TSC_SIZE_FIELD("data.frames", data.frames),
      TSC_SIZE_FIELD("data.height", data.height),
      TSC_SIZE_FIELD("data.width", data.width),
      Field{"out", [](const RunConfig& c) { return c.out.string(); },
            [](RunConfig& c, const std::string& v) { c.out = v; }},
  };
  return table;
}

#undef TSC_SIZE_FIELD
#undef TSC_BOOL_FIELD
#undef TSC_DOUBLE_FIELD
#undef TSC_U64_FIELD
#undef TSC_INT_FIELD

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (data.source == DataSource::kFile && data.path.empty()) {
    throw ConfigError("config key 'data.path' is required when data.source = file");
  }
  if (data.source == DataSource::kSynth) {
    if (data.samples_per_class < 1) throw ConfigError("config key 'data.samples_per_class' must be >= 1");
    if (data.heldout_samples_per_class < 0) {
      throw ConfigError("config key 'data.heldout_samples_per_class' must be >= 0");
    }
    if (data.frames < model.frames) {
      throw ConfigError("config key 'data.frames' (" + std::to_string(data.frames) + ") is below model.frames (" +
                        std::to_string(model.frames) + ")");
    }
    // The smallest multi-scale crop must still cover the model input.
    const std::size_t side = std::min(data.height, data.width);
    const auto smallest = static_cast<std::size_t>(std::lround(kCropScales.back() * static_cast<double>(side)));
    if (train.augment && smallest < std::max(model.height, model.width)) {
      throw ConfigError("config keys 'data.height'/'data.width': a " + std::to_string(side) +
                        "-pixel clip cannot feed a " + std::to_string(model.height) + "-pixel model at crop scale " +
                        format_double(kCropScales.back()));
    }
  }
}

KeyValues to_key_values(const RunConfig& cfg) {
  KeyValues out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_key_values(cfg)) out += k + " = " + v + "\n";
  return out;
}

const std::vector<std::string>& required_keys() {
  static const std::vector<std::string> keys{"data.source", "model.num_classes"};
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError("unknown config key '" + key + "'");
  f->set(cfg, value);
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' appears twice");
    set_config_value(cfg, key, value);
  }
  for (const auto& key : required_keys()) {
    if (seen.count(key) == 0) throw ConfigError("missing required config key '" + key + "'");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

SynthSpec train_synth_spec(const RunConfig& cfg) {
  SynthSpec s;
  s.seed = cfg.data.seed;
  s.num_classes = static_cast<int>(cfg.model.num_classes);
  s.samples_per_class = cfg.data.samples_per_class;
  s.frames = cfg.data.frames;
  s.height = cfg.data.height;
  s.width = cfg.data.width;
  return s;
}

SynthSpec heldout_synth_spec(const RunConfig& cfg) {
  SynthSpec s = train_synth_spec(cfg);
  // Disjoint stream from the training set.
  s.seed = clip_seed(cfg.data.seed, 0x68656c64, 1);
  s.samples_per_class = cfg.data.heldout_samples_per_class;
  return s;
}

std::pair<std::vector<ClipPair>, std::vector<ClipPair>> load_run_data(const RunConfig& cfg) {
  if (cfg.data.source == DataSource::kFile) {
    std::vector<ClipPair> heldout;
    if (!cfg.data.heldout_path.empty()) heldout = load_dataset(cfg.data.heldout_path);
    return {load_dataset(cfg.data.path), std::move(heldout)};
  }
  std::vector<ClipPair> heldout;
  if (cfg.data.heldout_samples_per_class > 0) heldout = synth_dataset(heldout_synth_spec(cfg));
  return {synth_dataset(train_synth_spec(cfg)), std::move(heldout)};
}

}  // namespace tsc
