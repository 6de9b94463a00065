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
#ifndef TSCFORMER_CONFIG_HPP_
#define TSCFORMER_CONFIG_HPP_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tscformer/data.hpp"
#include "tscformer/model.hpp"
#include "tscformer/train.hpp"

namespace tsc {

enum class DataSource { kSynth, kFile };

struct DataConfig {
  DataSource source = DataSource::kSynth;
  std::filesystem::path path;          // file source: training archive
  std::filesystem::path heldout_path;  // file source: optional held-out archive
  std::uint64_t seed = 0;              // synth source
  int samples_per_class = 8;
  int heldout_samples_per_class = 0;
  std::size_t frames = 8;
  std::size_t height = 48;
  std::size_t width = 48;
};

struct RunConfig {
  TscFormerConfig model;
  TrainConfig train;
  DataConfig data;
  std::filesystem::path out = "out";

  void validate() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Every key with its resolved value, in a fixed order.
KeyValues to_key_values(const RunConfig& cfg);
std::string format_config(const RunConfig& cfg);

// "key = value" lines; '#' starts a comment. Unknown keys, duplicate keys,
// malformed values and missing required keys raise ConfigError naming the
// key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Keys that must appear in a config file.
const std::vector<std::string>& required_keys();

// Applies one "key=value" override on top of an existing config.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

// Synthetic data specs derived from the data section.
SynthSpec train_synth_spec(const RunConfig& cfg);
SynthSpec heldout_synth_spec(const RunConfig& cfg);

// Training and held-out clips for the config (held-out may be empty).
std::pair<std::vector<ClipPair>, std::vector<ClipPair>> load_run_data(const RunConfig& cfg);

}  // namespace tsc

#endif  // TSCFORMER_CONFIG_HPP_
