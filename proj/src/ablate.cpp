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
#include "tscformer/ablate.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "tscformer/error.hpp"

namespace tsc {

namespace {

struct AxisInfo {
  AblationAxis axis;
  const char* name;
  std::vector<std::string> keys;
  std::vector<std::string> defaults;
};

const std::vector<AxisInfo>& axes() {
  static const std::vector<AxisInfo> table = {
      {AblationAxis::kComponents,
       "components",
       {"model.use_shift", "bridge.former", "bridge.cross_attention"},
       {"01", "02", "03", "04", "05", "06"}},
      {AblationAxis::kFusion, "fusion", {"fusion.mode"}, {"concat", "add"}},
      {AblationAxis::kInsertion, "insertion", {"bridge.insertion"}, {"1", "2", "3", "4", "1,2,3,4"}},
      {AblationAxis::kDepth, "depth", {"bridge.depth"}, {"1", "2", "3", "4", "5"}},
      {AblationAxis::kTokenDim, "token_dim", {"bridge.token_dim"}, {"64", "128", "192", "256", "512"}},
      {AblationAxis::kTokenCount, "token_count", {"bridge.tokens"}, {"1", "2", "3", "4", "5"}},
      {AblationAxis::kFrames, "frames", {"model.frames"}, {"2", "4", "6", "8", "16"}},
      {AblationAxis::kModality, "modality", {"model.inputs"}, {"rgb_rgb", "event_event", "rgb_event"}},
  };
  return table;
}

const AxisInfo& info(AblationAxis axis) {
  for (const auto& a : axes()) {
    if (a.axis == axis) return a;
  }
  throw ValidationError("unknown ablation axis");
}

// (use_shift, former, cross_attention) per components row.
struct ComponentRow {
  const char* id;
  bool shift, former, bridge;
};
constexpr ComponentRow kComponentRows[] = {
    {"01", true, true, true},   {"02", false, true, true}, {"03", true, false, true},
    {"04", true, true, false},  {"05", true, false, false}, {"06", false, false, false},
};

void apply_value(RunConfig& cfg, const AxisInfo& axis, const std::string& value) {
  if (axis.axis != AblationAxis::kComponents) {
    set_config_value(cfg, axis.keys.front(), value);
    return;
  }
  for (const auto& row : kComponentRows) {
    if (value == row.id) {
      cfg.model.use_shift = row.shift;
      cfg.model.bridge.use_former = row.former;
      cfg.model.bridge.use_cross_attention = row.bridge;
      return;
    }
  }
  throw ValidationError("ablate components: unknown row '" + value + "' (expected 01..06)");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

AblationAxis parse_ablation_axis(const std::string& text) {
  for (const auto& a : axes()) {
    if (text == a.name) return a.axis;
  }
  throw ValidationError("unknown ablation axis '" + text +
                        "' (expected components, fusion, insertion, depth, token_dim, token_count, frames or modality)");
}

const char* ablation_axis_name(AblationAxis axis) { return info(axis).name; }

std::vector<std::string> default_ablation_values(AblationAxis axis) { return info(axis).defaults; }

std::vector<std::string> ablation_axis_keys(AblationAxis axis) { return info(axis).keys; }

std::vector<AblationVariant> ablation_variants(const RunConfig& base, AblationAxis axis,
                                               const std::vector<std::string>& values) {
  if (values.empty()) throw ValidationError("ablate: no values given");
  const AxisInfo& a = info(axis);
  const KeyValues base_kv = to_key_values(base);
  std::vector<AblationVariant> out;
  for (const auto& value : values) {
    AblationVariant v{value, base, {}};
    apply_value(v.config, a, value);
    v.config.validate();
    const KeyValues kv = to_key_values(v.config);
    for (std::size_t i = 0; i < kv.size(); ++i) {
      if (kv[i].second == base_kv[i].second) continue;
      if (std::find(a.keys.begin(), a.keys.end(), kv[i].first) == a.keys.end()) {
        throw ValidationError("ablate " + std::string(a.name) + ": value '" + value + "' changed key '" +
                              kv[i].first + "' outside the axis");
      }
      v.changed_keys.push_back(kv[i].first);
    }
    out.push_back(std::move(v));
  }
  return out;
}

AblationTable ablate(const RunConfig& base, AblationAxis axis, const std::vector<std::string>& values,
                     const std::vector<ClipPair>& train_clips, const std::vector<ClipPair>& heldout_clips,
                     const std::function<void(const AblationRow&)>& progress) {
  AblationTable table{axis, {}};
  // Validate every variant before training any of them.
  auto variants = ablation_variants(base, axis, values);
  for (auto& variant : variants) {
    AblationRow row;
    TscFormer model(variant.config.model);
    row.parameters = model.parameter_count();
    const TrainResult result = train(model, train_clips, variant.config.train);
    row.steps = result.steps;
    row.final_loss = result.losses.empty() ? 0.0 : result.losses.back();
    row.train = evaluate(model, train_clips, variant.config.train.batch_size);
    if (!heldout_clips.empty()) row.heldout = evaluate(model, heldout_clips, variant.config.train.batch_size);
    row.variant = std::move(variant);
    if (progress) progress(row);
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

std::vector<std::string> header(const AblationTable& table) {
  std::vector<std::string> h{"axis", "value"};
  if (table.axis == AblationAxis::kComponents) h.insert(h.end(), {"cnn", "ts", "former", "bridge"});
  h.insert(h.end(), {"changed_keys", "parameters", "steps", "final_loss", "train_top1", "train_top5",
                     "heldout_top1", "heldout_top5", "momentum", "weight_decay"});
  return h;
}

std::vector<std::string> cells(const AblationTable& table, const AblationRow& row) {
  const RunConfig& c = row.variant.config;
  std::vector<std::string> r{ablation_axis_name(table.axis), row.variant.value};
  if (table.axis == AblationAxis::kComponents) {
    auto mark = [](bool b) { return std::string(b ? "yes" : "no"); };
    r.insert(r.end(), {"yes", mark(c.model.use_shift), mark(c.model.bridge.use_former),
                       mark(c.model.bridge.use_cross_attention)});
  }
  std::string changed;
  for (const auto& k : row.variant.changed_keys) changed += (changed.empty() ? "" : ";") + k;
  r.push_back(changed.empty() ? "-" : changed);
  r.push_back(std::to_string(row.parameters));
  r.push_back(std::to_string(row.steps));
  r.push_back(fixed(row.final_loss, 6));
  r.push_back(fixed(row.train.top1, 4));
  r.push_back(fixed(row.train.top5, 4));
  r.push_back(row.heldout ? fixed(row.heldout->top1, 4) : "-");
  r.push_back(row.heldout ? fixed(row.heldout->top5, 4) : "-");
  r.push_back(fixed(c.train.momentum, 3));
  r.push_back(fixed(c.train.weight_decay, 3));
  return r;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

}  // namespace

std::string ablation_csv(const AblationTable& table) {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
    out += "\n";
  };
  emit(header(table));
  for (const auto& row : table.rows) emit(cells(table, row));
  return out;
}

std::string ablation_text(const AblationTable& table) {
  std::vector<std::vector<std::string>> grid{header(table)};
  for (const auto& row : table.rows) grid.push_back(cells(table, row));
  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& r : grid) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::string out;
  for (std::size_t n = 0; n < grid.size(); ++n) {
    for (std::size_t i = 0; i < grid[n].size(); ++i) {
      out += grid[n][i];
      if (i + 1 < grid[n].size()) out += std::string(width[i] - grid[n][i].size() + 2, ' ');
    }
    out += "\n";
    if (n == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w + 2;
      out += std::string(total - 2, '-') + "\n";
    }
  }
  out += "note: momentum and weight_decay are assumed settings, not reported values\n";
  return out;
}

}  // namespace tsc
