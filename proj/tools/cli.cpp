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

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tscformer/ablate.hpp"
#include "tscformer/config.hpp"
#include "tscformer/data.hpp"
#include "tscformer/error.hpp"
#include "tscformer/events.hpp"
#include "tscformer/io.hpp"
#include "tscformer/model.hpp"
#include "tscformer/model_check.hpp"
#include "tscformer/train.hpp"

namespace tsc::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kFaultOps{"add",    "batchnorm2d", "conv2d", "layer_norm",
                                         "linear", "matmul",      "relu",   "softmax"};

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

void apply_globals(RunConfig& cfg, const GlobalOptions& g) {
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) {
    cfg.model.init_seed = *g.seed;
    cfg.train.seed = *g.seed;
    cfg.data.seed = *g.seed;
  }
  if (!g.out.empty()) cfg.out = g.out;
  cfg.validate();
}

// The run config from --config (or defaults when allowed), with overrides
// applied and fully validated.
RunConfig resolve_config(const GlobalOptions& g, const char* command, bool required, const RunConfig& fallback = {}) {
  if (g.config.empty() && required) throw ConfigError(std::string(command) + ": --config is required");
  RunConfig cfg = g.config.empty() ? fallback : load_config(g.config);
  apply_globals(cfg, g);
  return cfg;
}

// The config stored in a checkpoint, unless --config names another one.
RunConfig checkpoint_config(const GlobalOptions& g, const fs::path& checkpoint) {
  RunConfig cfg = g.config.empty() ? parse_config(read_checkpoint_config(checkpoint)) : load_config(g.config);
  apply_globals(cfg, g);
  if (cfg.out.empty()) cfg.out = checkpoint.has_parent_path() ? checkpoint.parent_path() : fs::path(".");
  return cfg;
}

// Archived configs omit the output directory so that reruns into different
// directories stay byte-identical.
std::string archived_config(RunConfig cfg) {
  cfg.out.clear();
  return format_config(cfg);
}

fs::path prepare_out(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  std::ofstream(cfg.out / "config.txt") << format_config(cfg);
  return cfg.out;
}

json metrics_json(const Metrics& m) {
  return json{{"top1", m.top1}, {"top5", m.top5}, {"k5", m.k5}, {"loss", m.loss}};
}

void print_metrics(std::ostream& out, const char* split, const Metrics& m) {
  out << split << ": top1 " << fmt("%.4f", m.top1) << "  top" << m.k5 << " " << fmt("%.4f", m.top5) << "  loss "
      << fmt("%.6f", m.loss) << "\n";
}

void write_json(const fs::path& path, const json& j) { std::ofstream(path) << j.dump(2) << "\n"; }

// ---------------------------------------------------------------- synth

int cmd_synth(const GlobalOptions& g, std::ostream& out) {
  const RunConfig cfg = resolve_config(g, "synth", false);
  const fs::path dir = prepare_out(cfg);
  const auto train_clips = synth_dataset(train_synth_spec(cfg));
  save_dataset(dir / "train.tsca", train_clips, archived_config(cfg));
  out << "wrote " << train_clips.size() << " clips to " << (dir / "train.tsca").string() << "\n";
  if (cfg.data.heldout_samples_per_class > 0) {
    const auto held = synth_dataset(heldout_synth_spec(cfg));
    save_dataset(dir / "heldout.tsca", held, archived_config(cfg));
    out << "wrote " << held.size() << " clips to " << (dir / "heldout.tsca").string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- ingest

struct IngestOptions {
  std::string input;
  std::string format;
  std::string sensor;
  std::string frame_times;
  std::size_t frames = 0;
  std::uint64_t interval = 0;
  std::optional<std::uint64_t> start;
  std::size_t height = 0;
  std::size_t width = 0;
  bool render = false;
  std::string output;
};

std::optional<SensorSize> parse_sensor(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto x = text.find('x');
  std::size_t w = 0, h = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    w = std::stoul(text.substr(0, x));
    h = std::stoul(text.substr(x + 1));
  } catch (const std::exception&) {
    throw ValidationError("--sensor expects WIDTHxHEIGHT, got '" + text + "'");
  }
  if (w == 0 || h == 0 || w > 0xffff || h > 0xffff) throw ValidationError("--sensor out of range: " + text);
  return SensorSize{static_cast<std::uint16_t>(w), static_cast<std::uint16_t>(h)};
}

int cmd_ingest(const GlobalOptions& g, const IngestOptions& o, std::ostream& out) {
  // Validate the request before reading any events.
  EventFormat format;
  if (!o.format.empty()) {
    format = parse_event_format(o.format);
  } else {
    const std::string ext = fs::path(o.input).extension().string();
    if (ext == ".csv") {
      format = EventFormat::kCsv;
    } else if (ext == ".evbin") {
      format = EventFormat::kEvbin;
    } else {
      throw ValidationError("ingest: cannot infer the format of '" + o.input + "'; pass --format csv|evbin");
    }
  }
  const auto sensor = parse_sensor(o.sensor);
  const bool explicit_times = !o.frame_times.empty();
  if (explicit_times == (o.frames > 0)) {
    throw ValidationError("ingest: give either --frame-times or --frames with --interval");
  }
  if (!explicit_times && o.interval == 0) throw ValidationError("ingest: --frames needs a positive --interval");
  if ((o.height == 0) != (o.width == 0)) throw ValidationError("ingest: give both --height and --width");

  std::vector<std::uint64_t> times;
  if (explicit_times) {
    for (const auto& item : split_list(o.frame_times)) {
      try {
        std::size_t used = 0;
        times.push_back(std::stoull(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ValidationError("ingest: bad frame time '" + item + "'");
      }
    }
    if (times.empty()) throw ValidationError("ingest: --frame-times is empty");
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (times[i] <= times[i - 1]) throw ValidationError("ingest: frame times must strictly increase");
    }
  }

  const auto bytes = read_file_bytes(o.input);
  const EventStream stream = parse_events(bytes, format, sensor);
  if (!explicit_times) {
    const std::uint64_t start = o.start ? *o.start : (stream.points.empty() ? 0 : stream.points.front().t);
    for (std::size_t i = 0; i < o.frames; ++i) times.push_back(start + i * o.interval);
  }
  const std::size_t H = o.height ? o.height : stream.sensor_height;
  const std::size_t W = o.width ? o.width : stream.sensor_width;
  if (H == 0 || W == 0) throw ValidationError("ingest: empty stream without --sensor needs --height and --width");
  const Tensor counts = bin_events(stream, times, H, W);

  const std::size_t plane = H * W;
  std::size_t in_window = 0;
  out << "events " << stream.points.size() << "  sensor " << stream.sensor_width << "x" << stream.sensor_height
      << "  frames " << times.size() << "  target " << W << "x" << H << "\n";
  for (std::size_t f = 0; f < times.size(); ++f) {
    double pos = 0, neg = 0;
    for (std::size_t i = 0; i < plane; ++i) {
      pos += counts[(f * 2) * plane + i];
      neg += counts[(f * 2 + 1) * plane + i];
    }
    in_window += static_cast<std::size_t>(pos + neg);
    out << "frame " << f << "  t " << times[f] << "  +" << static_cast<std::size_t>(pos) << "  -"
        << static_cast<std::size_t>(neg) << "\n";
  }
  out << "binned " << in_window << " of " << stream.points.size() << " events\n";

  fs::path target = o.output;
  if (target.empty()) {
    const fs::path dir = g.out.empty() ? fs::path("out") : fs::path(g.out);
    fs::create_directories(dir);
    target = dir / (o.render ? "event_frames.tnsr" : "event_counts.tnsr");
  } else if (target.has_parent_path()) {
    fs::create_directories(target.parent_path());
  }
  write_tensor(target, o.render ? render_event_frames(counts) : counts);
  out << "wrote " << target.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train / eval

int cmd_train(const GlobalOptions& g, std::ostream& out) {
  const RunConfig cfg = resolve_config(g, "train", true);
  const auto [train_clips, heldout_clips] = load_run_data(cfg);
  TscFormer model(cfg.model);
  const fs::path dir = prepare_out(cfg);
  out << "parameters " << model.parameter_count() << "  clips " << train_clips.size() << " train, "
      << heldout_clips.size() << " held-out\n";

  TrainResult result;
  {
    std::ofstream log(dir / "metrics.jsonl");
    result = train(model, train_clips, cfg.train, &log);
  }
  for (const auto& e : result.epochs) {
    out << "epoch " << e.epoch << "  lr " << fmt("%g", e.lr) << "  loss " << fmt("%.6f", e.metrics.loss) << "  top1 "
        << fmt("%.4f", e.metrics.top1) << "\n";
  }
  save_checkpoint(dir / "checkpoint.tsck", model, archived_config(cfg));

  json summary{{"steps", result.steps},
               {"parameters", model.parameter_count()},
               {"final_loss", result.losses.empty() ? 0.0 : result.losses.back()}};
  const Metrics tm = evaluate(model, train_clips, cfg.train.batch_size);
  summary["train"] = metrics_json(tm);
  print_metrics(out, "train", tm);
  if (!heldout_clips.empty()) {
    const Metrics hm = evaluate(model, heldout_clips, cfg.train.batch_size);
    summary["heldout"] = metrics_json(hm);
    print_metrics(out, "heldout", hm);
  }
  write_json(dir / "summary.json", summary);
  out << "wrote " << (dir / "checkpoint.tsck").string() << "\n";
  return kExitOk;
}

fs::path default_checkpoint(const GlobalOptions& g, const std::string& given) {
  if (!given.empty()) return given;
  if (!g.out.empty()) return fs::path(g.out) / "checkpoint.tsck";
  throw ValidationError("--checkpoint is required");
}

int cmd_eval(const GlobalOptions& g, const std::string& checkpoint_arg, std::ostream& out) {
  const fs::path checkpoint = default_checkpoint(g, checkpoint_arg);
  const RunConfig cfg = checkpoint_config(g, checkpoint);
  TscFormer model(cfg.model);
  load_checkpoint(checkpoint, model);
  const auto [train_clips, heldout_clips] = load_run_data(cfg);
  const fs::path dir = prepare_out(cfg);
  json report;
  const Metrics tm = evaluate(model, train_clips, cfg.train.batch_size);
  report["train"] = metrics_json(tm);
  print_metrics(out, "train", tm);
  if (!heldout_clips.empty()) {
    const Metrics hm = evaluate(model, heldout_clips, cfg.train.batch_size);
    report["heldout"] = metrics_json(hm);
    print_metrics(out, "heldout", hm);
  }
  write_json(dir / "eval.json", report);
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
  std::string fault;
  double eps = 1e-5;
  double tolerance = 1e-4;
  std::size_t coords = 64;
  std::string mode = "train";
};

int cmd_gradcheck(const GlobalOptions& g, const GradcheckOptions& o, std::ostream& out) {
  RunConfig fallback;
  fallback.model = tiny_config();
  const RunConfig cfg = resolve_config(g, "gradcheck", false, fallback);
  if (!o.fault.empty() && std::find(kFaultOps.begin(), kFaultOps.end(), o.fault) == kFaultOps.end()) {
    throw ValidationError("gradcheck: unknown --fault op '" + o.fault + "'");
  }
  if (o.mode != "train" && o.mode != "eval") throw ValidationError("gradcheck: --mode must be train or eval");
  if (!(o.eps > 0) || !(o.tolerance > 0) || o.coords == 0) {
    throw ValidationError("gradcheck: --eps, --tolerance and --coords must be positive");
  }
  {
    const TscFormer probe(cfg.model);
    if (probe.parameter_count() > kMaxGradcheckParameters) {
      throw ValidationError("gradcheck: model has " + std::to_string(probe.parameter_count()) +
                            " parameters; the limit is " + std::to_string(kMaxGradcheckParameters));
    }
  }
  const fs::path dir = prepare_out(cfg);

  ModelCheckOptions opts;
  opts.eps = o.eps;
  opts.max_coords = o.coords;
  opts.seed = cfg.train.seed;
  opts.mode = o.mode == "eval" ? Mode::kEval : Mode::kTrain;
  if (!o.fault.empty()) set_gradient_fault(o.fault);
  std::vector<GroupCheck> groups;
  try {
    groups = check_model_gradients(cfg.model, opts);
  } catch (...) {
    clear_gradient_fault();
    throw;
  }
  clear_gradient_fault();

  std::ostringstream table;
  table << std::left << std::setw(18) << "group" << std::right << std::setw(8) << "leaves" << std::setw(9) << "coords"
        << std::setw(13) << "max_rel_err" << "  status  worst\n";
  bool all_pass = true;
  for (const auto& gc : groups) {
    const bool pass = gc.passed(o.tolerance);
    all_pass = all_pass && pass;
    table << std::left << std::setw(18) << gc.group << std::right << std::setw(8) << gc.leaves << std::setw(9)
          << gc.checked << std::setw(13) << fmt("%.3e", gc.max_rel_error) << "  " << (pass ? "pass  " : "FAIL  ")
          << "  " << (gc.failure ? *gc.failure : gc.worst_leaf) << "\n";
  }
  table << (all_pass ? "all groups pass" : "gradient check failed") << " at tolerance " << fmt("%g", o.tolerance)
        << ", eps " << fmt("%g", o.eps) << ", " << o.mode << " mode" << (o.fault.empty() ? "" : ", fault injected into " + o.fault) << "\n";
  out << table.str();
  std::ofstream(dir / "gradcheck.txt") << table.str();
  return all_pass ? kExitOk : kExitNumeric;
}

// ---------------------------------------------------------------- ablate

int cmd_ablate(const GlobalOptions& g, const std::string& axis_name, const std::string& values_arg,
               std::ostream& out) {
  const RunConfig cfg = resolve_config(g, "ablate", true);
  const AblationAxis axis = parse_ablation_axis(axis_name);
  const auto values = values_arg.empty() ? default_ablation_values(axis) : split_list(values_arg);
  ablation_variants(cfg, axis, values);  // fail before loading data
  const auto [train_clips, heldout_clips] = load_run_data(cfg);
  const fs::path dir = prepare_out(cfg);
  const auto table = ablate(cfg, axis, values, train_clips, heldout_clips, [&](const AblationRow& row) {
    out << "finished " << axis_name << "=" << row.variant.value << "  train top1 " << fmt("%.4f", row.train.top1)
        << "\n";
  });
  const std::string stem = std::string("ablate_") + ablation_axis_name(axis);
  std::ofstream(dir / (stem + ".csv")) << ablation_csv(table);
  const std::string text = ablation_text(table);
  std::ofstream(dir / (stem + ".txt")) << text;
  out << text;
  return kExitOk;
}

// ---------------------------------------------------------------- dump-features

void write_pgm(const fs::path& path, const double* map, std::size_t h, std::size_t w) {
  const auto [lo, hi] = std::minmax_element(map, map + h * w);
  const double span = *hi - *lo;
  std::ofstream os(path, std::ios::binary);
  os << "P5\n" << w << " " << h << "\n255\n";
  for (std::size_t i = 0; i < h * w; ++i) {
    const double v = span > 0 ? (map[i] - *lo) / span : 0.0;
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
}

// Channel-mean map per frame of a [T, C, H, W] tensor.
void write_channel_means(const fs::path& dir, const std::string& stem, const Tensor& f) {
  const std::size_t T = f.dim(0), C = f.dim(1), H = f.dim(2), W = f.dim(3);
  std::vector<double> map(H * W);
  for (std::size_t t = 0; t < T; ++t) {
    std::fill(map.begin(), map.end(), 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < H * W; ++i) map[i] += f[(t * C + c) * H * W + i] / static_cast<double>(C);
    }
    char name[64];
    std::snprintf(name, sizeof name, "_t%02zu.pgm", t);
    write_pgm(dir / (stem + name), map.data(), H, W);
  }
}

Tensor drop_batch(const Var& v) {
  Shape s(v.shape().begin() + 1, v.shape().end());
  return v.value().reshaped(s);
}

int cmd_dump_features(const GlobalOptions& g, const std::string& checkpoint_arg, int block, std::size_t clip,
                      const std::string& split, std::ostream& out) {
  if (block < 1 || block > 4) throw ValidationError("dump-features: --block must be in 1..4, got " + std::to_string(block));
  if (split != "train" && split != "heldout") throw ValidationError("dump-features: --split must be train or heldout");
  const fs::path checkpoint = default_checkpoint(g, checkpoint_arg);
  const RunConfig cfg = checkpoint_config(g, checkpoint);
  TscFormer model(cfg.model);
  load_checkpoint(checkpoint, model);
  const auto [train_clips, heldout_clips] = load_run_data(cfg);
  const auto& clips = split == "train" ? train_clips : heldout_clips;
  if (clip >= clips.size()) {
    throw ValidationError("dump-features: --clip " + std::to_string(clip) + " outside the " +
                          std::to_string(clips.size()) + " " + split + " clips");
  }
  const fs::path dir = prepare_out(cfg) / "features";
  fs::create_directories(dir);

  const Batch batch = make_batch(std::vector<ClipPair>{prepare_clip(clips[clip], cfg.model)});
  std::vector<BlockFeatures> blocks;
  const Var logits = model.forward(constant(batch.rgb), constant(batch.event), Mode::kEval, &blocks);
  const BlockFeatures& f = blocks.at(static_cast<std::size_t>(block - 1));
  const std::string stem = "block" + std::to_string(block);
  const Tensor rgb = drop_batch(f.rgb), event = drop_batch(f.event), tokens = drop_batch(f.tokens);
  write_tensor(dir / (stem + "_rgb.tnsr"), rgb);
  write_tensor(dir / (stem + "_event.tnsr"), event);
  write_tensor(dir / (stem + "_tokens.tnsr"), tokens);
  write_tensor(dir / "logits.tnsr", drop_batch(logits));
  write_channel_means(dir, stem + "_rgb", rgb);
  write_channel_means(dir, stem + "_event", event);
  out << "clip " << clip << " (" << split << ", label " << clips[clip].label << ")\n";
  out << stem << "_rgb " << to_string(rgb.shape()) << "\n";
  out << stem << "_event " << to_string(event.shape()) << "\n";
  out << stem << "_tokens " << to_string(tokens.shape()) << "\n";
  out << "wrote " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"TSCFormer reference implementation: data ingest, training, evaluation and checks", "tscformer"};
  app.fallthrough();
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Run config file (key = value lines)");
  auto* seed_opt = app.add_option("--seed", seed, "Overrides model.init_seed, train.seed and data.seed");
  app.add_option("--out", g.out, "Output directory (overrides the config's out)");
  app.add_option("--set", g.overrides, "Config override key=value; repeatable")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  auto* synth = app.add_subcommand("synth", "Generate the synthetic training and held-out archives");

  IngestOptions ingest_opts;
  auto* ingest = app.add_subcommand("ingest", "Parse an event stream and bin it into event frames");
  ingest->add_option("--input", ingest_opts.input, "Event file (.csv or .evbin)")->required();
  ingest->add_option("--format", ingest_opts.format, "csv or evbin (default: from the extension)");
  ingest->add_option("--sensor", ingest_opts.sensor, "Sensor size WIDTHxHEIGHT");
  ingest->add_option("--frame-times", ingest_opts.frame_times, "Comma-separated frame timestamps in microseconds");
  ingest->add_option("--frames", ingest_opts.frames, "Number of evenly spaced frames");
  ingest->add_option("--interval", ingest_opts.interval, "Frame spacing in microseconds");
  ingest->add_option("--start", ingest_opts.start, "First frame time (default: first event)");
  ingest->add_option("--height", ingest_opts.height, "Target height (default: sensor height)");
  ingest->add_option("--width", ingest_opts.width, "Target width (default: sensor width)");
  ingest->add_flag("--render", ingest_opts.render, "Write rendered [T,3,H,W] frames instead of counts");
  ingest->add_option("--output", ingest_opts.output, "Output tensor path");

  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint, metrics and summary");

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the configured data");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint (default: <out>/checkpoint.tsck)");

  GradcheckOptions gc_opts;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check of the whole model");
  gradcheck->add_option("--fault", gc_opts.fault, "Corrupt one op's backward rule (test of the checker)");
  gradcheck->add_option("--eps", gc_opts.eps, "Central-difference step");
  gradcheck->add_option("--tolerance", gc_opts.tolerance, "Maximum relative error");
  gradcheck->add_option("--coords", gc_opts.coords, "Coordinates sampled per leaf");
  gradcheck->add_option("--mode", gc_opts.mode, "train (batch statistics) or eval (running statistics)");

  std::string axis, values;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train one model per value of an ablation axis");
  ablate_cmd->add_option("--axis", axis, "components, fusion, insertion, depth, token_dim, token_count, frames, modality")
      ->required();
  ablate_cmd->add_option("--values", values, "Comma-separated values (default: the axis grid)");

  int block = 0;
  std::size_t clip = 0;
  std::string split = "train";
  auto* dump = app.add_subcommand("dump-features", "Write block features of one clip as tensors and images");
  dump->add_option("--checkpoint", checkpoint, "Checkpoint (default: <out>/checkpoint.tsck)");
  dump->add_option("--block", block, "Block index 1..4")->required();
  dump->add_option("--clip", clip, "Clip index");
  dump->add_option("--split", split, "train or heldout");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitOk : kExitValidation;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (synth->parsed()) return cmd_synth(g, out);
    if (ingest->parsed()) return cmd_ingest(g, ingest_opts, out);
    if (train_cmd->parsed()) return cmd_train(g, out);
    if (eval->parsed()) return cmd_eval(g, checkpoint, out);
    if (gradcheck->parsed()) return cmd_gradcheck(g, gc_opts, out);
    if (ablate_cmd->parsed()) return cmd_ablate(g, axis, values, out);
    if (dump->parsed()) return cmd_dump_features(g, checkpoint, block, clip, split, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace tsc::cli
