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
#include "tscformer/data.hpp"

#include <algorithm>
#include <cmath>

#include "tscformer/error.hpp"
#include "tscformer/io.hpp"

namespace tsc {

void ClipPair::validate() const {
  if (rgb.rank() != 4 || rgb.dim(1) != 3) throw DimensionError("clip rgb must be [T, 3, H, W], got " + to_string(rgb.shape()));
  if (event.shape() != rgb.shape()) {
    throw DimensionError("clip event " + to_string(event.shape()) + " does not match rgb " + to_string(rgb.shape()));
  }
  if (frame_times.size() != rgb.dim(0)) throw ValidationError("clip needs one timestamp per frame");
  for (std::size_t i = 1; i < frame_times.size(); ++i) {
    if (frame_times[i] <= frame_times[i - 1]) throw ValidationError("clip frame times must strictly increase");
  }
}

AugmentDecision sample_augment(std::mt19937_64& rng) {
  AugmentDecision d;
  d.scale_index = std::uniform_int_distribution<std::size_t>(0, kCropScales.size() - 1)(rng);
  d.position = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
  d.flip = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5;
  return d;
}

Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  const std::size_t r = x.rank();
  if (r < 2) throw DimensionError("resize_bilinear: need rank >= 2");
  const std::size_t H = x.dim(r - 2), W = x.dim(r - 1), planes = x.size() / (H * W);
  Shape out_shape = x.shape();
  out_shape[r - 2] = out_h;
  out_shape[r - 1] = out_w;
  Tensor out(out_shape);
  auto coord = [](std::size_t dst, std::size_t in, std::size_t out_n, std::size_t& lo, std::size_t& hi, double& frac) {
    double src = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out_n) - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    lo = static_cast<std::size_t>(std::floor(src));
    hi = std::min(lo + 1, in - 1);
    frac = src - static_cast<double>(lo);
  };
  std::vector<std::size_t> y0(out_h), y1(out_h), x0(out_w), x1(out_w);
  std::vector<double> fy(out_h), fx(out_w);
  for (std::size_t i = 0; i < out_h; ++i) coord(i, H, out_h, y0[i], y1[i], fy[i]);
  for (std::size_t j = 0; j < out_w; ++j) coord(j, W, out_w, x0[j], x1[j], fx[j]);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = x.data() + p * H * W;
    double* dst = out.data() + p * out_h * out_w;
    for (std::size_t i = 0; i < out_h; ++i) {
      for (std::size_t j = 0; j < out_w; ++j) {
        const double top = src[y0[i] * W + x0[j]] * (1 - fx[j]) + src[y0[i] * W + x1[j]] * fx[j];
        const double bot = src[y1[i] * W + x0[j]] * (1 - fx[j]) + src[y1[i] * W + x1[j]] * fx[j];
        dst[i * out_w + j] = top * (1 - fy[i]) + bot * fy[i];
      }
    }
  }
  return out;
}

namespace {

std::size_t crop_extent(std::size_t short_side, double scale) {
  return static_cast<std::size_t>(std::lround(scale * static_cast<double>(short_side)));
}

Tensor crop_flip(const Tensor& x, std::size_t top, std::size_t left, std::size_t size, bool flip) {
  const std::size_t T = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor out({T, C, size, size});
  for (std::size_t p = 0; p < T * C; ++p) {
    for (std::size_t i = 0; i < size; ++i) {
      for (std::size_t j = 0; j < size; ++j) {
        const std::size_t sj = flip ? size - 1 - j : j;
        out[(p * size + i) * size + j] = x[(p * H + top + i) * W + left + sj];
      }
    }
  }
  return out;
}

}  // namespace

ClipPair apply_augment(const ClipPair& pair, const AugmentDecision& d, std::size_t target) {
  pair.validate();
  const std::size_t H = pair.rgb.dim(2), W = pair.rgb.dim(3);
  if (H < 8 || W < 8) throw ValidationError("augment: frames must be at least 8x8");
  if (d.scale_index >= kCropScales.size() || d.position > 4) throw ValidationError("augment: invalid decision");
  const std::size_t S = std::min(H, W);
  const std::size_t c = crop_extent(S, kCropScales[d.scale_index]);
  if (target > c) {
    throw ValidationError("augment: target " + std::to_string(target) + " larger than crop " + std::to_string(c));
  }
  std::size_t top = (H - c) / 2, left = (W - c) / 2;
  switch (d.position) {
    case 0: top = 0; left = 0; break;
    case 1: top = 0; left = W - c; break;
    case 2: top = H - c; left = 0; break;
    case 3: top = H - c; left = W - c; break;
    default: break;
  }
  ClipPair out;
  out.label = pair.label;
  out.frame_times = pair.frame_times;
  out.rgb = crop_flip(pair.rgb, top, left, c, d.flip);
  out.event = crop_flip(pair.event, top, left, c, d.flip);
  if (c != target) {
    out.rgb = resize_bilinear(out.rgb, target, target);
    out.event = resize_bilinear(out.event, target, target);
  }
  return out;
}

ClipPair augment(const ClipPair& pair, std::mt19937_64& rng, Mode mode, std::size_t target) {
  const std::size_t S = std::min(pair.rgb.dim(2), pair.rgb.dim(3));
  if (mode == Mode::kEval) return apply_augment(pair, AugmentDecision{0, 4, false}, target);
  // Every scale must be able to serve the target, whichever one is drawn.
  if (target > crop_extent(S, kCropScales.back())) {
    throw ValidationError("augment: target " + std::to_string(target) + " larger than the smallest crop " +
                          std::to_string(crop_extent(S, kCropScales.back())));
  }
  return apply_augment(pair, sample_augment(rng), target);
}

std::uint64_t clip_seed(std::uint64_t seed, std::uint64_t clip_index, std::uint64_t epoch) {
  // splitmix64 finalizer over the xor-combined inputs
  std::uint64_t z = seed ^ (clip_index * 0x9e3779b97f4a7c15ULL) ^ (epoch * 0xc2b2ae3d27d4eb4fULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

constexpr std::uint64_t kFrameInterval = 33'333;  // microseconds

struct Scene {
  int shape = 0;       // 0 square, 1 disc, 2 cross
  double direction = 1.0;  // +1 down, -1 up
  double radius = 0.0;
  double cx = 0.0;
  double cy0 = 0.0;
  double step = 0.0;  // rows per frame
  std::array<double, 3> fg{};
  std::array<double, 3> bg{};
  std::uint64_t rng_seed = 0;
};

Scene make_scene(const SynthSpec& spec, std::size_t clip_index) {
  std::mt19937_64 rng(clip_seed(spec.seed, clip_index));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int k = static_cast<int>(clip_index % static_cast<std::size_t>(spec.num_classes));
  Scene s;
  s.direction = (k % 2 == 0) ? 1.0 : -1.0;
  s.shape = (k / 2) % 3;
  const double speed = 1.0 + static_cast<double>(k / 6);
  const double H = static_cast<double>(spec.height), W = static_cast<double>(spec.width);
  s.radius = std::max(2.0, std::min(H, W) / 6.0);
  const double travel = std::min(H / 3.0 * speed, H - 2.0 * s.radius - 2.0);
  const double frames = static_cast<double>(spec.frames);
  s.step = travel / frames;
  s.cx = s.radius + 1.0 + u(rng) * std::max(0.0, W - 2.0 * s.radius - 2.0);
  const double y_margin = s.radius + 1.0;
  const double slack = std::max(0.0, H - 2.0 * y_margin - travel);
  const double y_start = y_margin + u(rng) * slack;
  s.cy0 = s.direction > 0 ? y_start : H - y_start;
  for (auto& c : s.fg) c = 0.6 + 0.4 * u(rng);
  for (auto& c : s.bg) c = 0.25 * u(rng);
  s.rng_seed = rng();
  return s;
}

// Coverage of pixel (i, j) by the shape centred at (cy, cx), in {0, 1}.
double coverage(const Scene& s, double cy, double cx, std::size_t i, std::size_t j) {
  const double dy = static_cast<double>(i) + 0.5 - cy, dx = static_cast<double>(j) + 0.5 - cx;
  const double r = s.radius;
  switch (s.shape) {
    case 0: return (std::abs(dy) <= r && std::abs(dx) <= r) ? 1.0 : 0.0;
    case 1: return (dy * dy + dx * dx <= r * r) ? 1.0 : 0.0;
    default: {
      const double arm = r / 3.0;
      const bool v = std::abs(dx) <= arm && std::abs(dy) <= r;
      const bool h = std::abs(dy) <= arm && std::abs(dx) <= r;
      return (v || h) ? 1.0 : 0.0;
    }
  }
}

double centre_row(const Scene& s, std::size_t frame) {
  return s.cy0 + s.direction * s.step * static_cast<double>(frame);
}

double luminance(const Scene& s, std::size_t frame, std::size_t i, std::size_t j) {
  const double m = coverage(s, centre_row(s, frame), s.cx, i, j);
  double lum = 0.0;
  for (std::size_t c = 0; c < 3; ++c) lum += (m * s.fg[c] + (1 - m) * s.bg[c]) / 3.0;
  return lum;
}

}  // namespace

EventStream synth_events(const SynthSpec& spec, std::size_t clip_index) {
  const Scene s = make_scene(spec, clip_index);
  std::mt19937_64 rng(s.rng_seed ^ 0x5eedULL);
  std::uniform_int_distribution<std::uint64_t> jitter(0, kFrameInterval - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EventStream stream;
  stream.sensor_width = static_cast<std::uint16_t>(spec.width);
  stream.sensor_height = static_cast<std::uint16_t>(spec.height);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const std::uint64_t t0 = f * kFrameInterval;
    for (std::size_t i = 0; i < spec.height; ++i) {
      for (std::size_t j = 0; j < spec.width; ++j) {
        const double diff = luminance(s, f + 1, i, j) - luminance(s, f, i, j);
        if (std::abs(diff) > 0.15) {
          const int n = 1 + static_cast<int>(u(rng) < 0.5);
          for (int e = 0; e < n; ++e) {
            stream.points.push_back({static_cast<std::uint16_t>(j), static_cast<std::uint16_t>(i), t0 + jitter(rng),
                                     static_cast<std::int8_t>(diff > 0 ? 1 : -1)});
          }
        } else if (u(rng) < 0.004) {
          stream.points.push_back({static_cast<std::uint16_t>(j), static_cast<std::uint16_t>(i), t0 + jitter(rng),
                                   static_cast<std::int8_t>(u(rng) < 0.5 ? 1 : -1)});
        }
      }
    }
  }
  std::stable_sort(stream.points.begin(), stream.points.end(),
                   [](const EventPoint& a, const EventPoint& b) { return a.t < b.t; });
  return stream;
}

std::vector<ClipPair> synth_dataset(const SynthSpec& spec) {
  if (spec.num_classes < 2) throw ValidationError("synth_dataset: need at least 2 classes");
  if (spec.samples_per_class < 1 || spec.frames < 1 || spec.height < 8 || spec.width < 8) {
    throw ValidationError("synth_dataset: invalid size parameters");
  }
  const std::size_t total = static_cast<std::size_t>(spec.num_classes) * static_cast<std::size_t>(spec.samples_per_class);
  std::vector<ClipPair> clips;
  clips.reserve(total);
  const std::size_t H = spec.height, W = spec.width, T = spec.frames;
  for (std::size_t n = 0; n < total; ++n) {
    const Scene s = make_scene(spec, n);
    std::mt19937_64 noise_rng(s.rng_seed);
    std::normal_distribution<double> noise(0.0, 0.03);
    ClipPair clip;
    clip.label = static_cast<int>(n % static_cast<std::size_t>(spec.num_classes));
    for (std::size_t f = 0; f < T; ++f) clip.frame_times.push_back(f * kFrameInterval);
    clip.rgb = Tensor({T, 3, H, W});
    for (std::size_t f = 0; f < T; ++f) {
      const double cy = centre_row(s, f);
      for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
          const double m = coverage(s, cy, s.cx, i, j);
          for (std::size_t c = 0; c < 3; ++c) {
            const double v = m * s.fg[c] + (1 - m) * s.bg[c] + noise(noise_rng);
            clip.rgb[((f * 3 + c) * H + i) * W + j] = std::clamp(v, 0.0, 1.0);
          }
        }
      }
    }
    const EventStream stream = synth_events(spec, n);
    clip.event = render_event_frames(bin_events(stream, clip.frame_times, H, W));
    clips.push_back(std::move(clip));
  }
  return clips;
}

void save_dataset(const std::filesystem::path& path, const std::vector<ClipPair>& clips, const std::string& note) {
  Archive archive;
  archive.text = note;
  if (!clips.empty()) {
    const std::size_t T = clips.front().frames();
    Tensor labels({clips.size()});
    Tensor times({clips.size(), T});
    for (std::size_t n = 0; n < clips.size(); ++n) {
      clips[n].validate();
      if (clips[n].frames() != T) throw ValidationError("save_dataset: clips must share the frame count");
      labels[n] = clips[n].label;
      for (std::size_t f = 0; f < T; ++f) times[n * T + f] = static_cast<double>(clips[n].frame_times[f]);
      char key[32];
      std::snprintf(key, sizeof(key), "clip%06zu", n);
      archive.entries[std::string(key) + ".rgb"] = clips[n].rgb;
      archive.entries[std::string(key) + ".event"] = clips[n].event;
    }
    archive.entries["labels"] = std::move(labels);
    archive.entries["frame_times"] = std::move(times);
  }
  write_archive(path, archive);
}

std::vector<ClipPair> load_dataset(const std::filesystem::path& path) {
  const Archive archive = read_archive(path);
  std::vector<ClipPair> clips;
  if (archive.entries.empty()) return clips;
  const Tensor& labels = archive.at("labels");
  const Tensor& times = archive.at("frame_times");
  const std::size_t N = labels.size();
  if (times.rank() != 2 || times.dim(0) != N) throw ValidationError("dataset: frame_times does not match labels");
  const std::size_t T = times.dim(1);
  for (std::size_t n = 0; n < N; ++n) {
    char key[32];
    std::snprintf(key, sizeof(key), "clip%06zu", n);
    ClipPair clip;
    clip.rgb = archive.at(std::string(key) + ".rgb");
    clip.event = archive.at(std::string(key) + ".event");
    clip.label = static_cast<int>(labels[n]);
    for (std::size_t f = 0; f < T; ++f) clip.frame_times.push_back(static_cast<std::uint64_t>(times[n * T + f]));
    clip.validate();
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace tsc
