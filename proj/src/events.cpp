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
#include "tscformer/events.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <string_view>

#include "tscformer/error.hpp"
#include "tscformer/io.hpp"

namespace tsc {

void EventStream::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& e = points[i];
    if (e.x >= sensor_width || e.y >= sensor_height) {
      throw ValidationError("event " + std::to_string(i) + " at (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                            ") outside sensor " + std::to_string(sensor_width) + "x" + std::to_string(sensor_height));
    }
    if (e.p != 1 && e.p != -1) {
      throw ValidationError("event " + std::to_string(i) + " has polarity " + std::to_string(e.p));
    }
    if (i > 0 && e.t < points[i - 1].t) {
      throw OrderingError("event " + std::to_string(i) + " timestamp " + std::to_string(e.t) + " precedes " +
                          std::to_string(points[i - 1].t));
    }
  }
}

EventFormat parse_event_format(const std::string& name) {
  if (name == "csv") return EventFormat::kCsv;
  if (name == "evbin") return EventFormat::kEvbin;
  throw ValidationError("unknown event format '" + name + "' (expected csv or evbin)");
}

namespace {

template <typename T>
bool parse_field(std::string_view s, T& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

EventStream parse_csv(std::string_view text, std::optional<SensorSize> sensor) {
  EventStream stream;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::uint32_t max_x = 0, max_y = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 4) {
      throw ParseError("csv line " + std::to_string(line_no) + ": expected 4 fields x,y,t,p");
    }
    std::uint32_t x = 0, y = 0;
    std::uint64_t t = 0;
    int p = 0;
    if (!parse_field(fields[0], x) || !parse_field(fields[1], y) || !parse_field(fields[2], t) ||
        !parse_field(fields[3], p)) {
      if (line_no == 1 && stream.points.empty()) continue;  // header
      throw ParseError("csv line " + std::to_string(line_no) + ": malformed row '" + std::string(line) + "'");
    }
    if (p != 1 && p != -1) {
      throw ValidationError("csv line " + std::to_string(line_no) + ": polarity must be +1 or -1");
    }
    if (x > 0xffff || y > 0xffff) throw ValidationError("csv line " + std::to_string(line_no) + ": coordinate exceeds u16");
    if (!stream.points.empty() && t < stream.points.back().t) {
      throw OrderingError("csv line " + std::to_string(line_no) + ": timestamp " + std::to_string(t) +
                          " decreases from " + std::to_string(stream.points.back().t));
    }
    max_x = std::max(max_x, x);
    max_y = std::max(max_y, y);
    stream.points.push_back(
        {static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), t, static_cast<std::int8_t>(p)});
  }
  if (sensor) {
    stream.sensor_width = sensor->width;
    stream.sensor_height = sensor->height;
  } else {
    if (max_x >= 0xffff || max_y >= 0xffff) throw ValidationError("csv: cannot infer sensor size");
    stream.sensor_width = static_cast<std::uint16_t>(max_x + 1);
    stream.sensor_height = static_cast<std::uint16_t>(max_y + 1);
  }
  stream.validate();
  return stream;
}

EventStream parse_evbin(std::span<const std::uint8_t> bytes, std::optional<SensorSize> sensor) {
  EventStream stream;
  if (bytes.empty()) {
    if (sensor) {
      stream.sensor_width = sensor->width;
      stream.sensor_height = sensor->height;
    }
    return stream;
  }
  le::Reader r(bytes.data(), bytes.size(), "evbin");
  char magic[4];
  r.bytes(magic, 4);
  if (std::string_view(magic, 4) != "EVB1") throw ParseError("evbin: bad magic");
  stream.sensor_width = r.u16();
  stream.sensor_height = r.u16();
  const auto count = r.u64();
  constexpr std::size_t kRecord = 2 + 2 + 8 + 1;
  if (r.remaining() / kRecord < count) throw ParseError("evbin: header announces more records than present");
  stream.points.resize(count);
  for (auto& e : stream.points) {
    e.x = r.u16();
    e.y = r.u16();
    e.t = r.u64();
    e.p = static_cast<std::int8_t>(r.u8());
  }
  if (r.remaining() != 0) throw ParseError("evbin: trailing bytes after records");
  if (sensor && (sensor->width != stream.sensor_width || sensor->height != stream.sensor_height)) {
    throw ValidationError("evbin: sensor size in header differs from the requested size");
  }
  stream.validate();
  return stream;
}

}  // namespace

EventStream parse_events(std::span<const std::uint8_t> source, EventFormat format, std::optional<SensorSize> sensor) {
  if (format == EventFormat::kCsv) {
    return parse_csv(std::string_view(reinterpret_cast<const char*>(source.data()), source.size()), sensor);
  }
  return parse_evbin(source, sensor);
}

std::vector<std::uint8_t> serialize_evbin(const EventStream& stream) {
  std::vector<std::uint8_t> out{'E', 'V', 'B', '1'};
  out.reserve(16 + stream.points.size() * 13);
  le::put_u16(out, stream.sensor_width);
  le::put_u16(out, stream.sensor_height);
  le::put_u64(out, stream.points.size());
  for (const auto& e : stream.points) {
    le::put_u16(out, e.x);
    le::put_u16(out, e.y);
    le::put_u64(out, e.t);
    le::put_u8(out, static_cast<std::uint8_t>(e.p));
  }
  return out;
}

std::string serialize_csv(const EventStream& stream) {
  std::ostringstream os;
  os << "x,y,t,p\n";
  for (const auto& e : stream.points) os << e.x << ',' << e.y << ',' << e.t << ',' << int(e.p) << '\n';
  return os.str();
}

Tensor bin_events(const EventStream& stream, std::span<const std::uint64_t> frame_times, std::size_t height,
                  std::size_t width) {
  if (frame_times.empty()) throw ValidationError("bin_events: need at least one frame time");
  for (std::size_t i = 1; i < frame_times.size(); ++i) {
    if (frame_times[i] <= frame_times[i - 1]) throw ValidationError("bin_events: frame times must strictly increase");
  }
  if (height == 0 || width == 0) throw ValidationError("bin_events: target size must be positive");
  const std::size_t T = frame_times.size();
  Tensor counts({T, 2, height, width});
  if (stream.points.empty()) return counts;
  if (stream.sensor_width == 0 || stream.sensor_height == 0) throw ValidationError("bin_events: sensor size unset");
  const std::size_t sw = stream.sensor_width, sh = stream.sensor_height;
  std::size_t frame = 0;
  for (const auto& e : stream.points) {
    if (e.t < frame_times[0]) continue;
    while (frame + 1 < T && e.t >= frame_times[frame + 1]) ++frame;
    const std::size_t row = static_cast<std::size_t>(e.y) * height / sh;
    const std::size_t col = static_cast<std::size_t>(e.x) * width / sw;
    const std::size_t channel = e.p > 0 ? 0 : 1;
    counts[((frame * 2 + channel) * height + row) * width + col] += 1.0;
  }
  return counts;
}

Tensor render_event_frames(const Tensor& counts) {
  if (counts.rank() != 4 || counts.dim(1) != 2) {
    throw DimensionError("render_event_frames: expected [T, 2, H, W], got " + to_string(counts.shape()));
  }
  const std::size_t T = counts.dim(0), S = counts.dim(2) * counts.dim(3);
  Tensor frames({T, 3, counts.dim(2), counts.dim(3)});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < S; ++i) {
      const double pos = counts[(t * 2) * S + i], neg = counts[(t * 2 + 1) * S + i];
      if (pos < 0 || neg < 0) throw ValidationError("render_event_frames: negative count");
      frames[(t * 3) * S + i] = std::min(pos, 1.0);
      frames[(t * 3 + 2) * S + i] = std::min(neg, 1.0);
    }
  }
  return frames;
}

}  // namespace tsc
