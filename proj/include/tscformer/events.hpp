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
#ifndef TSCFORMER_EVENTS_HPP_
#define TSCFORMER_EVENTS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tscformer/tensor.hpp"

namespace tsc {

struct EventPoint {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint64_t t = 0;  // microseconds
  std::int8_t p = 1;    // +1 or -1

  friend bool operator==(const EventPoint&, const EventPoint&) = default;
};

struct SensorSize {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
};

// Events ordered by nondecreasing timestamp, all inside the sensor.
struct EventStream {
  std::vector<EventPoint> points;
  std::uint16_t sensor_width = 0;
  std::uint16_t sensor_height = 0;

  // Throws ValidationError / OrderingError when the invariants do not hold.
  void validate() const;

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

enum class EventFormat { kCsv, kEvbin };

EventFormat parse_event_format(const std::string& name);

// CSV rows are "x,y,t,p" with an optional header line. CSV carries no
// sensor size; when `sensor` is not given it is inferred as max coordinate
// plus one. The evbin header always supplies the sensor size.
EventStream parse_events(std::span<const std::uint8_t> source, EventFormat format,
                         std::optional<SensorSize> sensor = std::nullopt);

// evbin: "EVB1", u16 width, u16 height, u64 count, then count records of
// (u16 x, u16 y, u64 t, i8 p), all little-endian.
std::vector<std::uint8_t> serialize_evbin(const EventStream& stream);
std::string serialize_csv(const EventStream& stream);

// Accumulates polarity counts into [T, 2, H, W]. Frame i takes events with
// t in [frame_times[i], frame_times[i+1]); the last frame is open-ended.
// Channel 0 counts p = +1, channel 1 counts p = -1. Sensor coordinates map
// to the target grid by nearest-neighbour index scaling.
Tensor bin_events(const EventStream& stream, std::span<const std::uint64_t> frame_times, std::size_t height,
                  std::size_t width);

// [T, 2, H, W] counts -> [T, 3, H, W] binary frames: red marks positive
// activity, blue negative, green stays zero.
Tensor render_event_frames(const Tensor& counts);

}  // namespace tsc

#endif  // TSCFORMER_EVENTS_HPP_
