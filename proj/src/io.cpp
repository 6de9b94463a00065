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
#include "tscformer/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tscformer/error.hpp"

namespace tsc {

namespace le {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void Reader::need(std::size_t n) {
  if (size_ - pos_ < n) {
    throw ParseError(what_ + ": truncated input at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                     " more)");
  }
}

std::uint8_t Reader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint16_t Reader::u16() {
  need(2);
  std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t Reader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

void Reader::skip(std::size_t n) {
  need(n);
  pos_ += n;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

void Reader::bytes(void* dst, std::size_t n) {
  need(n);
  std::memcpy(dst, data_ + pos_, n);
  pos_ += n;
}

}  // namespace le

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.rank() > 255) throw DimensionError("TNSR1 supports rank <= 255");
  std::vector<std::uint8_t> out{'T', 'N', 'S', 'R', 1, static_cast<std::uint8_t>(t.rank())};
  out.reserve(6 + 4 * t.rank() + 8 * t.size());
  for (auto e : t.shape()) {
    if (e > 0xffffffffULL) throw DimensionError("TNSR1 extent exceeds u32");
    le::put_u32(out, static_cast<std::uint32_t>(e));
  }
  for (double v : t.values()) le::put_f64(out, v);
  return out;
}

Tensor decode_tensor(const std::uint8_t* bytes, std::size_t size, std::size_t* consumed) {
  le::Reader r(bytes, size, "TNSR1");
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "TNSR", 4) != 0) throw ParseError("TNSR1: bad magic");
  const auto version = r.u8();
  if (version != 1) throw ParseError("TNSR1: unsupported version " + std::to_string(version));
  const auto rank = r.u8();
  if (rank == 0) throw ParseError("TNSR1: rank must be >= 1");
  Shape shape(rank);
  for (auto& e : shape) {
    e = r.u32();
    if (e == 0) throw ParseError("TNSR1: zero extent");
  }
  const std::size_t n = numel(shape);
  if (r.remaining() / 8 < n) throw ParseError("TNSR1: payload shorter than " + to_string(shape));
  std::vector<double> data(n);
  for (auto& v : data) v = r.f64();
  if (consumed) *consumed = r.position();
  return Tensor(std::move(shape), std::move(data));
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  std::size_t used = 0;
  Tensor t = decode_tensor(bytes.data(), bytes.size(), &used);
  if (used != bytes.size()) throw ParseError("TNSR1: trailing bytes after payload");
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_file_bytes(path, encode_tensor(t)); }

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path)); }

const Tensor& Archive::at(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end()) throw ValidationError("archive has no entry '" + name + "'");
  return it->second;
}

std::vector<std::uint8_t> encode_archive(const Archive& archive) {
  std::vector<std::uint8_t> out{'T', 'S', 'C', 'A', 1};
  le::put_u32(out, static_cast<std::uint32_t>(archive.text.size()));
  out.insert(out.end(), archive.text.begin(), archive.text.end());
  le::put_u32(out, static_cast<std::uint32_t>(archive.entries.size()));
  for (const auto& [name, tensor] : archive.entries) {
    if (name.size() > 0xffff) throw ValidationError("archive entry name too long");
    le::put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const auto payload = encode_tensor(tensor);
    le::put_u64(out, payload.size());
    out.insert(out.end(), payload.begin(), payload.end());
  }
  return out;
}

Archive decode_archive(const std::vector<std::uint8_t>& bytes) {
  le::Reader r(bytes.data(), bytes.size(), "archive");
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "TSCA", 4) != 0) throw ParseError("archive: bad magic");
  if (const auto v = r.u8(); v != 1) throw ParseError("archive: unsupported version " + std::to_string(v));
  Archive archive;
  archive.text.resize(r.u32());
  r.bytes(archive.text.data(), archive.text.size());
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(r.u16(), '\0');
    r.bytes(name.data(), name.size());
    const auto len = r.u64();
    if (len > r.remaining()) throw ParseError("archive: entry '" + name + "' truncated");
    std::size_t used = 0;
    Tensor t = decode_tensor(bytes.data() + r.position(), len, &used);
    if (used != len) throw ParseError("archive: entry '" + name + "' has trailing bytes");
    r.skip(len);
    if (!archive.entries.emplace(std::move(name), std::move(t)).second) throw ParseError("archive: duplicate entry");
  }
  if (r.remaining() != 0) throw ParseError("archive: trailing bytes");
  return archive;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  write_file_bytes(path, encode_archive(archive));
}

Archive read_archive(const std::filesystem::path& path) { return decode_archive(read_file_bytes(path)); }

}  // namespace tsc
