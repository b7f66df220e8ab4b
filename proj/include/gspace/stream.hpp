// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Gradient stream I/O.
//
// Binary `.gsg` layout (all integers little-endian):
//   header  : magic "GSGR" | version u16 (=1) | dim u32 | count u64 | flags u32
//   record  : id u64
//             [tag_len u16, tag bytes]      if flags & has_source_tag
//             [text_len u32, text bytes]    if flags & has_text
//             dim x f32
// Vectors are narrowed to f32 on write and widened to f64 on read. The
// presence flags are per stream; a zero-length tag or text reads back as
// absent.
// A JSON-lines alternative ({"id", "vector", "source_tag"?, "text"?} per
// line) is selected by the `.jsonl` / `.json` extension.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "gspace/grad_core.hpp"

namespace gspace {

namespace stream_flags {
inline constexpr std::uint32_t has_source_tag = 1u << 0;
inline constexpr std::uint32_t has_text = 1u << 1;
inline constexpr std::uint32_t normalized = 1u << 2;
// Bits 16..31 are an opaque producer layout tag (e.g. parameter flattening
// order of an external extractor); carried through unchanged.
inline constexpr std::uint32_t layout_tag_shift = 16;
}  // namespace stream_flags

inline constexpr std::array<char, 4> kStreamMagic = {'G', 'S', 'G', 'R'};
inline constexpr std::uint16_t kStreamVersion = 1;
inline constexpr std::size_t kStreamHeaderBytes = 22;

struct StreamHeader {
  std::array<char, 4> magic = kStreamMagic;
  std::uint16_t version = kStreamVersion;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  std::uint32_t flags = 0;

  bool has(std::uint32_t flag) const { return (flags & flag) != 0; }
  bool normalized() const { return has(stream_flags::normalized); }
};

/// Single-consumer, rewindable sequence of gradient records.
class GradientSource {
 public:
  virtual ~GradientSource() = default;
  virtual const StreamHeader& header() const = 0;
  virtual std::optional<GradientRecord> next() = 0;
  virtual void rewind() = 0;
};

/// Reads `.gsg` files record by record; the file is never fully materialized.
class GsgReader final : public GradientSource {
 public:
  explicit GsgReader(const std::filesystem::path& path);

  const StreamHeader& header() const override { return header_; }
  std::optional<GradientRecord> next() override;
  void rewind() override;

 private:
  void read_exact(char* dst, std::size_t n, const char* what);

  std::filesystem::path path_;
  std::ifstream in_;
  StreamHeader header_;
  std::uint64_t offset_ = 0;
  std::uint64_t produced_ = 0;
  std::unordered_set<std::uint64_t> seen_;
};

class JsonlReader final : public GradientSource {
 public:
  explicit JsonlReader(const std::filesystem::path& path);

  const StreamHeader& header() const override { return header_; }
  std::optional<GradientRecord> next() override;
  void rewind() override;

 private:
  std::optional<GradientRecord> parse_next();

  std::filesystem::path path_;
  std::ifstream in_;
  StreamHeader header_;
  std::uint64_t line_no_ = 0;
  std::unordered_set<std::uint64_t> seen_;
};

/// In-memory source over owned records.
class MemorySource final : public GradientSource {
 public:
  explicit MemorySource(std::vector<GradientRecord> records, bool normalized = false);

  const StreamHeader& header() const override { return header_; }
  std::optional<GradientRecord> next() override;
  void rewind() override { pos_ = 0; }
  const std::vector<GradientRecord>& records() const { return records_; }

 private:
  std::vector<GradientRecord> records_;
  StreamHeader header_;
  std::size_t pos_ = 0;
};

bool is_jsonl_path(const std::filesystem::path& path);

/// Opens `.gsg` or JSON-lines by extension.
std::unique_ptr<GradientSource> open_stream(const std::filesystem::path& path);

struct WriteOptions {
  bool normalized = false;
  std::uint32_t layout_tag = 0;
};

/// Writes records; returns the count written. Every record must share one
/// dimension. Tag/text flags are set when any record carries that field.
std::size_t write_stream(std::span<const GradientRecord> records, const std::filesystem::path& path,
                         const WriteOptions& options = {});

std::vector<GradientRecord> read_all(GradientSource& source);

/// Groups a source into consecutive batches of at most `batch_size` rows.
class BatchIterator {
 public:
  BatchIterator(GradientSource& source, std::size_t batch_size);
  std::optional<GradientMatrix> next();

 private:
  GradientSource& source_;
  std::size_t batch_size_;
};

std::vector<GradientMatrix> batch_iter(GradientSource& source, std::size_t batch_size);

}  // namespace gspace
