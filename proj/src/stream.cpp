// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/stream.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <string>

#include "gspace/error.hpp"
#include "json.hpp"

namespace gspace {

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xffu));
}

template <typename T>
T get_le(const char* p) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(p[i])) << (8 * i);
  return static_cast<T>(u);
}

void put_f32(std::string& out, double value) {
  put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

std::string lowercase_ext(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

void check_record(const GradientRecord& rec, std::size_t dim, std::unordered_set<std::uint64_t>& seen,
                  const std::string& where) {
  if (static_cast<std::size_t>(rec.vector.size()) != dim)
    throw FormatError(where + ": record " + std::to_string(rec.id) + " has dimension " +
                      std::to_string(rec.vector.size()) + ", header says " + std::to_string(dim));
  if (!rec.vector.allFinite())
    throw FormatError(where + ": record " + std::to_string(rec.id) + " contains non-finite values");
  if (!seen.insert(rec.id).second) throw FormatError(where + ": duplicate id " + std::to_string(rec.id));
}

}  // namespace

// ---------------------------------------------------------------- GsgReader

GsgReader::GsgReader(const std::filesystem::path& path) : path_(path) { rewind(); }

void GsgReader::read_exact(char* dst, std::size_t n, const char* what) {
  in_.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    throw FormatError(path_.string() + ": truncated " + what + " at byte offset " +
                      std::to_string(offset_ + static_cast<std::uint64_t>(in_.gcount())) + " (record " +
                      std::to_string(produced_) + " of " + std::to_string(header_.count) + ")");
  offset_ += n;
}

void GsgReader::rewind() {
  in_ = std::ifstream(path_, std::ios::binary);
  if (!in_) throw IoError("cannot open " + path_.string());
  offset_ = 0;
  produced_ = 0;
  seen_.clear();

  char buf[kStreamHeaderBytes];
  in_.read(buf, kStreamHeaderBytes);
  if (static_cast<std::size_t>(in_.gcount()) != kStreamHeaderBytes)
    throw FormatError(path_.string() + ": truncated header at byte offset " + std::to_string(in_.gcount()));
  offset_ = kStreamHeaderBytes;
  std::memcpy(header_.magic.data(), buf, 4);
  if (header_.magic != kStreamMagic) throw FormatError(path_.string() + ": bad magic (not a GSGR stream)");
  header_.version = get_le<std::uint16_t>(buf + 4);
  if (header_.version != kStreamVersion)
    throw FormatError(path_.string() + ": unsupported version " + std::to_string(header_.version));
  header_.dim = get_le<std::uint32_t>(buf + 6);
  header_.count = get_le<std::uint64_t>(buf + 10);
  header_.flags = get_le<std::uint32_t>(buf + 18);
  if (header_.dim == 0) throw FormatError(path_.string() + ": header dim must be >= 1");
}

std::optional<GradientRecord> GsgReader::next() {
  if (produced_ == header_.count) return std::nullopt;
  GradientRecord rec;
  char u64[8];
  read_exact(u64, 8, "record id");
  rec.id = get_le<std::uint64_t>(u64);
  if (header_.has(stream_flags::has_source_tag)) {
    char u16[2];
    read_exact(u16, 2, "tag length");
    std::string tag(get_le<std::uint16_t>(u16), '\0');
    read_exact(tag.data(), tag.size(), "tag bytes");
    if (!tag.empty()) rec.source_tag = std::move(tag);  // zero length marks an absent tag
  }
  if (header_.has(stream_flags::has_text)) {
    char u32[4];
    read_exact(u32, 4, "text length");
    std::string text(get_le<std::uint32_t>(u32), '\0');
    read_exact(text.data(), text.size(), "text bytes");
    if (!text.empty()) rec.text = std::move(text);
  }
  std::vector<char> payload(4 * static_cast<std::size_t>(header_.dim));
  read_exact(payload.data(), payload.size(), "vector payload");
  rec.vector.resize(header_.dim);
  for (std::uint32_t j = 0; j < header_.dim; ++j)
    rec.vector[j] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(payload.data() + 4 * j)));
  check_record(rec, header_.dim, seen_, path_.string());
  ++produced_;
  return rec;
}

// -------------------------------------------------------------- JsonlReader

JsonlReader::JsonlReader(const std::filesystem::path& path) : path_(path) {
  std::ifstream in(path_);
  if (!in) throw IoError("cannot open " + path_.string());
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (first) {
      try {
        auto j = nlohmann::json::parse(line);
        header_.dim = static_cast<std::uint32_t>(j.at("vector").size());
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(path_.string() + ": line 1: " + e.what());
      }
      first = false;
    }
    ++header_.count;
  }
  rewind();
}

void JsonlReader::rewind() {
  in_ = std::ifstream(path_);
  if (!in_) throw IoError("cannot open " + path_.string());
  line_no_ = 0;
  seen_.clear();
}

std::optional<GradientRecord> JsonlReader::parse_next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path_.string() + ": line " + std::to_string(line_no_);
    try {
      auto j = nlohmann::json::parse(line);
      GradientRecord rec;
      rec.id = j.at("id").get<std::uint64_t>();
      const auto& v = j.at("vector");
      rec.vector.resize(static_cast<Eigen::Index>(v.size()));
      for (std::size_t i = 0; i < v.size(); ++i) rec.vector[static_cast<Eigen::Index>(i)] = v[i].get<double>();
      if (j.contains("source_tag")) rec.source_tag = j["source_tag"].get<std::string>();
      if (j.contains("text")) rec.text = j["text"].get<std::string>();
      for (const auto& [key, _] : j.items())
        if (key != "id" && key != "vector" && key != "source_tag" && key != "text")
          throw FormatError(where + ": unknown field '" + key + "'");
      check_record(rec, header_.dim, seen_, where);
      return rec;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return std::nullopt;
}

std::optional<GradientRecord> JsonlReader::next() { return parse_next(); }

// ------------------------------------------------------------- MemorySource

MemorySource::MemorySource(std::vector<GradientRecord> records, bool normalized) : records_(std::move(records)) {
  header_.count = records_.size();
  header_.dim = records_.empty() ? 0 : static_cast<std::uint32_t>(records_.front().vector.size());
  if (normalized) header_.flags |= stream_flags::normalized;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& r : records_) {
    if (r.source_tag) header_.flags |= stream_flags::has_source_tag;
    if (r.text) header_.flags |= stream_flags::has_text;
    check_record(r, header_.dim, seen, "memory stream");
  }
}

std::optional<GradientRecord> MemorySource::next() {
  if (pos_ >= records_.size()) return std::nullopt;
  return records_[pos_++];
}

// ------------------------------------------------------------------ helpers

bool is_jsonl_path(const std::filesystem::path& path) {
  const auto ext = lowercase_ext(path);
  return ext == ".jsonl" || ext == ".json" || ext == ".ndjson";
}

std::unique_ptr<GradientSource> open_stream(const std::filesystem::path& path) {
  if (is_jsonl_path(path)) return std::make_unique<JsonlReader>(path);
  return std::make_unique<GsgReader>(path);
}

std::size_t write_stream(std::span<const GradientRecord> records, const std::filesystem::path& path,
                         const WriteOptions& options) {
  std::uint32_t dim = records.empty() ? 0 : static_cast<std::uint32_t>(records.front().vector.size());
  std::uint32_t flags = options.layout_tag << stream_flags::layout_tag_shift;
  if (options.normalized) flags |= stream_flags::normalized;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& r : records) {
    if (r.vector.size() != dim)
      throw ValidationError("write_stream: record " + std::to_string(r.id) + " has dimension " +
                            std::to_string(r.vector.size()) + ", expected " + std::to_string(dim));
    if (!r.vector.allFinite())
      throw ValidationError("write_stream: record " + std::to_string(r.id) + " contains non-finite values");
    if (!seen.insert(r.id).second) throw ValidationError("write_stream: duplicate id " + std::to_string(r.id));
    if (r.source_tag) flags |= stream_flags::has_source_tag;
    if (r.text) flags |= stream_flags::has_text;
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");

  if (is_jsonl_path(path)) {
    for (const auto& r : records) {
      nlohmann::ordered_json j;
      j["id"] = r.id;
      auto& v = j["vector"] = nlohmann::ordered_json::array();
      for (Eigen::Index i = 0; i < r.vector.size(); ++i) v.push_back(r.vector[i]);
      if (r.source_tag) j["source_tag"] = *r.source_tag;
      if (r.text) j["text"] = *r.text;
      out << j.dump() << '\n';
    }
    return records.size();
  }

  // An empty binary stream still needs a valid dim; use 1.
  if (dim == 0) dim = 1;
  std::string buf;
  buf.append(kStreamMagic.data(), 4);
  put_le<std::uint16_t>(buf, kStreamVersion);
  put_le<std::uint32_t>(buf, dim);
  put_le<std::uint64_t>(buf, records.size());
  put_le<std::uint32_t>(buf, flags);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  for (const auto& r : records) {
    buf.clear();
    put_le<std::uint64_t>(buf, r.id);
    if (flags & stream_flags::has_source_tag) {
      const auto& tag = r.source_tag.value_or(std::string{});
      if (tag.size() > 0xffff) throw ValidationError("source_tag longer than 65535 bytes");
      put_le<std::uint16_t>(buf, static_cast<std::uint16_t>(tag.size()));
      buf += tag;
    }
    if (flags & stream_flags::has_text) {
      const auto& text = r.text.value_or(std::string{});
      put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(text.size()));
      buf += text;
    }
    for (Eigen::Index i = 0; i < r.vector.size(); ++i) put_f32(buf, r.vector[i]);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("write failed for " + path.string());
  return records.size();
}

std::vector<GradientRecord> read_all(GradientSource& source) {
  std::vector<GradientRecord> out;
  while (auto r = source.next()) out.push_back(std::move(*r));
  return out;
}

BatchIterator::BatchIterator(GradientSource& source, std::size_t batch_size)
    : source_(source), batch_size_(batch_size) {
  if (batch_size_ == 0) throw ValidationError("batch size must be >= 1");
}

std::optional<GradientMatrix> BatchIterator::next() {
  std::vector<GradientRecord> chunk;
  chunk.reserve(batch_size_);
  while (chunk.size() < batch_size_) {
    auto r = source_.next();
    if (!r) break;
    chunk.push_back(std::move(*r));
  }
  if (chunk.empty()) return std::nullopt;
  return GradientMatrix::from_records(chunk);
}

std::vector<GradientMatrix> batch_iter(GradientSource& source, std::size_t batch_size) {
  BatchIterator it(source, batch_size);
  std::vector<GradientMatrix> out;
  while (auto b = it.next()) out.push_back(std::move(*b));
  return out;
}

}  // namespace gspace
