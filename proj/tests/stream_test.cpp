// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#include "gspace/stream.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "gspace/error.hpp"
#include "test_util.hpp"

namespace gspace {
namespace {

using testing::TempDir;

// Vectors whose entries are exactly representable in single precision.
std::vector<GradientRecord> sample_records(std::size_t n, Eigen::Index d, std::uint64_t seed, bool payloads) {
  std::mt19937_64 rng(seed);
  std::vector<GradientRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vector v = testing::random_vector(rng, d);
    for (Eigen::Index j = 0; j < d; ++j) v[j] = static_cast<double>(static_cast<float>(v[j]));
    GradientRecord r{1000 + 7 * i, v, std::nullopt, std::nullopt};
    if (payloads) {
      r.source_tag = "task" + std::to_string(i % 3);
      r.text = "caf\xc3\xa9 example " + std::to_string(i);
    }
    out.push_back(std::move(r));
  }
  return out;
}

TEST(GsgStream, RoundTripIsBitExact) {
  TempDir dir("gsg_rt");
  const auto recs = sample_records(3, 4, 1, false);
  EXPECT_EQ(write_stream(recs, dir / "a.gsg"), 3u);
  GsgReader reader(dir / "a.gsg");
  EXPECT_EQ(reader.header().dim, 4u);
  EXPECT_EQ(reader.header().count, 3u);
  EXPECT_FALSE(reader.header().normalized());
  EXPECT_EQ(read_all(reader), recs);
}

TEST(GsgStream, RoundTripKeepsTagsAndText) {
  TempDir dir("gsg_payload");
  const auto recs = sample_records(25, 9, 2, true);
  write_stream(recs, dir / "p.gsg", {true, 0x2a});
  GsgReader reader(dir / "p.gsg");
  EXPECT_TRUE(reader.header().has(stream_flags::has_source_tag));
  EXPECT_TRUE(reader.header().has(stream_flags::has_text));
  EXPECT_TRUE(reader.header().normalized());
  EXPECT_EQ(reader.header().flags >> stream_flags::layout_tag_shift, 0x2au);
  EXPECT_EQ(read_all(reader), recs);
  reader.rewind();
  EXPECT_EQ(read_all(reader), recs);
}

TEST(GsgStream, MixedPresenceOfPayloadsSurvives) {
  TempDir dir("gsg_mixed");
  std::vector<GradientRecord> recs{{1, Vector::Ones(2), std::string("a"), std::nullopt},
                                   {2, Vector::Ones(2), std::nullopt, std::string("some text")},
                                   {3, Vector::Ones(2), std::string(""), std::nullopt}};
  write_stream(recs, dir / "m.gsg");
  GsgReader r(dir / "m.gsg");
  const auto back = read_all(r);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].source_tag, "a");
  EXPECT_FALSE(back[0].text);
  EXPECT_FALSE(back[1].source_tag);
  EXPECT_EQ(back[1].text, "some text");
  EXPECT_FALSE(back[2].source_tag);  // zero length is read as absent
}

TEST(GsgStream, HeaderLayoutIsLittleEndian) {
  TempDir dir("gsg_layout");
  const auto recs = sample_records(2, 3, 3, false);
  write_stream(recs, dir / "h.gsg");
  const auto bytes = testing::slurp(dir / "h.gsg");
  ASSERT_EQ(bytes.size(), kStreamHeaderBytes + 2 * (8 + 3 * 4));
  EXPECT_EQ(bytes.substr(0, 4), "GSGR");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 3);
  EXPECT_EQ(static_cast<unsigned char>(bytes[10]), 2);
  std::uint64_t id = 0;
  for (int b = 7; b >= 0; --b) id = (id << 8) | static_cast<unsigned char>(bytes[kStreamHeaderBytes + b]);
  EXPECT_EQ(id, recs[0].id);
  float first = 0;
  std::memcpy(&first, bytes.data() + kStreamHeaderBytes + 8, 4);
  EXPECT_EQ(static_cast<double>(first), recs[0].vector[0]);
}

TEST(GsgStream, EmptyStreamYieldsNothing) {
  TempDir dir("gsg_empty");
  write_stream(std::vector<GradientRecord>{}, dir / "e.gsg");
  GsgReader reader(dir / "e.gsg");
  EXPECT_EQ(reader.header().count, 0u);
  EXPECT_FALSE(reader.next().has_value());
  EXPECT_TRUE(batch_iter(reader, 4).empty());
}

TEST(GsgStream, TruncatedFileNamesByteOffset) {
  TempDir dir("gsg_trunc");
  const auto recs = sample_records(10, 4, 4, false);
  write_stream(recs, dir / "t.gsg");
  const auto full = testing::slurp(dir / "t.gsg");
  const std::size_t record_bytes = 8 + 4 * 4;
  {
    std::ofstream out(dir / "t.gsg", std::ios::binary | std::ios::trunc);
    out.write(full.data(), static_cast<std::streamsize>(full.size() - record_bytes));
  }
  GsgReader reader(dir / "t.gsg");
  EXPECT_EQ(reader.header().count, 10u);
  for (int i = 0; i < 9; ++i) ASSERT_TRUE(reader.next().has_value());
  try {
    reader.next();
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("byte offset"), std::string::npos) << msg;
    EXPECT_NE(msg.find(std::to_string(kStreamHeaderBytes + 9 * record_bytes)), std::string::npos) << msg;
  }
}

TEST(GsgStream, BadMagicAndVersionAreFormatErrors) {
  TempDir dir("gsg_bad");
  write_stream(sample_records(1, 2, 5, false), dir / "ok.gsg");
  auto bytes = testing::slurp(dir / "ok.gsg");
  auto write = [&](const std::string& name, const std::string& b) {
    std::ofstream(dir / name, std::ios::binary) << b;
    return dir / name;
  };
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(GsgReader{write("m.gsg", magic)}, FormatError);
  std::string version = bytes;
  version[4] = 2;
  EXPECT_THROW(GsgReader{write("v.gsg", version)}, FormatError);
  EXPECT_THROW(GsgReader{write("short.gsg", bytes.substr(0, 10))}, FormatError);
  EXPECT_THROW(GsgReader{dir / "missing.gsg"}, IoError);
}

TEST(GsgStream, WriterRejectsMixedDimsAndDuplicates) {
  TempDir dir("gsg_reject");
  auto recs = sample_records(2, 3, 6, false);
  recs[1].id = recs[0].id;
  EXPECT_THROW(write_stream(recs, dir / "d.gsg"), ValidationError);
  recs = sample_records(2, 3, 6, false);
  recs[1].vector = Vector::Ones(4);
  EXPECT_THROW(write_stream(recs, dir / "x.gsg"), ValidationError);
  recs = sample_records(1, 3, 6, false);
  recs[0].vector[1] = std::nan("");
  EXPECT_THROW(write_stream(recs, dir / "n.gsg"), ValidationError);
}

TEST(JsonlStream, RoundTripAndExtensionDispatch) {
  TempDir dir("jsonl_rt");
  const auto recs = sample_records(6, 5, 7, true);
  write_stream(recs, dir / "r.jsonl");
  EXPECT_TRUE(is_jsonl_path(dir / "r.jsonl"));
  EXPECT_FALSE(is_jsonl_path(dir / "r.gsg"));
  auto src = open_stream(dir / "r.jsonl");
  EXPECT_EQ(src->header().dim, 5u);
  EXPECT_EQ(src->header().count, 6u);
  EXPECT_EQ(read_all(*src), recs);
}

TEST(JsonlStream, HandWrittenLinesParse) {
  TempDir dir("jsonl_hand");
  std::ofstream(dir / "h.jsonl") << "{\"id\": 4, \"vector\": [1, 2]}\n"
                                    "\n"
                                    "{\"id\": 5, \"vector\": [0.5, -1], \"source_tag\": \"code\", \"text\": \"def\"}\n";
  auto src = open_stream(dir / "h.jsonl");
  const auto all = read_all(*src);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[1].source_tag.value(), "code");
  EXPECT_EQ(all[1].vector[1], -1.0);
}

TEST(JsonlStream, RejectsUnknownFieldsAndBadDims) {
  TempDir dir("jsonl_bad");
  std::ofstream(dir / "u.jsonl") << "{\"id\": 1, \"vector\": [1], \"extra\": 3}\n";
  EXPECT_THROW(read_all(*open_stream(dir / "u.jsonl")), FormatError);
  std::ofstream(dir / "d.jsonl") << "{\"id\": 1, \"vector\": [1, 2]}\n{\"id\": 2, \"vector\": [1]}\n";
  EXPECT_THROW(read_all(*open_stream(dir / "d.jsonl")), FormatError);
  std::ofstream(dir / "dup.jsonl") << "{\"id\": 1, \"vector\": [1]}\n{\"id\": 1, \"vector\": [2]}\n";
  EXPECT_THROW(read_all(*open_stream(dir / "dup.jsonl")), FormatError);
}

TEST(BatchIter, SizesFollowStreamOrder) {
  MemorySource ten(sample_records(10, 2, 8, false));
  const auto batches = batch_iter(ten, 4);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 4u);
  EXPECT_EQ(batches[1].size(), 4u);
  EXPECT_EQ(batches[2].size(), 2u);
  EXPECT_EQ(batches[1].ids().front(), ten.records()[4].id);
  EXPECT_EQ(batches[2].ids().back(), ten.records()[9].id);

  MemorySource four(sample_records(4, 2, 9, false));
  const auto one = batch_iter(four, 8);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].size(), 4u);

  MemorySource none(std::vector<GradientRecord>{});
  EXPECT_TRUE(batch_iter(none, 3).empty());
  EXPECT_THROW(batch_iter(four, 0), ValidationError);
}

TEST(StreamProperty, RandomRoundTrips) {
  TempDir dir("gsg_prop");
  std::mt19937_64 rng(99);
  for (int t = 0; t < 20; ++t) {
    const auto n = rng() % 40;
    const auto d = 1 + static_cast<Eigen::Index>(rng() % 50);
    const auto recs = sample_records(n, d, rng(), t % 2 == 0);
    const auto path = dir / ("s" + std::to_string(t) + (t % 3 == 0 ? ".jsonl" : ".gsg"));
    write_stream(recs, path);
    auto src = open_stream(path);
    EXPECT_EQ(read_all(*src), recs);
  }
}

}  // namespace
}  // namespace gspace
