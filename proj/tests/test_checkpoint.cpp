#include <gtest/gtest.h>

#include <cstring>

#include "spheretopic/checkpoint.hpp"
#include "spheretopic/errors.hpp"
#include "support.hpp"

namespace st = spheretopic;
namespace ts = testing_support;

namespace {

st::Checkpoint sample(std::uint64_t seed, bool content_only = false) {
  st::Rng rng(seed);
  st::Checkpoint ck;
  ck.params.model = st::make_latent_model({6, 3, 4, {5, 7}, {7}}, 2.5, rng);
  ck.params.attention = st::init_attention(6, 4, rng);
  ck.params.attention.content_words_only = content_only;
  ck.seed = seed * 1000003;
  return ck;
}

template <typename T>
T read_le(const std::string& bytes, std::size_t at) {
  T v{};
  std::memcpy(&v, bytes.data() + at, sizeof v);
  return v;
}

std::uint64_t offset_of_failure(const ts::fs::path& path) {
  try {
    st::load_checkpoint(path);
  } catch (const st::FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "no FormatError for " << path;
  return 0;
}

void expect_same(const st::Checkpoint& a, const st::Checkpoint& b) {
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_EQ(a.params.model.kappa, b.params.model.kappa);
  EXPECT_EQ(a.params.model.topics, b.params.model.topics);
  EXPECT_EQ(a.params.attention.weight, b.params.attention.weight);
  EXPECT_EQ(a.params.attention.bias, b.params.attention.bias);
  EXPECT_EQ(a.params.attention.query, b.params.attention.query);
  EXPECT_EQ(a.params.attention.content_words_only, b.params.attention.content_words_only);
  for (const auto* pair : {&a.params.model.encoder, &a.params.model.decoder}) {
    const st::Mlp& other = pair == &a.params.model.encoder ? b.params.model.encoder : b.params.model.decoder;
    ASSERT_EQ(pair->layers().size(), other.layers().size());
    for (std::size_t l = 0; l < other.layers().size(); ++l) {
      EXPECT_EQ(pair->layers()[l].weight, other.layers()[l].weight);
      EXPECT_EQ(pair->layers()[l].bias, other.layers()[l].bias);
    }
  }
}

}  // namespace

TEST(Checkpoint, HeaderLayout) {
  const auto ck = sample(2);
  const std::string bytes = st::serialize_checkpoint(ck);
  EXPECT_EQ(bytes.substr(0, 4), "TPCK");
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 4), st::kCheckpointVersion);
  EXPECT_EQ(read_le<std::uint64_t>(bytes, 8), ck.seed);
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 16), 6u);
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 20), 3u);
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 24), 4u);
  EXPECT_EQ(read_le<double>(bytes, 28), 2.5);
  EXPECT_EQ(read_le<std::uint32_t>(bytes, 36), 4u);
  EXPECT_EQ(read_le<double>(bytes, 41), ck.params.attention.weight(0, 0));
  EXPECT_EQ(read_le<double>(bytes, 49), ck.params.attention.weight(0, 1));
  // kappa; attention weight, bias, query; encoder 6-5-7-3; decoder 3-7-6; topics 4 x 3.
  const std::size_t doubles = 1 + (24 + 4 + 4) + (30 + 5 + 35 + 7 + 21 + 3) + (21 + 7 + 42 + 6) + 12;
  // r, r', K, d_a; layer counts and per-layer dims.
  const std::size_t words = 4 + (1 + 3 * 2) + (1 + 2 * 2);
  EXPECT_EQ(bytes.size(), 4 + 4 + 8 + 8 * doubles + 4 * words + 1);
}

TEST(Checkpoint, RoundTripIsExact) {
  ts::TempDir dir;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto ck = sample(seed, seed == 2);
    st::save_checkpoint(ck, dir / "a.ckpt");
    const auto loaded = st::load_checkpoint(dir / "a.ckpt");
    expect_same(ck, loaded);
    st::save_checkpoint(loaded, dir / "b.ckpt");
    EXPECT_EQ(ts::read_file(dir / "a.ckpt"), ts::read_file(dir / "b.ckpt"));
  }
}

TEST(Checkpoint, SerializeMatchesFile) {
  ts::TempDir dir;
  const auto ck = sample(4);
  st::save_checkpoint(ck, dir / "c.ckpt");
  EXPECT_EQ(ts::read_file(dir / "c.ckpt"), st::serialize_checkpoint(ck));
}

TEST(Checkpoint, CorruptionOffsets) {
  ts::TempDir dir;
  const std::string good = st::serialize_checkpoint(sample(5));
  auto corrupt = [&](std::size_t at, const std::string& patch) {
    std::string bytes = good;
    bytes.replace(at, patch.size(), patch);
    ts::write_file(dir / "bad.ckpt", bytes);
    return offset_of_failure(dir / "bad.ckpt");
  };
  EXPECT_EQ(corrupt(0, "XPCK"), 0u);
  EXPECT_EQ(corrupt(4, ts::Bytes().u32(99).str()), 4u);
  EXPECT_EQ(corrupt(20, ts::Bytes().u32(0).str()), 16u);
  const std::size_t encoder_at = 41 + 8 * (24 + 4 + 4);
  EXPECT_EQ(corrupt(encoder_at, ts::Bytes().u32(0).str()), encoder_at);
  ts::write_file(dir / "long.ckpt", good + "x");
  EXPECT_EQ(offset_of_failure(dir / "long.ckpt"), good.size());
}

TEST(Checkpoint, EveryTruncationRejected) {
  ts::TempDir dir;
  const std::string good = st::serialize_checkpoint(sample(6));
  for (std::size_t len = 0; len < good.size(); len += (len < 64 ? 1 : 37)) {
    ts::write_file(dir / "t.ckpt", good.substr(0, len));
    EXPECT_LE(offset_of_failure(dir / "t.ckpt"), len) << len;
  }
}

TEST(Checkpoint, MissingFileIsIoError) {
  ts::TempDir dir;
  EXPECT_THROW(st::load_checkpoint(dir / "absent.ckpt"), st::IoError);
}
