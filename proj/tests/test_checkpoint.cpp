#include <bit>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tnvp/checkpoint.hpp"
#include "tnvp/error.hpp"
#include "tnvp/params.hpp"

namespace tnvp {
namespace {

const ModelSpec kSpec{3, 4, 2, 8, MaskStyle::EvenOdd, TransitionStructure::Full};

TNVPModel trained_like_model(std::uint64_t seed) {
  TNVPModel m = make_model(kSpec, seed);
  std::mt19937_64 rng(seed + 7);
  randomize_parameters(m, rng, 0.4);
  return m;
}

IoError::Kind decode_kind(const std::string& bytes) {
  try {
    decode_checkpoint(bytes);
  } catch (const IoError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected IoError";
  return IoError::Kind::Open;
}

void set_u32(std::string& bytes, std::size_t offset, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[offset + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

TEST(Checkpoint, HeaderLayout) {
  const std::string bytes = encode_checkpoint(trained_like_model(1), kSpec, 0x0000000500000009ULL);
  ASSERT_GE(bytes.size(), 48u);
  EXPECT_EQ(bytes.substr(0, 8), "TNVPCKPT");
  auto u32_at = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    return v;
  };
  EXPECT_EQ(u32_at(8), 1u);    // version
  EXPECT_EQ(u32_at(12), 3u);   // D
  EXPECT_EQ(u32_at(16), 4u);   // n_units
  EXPECT_EQ(u32_at(20), 2u);   // blocks
  EXPECT_EQ(u32_at(24), 8u);   // width
  EXPECT_EQ(u32_at(28), 1u);   // even-odd
  EXPECT_EQ(u32_at(32), 0u);   // full W
  EXPECT_EQ(u32_at(36), 9u);   // seed low
  EXPECT_EQ(u32_at(40), 5u);   // seed high
  EXPECT_EQ(u32_at(44), static_cast<std::uint32_t>(gather(make_model(kSpec, 0)).size()));
}

TEST(Checkpoint, RoundTripIsBitExact) {
  testing::TempDir dir;
  const TNVPModel m = trained_like_model(2);
  save_checkpoint(m, kSpec, 2, dir / "m.tnvp");
  const Checkpoint loaded = load_checkpoint(dir / "m.tnvp");
  EXPECT_EQ(loaded.spec, kSpec);
  EXPECT_EQ(loaded.seed, 2u);
  EXPECT_EQ(checksum(gather(loaded.model)), checksum(gather(m)));
  EXPECT_EQ(gather(loaded.model), gather(m));

  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const Matrix x_t = testing::normal_matrix(3, 1, rng), x_prev = testing::normal_matrix(3, 1, rng);
    EXPECT_EQ(std::bit_cast<std::uint64_t>(conditional_loglik(loaded.model, x_t.col(0), x_prev.col(0))),
              std::bit_cast<std::uint64_t>(conditional_loglik(m, x_t.col(0), x_prev.col(0))));
  }
  EXPECT_EQ(encode_checkpoint(loaded.model, loaded.spec, loaded.seed), testing::read_file(dir / "m.tnvp"));
}

TEST(Checkpoint, DistinctErrors) {
  const std::string good = encode_checkpoint(trained_like_model(3), kSpec, 3);

  std::string magic = good;
  magic[0] = 'X';
  EXPECT_EQ(decode_kind(magic), IoError::Kind::BadMagic);

  std::string version = good;
  set_u32(version, 8, kCheckpointVersion + 1);
  EXPECT_EQ(decode_kind(version), IoError::Kind::UnsupportedVersion);

  EXPECT_EQ(decode_kind(good.substr(0, good.size() - 3)), IoError::Kind::Truncated);
  EXPECT_EQ(decode_kind(good.substr(0, 20)), IoError::Kind::Truncated);
  EXPECT_EQ(decode_kind(good.substr(0, 4)), IoError::Kind::Truncated);
  EXPECT_EQ(decode_kind(good + "x"), IoError::Kind::Malformed);

  std::string huge = good;
  set_u32(huge, 24, 1u << 30);  // width
  EXPECT_EQ(decode_kind(huge), IoError::Kind::Truncated);

  std::string mask = good;
  set_u32(mask, 28, 7);
  EXPECT_EQ(decode_kind(mask), IoError::Kind::Malformed);
}

TEST(Checkpoint, RejectsModelThatDoesNotMatchSpec) {
  EXPECT_THROW(encode_checkpoint(make_identity_model(3), kSpec, 0), ValidationError);
  ModelSpec other = kSpec;
  other.width = 16;
  EXPECT_THROW(encode_checkpoint(trained_like_model(1), other, 0), ValidationError);
}

TEST(Checkpoint, MissingFileIsOpenError) {
  try {
    load_checkpoint("/nonexistent/tnvp/model.tnvp");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind(), IoError::Kind::Open);
  }
}

}  // namespace
}  // namespace tnvp
