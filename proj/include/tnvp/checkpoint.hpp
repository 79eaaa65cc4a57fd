#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "tnvp/temporal_model.hpp"

namespace tnvp {

inline constexpr char kCheckpointMagic[8] = {'T', 'N', 'V', 'P', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// A model built by make_model together with the values needed to rebuild it.
struct Checkpoint {
  ModelSpec spec;
  std::uint64_t seed = 0;
  TNVPModel model;
};

/// Layout (all integers little-endian u32, floats little-endian IEEE-754 binary64):
///   "TNVPCKPT", version,
///   D, n_units, blocks, width, mask_style, transition, seed_lo, seed_hi, tensor_count,
///   then per tensor in parameter order: rank, extents[rank], data.
/// Throws ValidationError when the model's parameter layout does not match `spec`.
std::string encode_checkpoint(const TNVPModel& model, const ModelSpec& spec, std::uint64_t seed);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const TNVPModel& model, const ModelSpec& spec, std::uint64_t seed,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tnvp
