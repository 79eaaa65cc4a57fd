#include "tnvp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tnvp/params.hpp"

namespace tnvp {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

std::uint32_t narrow(Index v, const char* what) {
  if (v < 0 || v > static_cast<Index>(UINT32_MAX)) throw ValidationError(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw IoError(IoError::Kind::Truncated, "checkpoint truncated at byte " + std::to_string(pos_));
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

MaskStyle mask_from(std::uint32_t v) {
  if (v > 1) throw IoError(IoError::Kind::Malformed, "checkpoint: unknown mask style " + std::to_string(v));
  return v == 0 ? MaskStyle::Half : MaskStyle::EvenOdd;
}

TransitionStructure structure_from(std::uint32_t v) {
  if (v > 1) throw IoError(IoError::Kind::Malformed, "checkpoint: unknown transition structure " + std::to_string(v));
  return v == 0 ? TransitionStructure::Full : TransitionStructure::Diagonal;
}

// Lower bound on the payload a header implies (8 bytes per parameter), so a
// corrupted header is reported before any allocation.
long double min_payload_bytes(const ModelSpec& spec) {
  const long double d = spec.dim, h = spec.width, r = spec.blocks, n = spec.n_units;
  const long double per_net = h * d + h + r * (2 * h * h + 2 * h) + d * h + d;
  return 8.0L * (4 * n * per_net + d * d + d);
}

}  // namespace

std::string encode_checkpoint(const TNVPModel& model, const ModelSpec& spec, std::uint64_t seed) {
  const ParameterStore params = gather(model);
  if (!params.aligned_with(gather(make_model(spec, seed))))
    throw ValidationError("checkpoint: model architecture does not match its spec");
  if (model.transition().structure() != spec.transition)
    throw ValidationError("checkpoint: transition structure does not match its spec");

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, narrow(spec.dim, "D"));
  put_u32(out, narrow(spec.n_units, "n_units"));
  put_u32(out, narrow(spec.blocks, "blocks"));
  put_u32(out, narrow(spec.width, "width"));
  put_u32(out, spec.mask_style == MaskStyle::Half ? 0u : 1u);
  put_u32(out, spec.transition == TransitionStructure::Full ? 0u : 1u);
  put_u32(out, static_cast<std::uint32_t>(seed & 0xFFFFFFFFu));
  put_u32(out, static_cast<std::uint32_t>(seed >> 32));
  put_u32(out, narrow(static_cast<Index>(params.size()), "tensor count"));
  for (const auto& slot : params.slots()) {
    put_u32(out, static_cast<std::uint32_t>(slot.value.rank()));
    for (Index e : slot.value.shape()) put_u32(out, narrow(e, "extent"));
    for (double v : slot.value.data()) put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (bytes.size() >= sizeof(kCheckpointMagic) &&
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw IoError(IoError::Kind::BadMagic, "checkpoint: bad magic");
  in.raw(sizeof(kCheckpointMagic));
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion)
    throw IoError(IoError::Kind::UnsupportedVersion, "checkpoint: unsupported version " + std::to_string(version));

  ModelSpec spec;
  spec.dim = in.u32();
  spec.n_units = in.u32();
  spec.blocks = in.u32();
  spec.width = in.u32();
  spec.mask_style = mask_from(in.u32());
  spec.transition = structure_from(in.u32());
  const std::uint64_t seed_lo = in.u32();
  const std::uint64_t seed_hi = in.u32();
  const std::uint64_t seed = seed_lo | (seed_hi << 32);
  const std::uint32_t count = in.u32();
  if (min_payload_bytes(spec) > static_cast<long double>(in.remaining()))
    throw IoError(IoError::Kind::Truncated, "checkpoint: file too short for the declared architecture");

  TNVPModel model = [&] {
    try {
      return make_model(spec, seed);
    } catch (const ValidationError& e) {
      throw IoError(IoError::Kind::Malformed, std::string("checkpoint: invalid hyperparameters: ") + e.what());
    }
  }();
  ParameterStore params = gather(model);
  if (count != params.size())
    throw IoError(IoError::Kind::Malformed, "checkpoint: expected " + std::to_string(params.size()) +
                                                " tensors, header says " + std::to_string(count));
  for (const auto& slot : params.slots()) {
    const std::uint32_t rank = in.u32();
    Tensor::Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(in.u32());
    if (shape != slot.value.shape())
      throw IoError(IoError::Kind::Malformed, "checkpoint: tensor '" + slot.name + "' has shape " +
                                                  shape_string(shape) + ", expected " +
                                                  shape_string(slot.value.shape()));
    std::vector<double> data(static_cast<std::size_t>(slot.value.size()));
    for (double& v : data) v = in.f64();
    params.assign(slot.name, Tensor(shape, std::move(data)));
  }
  if (!in.done()) throw IoError(IoError::Kind::Malformed, "checkpoint: trailing bytes after the last tensor");
  scatter(params, model);
  return {spec, seed, std::move(model)};
}

void save_checkpoint(const TNVPModel& model, const ModelSpec& spec, std::uint64_t seed,
                     const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(model, spec, seed);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoError::Kind::Open, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoError::Kind::Open, "failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Kind::Open, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace tnvp
