#include "tnvp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace tnvp {
namespace {

Vector normal_vector(Index dim, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = normal(rng);
  return v;
}

Matrix rotation(double angle) {
  Matrix r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

// One point of the two-moons shape for parameter u in [0, pi] and moon label.
Vector moon_point(double u, int label) {
  Vector p(2);
  if (label == 0) {
    p << std::cos(u), std::sin(u);
  } else {
    p << 1.0 - std::cos(u), 0.5 - std::sin(u);
  }
  return p;
}

// Builds trajectories stage by stage; `advance(subject, stage, x_prev)` returns the next state.
template <typename Init, typename Advance>
StageSequenceDataset build_pairs(Index dim, Index stages, Index n, const std::string& provenance, Init init,
                                 Advance advance) {
  std::vector<Vector> state(static_cast<std::size_t>(n));
  for (Index s = 0; s < n; ++s) state[static_cast<std::size_t>(s)] = init(s);
  const Index pairs = n * (stages - 1);
  Matrix prev(dim, pairs), next(dim, pairs);
  std::vector<Index> stage_index;
  stage_index.reserve(static_cast<std::size_t>(pairs));
  Index col = 0;
  for (Index stage = 1; stage < stages; ++stage) {
    for (Index s = 0; s < n; ++s) {
      Vector& x = state[static_cast<std::size_t>(s)];
      Vector x_next = advance(s, stage, x);
      prev.col(col) = x;
      next.col(col) = x_next;
      stage_index.push_back(stage);
      x = std::move(x_next);
      ++col;
    }
  }
  return {dim, stages, std::move(prev), std::move(next), std::move(stage_index), provenance};
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

StageSequenceDataset::StageSequenceDataset(Index dim, Index stage_count, Matrix prev, Matrix next,
                                           std::vector<Index> stage_index, std::string provenance)
    : dim_(dim),
      stage_count_(stage_count),
      prev_(std::move(prev)),
      next_(std::move(next)),
      stage_index_(std::move(stage_index)),
      provenance_(std::move(provenance)) {
  if (prev_.rows() != dim_ || next_.rows() != dim_ || prev_.cols() != next_.cols())
    throw ShapeError("dataset: pair matrices must both be D x N");
  if (static_cast<Index>(stage_index_.size()) != prev_.cols())
    throw ShapeError("dataset: one stage index per pair is required");
  for (Index s : stage_index_)
    if (s < 1 || s > stage_count_ - 1)
      throw ValidationError("dataset: stage index " + std::to_string(s) + " outside [1, " +
                            std::to_string(stage_count_ - 1) + "]");
  require_finite(prev_, "dataset x_prev");
  require_finite(next_, "dataset x_t");
}

StageSequenceDataset StageSequenceDataset::select(const std::vector<Index>& pairs) const {
  Matrix p(dim_, static_cast<Index>(pairs.size())), n(dim_, static_cast<Index>(pairs.size()));
  std::vector<Index> stages;
  stages.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    p.col(static_cast<Index>(i)) = prev_.col(pairs[i]);
    n.col(static_cast<Index>(i)) = next_.col(pairs[i]);
    stages.push_back(stage_index_[static_cast<std::size_t>(pairs[i])]);
  }
  StageSequenceDataset out(dim_, stage_count_, std::move(p), std::move(n), std::move(stages), provenance_);
  out.standardization_ = standardization_;
  return out;
}

StageSequenceDataset StageSequenceDataset::shuffled_pairs(std::uint64_t seed) const {
  std::vector<Index> perm(static_cast<std::size_t>(size()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix p(dim_, size());
  for (Index i = 0; i < size(); ++i) p.col(i) = prev_.col(perm[static_cast<std::size_t>(i)]);
  StageSequenceDataset out(dim_, stage_count_, std::move(p), next_, stage_index_, provenance_ + " (shuffled pairs)");
  out.standardization_ = standardization_;
  return out;
}

StageSequenceDataset StageSequenceDataset::standardized() const {
  if (size() == 0) throw ValidationError("cannot standardize an empty dataset");
  Matrix all(dim_, 2 * size());
  all << prev_, next_;
  const Vector mean = all.rowwise().mean();
  const Matrix centered = all.colwise() - mean;
  Vector scale = (centered.rowwise().squaredNorm() / static_cast<double>(all.cols())).cwiseSqrt();
  for (Index i = 0; i < scale.size(); ++i)
    if (scale[i] == 0.0) scale[i] = 1.0;
  const auto apply = [&](const Matrix& m) -> Matrix {
    return scale.cwiseInverse().asDiagonal() * (m.colwise() - mean);
  };
  StageSequenceDataset out(dim_, stage_count_, apply(prev_), apply(next_), stage_index_, provenance_);
  out.standardization_ = Standardization{mean, scale};
  return out;
}

bool operator==(const StageSequenceDataset& a, const StageSequenceDataset& b) {
  return a.dim_ == b.dim_ && a.stage_count_ == b.stage_count_ && a.prev_ == b.prev_ && a.next_ == b.next_ &&
         a.stage_index_ == b.stage_index_;
}

std::string to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::GaussianDrift: return "gaussian-drift";
    case DriftKind::RotatingMoons: return "rotating-moons";
    case DriftKind::MixtureMorph: return "mixture-morph";
  }
  return "unknown";
}

DriftKind parse_drift_kind(const std::string& name) {
  if (name == "gaussian-drift") return DriftKind::GaussianDrift;
  if (name == "rotating-moons") return DriftKind::RotatingMoons;
  if (name == "mixture-morph") return DriftKind::MixtureMorph;
  throw ValidationError("unknown generator kind '" + name + "'");
}

StageSequenceDataset generate_drift_dataset(DriftKind kind, Index dim, Index stages, Index n_per_stage,
                                            std::uint64_t seed, const DriftOptions& options) {
  if (stages < 2) throw ValidationError("generator needs stages >= 2");
  if (n_per_stage < 1) throw ValidationError("generator needs n_per_stage >= 1");
  if (dim < 1) throw ValidationError("generator needs D >= 1");
  if (kind != DriftKind::GaussianDrift && dim < 2) throw ValidationError(to_string(kind) + " needs D >= 2");
  std::mt19937_64 rng(seed);
  const std::string provenance = to_string(kind) + " seed=" + std::to_string(seed);
  const double noise = options.step_noise;

  switch (kind) {
    case DriftKind::GaussianDrift: {
      Vector shift = options.shift;
      if (shift.size() == 0) shift = Vector::Unit(dim, 0);
      if (shift.size() != dim) throw ShapeError("gaussian-drift: shift length must equal D");
      return build_pairs(
          dim, stages, n_per_stage, provenance, [&](Index) { return normal_vector(dim, rng); },
          [&](Index, Index, const Vector& x) -> Vector { return x + shift + normal_vector(dim, rng, noise); });
    }
    case DriftKind::RotatingMoons: {
      // Each trajectory keeps its position on the moons; the whole shape rotates per stage.
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::vector<Vector> base(static_cast<std::size_t>(n_per_stage));
      const double angle = std::numbers::pi / 8.0;
      auto place = [&](Index s, Index stage) {
        Vector x = Vector::Zero(dim);
        x.head(2) = rotation(angle * static_cast<double>(stage)) * base[static_cast<std::size_t>(s)].head(2);
        x.tail(dim - 2) = base[static_cast<std::size_t>(s)].tail(dim - 2);
        return x;
      };
      return build_pairs(
          dim, stages, n_per_stage, provenance,
          [&](Index s) {
            Vector b = Vector::Zero(dim);
            const int label = unit(rng) < 0.5 ? 0 : 1;
            b.head(2) = moon_point(std::numbers::pi * unit(rng), label) - Vector::Constant(2, 0.5);
            b.tail(dim - 2) = normal_vector(dim - 2, rng, 0.5);
            base[static_cast<std::size_t>(s)] = b;
            return Vector(place(s, 0) + normal_vector(dim, rng, 0.1 * noise));
          },
          [&](Index s, Index stage, const Vector&) -> Vector {
            return place(s, stage) + normal_vector(dim, rng, 0.1 * noise);
          });
    }
    case DriftKind::MixtureMorph: {
      // Two components whose means move in opposite directions; each trajectory
      // keeps its component and a persistent offset.
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::vector<int> component(static_cast<std::size_t>(n_per_stage));
      std::vector<Vector> offset(static_cast<std::size_t>(n_per_stage));
      Vector mu0 = Vector::Zero(dim), drift = Vector::Zero(dim);
      mu0[0] = 2.0;
      drift[1] = 0.75;
      auto mean = [&](int k, Index stage) -> Vector {
        const double sign = k == 0 ? 1.0 : -1.0;
        return sign * (mu0 + drift * static_cast<double>(stage));
      };
      return build_pairs(
          dim, stages, n_per_stage, provenance,
          [&](Index s) {
            component[static_cast<std::size_t>(s)] = unit(rng) < 0.5 ? 0 : 1;
            offset[static_cast<std::size_t>(s)] = normal_vector(dim, rng, 0.6);
            return Vector(mean(component[static_cast<std::size_t>(s)], 0) + offset[static_cast<std::size_t>(s)] +
                          normal_vector(dim, rng, noise));
          },
          [&](Index s, Index stage, const Vector&) -> Vector {
            return mean(component[static_cast<std::size_t>(s)], stage) + offset[static_cast<std::size_t>(s)] +
                   normal_vector(dim, rng, noise);
          });
    }
  }
  throw ValidationError("unknown generator kind");
}

StageSequenceDataset generate_linear_transition_dataset(const Matrix& a, Index n, std::uint64_t seed,
                                                        double noise_std) {
  if (a.rows() != a.cols()) throw ShapeError("linear transition: A must be square");
  if (n < 1) throw ValidationError("linear transition: n must be >= 1");
  const Index dim = a.rows();
  std::mt19937_64 rng(seed);
  Matrix prev(dim, n), next(dim, n);
  for (Index i = 0; i < n; ++i) {
    prev.col(i) = normal_vector(dim, rng);
    next.col(i) = a * prev.col(i) + normal_vector(dim, rng, noise_std);
  }
  return {dim, 2, std::move(prev), std::move(next), std::vector<Index>(static_cast<std::size_t>(n), 1),
          "linear-transition seed=" + std::to_string(seed)};
}

Matrix generate_two_moons(Index n, std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix out(2, n);
  for (Index i = 0; i < n; ++i) {
    const int label = unit(rng) < 0.5 ? 0 : 1;
    out.col(i) = moon_point(std::numbers::pi * unit(rng), label) + normal_vector(2, rng, noise);
  }
  return out;
}

std::string dataset_to_csv(const StageSequenceDataset& data) {
  std::string out = "stage_index";
  for (Index j = 0; j < data.dim(); ++j) out += ",x_prev_" + std::to_string(j);
  for (Index j = 0; j < data.dim(); ++j) out += ",x_t_" + std::to_string(j);
  out += '\n';
  for (Index i = 0; i < data.size(); ++i) {
    out += std::to_string(data.stage_index()[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < data.dim(); ++j) out += ',' + format_double(data.prev()(j, i));
    for (Index j = 0; j < data.dim(); ++j) out += ',' + format_double(data.next()(j, i));
    out += '\n';
  }
  return out;
}

StageSequenceDataset dataset_from_csv(const std::string& text, const std::string& provenance) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  std::string header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = line;
      columns = split_commas(header).size();
      break;
    }
  }
  if (columns == 0) throw IoError(IoError::Kind::NoPairs, provenance + ": no pairs (empty file)");
  if (columns < 3 || (columns - 1) % 2 != 0)
    throw IoError(IoError::Kind::Malformed,
                  provenance + ": line " + std::to_string(line_no) + ": header must have 1 + 2D columns");
  const Index dim = static_cast<Index>((columns - 1) / 2);
  {
    const auto names = split_commas(header);
    for (std::size_t c = 0; c < columns; ++c) {
      const std::string expected = c == 0 ? "stage_index"
                                   : static_cast<Index>(c) <= dim
                                       ? "x_prev_" + std::to_string(c - 1)
                                       : "x_t_" + std::to_string(c - 1 - static_cast<std::size_t>(dim));
      if (trim(names[c]) != expected)
        throw IoError(IoError::Kind::Malformed, provenance + ": line " + std::to_string(line_no) +
                                                    ": header column " + std::to_string(c) + " should be '" +
                                                    expected + "'");
    }
  }

  std::vector<std::vector<double>> rows;
  std::vector<Index> stages;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != columns)
      throw IoError(IoError::Kind::Malformed, provenance + ": line " + std::to_string(line_no) + ": expected " +
                                                  std::to_string(columns) + " columns, found " +
                                                  std::to_string(fields.size()));
    auto bad = [&](std::string_view field) {
      return IoError(IoError::Kind::Malformed,
                     provenance + ": line " + std::to_string(line_no) + ": cannot parse '" + std::string(field) + "'");
    };
    Index stage = 0;
    {
      const auto f = trim(fields[0]);
      auto res = std::from_chars(f.data(), f.data() + f.size(), stage);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) throw bad(f);
    }
    std::vector<double> values(columns - 1);
    for (std::size_t c = 1; c < columns; ++c) {
      const auto f = trim(fields[c]);
      auto res = std::from_chars(f.data(), f.data() + f.size(), values[c - 1]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(values[c - 1])) throw bad(f);
    }
    if (stage < 1)
      throw IoError(IoError::Kind::Malformed,
                    provenance + ": line " + std::to_string(line_no) + ": stage_index must be >= 1");
    stages.push_back(stage);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw IoError(IoError::Kind::NoPairs, provenance + ": no pairs");

  const Index n = static_cast<Index>(rows.size());
  Matrix prev(dim, n), next(dim, n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (Index j = 0; j < dim; ++j) {
      prev(j, i) = r[static_cast<std::size_t>(j)];
      next(j, i) = r[static_cast<std::size_t>(dim + j)];
    }
  }
  const Index stage_count = *std::max_element(stages.begin(), stages.end()) + 1;
  return {dim, stage_count, std::move(prev), std::move(next), std::move(stages), provenance};
}

void save_dataset(const StageSequenceDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoError::Kind::Open, "cannot open '" + path.string() + "' for writing");
  out << dataset_to_csv(data);
  if (!out) throw IoError(IoError::Kind::Open, "failed writing '" + path.string() + "'");
}

StageSequenceDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Kind::Open, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return dataset_from_csv(buf.str(), path.string());
}

}  // namespace tnvp
