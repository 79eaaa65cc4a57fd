#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tnvp/tensor.hpp"

namespace tnvp {

/// Per-dimension affine standardization, x -> (x - mean) / scale.
struct Standardization {
  Vector mean;
  Vector scale;
};

/// Pairs (x_prev, x_t) of the same trajectory at consecutive stages. Pair i
/// is column i of prev() and next(); stage_index(i) is the stage of x_t.
class StageSequenceDataset {
 public:
  StageSequenceDataset(Index dim, Index stage_count, Matrix prev, Matrix next, std::vector<Index> stage_index,
                       std::string provenance);

  Index dim() const noexcept { return dim_; }
  Index stage_count() const noexcept { return stage_count_; }
  Index size() const noexcept { return prev_.cols(); }
  const Matrix& prev() const noexcept { return prev_; }
  const Matrix& next() const noexcept { return next_; }
  const std::vector<Index>& stage_index() const noexcept { return stage_index_; }
  const std::string& provenance() const noexcept { return provenance_; }
  const std::optional<Standardization>& standardization() const noexcept { return standardization_; }

  /// Subset of pairs in the given order.
  StageSequenceDataset select(const std::vector<Index>& pairs) const;

  /// Copy with x_prev re-paired to a seeded permutation of the other pairs' x_prev.
  StageSequenceDataset shuffled_pairs(std::uint64_t seed) const;

  /// Copy standardized with statistics pooled over every x_prev and x_t.
  StageSequenceDataset standardized() const;

  friend bool operator==(const StageSequenceDataset& a, const StageSequenceDataset& b);

 private:
  Index dim_;
  Index stage_count_;
  Matrix prev_;
  Matrix next_;
  std::vector<Index> stage_index_;
  std::string provenance_;
  std::optional<Standardization> standardization_;
};

enum class DriftKind { GaussianDrift, RotatingMoons, MixtureMorph };

std::string to_string(DriftKind kind);
DriftKind parse_drift_kind(const std::string& name);

struct DriftOptions {
  /// Per-stage mean shift for gaussian-drift; defaults to e_0 when empty.
  Vector shift;
  /// Std of the per-stage innovation of each trajectory.
  double step_noise = 0.3;
};

/// `n_per_stage` trajectories, each observed at `stages` consecutive stages;
/// yields n_per_stage * (stages - 1) pairs, grouped by stage.
StageSequenceDataset generate_drift_dataset(DriftKind kind, Index dim, Index stages, Index n_per_stage,
                                            std::uint64_t seed, const DriftOptions& options = {});

/// Two-stage pairs with x_prev ~ N(0, I) and x_t = A x_prev + noise, noise ~ N(0, noise_std^2 I).
StageSequenceDataset generate_linear_transition_dataset(const Matrix& a, Index n, std::uint64_t seed,
                                                        double noise_std = 1.0);

/// Unpaired two-moons sample, D = 2, as a 2 x n matrix.
Matrix generate_two_moons(Index n, std::uint64_t seed, double noise = 0.1);

/// CSV: header "stage_index,x_prev_0..x_prev_{D-1},x_t_0..x_t_{D-1}", one pair per row, 17 significant digits.
void save_dataset(const StageSequenceDataset& data, const std::filesystem::path& path);
StageSequenceDataset load_dataset(const std::filesystem::path& path);

std::string dataset_to_csv(const StageSequenceDataset& data);
StageSequenceDataset dataset_from_csv(const std::string& text, const std::string& provenance);

}  // namespace tnvp
