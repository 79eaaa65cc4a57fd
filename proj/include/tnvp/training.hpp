#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tnvp/dataset.hpp"
#include "tnvp/temporal_model.hpp"

namespace tnvp {

enum class Phases { PretrainOnly, JointOnly, Both };

struct TrainConfig {
  Index batch_size = 64;
  double learning_rate = 1e-3;
  Index pretrain_steps = 200;  // per flow
  Index joint_steps = 500;
  std::uint64_t seed = 0;
  Phases phases = Phases::Both;
  std::optional<double> clip = 5.0;  // global gradient-norm bound
  bool freeze_flows = false;         // keep F1/F2 fixed during the joint phase

  /// Throws ValidationError for batch_size < 1, learning_rate < 0, negative
  /// step counts or a non-positive clip.
  void validate() const;
};

struct TrainReport {
  struct Entry {
    std::string phase;
    Index step;
    double objective;
  };
  struct PhaseTiming {
    std::string phase;
    Index steps;
    double seconds;
  };

  std::vector<Entry> trace;
  std::vector<PhaseTiming> timings;
  std::uint64_t checksum = 0;  // of the final parameters
  std::uint64_t seed = 0;

  std::vector<double> objectives() const;
  void append(const TrainReport& other);

  /// Tab-separated "phase step objective" lines after a header line.
  void write_trace(std::ostream& out) const;
};

/// p <- p - lr * g, after rescaling g to global norm `clip` when it exceeds it.
void sgd_step(ParameterStore& params, const GradientRecord& grads, double learning_rate,
              std::optional<double> clip);

/// Draws full mini-batches without replacement, reshuffling at every epoch.
/// An epoch remainder smaller than a batch is skipped.
class BatchSampler {
 public:
  BatchSampler(Index count, Index batch_size, std::uint64_t seed);
  std::vector<Index> next();

 private:
  void reshuffle();

  std::vector<Index> order_;
  Index batch_size_;
  Index cursor_;
  std::mt19937_64 rng_;
};

/// Maximum likelihood for a standalone flow under N(0, I); `data` is D x N.
/// Runs cfg.pretrain_steps steps.
TrainReport pretrain_stack(FlowStack& stack, const Matrix& data, const TrainConfig& cfg,
                           const std::string& phase = "pretrain");

/// Mean negative conditional log-likelihood of a flow's standalone density, log N(F(x)) + log|det|.
double stack_nll(const FlowStack& stack, const Matrix& data);

/// Joint phase: minimizes the mean -log p(x_t | x_prev) over theta1, theta2, theta3.
/// Runs cfg.joint_steps steps.
TrainReport train_temporal(TNVPModel& model, const StageSequenceDataset& data, const TrainConfig& cfg);

/// Two-step schedule per cfg.phases: pretrain F1 on x_prev and F2 on x_t, then the joint phase.
TrainReport train(TNVPModel& model, const StageSequenceDataset& data, const TrainConfig& cfg);

/// Mean -log p(x_t | x_prev) over every pair.
double mean_conditional_nll(const TNVPModel& model, const StageSequenceDataset& data);

}  // namespace tnvp
