#include "tnvp/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "tnvp/params.hpp"

namespace tnvp {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Matrix take_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = m.col(cols[i]);
  return out;
}

void check_objective(double value, Index step, const std::string& phase) {
  if (!std::isfinite(value))
    throw NumericalError(phase + ": objective became non-finite at step " + std::to_string(step));
}

template <typename T>
void apply_update(T& obj, const T& grad, const TrainConfig& cfg) {
  ParameterStore params = gather(obj);
  GradientRecord record{gather(grad), std::nullopt};
  sgd_step(params, record, cfg.learning_rate, cfg.clip);
  scatter(params, obj);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1, got " + std::to_string(batch_size));
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning_rate must be finite and >= 0");
  if (pretrain_steps < 0 || joint_steps < 0) throw ValidationError("step counts must be non-negative");
  if (clip && !(*clip > 0.0)) throw ValidationError("clip must be positive when set");
}

std::vector<double> TrainReport::objectives() const {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& e : trace) out.push_back(e.objective);
  return out;
}

void TrainReport::append(const TrainReport& other) {
  trace.insert(trace.end(), other.trace.begin(), other.trace.end());
  timings.insert(timings.end(), other.timings.begin(), other.timings.end());
  checksum = other.checksum;
}

void TrainReport::write_trace(std::ostream& out) const {
  out << "phase\tstep\tobjective\n";
  out << std::setprecision(17);
  for (const auto& e : trace) out << e.phase << '\t' << e.step << '\t' << e.objective << '\n';
}

void sgd_step(ParameterStore& params, const GradientRecord& grads, double learning_rate,
              std::optional<double> clip) {
  if (!params.aligned_with(grads.params)) throw ShapeError("sgd_step: gradient record is not aligned with parameters");
  Vector p = params.flatten();
  Vector g = grads.params.flatten();
  if (clip) {
    const double norm = g.norm();
    if (norm > *clip) g *= *clip / norm;
  }
  p -= learning_rate * g;
  params.unflatten(p);
}

BatchSampler::BatchSampler(Index count, Index batch_size, std::uint64_t seed)
    : order_(static_cast<std::size_t>(count)), batch_size_(std::min(batch_size, count)), cursor_(0), rng_(seed) {
  if (count < 1) throw ValidationError("cannot sample batches from an empty dataset");
  std::iota(order_.begin(), order_.end(), Index{0});
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<Index> BatchSampler::next() {
  if (cursor_ + batch_size_ > static_cast<Index>(order_.size())) reshuffle();
  std::vector<Index> batch(order_.begin() + cursor_, order_.begin() + cursor_ + batch_size_);
  cursor_ += batch_size_;
  return batch;
}

double stack_nll(const FlowStack& stack, const Matrix& data) {
  const auto out = stack.forward_batch(data);
  return -(standard_normal_logpdf_batch(out.z) + out.log_det).mean();
}

TrainReport pretrain_stack(FlowStack& stack, const Matrix& data, const TrainConfig& cfg, const std::string& phase) {
  cfg.validate();
  if (data.cols() == 0) throw ValidationError(phase + ": empty dataset");
  if (data.rows() != stack.dim()) throw ShapeError(phase + ": data dimension does not match the flow");

  TrainReport report;
  report.seed = cfg.seed;
  const auto start = Clock::now();
  BatchSampler sampler(data.cols(), cfg.batch_size, cfg.seed);
  for (Index step = 0; step < cfg.pretrain_steps; ++step) {
    const Matrix batch = take_columns(data, sampler.next());
    const double inv_n = 1.0 / static_cast<double>(batch.cols());

    FlowStack::Saved saved;
    const auto out = stack.forward_batch(batch, &saved);
    const double nll = -(standard_normal_logpdf_batch(out.z) + out.log_det).mean();
    check_objective(nll, step, phase);
    report.trace.push_back({phase, step, nll});

    // d(nll)/dz = z / n, d(nll)/d(log_det) = -1 / n
    FlowStack grad = stack.zeros_like();
    stack.backward_batch(saved, out.z * inv_n, Vector::Constant(batch.cols(), -inv_n), grad);
    apply_update(stack, grad, cfg);
  }
  report.timings.push_back({phase, cfg.pretrain_steps, seconds_since(start)});
  report.checksum = checksum(gather(stack));
  return report;
}

TrainReport train_temporal(TNVPModel& model, const StageSequenceDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw ValidationError("joint: empty dataset");
  if (data.dim() != model.dim()) throw ShapeError("joint: data dimension does not match the model");

  TrainReport report;
  report.seed = cfg.seed;
  const auto start = Clock::now();
  // Offset keeps the joint phase's batch order independent of the pretraining streams.
  BatchSampler sampler(data.size(), cfg.batch_size, cfg.seed + 3);
  const Freeze freeze{cfg.freeze_flows, cfg.freeze_flows, false};
  for (Index step = 0; step < cfg.joint_steps; ++step) {
    const auto cols = sampler.next();
    const Matrix x_prev = take_columns(data.prev(), cols);
    const Matrix x_t = take_columns(data.next(), cols);

    TNVPModel grad = model.zeros_like();
    const double nll = conditional_nll_and_gradient(model, x_t, x_prev, grad, freeze);
    check_objective(nll, step, "joint");
    report.trace.push_back({"joint", step, nll});
    apply_update(model, grad, cfg);
  }
  report.timings.push_back({"joint", cfg.joint_steps, seconds_since(start)});
  report.checksum = checksum(gather(model));
  return report;
}

TrainReport train(TNVPModel& model, const StageSequenceDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  TrainReport report;
  report.seed = cfg.seed;
  if (cfg.phases != Phases::JointOnly) {
    TrainConfig first = cfg;
    report.append(pretrain_stack(model.f1(), data.prev(), first, "pretrain_f1"));
    first.seed = cfg.seed + 1;
    report.append(pretrain_stack(model.f2(), data.next(), first, "pretrain_f2"));
  }
  if (cfg.phases != Phases::PretrainOnly) report.append(train_temporal(model, data, cfg));
  report.checksum = checksum(gather(model));
  return report;
}

double mean_conditional_nll(const TNVPModel& model, const StageSequenceDataset& data) {
  if (data.size() == 0) throw ValidationError("no pairs to evaluate");
  return -conditional_loglik_batch(model, data.next(), data.prev()).mean();
}

}  // namespace tnvp
