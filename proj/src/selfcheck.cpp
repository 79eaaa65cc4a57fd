#include "tnvp/selfcheck.hpp"

#include <bit>
#include <chrono>
#include <optional>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "tnvp/checkpoint.hpp"
#include "tnvp/oracle.hpp"
#include "tnvp/params.hpp"
#include "tnvp/reference.hpp"
#include "tnvp/run_config.hpp"
#include "tnvp/training.hpp"

namespace tnvp::selfcheck {
namespace {

using Clock = std::chrono::steady_clock;

Matrix normal_matrix(Index rows, Index cols, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  return m;
}

CheckResult timed(const std::string& name, const std::function<void(CheckResult&)>& body) {
  CheckResult result;
  result.name = name;
  const auto start = Clock::now();
  try {
    body(result);
  } catch (const std::exception& e) {
    result.passed = false;
    result.detail = std::string("exception: ") + e.what();
  }
  result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << std::scientific << v;
  return s.str();
}

}  // namespace

CheckResult invertibility() {
  return timed("invertibility", [](CheckResult& r) {
    double worst_inverse_of_forward = 0.0, worst_forward_of_inverse = 0.0;
    int configs = 0;
    for (Index dim : {2, 8, 16, 64}) {
      for (Index units = 1; units <= 10; ++units) {
        std::mt19937_64 rng(1000 * static_cast<std::uint64_t>(dim) + static_cast<std::uint64_t>(units));
        const MaskStyle style = units % 2 ? MaskStyle::Half : MaskStyle::EvenOdd;
        FlowStack stack = make_default_stack(dim, {units, 2, 32, style}, rng);
        randomize_parameters(stack, rng, 0.1);
        const Matrix x = normal_matrix(dim, 1000, rng);
        const Matrix z = stack.forward_batch(x).z;
        worst_inverse_of_forward = std::max(worst_inverse_of_forward, (stack.inverse_batch(z) - x).cwiseAbs().maxCoeff());
        const Matrix z2 = normal_matrix(dim, 1000, rng);
        worst_forward_of_inverse =
            std::max(worst_forward_of_inverse, (stack.forward_batch(stack.inverse_batch(z2)).z - z2).cwiseAbs().maxCoeff());
        ++configs;
      }
    }
    r.metrics["max_inverse_of_forward"] = worst_inverse_of_forward;
    r.metrics["max_forward_of_inverse"] = worst_forward_of_inverse;
    r.metrics["configs"] = configs;
    r.passed = worst_inverse_of_forward < 1e-8 && worst_forward_of_inverse < 1e-8;
    r.detail = std::to_string(configs) + " stacks x 1000 inputs, max |F^-1(F(x))-x| = " +
               fmt(worst_inverse_of_forward) + ", max |F(F^-1(z))-z| = " + fmt(worst_forward_of_inverse);
  });
}

CheckResult log_det_exactness() {
  return timed("log-det exactness", [](CheckResult& r) {
    constexpr int kCases = 112;
    double worst_rel = 0.0, worst_block = 0.0, worst_diag = 0.0;
    for (int c = 0; c < kCases; ++c) {
      const Index dim = 2 + c % 7;
      const Index units = 1 + (c / 7) % 4;
      std::mt19937_64 rng(77 + static_cast<std::uint64_t>(c));
      FlowStack stack = make_default_stack(dim, {units, 2, 32, c % 2 ? MaskStyle::EvenOdd : MaskStyle::Half}, rng);
      randomize_parameters(stack, rng, 0.3);
      const Vector x = normal_matrix(dim, 1, rng).col(0);

      const double analytic = stack_forward(stack, x).log_det;
      const Matrix jac = oracle::numerical_jacobian([&](const Vector& v) { return stack_forward(stack, v).z; }, x, 1e-6);
      const double numeric = oracle::log_abs_det(jac);
      worst_rel = std::max(worst_rel, std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric)));

      // Single half-mask unit: identity on pass-through rows, zero upper-right block, exp(s) diagonal.
      MappingUnit unit = MappingUnit::residual(BinaryMask::half(dim), 32, 2, rng);
      randomize_parameters(unit, rng, 0.3);
      const Matrix ju = oracle::numerical_jacobian([&](const Vector& v) { return unit_forward(unit, v).y; }, x, 1e-6);
      const Index d = unit.mask().ones();
      worst_block = std::max(worst_block, ju.topRightCorner(d, dim - d).cwiseAbs().maxCoeff());
      const Vector s = unit.scale().forward(unit.mask().bits().cwiseProduct(x), nullptr).col(0);
      for (Index j = d; j < dim; ++j)
        worst_diag = std::max(worst_diag, std::abs(ju(j, j) - std::exp(s[j])) / std::exp(s[j]));
    }
    r.metrics["max_rel_error"] = worst_rel;
    r.metrics["max_upper_block"] = worst_block;
    r.metrics["max_diag_rel_error"] = worst_diag;
    r.metrics["cases"] = kCases;
    r.passed = worst_rel < 1e-5 && worst_block < 1e-6 && worst_diag < 1e-6;
    r.detail = std::to_string(kCases) + " cases, max rel log-det error " + fmt(worst_rel) + ", max upper block " +
               fmt(worst_block) + ", max diag rel error " + fmt(worst_diag);
  });
}

CheckResult gradient_exactness() {
  return timed("gradient exactness", [](CheckResult& r) {
    constexpr int kSeeds = 50;
    const ModelSpec spec{4, 2, 1, 8, MaskStyle::Half, TransitionStructure::Full};
    constexpr double kKinkMargin = 1e-3;
    double worst = 0.0;
    Index checked = 0;
    int redraws = 0;
    for (int seed = 0; seed < kSeeds; ++seed) {
      std::mt19937_64 rng(500 + static_cast<std::uint64_t>(seed));
      TNVPModel model = make_model(spec, static_cast<std::uint64_t>(seed));
      randomize_parameters(model, rng, 0.3);
      // Central differences are only valid where no ReLU kink lies inside the
      // stencil, so redraw the batch until every pre-activation clears it.
      Matrix x_prev, x_t;
      do {
        x_prev = normal_matrix(4, 2, rng);
        x_t = normal_matrix(4, 2, rng);
        ++redraws;
      } while (std::min(model.f1().kink_margin(x_prev), model.f2().kink_margin(x_t)) < kKinkMargin);
      --redraws;

      TNVPModel grad = model.zeros_like();
      conditional_nll_and_gradient(model, x_t, x_prev, grad);
      const Vector analytic = gather(grad).flatten();

      // Central differences at step 1e-5 over the extended-precision reference;
      // in double the round-off floor (~1e-11) swamps coordinates near 1e-8.
      const Vector numeric = reference::conditional_nll_gradient(model, x_t, x_prev, 1e-5);
      const auto cmp = oracle::compare_gradients(analytic, numeric, 1e-8);
      worst = std::max(worst, cmp.max_rel_error);
      checked += cmp.checked;
    }
    r.metrics["max_rel_error"] = worst;
    r.metrics["coordinates_checked"] = static_cast<double>(checked);
    r.metrics["kink_redraws"] = redraws;
    r.passed = worst < 1e-4;
    r.detail = std::to_string(kSeeds) + " seeds, " + std::to_string(checked) +
               " coordinates over theta1/theta2/theta3, max rel error " + fmt(worst) +
               ", " + std::to_string(redraws) + " batch redraw(s) near a ReLU kink";
  });
}

CheckResult density_normalization() {
  return timed("density normalization", [](CheckResult& r) {
    const ModelSpec spec{2, 4, 2, 16, MaskStyle::Half, TransitionStructure::Full};
    TNVPModel model = make_model(spec, 3);
    const auto data = generate_drift_dataset(DriftKind::MixtureMorph, 2, 3, 400, 11);
    TrainConfig cfg;
    cfg.learning_rate = 5e-3;
    cfg.pretrain_steps = 150;
    cfg.joint_steps = 300;
    cfg.seed = 5;
    train(model, data, cfg);

    const Vector x_prev = data.prev().col(0);
    // Box from samples of the conditional: x_t = F2^{-1}(G(F1(x_prev)) + noise).
    std::mt19937_64 rng(17);
    const Vector mean_z = transition_apply(model.transition(), stack_forward(model.f1(), x_prev).z);
    const Matrix samples = model.f2().inverse_batch(normal_matrix(2, 4000, rng).colwise() + mean_z);
    const Vector center = samples.rowwise().mean();
    const Vector spread =
        ((samples.colwise() - center).rowwise().squaredNorm() / static_cast<double>(samples.cols())).cwiseSqrt();
    constexpr Index kGrid = 400;
    constexpr double kHalfWidth = 8.0;
    const Vector lo = center - kHalfWidth * spread;
    const Vector step = 2.0 * kHalfWidth * spread / static_cast<double>(kGrid);

    Matrix grid(2, kGrid * kGrid);
    for (Index i = 0; i < kGrid; ++i)
      for (Index j = 0; j < kGrid; ++j)
        grid.col(i * kGrid + j) << lo[0] + (static_cast<double>(i) + 0.5) * step[0],
            lo[1] + (static_cast<double>(j) + 0.5) * step[1];
    const Matrix prev = x_prev.replicate(1, grid.cols());
    const Vector loglik = conditional_loglik_batch(model, grid, prev);
    const double integral = loglik.array().exp().sum() * step[0] * step[1];
    r.metrics["integral"] = integral;
    r.passed = std::abs(integral - 1.0) <= 0.01;
    r.detail = "400x400 grid over +-8 std, integral = " + std::to_string(integral);
  });
}

CheckResult latent_density_oracle() {
  return timed("latent density oracle", [](CheckResult& r) {
    double worst_conditional = 0.0, worst_joint = 0.0, worst_factor = 0.0;
    for (int c = 0; c < 40; ++c) {
      std::mt19937_64 rng(900 + static_cast<std::uint64_t>(c));
      const Index dim = c % 2 ? 4 : 2;
      Matrix w = c % 4 == 0 ? Matrix(0.5 * Matrix::Identity(dim, dim)) : normal_matrix(dim, dim, rng, 0.7);
      const Vector b = normal_matrix(dim, 1, rng).col(0);
      TNVPModel model{FlowStack(dim), FlowStack(dim), TemporalTransition(w, b)};
      const Vector z_t = normal_matrix(dim, 1, rng, 1.5).col(0);
      const Vector z_prev = normal_matrix(dim, 1, rng, 1.5).col(0);

      const double cond = conditional_latent_logpdf(model, z_t, z_prev);
      const double cond_oracle = oracle::gaussian_logpdf(z_t, w * z_prev + b, Matrix::Identity(dim, dim));
      worst_conditional = std::max(worst_conditional, std::abs(cond - cond_oracle));

      Vector joint_x(2 * dim), joint_mean = Vector::Zero(2 * dim);
      joint_x << z_t, z_prev;
      joint_mean.head(dim) = b;
      Matrix cov(2 * dim, 2 * dim);
      cov << w * w.transpose() + Matrix::Identity(dim, dim), w, w.transpose(), Matrix::Identity(dim, dim);
      const double joint = joint_latent_logpdf(model, z_t, z_prev);
      worst_joint = std::max(worst_joint, std::abs(joint - oracle::gaussian_logpdf(joint_x, joint_mean, cov)));
      worst_factor = std::max(worst_factor, std::abs(joint - (standard_normal_logpdf(z_prev) + cond)));
    }
    r.metrics["max_conditional_error"] = worst_conditional;
    r.metrics["max_joint_error"] = worst_joint;
    r.metrics["max_factorization_error"] = worst_factor;
    r.passed = worst_conditional <= 1e-10 && worst_joint <= 1e-10 && worst_factor == 0.0;
    r.detail = "40 cases, conditional err " + fmt(worst_conditional) + ", joint err " + fmt(worst_joint) +
               " (covariance [[WW^T+I, W], [W^T, I]])";
  });
}

CheckResult learning_signal() {
  return timed("learning signal", [](CheckResult& r) {
    // Linear transition with flows pinned to the identity.
    const auto linear_start = Clock::now();
    Matrix a(2, 2);
    a << 0.8, -0.3, 0.2, 0.5;
    const auto linear = generate_linear_transition_dataset(a, 4000, 21);
    TNVPModel model = make_model({2, 2, 1, 8, MaskStyle::Half, TransitionStructure::Full}, 1);
    TrainConfig cfg;
    cfg.phases = Phases::JointOnly;
    cfg.freeze_flows = true;
    cfg.learning_rate = 0.05;
    cfg.joint_steps = 2000;
    cfg.seed = 2;
    train(model, linear, cfg);
    const double w_error = (model.transition().weight() - a).norm();
    const double linear_seconds = std::chrono::duration<double>(Clock::now() - linear_start).count();

    // Drifting mixture: held-out paired pairs vs shuffled pairs.
    const auto mixture_start = Clock::now();
    const auto train_data = generate_drift_dataset(DriftKind::MixtureMorph, 2, 4, 300, 31);
    const auto held_out = generate_drift_dataset(DriftKind::MixtureMorph, 2, 4, 300, 32);
    TNVPModel mix = make_model({2, 4, 2, 16, MaskStyle::Half, TransitionStructure::Full}, 4);
    TrainConfig mix_cfg;
    mix_cfg.learning_rate = 2e-3;
    mix_cfg.pretrain_steps = 200;
    mix_cfg.joint_steps = 800;
    mix_cfg.seed = 6;
    train(mix, train_data, mix_cfg);
    const double paired = mean_conditional_nll(mix, held_out);
    const double shuffled = mean_conditional_nll(mix, held_out.shuffled_pairs(7));
    const double mixture_seconds = std::chrono::duration<double>(Clock::now() - mixture_start).count();

    r.metrics["w_frobenius_error"] = w_error;
    r.metrics["paired_nll"] = paired;
    r.metrics["shuffled_nll"] = shuffled;
    r.metrics["linear_seconds"] = linear_seconds;
    r.metrics["mixture_seconds"] = mixture_seconds;
    r.passed = w_error < 0.1 && shuffled - paired > 0.0 && linear_seconds < 120.0 && mixture_seconds < 120.0;
    r.detail = "||W-A||_F = " + fmt(w_error) + ", held-out paired NLL " + std::to_string(paired) + " vs shuffled " +
               std::to_string(shuffled);
  });
}

CheckResult default_configuration() {
  return timed("default configuration", [](CheckResult& r) {
    const RunConfig cfg = run_config_from_json(nlohmann::json::object());
    const TNVPModel model = make_model(cfg.model, cfg.train.seed);
    bool nets_ok = model.f1().size() == 10 && model.f2().size() == 10;
    for (const FlowStack* stack : {&model.f1(), &model.f2()}) {
      for (const auto& unit : stack->units()) {
        for (const CouplingFunction* net : {&unit.scale(), &unit.translate()}) {
          const auto* res = dynamic_cast<const ResidualNet*>(net);
          nets_ok = nets_ok && res && res->blocks() == 2 && res->width() == 32;
        }
      }
    }
    r.passed = cfg.model.n_units == 10 && cfg.model.blocks == 2 && cfg.model.width == 32 &&
               cfg.train.batch_size == 64 && nets_ok;
    r.detail = "n_units=" + std::to_string(cfg.model.n_units) + " blocks=" + std::to_string(cfg.model.blocks) +
               " width=" + std::to_string(cfg.model.width) + " batch=" + std::to_string(cfg.train.batch_size);
  });
}

CheckResult determinism_and_serialization() {
  return timed("determinism and serialization", [](CheckResult& r) {
    const ModelSpec spec{2, 3, 1, 8, MaskStyle::Half, TransitionStructure::Full};
    const auto data = generate_drift_dataset(DriftKind::GaussianDrift, 2, 3, 64, 8);
    TrainConfig cfg;
    cfg.pretrain_steps = 20;
    cfg.joint_steps = 40;
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-2;
    cfg.seed = 9;
    auto run = [&] {
      TNVPModel m = make_model(spec, cfg.seed);
      const TrainReport report = train(m, data, cfg);
      return std::make_pair(encode_checkpoint(m, spec, cfg.seed), report.objectives());
    };
    const auto [bytes_a, trace_a] = run();
    const auto [bytes_b, trace_b] = run();
    const bool same_bytes = bytes_a == bytes_b;
    const bool same_trace = trace_a == trace_b;

    const Checkpoint loaded = decode_checkpoint(bytes_a);
    const Checkpoint reloaded = decode_checkpoint(encode_checkpoint(loaded.model, loaded.spec, loaded.seed));
    const Vector before = conditional_loglik_batch(loaded.model, data.next(), data.prev());
    const Vector after = conditional_loglik_batch(reloaded.model, data.next(), data.prev());
    bool bit_identical = before.size() == after.size();
    for (Index i = 0; bit_identical && i < before.size(); ++i)
      bit_identical = std::bit_cast<std::uint64_t>(before[i]) == std::bit_cast<std::uint64_t>(after[i]);
    const bool same_checksum = checksum(gather(loaded.model)) == checksum(gather(reloaded.model));

    r.passed = same_bytes && same_trace && bit_identical && same_checksum;
    r.detail = std::string("checkpoints ") + (same_bytes ? "byte-identical" : "DIFFER") + ", traces " +
               (same_trace ? "identical" : "DIFFER") + ", round-trip evaluations " +
               (bit_identical && same_checksum ? "bit-identical" : "DIFFER");
  });
}

std::vector<CheckResult> run_all(const Options& options, std::ostream& out) {
  std::optional<fault::ScopedInverseSignFlip> fault_guard;
  if (options.inject_inverse_fault) fault_guard.emplace();

  const std::vector<std::function<CheckResult()>> checks = {
      invertibility,      log_det_exactness, gradient_exactness,    density_normalization,
      latent_density_oracle, learning_signal, default_configuration, determinism_and_serialization};
  std::vector<CheckResult> results;
  for (const auto& check : checks) {
    results.push_back(check());
    const auto& r = results.back();
    out << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << " (" << std::fixed
        << std::setprecision(2) << r.seconds << " s)" << std::defaultfloat << '\n';
    out.flush();
  }
  return results;
}

}  // namespace tnvp::selfcheck
