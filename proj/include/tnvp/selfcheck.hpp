#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace tnvp::selfcheck {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  std::map<std::string, double> metrics;
};

/// F^{-1}(F(x)) and F(F^{-1}(z)) within 1e-8 for D in {2, 8, 16, 64}, stacks of
/// 1..10 units, 1000 inputs each; total runtime under 30 s.
CheckResult invertibility();

/// Analytic log-det vs log|det| of the central-difference Jacobian, relative
/// error 1e-5 over >= 100 cases with D <= 8 and <= 4 units; single-unit
/// Jacobians have a zero pass-through/free block (1e-6) and exp(s) diagonal.
CheckResult log_det_exactness();

/// Reverse-mode gradient of the conditional NLL w.r.t. theta1, theta2, theta3
/// vs central differences (step 1e-5), relative error 1e-4, D = 4, 50 seeds.
CheckResult gradient_exactness();

/// exp(conditional log-likelihood) of a trained D = 2 model integrated on a
/// 400 x 400 grid spanning +-8 pushed-forward standard deviations: 1 +- 0.01.
CheckResult density_normalization();

/// Conditional and joint latent log-densities vs dense Gaussian evaluation, 1e-10.
CheckResult latent_density_oracle();

/// Linear transition recovery (||W - A||_F < 0.1) and paired vs shuffled
/// held-out NLL on drifting-mixture data, each run under 2 minutes.
CheckResult learning_signal();

/// Default run configuration carries 10 units, 2 residual blocks, width 32, batch 64.
CheckResult default_configuration();

/// Same seed gives byte-identical checkpoints; decode preserves every evaluation bit.
CheckResult determinism_and_serialization();

struct Options {
  /// Flip the sign of the inverse scale for the whole run (mutation canary).
  bool inject_inverse_fault = false;
};

/// Runs every check in order, printing one line per check to `out`.
std::vector<CheckResult> run_all(const Options& options, std::ostream& out);

}  // namespace tnvp::selfcheck
