// Acceptance run: one PASS/FAIL line per criterion. Each threshold is checked
// here against the reported metrics, on top of the check's own verdict.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

#include "tnvp/commands.hpp"
#include "tnvp/selfcheck.hpp"

namespace {

using tnvp::selfcheck::CheckResult;

int failures = 0;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("[%s] %d. %s: %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
}

double metric(const CheckResult& r, const std::string& key) {
  const auto it = r.metrics.find(key);
  return it == r.metrics.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
}

std::string describe(const CheckResult& r) {
  std::ostringstream s;
  s << r.detail << " (" << r.seconds << " s)";
  return s.str();
}

}  // namespace

int main() {
  namespace sc = tnvp::selfcheck;

  const CheckResult inv = sc::invertibility();
  report(1, "invertibility",
         inv.passed && metric(inv, "max_inverse_of_forward") < 1e-8 && metric(inv, "max_forward_of_inverse") < 1e-8 &&
             inv.seconds < 30.0,
         describe(inv));

  const CheckResult logdet = sc::log_det_exactness();
  report(2, "log-det exactness",
         logdet.passed && metric(logdet, "max_rel_error") < 1e-5 && metric(logdet, "max_upper_block") < 1e-6 &&
             metric(logdet, "cases") >= 100,
         describe(logdet));

  const CheckResult grad = sc::gradient_exactness();
  report(3, "gradient exactness", grad.passed && metric(grad, "max_rel_error") < 1e-4, describe(grad));

  const CheckResult density = sc::density_normalization();
  report(4, "density normalization", density.passed && std::abs(metric(density, "integral") - 1.0) <= 0.01,
         describe(density));

  const CheckResult latent = sc::latent_density_oracle();
  report(5, "latent-density oracle",
         latent.passed && metric(latent, "max_conditional_error") < 1e-10 && metric(latent, "max_joint_error") < 1e-10,
         describe(latent));

  const CheckResult learning = sc::learning_signal();
  report(6, "learning signal",
         learning.passed && metric(learning, "w_frobenius_error") < 0.1 &&
             metric(learning, "paired_nll") < metric(learning, "shuffled_nll") &&
             metric(learning, "linear_seconds") < 120.0 && metric(learning, "mixture_seconds") < 120.0,
         describe(learning));

  const CheckResult defaults = sc::default_configuration();
  report(7, "default configuration", defaults.passed, describe(defaults));

  const CheckResult determinism = sc::determinism_and_serialization();
  report(8, "determinism and serialization", determinism.passed, describe(determinism));

  // The command-line entry point, timed end to end, must exit 0.
  std::ostringstream out, err;
  const auto start = std::chrono::steady_clock::now();
  const int code = tnvp::cli::selfcheck(false, out, err);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream detail;
  detail << "exit " << code << " in " << seconds << " s";
  report(9, "selfcheck under 5 minutes", code == 0 && seconds < 300.0, detail.str());
  if (code != 0) std::cout << out.str() << err.str();

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
