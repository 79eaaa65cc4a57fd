#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tnvp::cli {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2, kIo = 3 };

/// Runs `body`, mapping library exceptions to exit codes and printing a
/// one-line diagnostic to `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

/// Two-step training per the config; writes checkpoint.tnvp, trace.tsv,
/// train_data.csv and manifest.json under the configured output directory.
int train(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);

/// Mean paired NLL and shuffled-pair NLL; writes <out_dir>/metrics.ndjson.
int eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
         const std::filesystem::path& out_dir, std::uint64_t shuffle_seed, std::ostream& out, std::ostream& err);

struct SynthesizeRequest {
  std::vector<std::filesystem::path> checkpoints;
  std::optional<std::string> input_vector;             // comma-separated values
  std::optional<std::filesystem::path> input_dataset;  // x_prev of every pair
  std::string noise = "zero";                          // "zero" or "seed:N"
  std::optional<int> stages;
  std::filesystem::path out_dir = ".";
};

/// Writes <out_dir>/synthesized.csv with one row per (input, stage).
int synthesize(const SynthesizeRequest& request, std::ostream& out, std::ostream& err);

/// Runs the oracle suite; 0 iff every check passes.
int selfcheck(bool inject_inverse_fault, std::ostream& out, std::ostream& err);

/// Writes a synthetic dataset CSV.
int generate(const std::string& kind, long dim, long stages, long n_per_stage, std::uint64_t seed,
             const std::filesystem::path& path, std::ostream& out, std::ostream& err);

/// Version string embedded at build time.
std::string version();

}  // namespace tnvp::cli
