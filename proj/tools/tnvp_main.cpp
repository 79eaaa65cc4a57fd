#include <iostream>

#include <CLI11.hpp>

#include "tnvp/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Temporal non-volume-preserving flows: train, evaluate and synthesize stage transitions"};
  app.set_version_flag("--version", tnvp::cli::version());
  app.require_subcommand(1);

  std::string config;
  auto* train = app.add_subcommand("train", "Run the two-step training schedule from a JSON config");
  train->add_option("config", config, "Run configuration (JSON)")->required();

  std::string checkpoint, dataset, out_dir = ".";
  std::uint64_t shuffle_seed = 0;
  auto* eval = app.add_subcommand("eval", "Mean paired and shuffled-pair NLL of a dataset");
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  eval->add_option("--data", dataset, "Dataset CSV")->required();
  eval->add_option("--out", out_dir, "Output directory for metrics.ndjson");
  eval->add_option("--shuffle-seed", shuffle_seed, "Seed of the shuffled-pair control");

  tnvp::cli::SynthesizeRequest request;
  std::vector<std::string> checkpoints;
  std::string input, input_data, synth_out = ".";
  int stages = 0;
  auto* synth = app.add_subcommand("synthesize", "Synthesize next-stage vectors by exact inversion");
  synth->add_option("--checkpoint", checkpoints, "Checkpoint(s), chained in order")->required();
  auto* input_opt = synth->add_option("--input", input, "Comma-separated input vector");
  auto* data_opt = synth->add_option("--data", input_data, "Dataset CSV; every x_prev is an input");
  input_opt->excludes(data_opt);
  synth->add_option("--noise", request.noise, "zero | seed:N")->default_val("zero");
  synth->add_option("--stages", stages, "Number of stages to synthesize");
  synth->add_option("--out", synth_out, "Output directory for synthesized.csv");

  bool inject_fault = false;
  auto* check = app.add_subcommand("selfcheck", "Run the invertibility, log-det, gradient and density oracles");
  check->add_flag("--inject-fault", inject_fault, "Flip the inverse scale sign (the run must fail)");

  std::string kind = "gaussian-drift", gen_out;
  long dim = 2, gen_stages = 4, n_per_stage = 256;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("generate", "Write a synthetic multi-stage dataset CSV");
  gen->add_option("--kind", kind, "gaussian-drift | rotating-moons | mixture-morph");
  gen->add_option("--dim", dim, "Dimension D");
  gen->add_option("--stages", gen_stages, "Stage count");
  gen->add_option("--n", n_per_stage, "Trajectories per stage");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tnvp::cli::kValidation;
  }

  if (*train) return tnvp::cli::train(config, std::cout, std::cerr);
  if (*eval) return tnvp::cli::eval(checkpoint, dataset, out_dir, shuffle_seed, std::cout, std::cerr);
  if (*synth) {
    request.checkpoints.assign(checkpoints.begin(), checkpoints.end());
    if (*input_opt) request.input_vector = input;
    if (*data_opt) request.input_dataset = input_data;
    if (stages > 0) request.stages = stages;
    request.out_dir = synth_out;
    return tnvp::cli::synthesize(request, std::cout, std::cerr);
  }
  if (*check) return tnvp::cli::selfcheck(inject_fault, std::cout, std::cerr);
  if (*gen) return tnvp::cli::generate(kind, dim, gen_stages, n_per_stage, gen_seed, gen_out, std::cout, std::cerr);
  return tnvp::cli::kValidation;
}
