#include "tnvp/commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "tnvp/checkpoint.hpp"
#include "tnvp/run_config.hpp"
#include "tnvp/selfcheck.hpp"
#include "tnvp/training.hpp"

#ifndef TNVP_VERSION_STRING
#define TNVP_VERSION_STRING "0.1.0"
#endif

namespace tnvp::cli {
namespace {

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(IoError::Kind::Open, "cannot create directory '" + dir.string() + "': " + ec.message());
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoError::Kind::Open, "cannot open '" + path.string() + "' for writing");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

Vector parse_vector(const std::string& text) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    std::string field = text.substr(start, end - start);
    field.erase(0, field.find_first_not_of(" \t"));
    field.erase(field.find_last_not_of(" \t") + 1);
    double v = 0.0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v))
      throw ValidationError("cannot parse input vector entry '" + field + "'");
    values.push_back(v);
    start = end + 1;
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

NoiseSource parse_noise(const std::string& text) {
  if (text == "zero") return NoiseSource::zero();
  if (text.rfind("seed:", 0) == 0) {
    std::uint64_t seed = 0;
    const char* first = text.data() + 5;
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, seed);
    if (first != last && res.ec == std::errc() && res.ptr == last) return NoiseSource::seeded(seed);
  }
  throw ValidationError("--noise must be 'zero' or 'seed:N', got '" + text + "'");
}

}  // namespace

std::string version() { return TNVP_VERSION_STRING; }

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "error (numerical): " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    err << "error (io): " << e.what() << '\n';
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return kIo;
  }
}

int train(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const RunConfig cfg = load_run_config(config_path);
        const StageSequenceDataset data = materialize_dataset(cfg);
        ensure_directory(cfg.output_directory);

        TNVPModel model = make_model(cfg.model, cfg.train.seed);
        const TrainReport report = tnvp::train(model, data, cfg.train);

        save_checkpoint(model, cfg.model, cfg.train.seed, cfg.output_directory / "checkpoint.tnvp");
        {
          auto trace = open_output(cfg.output_directory / "trace.tsv");
          report.write_trace(trace);
        }
        save_dataset(data, cfg.output_directory / "train_data.csv");

        nlohmann::json manifest;
        manifest["version"] = version();
        manifest["config"] = run_config_to_json(cfg);
        manifest["seed"] = cfg.train.seed;
        manifest["data_provenance"] = data.provenance();
        manifest["pairs"] = data.size();
        manifest["steps"] = report.trace.size();
        std::ostringstream hex;
        hex << std::hex << std::setw(16) << std::setfill('0') << report.checksum;
        manifest["parameter_checksum"] = hex.str();
        if (data.standardization()) {
          const auto& s = *data.standardization();
          manifest["standardization"] = {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                                         {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
        }
        nlohmann::json timings = nlohmann::json::array();
        for (const auto& t : report.timings) timings.push_back({{"phase", t.phase}, {"steps", t.steps}, {"seconds", t.seconds}});
        manifest["timings"] = timings;
        {
          auto file = open_output(cfg.output_directory / "manifest.json");
          file << manifest.dump(2) << '\n';
        }

        const auto objectives = report.objectives();
        out << "trained " << report.trace.size() << " steps on " << data.size() << " pairs";
        if (!objectives.empty()) out << "; final objective " << objectives.back();
        out << "\nwrote " << (cfg.output_directory / "checkpoint.tnvp").string() << '\n';
        return static_cast<int>(kOk);
      },
      err);
}

int eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
         const std::filesystem::path& out_dir, std::uint64_t shuffle_seed, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const Checkpoint ckpt = load_checkpoint(checkpoint);
        const StageSequenceDataset data = load_dataset(dataset);
        if (data.dim() != ckpt.model.dim())
          throw ShapeError("dataset dimension " + std::to_string(data.dim()) + " does not match checkpoint D " +
                           std::to_string(ckpt.model.dim()));
        const double paired = mean_conditional_nll(ckpt.model, data);
        const double shuffled = mean_conditional_nll(ckpt.model, data.shuffled_pairs(shuffle_seed));

        ensure_directory(out_dir);
        auto metrics = open_output(out_dir / "metrics.ndjson");
        metrics << nlohmann::json{{"metric", "paired_nll"}, {"value", paired}}.dump() << '\n'
                << nlohmann::json{{"metric", "shuffled_nll"}, {"value", shuffled}}.dump() << '\n'
                << nlohmann::json{{"metric", "pairs"}, {"value", data.size()}}.dump() << '\n';
        out << std::setprecision(10) << "paired_nll " << paired << "\nshuffled_nll " << shuffled << '\n';
        return static_cast<int>(kOk);
      },
      err);
}

int synthesize(const SynthesizeRequest& request, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        if (request.checkpoints.empty()) throw ValidationError("synthesize needs at least one checkpoint");
        if (request.input_vector.has_value() == request.input_dataset.has_value())
          throw ValidationError("synthesize needs exactly one of --input or --data");

        std::vector<TNVPModel> loaded;
        for (const auto& path : request.checkpoints) loaded.push_back(load_checkpoint(path).model);
        const int stages = request.stages.value_or(static_cast<int>(loaded.size()));
        if (stages < 1) throw ValidationError("--stages must be >= 1");
        if (loaded.size() > 1 && static_cast<std::size_t>(stages) != loaded.size())
          throw ValidationError("--stages must equal the number of checkpoints when chaining several");
        std::vector<TNVPModel> chain;
        for (int s = 0; s < stages; ++s) chain.push_back(loaded[loaded.size() == 1 ? 0 : static_cast<std::size_t>(s)]);

        Matrix inputs;
        if (request.input_vector) {
          inputs = parse_vector(*request.input_vector);
        } else {
          inputs = load_dataset(*request.input_dataset).prev();
        }
        NoiseSource noise = parse_noise(request.noise);

        ensure_directory(request.out_dir);
        auto csv = open_output(request.out_dir / "synthesized.csv");
        const Index dim = inputs.rows();
        csv << "input_index,stage";
        for (Index j = 0; j < dim; ++j) csv << ",x_" << j;
        csv << '\n';
        for (Index i = 0; i < inputs.cols(); ++i) {
          const auto outputs = synthesize_chain(chain, inputs.col(i), noise);
          for (std::size_t s = 0; s < outputs.size(); ++s) {
            csv << i << ',' << s + 1;
            for (Index j = 0; j < dim; ++j) csv << ',' << format_double(outputs[s][j]);
            csv << '\n';
          }
        }
        out << "wrote " << inputs.cols() * stages << " rows to " << (request.out_dir / "synthesized.csv").string()
            << '\n';
        return static_cast<int>(kOk);
      },
      err);
}

int selfcheck(bool inject_inverse_fault, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const auto results = selfcheck::run_all({inject_inverse_fault}, out);
        int failed = 0;
        for (const auto& r : results) failed += r.passed ? 0 : 1;
        if (failed == 0) {
          out << "all " << results.size() << " checks passed\n";
          return static_cast<int>(kOk);
        }
        err << failed << " check(s) failed:";
        for (const auto& r : results)
          if (!r.passed) err << ' ' << r.name << ';';
        err << '\n';
        return static_cast<int>(kNumerical);
      },
      err);
}

int generate(const std::string& kind, long dim, long stages, long n_per_stage, std::uint64_t seed,
             const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const auto data = generate_drift_dataset(parse_drift_kind(kind), dim, stages, n_per_stage, seed);
        if (path.has_parent_path()) ensure_directory(path.parent_path());
        save_dataset(data, path);
        out << "wrote " << data.size() << " pairs to " << path.string() << '\n';
        return static_cast<int>(kOk);
      },
      err);
}

}  // namespace tnvp::cli
