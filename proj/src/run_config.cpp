#include "tnvp/run_config.hpp"

#include <fstream>
#include <set>

namespace tnvp {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& section) {
  if (!obj.is_object()) throw ValidationError("config: '" + section + "' must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ValidationError("config: unknown key '" + section + "." + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: '" + section + "." + key + "' has the wrong type");
  }
}

void read_index(const json& obj, const char* key, Index& out, const std::string& section) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ValidationError("config: '" + section + "." + key + "' must be an integer");
  out = v.get<Index>();
}

MaskStyle parse_mask(const std::string& s) {
  if (s == "half") return MaskStyle::Half;
  if (s == "even-odd") return MaskStyle::EvenOdd;
  throw ValidationError("config: mask_style must be 'half' or 'even-odd', got '" + s + "'");
}

TransitionStructure parse_structure(const std::string& s) {
  if (s == "full") return TransitionStructure::Full;
  if (s == "diagonal") return TransitionStructure::Diagonal;
  throw ValidationError("config: W_structure must be 'full' or 'diagonal', got '" + s + "'");
}

Phases parse_phases(const std::string& s) {
  if (s == "both") return Phases::Both;
  if (s == "pretrain_only") return Phases::PretrainOnly;
  if (s == "joint_only") return Phases::JointOnly;
  throw ValidationError("config: phases must be 'both', 'pretrain_only' or 'joint_only', got '" + s + "'");
}

}  // namespace

std::string to_string(MaskStyle style) { return style == MaskStyle::Half ? "half" : "even-odd"; }

std::string to_string(TransitionStructure structure) {
  return structure == TransitionStructure::Full ? "full" : "diagonal";
}

std::string to_string(Phases phases) {
  switch (phases) {
    case Phases::Both: return "both";
    case Phases::PretrainOnly: return "pretrain_only";
    case Phases::JointOnly: return "joint_only";
  }
  return "both";
}

void RunConfig::validate() const {
  if (model.dim < 2) throw ValidationError("config: model.D must be >= 2");
  if (model.n_units < 1) throw ValidationError("config: model.n_units must be >= 1");
  if (model.blocks < 0) throw ValidationError("config: model.blocks must be >= 0");
  if (model.width < 1) throw ValidationError("config: model.width must be >= 1");
  train.validate();
  if (data.generator.has_value() == data.path.has_value())
    throw ValidationError("config: data needs exactly one of 'generator' or 'path'");
  if (data.generator) {
    if (data.generator->stages < 2) throw ValidationError("config: data.generator.stages must be >= 2");
    if (data.generator->n_per_stage < 1) throw ValidationError("config: data.generator.n_per_stage must be >= 1");
  }
  if (output_directory.empty()) throw ValidationError("config: output.directory must not be empty");
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig cfg;
  reject_unknown(doc, {"model", "train", "data", "output"}, "<root>");

  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    reject_unknown(m, {"D", "n_units", "blocks", "width", "mask_style", "W_structure"}, "model");
    read_index(m, "D", cfg.model.dim, "model");
    read_index(m, "n_units", cfg.model.n_units, "model");
    read_index(m, "blocks", cfg.model.blocks, "model");
    read_index(m, "width", cfg.model.width, "model");
    std::string mask = to_string(cfg.model.mask_style), structure = to_string(cfg.model.transition);
    read(m, "mask_style", mask, "model");
    read(m, "W_structure", structure, "model");
    cfg.model.mask_style = parse_mask(mask);
    cfg.model.transition = parse_structure(structure);
  }

  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    reject_unknown(t,
                   {"batch_size", "learning_rate", "pretrain_steps", "joint_steps", "seed", "phases", "clip",
                    "freeze_flows"},
                   "train");
    read_index(t, "batch_size", cfg.train.batch_size, "train");
    read(t, "learning_rate", cfg.train.learning_rate, "train");
    read_index(t, "pretrain_steps", cfg.train.pretrain_steps, "train");
    read_index(t, "joint_steps", cfg.train.joint_steps, "train");
    read(t, "seed", cfg.train.seed, "train");
    std::string phases = to_string(cfg.train.phases);
    read(t, "phases", phases, "train");
    cfg.train.phases = parse_phases(phases);
    if (t.contains("clip")) {
      if (t.at("clip").is_null()) {
        cfg.train.clip.reset();
      } else {
        double clip = 0.0;
        read(t, "clip", clip, "train");
        cfg.train.clip = clip;
      }
    }
    read(t, "freeze_flows", cfg.train.freeze_flows, "train");
  }

  if (doc.contains("data")) {
    const auto& d = doc.at("data");
    reject_unknown(d, {"generator", "path", "standardize"}, "data");
    if (d.contains("path")) {
      std::string path;
      read(d, "path", path, "data");
      cfg.data.path = path;
      cfg.data.generator.reset();
    }
    if (d.contains("generator")) {
      const auto& g = d.at("generator");
      reject_unknown(g, {"kind", "stages", "n_per_stage", "seed"}, "data.generator");
      GeneratorConfig gen;
      std::string kind = to_string(gen.kind);
      read(g, "kind", kind, "data.generator");
      gen.kind = parse_drift_kind(kind);
      read_index(g, "stages", gen.stages, "data.generator");
      read_index(g, "n_per_stage", gen.n_per_stage, "data.generator");
      read(g, "seed", gen.seed, "data.generator");
      cfg.data.generator = gen;
    }
    read(d, "standardize", cfg.data.standardize, "data");
  }

  if (doc.contains("output")) {
    const auto& o = doc.at("output");
    reject_unknown(o, {"directory"}, "output");
    std::string dir = cfg.output_directory.string();
    read(o, "directory", dir, "output");
    cfg.output_directory = dir;
  }

  cfg.validate();
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  json doc;
  doc["model"] = {{"D", cfg.model.dim},
                  {"n_units", cfg.model.n_units},
                  {"blocks", cfg.model.blocks},
                  {"width", cfg.model.width},
                  {"mask_style", to_string(cfg.model.mask_style)},
                  {"W_structure", to_string(cfg.model.transition)}};
  doc["train"] = {{"batch_size", cfg.train.batch_size},
                  {"learning_rate", cfg.train.learning_rate},
                  {"pretrain_steps", cfg.train.pretrain_steps},
                  {"joint_steps", cfg.train.joint_steps},
                  {"seed", cfg.train.seed},
                  {"phases", to_string(cfg.train.phases)},
                  {"clip", cfg.train.clip ? json(*cfg.train.clip) : json(nullptr)},
                  {"freeze_flows", cfg.train.freeze_flows}};
  json data;
  if (cfg.data.generator) {
    data["generator"] = {{"kind", to_string(cfg.data.generator->kind)},
                         {"stages", cfg.data.generator->stages},
                         {"n_per_stage", cfg.data.generator->n_per_stage},
                         {"seed", cfg.data.generator->seed}};
  }
  if (cfg.data.path) data["path"] = cfg.data.path->string();
  data["standardize"] = cfg.data.standardize;
  doc["data"] = data;
  doc["output"] = {{"directory", cfg.output_directory.string()}};
  return doc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoError::Kind::Open, "cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(doc);
}

StageSequenceDataset materialize_dataset(const RunConfig& cfg) {
  StageSequenceDataset data = [&] {
    if (cfg.data.path) return load_dataset(*cfg.data.path);
    const auto& g = *cfg.data.generator;
    return generate_drift_dataset(g.kind, cfg.model.dim, g.stages, g.n_per_stage, g.seed);
  }();
  if (data.dim() != cfg.model.dim)
    throw ShapeError("dataset dimension " + std::to_string(data.dim()) + " does not match model.D " +
                     std::to_string(cfg.model.dim));
  return cfg.data.standardize ? data.standardized() : data;
}

}  // namespace tnvp
