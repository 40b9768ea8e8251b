#include "run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stackcast/error.hpp"
#include "stackcast/json_io.hpp"
#include "stackcast/random.hpp"

namespace stackcast::app {

using nlohmann::json;

namespace {

template <typename T>
void read_if_present(const json& in, const char* key, T& value) {
  if (const auto it = in.find(key); it != in.end()) value = it->get<T>();
}

void reject_seed(const json& block, const char* name) {
  if (block.contains("seed")) {
    throw Error(ErrorCode::kConfigInvalid,
                std::string(name) + " must not set a seed; model seeds are derived from the run seed");
  }
}

}  // namespace

void from_json(const json& in, SyntheticSpec& spec) {
  reject_unknown_keys(in, {"n_points", "offset", "trend", "amplitude", "period", "noise", "seed"}, "synthetic spec");
  read_if_present(in, "n_points", spec.n_points);
  read_if_present(in, "offset", spec.offset);
  read_if_present(in, "trend", spec.trend);
  read_if_present(in, "amplitude", spec.amplitude);
  read_if_present(in, "period", spec.period);
  read_if_present(in, "noise", spec.noise);
  read_if_present(in, "seed", spec.seed);
}

void to_json(json& out, const SyntheticSpec& spec) {
  out = json{{"n_points", spec.n_points}, {"offset", spec.offset}, {"trend", spec.trend},
             {"amplitude", spec.amplitude}, {"period", spec.period}, {"noise", spec.noise},
             {"seed", spec.seed}};
}

void RunConfig::validate() const {
  if (data.has_value() == synthetic.has_value()) {
    throw Error(ErrorCode::kConfigInvalid, "exactly one of \"data\" and \"synthetic\" must be given");
  }
  if (!seed) throw Error(ErrorCode::kConfigInvalid, "a seed is required (--seed or \"seed\")");
  if (lookback < 1) throw Error(ErrorCode::kConfigInvalid, "lookback must be at least 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::kConfigInvalid, "train_fraction must lie in (0, 1)");
  }
  if (synthetic) {
    synthetic->validate();
    if (synthetic->n_points <= lookback + 10) {
      throw Error(ErrorCode::kConfigInvalid, "synthetic n_points must exceed lookback + 10");
    }
  }
  if (models.empty()) throw Error(ErrorCode::kConfigInvalid, "no models selected");
  for (const auto& m : models) {
    if (std::find(known_models().begin(), known_models().end(), m) == known_models().end()) {
      throw Error(ErrorCode::kConfigInvalid, "unknown model '" + m + "'");
    }
    if (std::count(models.begin(), models.end(), m) > 1) {
      throw Error(ErrorCode::kConfigInvalid, "model '" + m + "' listed twice");
    }
  }
  if (threads < 1) throw Error(ErrorCode::kConfigInvalid, "threads must be at least 1");
  const auto resolved = effective_ensemble();
  resolved.base.oblivious.validate();
  resolved.base.leafwise.validate();
  resolved.base.lstm.validate();
  resolved.meta.validate();
  if (resolved.k_folds < 2) throw Error(ErrorCode::kConfigInvalid, "k_folds must be at least 2");
  if (resolved.meta_window < 1) throw Error(ErrorCode::kConfigInvalid, "meta_window must be at least 1");
}

std::uint64_t RunConfig::run_seed() const {
  if (!seed) throw Error(ErrorCode::kConfigInvalid, "a seed is required (--seed or \"seed\")");
  return *seed;
}

ensemble::EnsembleConfig RunConfig::effective_ensemble() const {
  ensemble::EnsembleConfig out = ensemble;
  out.meta_window = effective_meta_window();
  out.base.n_threads = threads;
  out.base.oblivious.n_threads = threads;
  out.base.leafwise.n_threads = threads;
  return out;
}

void apply_config_json(const json& doc, RunConfig& config) {
  if (!doc.is_object()) throw Error(ErrorCode::kConfigInvalid, "config must be a JSON object");
  reject_unknown_keys(doc,
                      {"version", "data", "synthetic", "target", "features", "missing", "lookback",
                       "train_fraction", "seed", "out", "models", "gbdt_oblivious", "gbdt_leafwise", "lstm",
                       "ensemble", "threads"},
                      "run config");
  const auto version = doc.find("version");
  if (version == doc.end() || !version->is_number_integer() || version->get<int>() != kConfigVersion) {
    throw Error(ErrorCode::kConfigInvalid,
                "config needs \"version\": " + std::to_string(kConfigVersion));
  }
  if (const auto it = doc.find("data"); it != doc.end()) config.data = it->get<std::string>();
  if (const auto it = doc.find("synthetic"); it != doc.end()) {
    SyntheticSpec spec = config.synthetic.value_or(SyntheticSpec{});
    from_json(*it, spec);
    config.synthetic = spec;
  }
  read_if_present(doc, "target", config.target);
  read_if_present(doc, "features", config.features);
  if (const auto it = doc.find("missing"); it != doc.end()) {
    config.missing = data::parse_missing_policy(it->get<std::string>());
  }
  read_if_present(doc, "lookback", config.lookback);
  read_if_present(doc, "train_fraction", config.train_fraction);
  if (const auto it = doc.find("seed"); it != doc.end()) config.seed = it->get<std::uint64_t>();
  read_if_present(doc, "out", config.out);
  read_if_present(doc, "models", config.models);
  read_if_present(doc, "threads", config.threads);
  if (const auto it = doc.find("gbdt_oblivious"); it != doc.end()) {
    reject_seed(*it, "gbdt_oblivious");
    gbdt::from_json(*it, config.ensemble.base.oblivious);
  }
  if (const auto it = doc.find("gbdt_leafwise"); it != doc.end()) {
    reject_seed(*it, "gbdt_leafwise");
    gbdt::from_json(*it, config.ensemble.base.leafwise);
  }
  if (const auto it = doc.find("lstm"); it != doc.end()) {
    reject_seed(*it, "lstm");
    lstm::from_json(*it, config.ensemble.base.lstm);
  }
  if (const auto it = doc.find("ensemble"); it != doc.end()) {
    reject_unknown_keys(*it, {"meta", "k_folds", "meta_window"}, "ensemble config");
    if (const auto meta = it->find("meta"); meta != it->end()) {
      reject_seed(*meta, "ensemble meta");
      lstm::from_json(*meta, config.ensemble.meta);
    }
    read_if_present(*it, "k_folds", config.ensemble.k_folds);
    if (const auto w = it->find("meta_window"); w != it->end()) config.meta_window = w->get<std::size_t>();
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigInvalid, "cannot read config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig config;
  try {
    apply_config_json(json::parse(buffer.str()), config);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigInvalid, path + ": " + e.what());
  }
  return config;
}

json config_to_json(const RunConfig& config) {
  json out;
  out["version"] = kConfigVersion;
  if (config.data) out["data"] = *config.data;
  if (config.synthetic) out["synthetic"] = *config.synthetic;
  out["target"] = config.target;
  out["features"] = config.features;
  out["missing"] = std::string(data::to_string(config.missing));
  out["lookback"] = config.lookback;
  out["train_fraction"] = config.train_fraction;
  if (config.seed) out["seed"] = *config.seed;
  out["models"] = config.models;
  const auto resolved = config.effective_ensemble();
  auto strip_seed = [](json block) {
    block.erase("seed");
    return block;
  };
  out["gbdt_oblivious"] = strip_seed(resolved.base.oblivious);
  out["gbdt_leafwise"] = strip_seed(resolved.base.leafwise);
  out["lstm"] = strip_seed(resolved.base.lstm);
  out["ensemble"] = json{{"meta", strip_seed(resolved.meta)},
                         {"k_folds", resolved.k_folds},
                         {"meta_window", resolved.meta_window}};
  return out;
}

std::string config_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(config_to_json(config).dump())));
  return buf;
}

}  // namespace stackcast::app
