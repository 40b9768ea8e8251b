#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stackcast/dataframe.hpp"
#include "stackcast/ensemble.hpp"
#include "synthetic.hpp"

namespace stackcast::app {

inline constexpr int kConfigVersion = 1;

inline const std::vector<std::string>& known_models() {
  static const std::vector<std::string> names{"gbdt-oblivious", "gbdt-leafwise", "lstm", "ensemble"};
  return names;
}

struct RunConfig {
  // Exactly one of these is set once the config is complete.
  std::optional<std::string> data;
  std::optional<SyntheticSpec> synthetic;

  std::string target = "close";
  std::vector<std::string> features;  // empty: every numeric column
  data::MissingPolicy missing = data::MissingPolicy::kForwardFill;
  std::size_t lookback = 10;
  double train_fraction = 0.8;
  std::optional<std::uint64_t> seed;
  std::string out = "stackcast-out";
  std::vector<std::string> models;

  // Base configs live in ensemble.base and are shared by the stand-alone
  // models. Their seeds are derived from the run seed.
  ensemble::EnsembleConfig ensemble;
  std::optional<std::size_t> meta_window;  // defaults to lookback

  std::size_t threads = 1;

  // Throws Error(kConfigInvalid) unless the config can run.
  void validate() const;
  std::uint64_t run_seed() const;
  std::size_t effective_meta_window() const { return meta_window.value_or(lookback); }
  ensemble::EnsembleConfig effective_ensemble() const;
};

// Merges a config document into `config`. The document needs
// "version": kConfigVersion; unknown keys are errors.
void apply_config_json(const nlohmann::json& doc, RunConfig& config);
RunConfig load_run_config(const std::string& path);

// Resolved settings, excluding the thread count and output directory. Its
// hash identifies the experiment.
nlohmann::json config_to_json(const RunConfig& config);
std::string config_hash(const RunConfig& config);

void from_json(const nlohmann::json& in, SyntheticSpec& spec);
void to_json(nlohmann::json& out, const SyntheticSpec& spec);

}  // namespace stackcast::app
