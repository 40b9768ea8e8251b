#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stackcast/gbdt/sampling.hpp"
#include "stackcast/gbdt/tree.hpp"
#include "stackcast/matrix.hpp"

namespace stackcast::gbdt {

struct BoostConfig {
  std::size_t n_iterations = 100;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double gamma = 0.0;
  std::size_t max_leaves = 31;
  std::size_t depth = 6;
  std::size_t n_bins = 256;
  std::size_t min_samples_leaf = 1;
  std::optional<GossConfig> goss;
  GrowthMode mode = GrowthMode::kLeafwise;
  std::uint64_t seed = 0;

  bool bundle_features = false;
  std::size_t conflict_budget = 0;

  // Columns holding integer category codes. In oblivious mode they are
  // replaced by ordered target statistics; leaf-wise mode splits on the raw
  // codes.
  std::vector<std::size_t> categorical_features;
  double ts_prior_weight = 1.0;
  double ts_initial_prior = 0.5;

  // Histogram worker threads. Never affects results.
  std::size_t n_threads = 1;

  void validate() const;
  bool operator==(const BoostConfig&) const = default;
};

// Full-training-data target statistics for one categorical column, used to
// encode categories at prediction time.
struct CategoryEncoding {
  std::size_t feature = 0;
  double prior = 0.0;
  double prior_weight = 1.0;
  std::map<std::int64_t, std::pair<double, std::int64_t>> stats;  // code -> (target sum, count)

  double encode(double code) const;
  bool operator==(const CategoryEncoding&) const = default;
};

// F(x) = base_prediction + learning_rate * sum_m tree_m(x).
struct GbdtModel {
  BoostConfig config;
  double base_prediction = 0.0;
  double learning_rate = 0.1;
  std::size_t n_features = 0;
  std::vector<std::vector<double>> bin_edges;
  std::vector<CategoryEncoding> encodings;
  std::vector<Tree> trees;

  double predict(std::span<const double> row) const;
  std::vector<double> predict(const Matrix& rows) const;

  bool operator==(const GbdtModel&) const = default;
};

struct TrainingTrace {
  std::vector<double> train_mse;  // after each iteration, entry 0 = base prediction only
};

GbdtModel fit_gbdt(const Matrix& features, std::span<const double> targets, const BoostConfig& config,
                   TrainingTrace* trace = nullptr);

std::string_view to_string(GrowthMode mode);
GrowthMode parse_growth_mode(std::string_view text);

// JSON document with config, F_0, learning rate, bin edges, encodings and
// flattened node arrays. Doubles are written in shortest round-trip form.
std::string save_gbdt(const GbdtModel& model);
GbdtModel load_gbdt(std::string_view document);

}  // namespace stackcast::gbdt
