#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stackcast/dataframe.hpp"
#include "stackcast/gbdt/booster.hpp"
#include "stackcast/lstm.hpp"
#include "stackcast/matrix.hpp"

namespace stackcast::ensemble {

// Base-learner predictions for one timestep: CatBoost-style oblivious GBDT,
// LSTM, LightGBM-style leaf-wise GBDT.
struct Triple {
  double cb = 0.0;
  double lstm = 0.0;
  double lgb = 0.0;

  bool operator==(const Triple&) const = default;
};

struct BaseConfigs {
  gbdt::BoostConfig oblivious = default_oblivious();
  gbdt::BoostConfig leafwise = default_leafwise();
  lstm::LstmConfig lstm;
  // Base learners of one fold train on this many threads (1 = sequential).
  std::size_t n_threads = 1;

  static gbdt::BoostConfig default_oblivious();
  static gbdt::BoostConfig default_leafwise();
};

// Seeds of every learner derived from one run seed; the stand-alone models
// of a comparison use the same derivation so they match the ensemble's
// refit members.
std::uint64_t oblivious_seed(std::uint64_t seed);
std::uint64_t leafwise_seed(std::uint64_t seed);
std::uint64_t lstm_seed(std::uint64_t seed);
std::uint64_t meta_seed(std::uint64_t seed);
BaseConfigs seeded(BaseConfigs configs, std::uint64_t seed);

// Windows flattened to one row per sample, the GBDT feature layout.
Matrix flatten_windows(const data::WindowedDataset& windows);

struct BaseModels {
  gbdt::GbdtModel oblivious;
  gbdt::GbdtModel leafwise;
  lstm::LstmModel lstm;

  std::vector<Triple> predict(const data::WindowedDataset& windows) const;
};

BaseModels fit_base_models(const data::WindowedDataset& train, const BaseConfigs& configs);

struct OofRow {
  Triple preds;
  double target = 0.0;
  std::size_t fold = 0;    // 1-based; always >= 2
  std::size_t sample = 0;  // index into the training windows
  data::Date timestamp;
};

struct FoldRange {
  std::size_t fold = 0;  // 1-based
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct OofMatrix {
  std::vector<OofRow> rows;
  std::vector<FoldRange> folds;
};

// Contiguous chronological folds, sizes differing by at most one.
std::vector<FoldRange> make_folds(std::size_t n_samples, std::size_t k_folds);

// Walk-forward out-of-fold predictions: fold j is predicted by base models
// trained on folds 1..j-1. Fold 1 has no predictor and yields no rows.
OofMatrix oof_predictions(const data::WindowedDataset& train, const BaseConfigs& configs, std::size_t k_folds,
                          std::uint64_t seed);

// Simplex weights (alpha on cb, beta on lstm, gamma on lgb).
struct WeightRow {
  double alpha = 1.0 / 3.0;
  double beta = 1.0 / 3.0;
  double gamma = 1.0 / 3.0;

  bool operator==(const WeightRow&) const = default;
};
using MetaWeights = std::vector<WeightRow>;

WeightRow softmax_weights(double z_cb, double z_lstm, double z_lgb);

// Convex combination per step, clamped to the step's [min, max] base
// prediction so rounding can never leave the envelope.
std::vector<double> combine(std::span<const WeightRow> weights, std::span<const Triple> preds);
double combine(const WeightRow& weights, const Triple& preds);

// Two-layer LSTM over triple sequences with a 3-logit head normalized by
// softmax at every step.
struct MetaModel {
  lstm::LstmConfig config;
  std::size_t window = 20;
  lstm::LstmParams params;
  std::vector<double> epoch_losses;

  // Weights for every step of `sequence`, run from a zero state.
  MetaWeights weights(std::span<const Triple> sequence) const;

  // For each of the last `n_targets` steps of `sequence`, the final-step
  // weights of the window of `window` steps ending there.
  MetaWeights windowed_weights(std::span<const Triple> sequence, std::size_t n_targets) const;

  bool operator==(const MetaModel&) const = default;
};

// Parameters with a zeroed head, so every step starts at uniform weights.
lstm::LstmParams init_meta_params(const lstm::LstmConfig& config);

MetaModel fit_meta(const OofMatrix& oof, const lstm::LstmConfig& config, std::size_t window);

// Mean over steps of 0.5 * (blend - target)^2 for one window, and its gradient.
double meta_loss(const lstm::LstmParams& params, std::span<const Triple> sequence, std::span<const double> targets);
lstm::ParamGrads meta_loss_gradient(const lstm::LstmParams& params, std::span<const Triple> sequence,
                                    std::span<const double> targets);

struct EnsembleConfig {
  BaseConfigs base;
  lstm::LstmConfig meta = default_meta();
  std::size_t k_folds = 5;
  std::size_t meta_window = 20;

  static lstm::LstmConfig default_meta();
};

struct EnsembleModel {
  EnsembleConfig config;
  BaseModels bases;
  MetaModel meta;
  std::vector<Triple> history;  // tail of the training OOF triples
  std::vector<FoldRange> folds;
  OofMatrix oof;
};

EnsembleModel fit_ensemble(const data::WindowedDataset& train, const EnsembleConfig& config, std::uint64_t seed);

struct EnsemblePrediction {
  std::vector<double> predictions;
  MetaWeights weights;
  std::vector<Triple> base;
};

EnsemblePrediction predict_ensemble(const EnsembleModel& model, const data::WindowedDataset& windows);

// Same as predict_ensemble for precomputed base predictions.
EnsemblePrediction blend(const EnsembleModel& model, std::vector<Triple> base);

// Container document plus member documents, keyed by file name. Member
// file names are `<stem>.<member>.json`; the container is `<stem>.json`.
std::map<std::string, std::string> save_ensemble(const EnsembleModel& model, std::string_view stem);
EnsembleModel load_ensemble(std::string_view container,
                            const std::function<std::string(const std::string&)>& read_member);

}  // namespace stackcast::ensemble
