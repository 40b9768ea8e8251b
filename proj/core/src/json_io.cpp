#include "stackcast/json_io.hpp"

#include <algorithm>
#include <cstring>

#include "stackcast/error.hpp"

namespace stackcast {

using nlohmann::json;

void reject_unknown_keys(const json& in, std::initializer_list<const char*> allowed, const char* context) {
  if (!in.is_object()) throw Error(ErrorCode::kConfigInvalid, std::string(context) + " must be a JSON object");
  for (const auto& item : in.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* key) { return item.key() == key; });
    if (!known) throw Error(ErrorCode::kConfigInvalid, "unknown key '" + item.key() + "' in " + context);
  }
}

namespace {

template <typename T>
void read_if_present(const json& in, const char* key, T& field) {
  if (const auto it = in.find(key); it != in.end()) {
    try {
      field = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfigInvalid, std::string("field '") + key + "': " + e.what());
    }
  }
}

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", m.data()}};
}

Matrix matrix_from_json(const json& in) {
  const auto rows = in.at("rows").get<std::size_t>();
  const auto cols = in.at("cols").get<std::size_t>();
  auto values = in.at("values").get<std::vector<double>>();
  if (values.size() != rows * cols) throw Error(ErrorCode::kFormatError, "matrix value count does not match shape");
  return Matrix(rows, cols, std::move(values));
}

}  // namespace

namespace gbdt {

void to_json(json& out, const GossConfig& config) {
  out = json{{"top_rate", config.top_rate},
             {"other_rate", config.other_rate},
             {"warmup_iterations", config.warmup_iterations}};
}

void from_json(const json& in, GossConfig& config) {
  reject_unknown_keys(in, {"top_rate", "other_rate", "warmup_iterations"}, "goss config");
  read_if_present(in, "top_rate", config.top_rate);
  read_if_present(in, "other_rate", config.other_rate);
  read_if_present(in, "warmup_iterations", config.warmup_iterations);
}

void to_json(json& out, const BoostConfig& config) {
  out = json{{"n_iterations", config.n_iterations},
             {"learning_rate", config.learning_rate},
             {"lambda", config.lambda},
             {"gamma", config.gamma},
             {"max_leaves", config.max_leaves},
             {"depth", config.depth},
             {"n_bins", config.n_bins},
             {"min_samples_leaf", config.min_samples_leaf},
             {"goss", config.goss ? json(*config.goss) : json(nullptr)},
             {"mode", std::string(to_string(config.mode))},
             {"seed", config.seed},
             {"bundle_features", config.bundle_features},
             {"conflict_budget", config.conflict_budget},
             {"categorical_features", config.categorical_features},
             {"ts_prior_weight", config.ts_prior_weight},
             {"ts_initial_prior", config.ts_initial_prior}};
}

void from_json(const json& in, BoostConfig& config) {
  reject_unknown_keys(in,
                      {"n_iterations", "learning_rate", "lambda", "gamma", "max_leaves", "depth", "n_bins",
                       "min_samples_leaf", "goss", "mode", "seed", "bundle_features", "conflict_budget",
                       "categorical_features", "ts_prior_weight", "ts_initial_prior", "n_threads"},
                      "gbdt config");
  read_if_present(in, "n_iterations", config.n_iterations);
  read_if_present(in, "learning_rate", config.learning_rate);
  read_if_present(in, "lambda", config.lambda);
  read_if_present(in, "gamma", config.gamma);
  read_if_present(in, "max_leaves", config.max_leaves);
  read_if_present(in, "depth", config.depth);
  read_if_present(in, "n_bins", config.n_bins);
  read_if_present(in, "min_samples_leaf", config.min_samples_leaf);
  if (const auto it = in.find("goss"); it != in.end()) {
    if (it->is_null()) {
      config.goss.reset();
    } else {
      GossConfig goss = config.goss.value_or(GossConfig{});
      from_json(*it, goss);
      config.goss = goss;
    }
  }
  if (const auto it = in.find("mode"); it != in.end()) config.mode = parse_growth_mode(it->get<std::string>());
  read_if_present(in, "seed", config.seed);
  read_if_present(in, "bundle_features", config.bundle_features);
  read_if_present(in, "conflict_budget", config.conflict_budget);
  read_if_present(in, "categorical_features", config.categorical_features);
  read_if_present(in, "ts_prior_weight", config.ts_prior_weight);
  read_if_present(in, "ts_initial_prior", config.ts_initial_prior);
  read_if_present(in, "n_threads", config.n_threads);
}

}  // namespace gbdt

namespace lstm {

void to_json(json& out, const LstmConfig& config) {
  out = json{{"hidden_size", config.hidden_size},       {"n_layers", config.n_layers},
             {"epochs", config.epochs},                 {"batch_size", config.batch_size},
             {"learning_rate", config.learning_rate},   {"gradient_clip_norm", config.gradient_clip_norm},
             {"seed", config.seed}};
}

void from_json(const json& in, LstmConfig& config) {
  reject_unknown_keys(in,
                      {"hidden_size", "n_layers", "epochs", "batch_size", "learning_rate", "gradient_clip_norm",
                       "seed"},
                      "lstm config");
  read_if_present(in, "hidden_size", config.hidden_size);
  read_if_present(in, "n_layers", config.n_layers);
  read_if_present(in, "epochs", config.epochs);
  read_if_present(in, "batch_size", config.batch_size);
  read_if_present(in, "learning_rate", config.learning_rate);
  read_if_present(in, "gradient_clip_norm", config.gradient_clip_norm);
  read_if_present(in, "seed", config.seed);
}

void to_json(json& out, const LstmParams& params) {
  json layers = json::array();
  for (const auto& layer : params.layers) {
    layers.push_back(json{{"w", matrix_to_json(layer.w)}, {"u", matrix_to_json(layer.u)}, {"b", layer.b}});
  }
  out = json{{"layers", layers}, {"head_w", matrix_to_json(params.head_w)}, {"head_b", params.head_b}};
}

void from_json(const json& in, LstmParams& params) {
  params.layers.clear();
  for (const auto& entry : in.at("layers")) {
    LayerParams layer{matrix_from_json(entry.at("w")), matrix_from_json(entry.at("u")),
                      entry.at("b").get<std::vector<double>>()};
    const std::size_t gates = layer.b.size();
    if (gates == 0 || gates % 4 != 0 || layer.w.rows() != gates || layer.u.rows() != gates ||
        layer.u.cols() != gates / 4) {
      throw Error(ErrorCode::kFormatError, "inconsistent LSTM layer shapes");
    }
    params.layers.push_back(std::move(layer));
  }
  params.head_w = matrix_from_json(in.at("head_w"));
  params.head_b = in.at("head_b").get<std::vector<double>>();
  if (params.layers.empty() || params.head_w.rows() != params.head_b.size() ||
      params.head_w.cols() != params.layers.back().hidden_size()) {
    throw Error(ErrorCode::kFormatError, "inconsistent LSTM head shape");
  }
}

}  // namespace lstm

namespace ensemble {

void to_json(json& out, const EnsembleConfig& config) {
  out = json{{"oblivious", config.base.oblivious}, {"leafwise", config.base.leafwise},
             {"lstm", config.base.lstm},           {"meta", config.meta},
             {"k_folds", config.k_folds},          {"meta_window", config.meta_window}};
}

void from_json(const json& in, EnsembleConfig& config) {
  reject_unknown_keys(in, {"oblivious", "leafwise", "lstm", "meta", "k_folds", "meta_window", "n_threads"},
                      "ensemble config");
  if (const auto it = in.find("oblivious"); it != in.end()) gbdt::from_json(*it, config.base.oblivious);
  if (const auto it = in.find("leafwise"); it != in.end()) gbdt::from_json(*it, config.base.leafwise);
  if (const auto it = in.find("lstm"); it != in.end()) lstm::from_json(*it, config.base.lstm);
  if (const auto it = in.find("meta"); it != in.end()) lstm::from_json(*it, config.meta);
  read_if_present(in, "k_folds", config.k_folds);
  read_if_present(in, "meta_window", config.meta_window);
  read_if_present(in, "n_threads", config.base.n_threads);
}

}  // namespace ensemble
}  // namespace stackcast
