#include "stackcast/gbdt/booster.hpp"

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "stackcast/error.hpp"
#include "stackcast/json_io.hpp"
#include "stackcast/random.hpp"

namespace stackcast::gbdt {

using nlohmann::json;

void BoostConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfigInvalid, what); };
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) fail("learning_rate must lie in (0, 1]");
  if (!(lambda >= 0.0)) fail("lambda must be nonnegative");
  if (!(gamma >= 0.0)) fail("gamma must be nonnegative");
  if (max_leaves < 2) fail("max_leaves must be at least 2");
  if (depth < 1 || depth > 16) fail("depth must lie in [1, 16]");
  if (n_bins < 2) fail("n_bins must be at least 2");
  if (min_samples_leaf < 1) fail("min_samples_leaf must be positive");
  if (!(ts_prior_weight > 0.0)) fail("ts_prior_weight must be positive");
  if (goss) goss->validate();
}

double CategoryEncoding::encode(double code) const {
  const auto it = stats.find(std::llround(code));
  if (it == stats.end()) return prior;
  return (it->second.first + prior_weight * prior) / (static_cast<double>(it->second.second) + prior_weight);
}

double GbdtModel::predict(std::span<const double> row) const {
  if (row.size() != n_features) {
    throw Error(ErrorCode::kDimensionMismatch,
                "row has " + std::to_string(row.size()) + " features, model expects " + std::to_string(n_features));
  }
  std::span<const double> input = row;
  std::vector<double> encoded;
  if (!encodings.empty()) {
    encoded.assign(row.begin(), row.end());
    for (const auto& encoding : encodings) encoded[encoding.feature] = encoding.encode(row[encoding.feature]);
    input = encoded;
  }
  double value = base_prediction;
  for (const Tree& tree : trees) value += learning_rate * tree.predict(input);
  return value;
}

std::vector<double> GbdtModel::predict(const Matrix& rows) const {
  std::vector<double> out(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = predict(rows.row(r));
  return out;
}

namespace {

double mean_squared_residual(std::span<const double> predictions, std::span<const double> targets) {
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double r = targets[i] - predictions[i];
    total += r * r;
  }
  return total / static_cast<double>(targets.size());
}

}  // namespace

GbdtModel fit_gbdt(const Matrix& features, std::span<const double> targets, const BoostConfig& config,
                   TrainingTrace* trace) {
  config.validate();
  const std::size_t n = features.rows();
  if (n == 0) throw Error(ErrorCode::kEmpty, "training set is empty");
  if (targets.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, std::to_string(n) + " rows but " + std::to_string(targets.size()) + " targets");
  }
  if (n > UINT32_MAX) throw Error(ErrorCode::kConfigInvalid, "too many rows");

  GbdtModel model;
  model.config = config;
  model.learning_rate = config.learning_rate;
  model.n_features = features.cols();
  model.base_prediction = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);

  Matrix work = features;
  if (config.mode == GrowthMode::kOblivious && !config.categorical_features.empty()) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng permutation_rng(mix_seed(config.seed, 0x7e57));
    permutation_rng.shuffle(std::span<std::size_t>(order));
    for (const std::size_t f : config.categorical_features) {
      if (f >= features.cols()) throw Error(ErrorCode::kConfigInvalid, "categorical feature index out of range");
      std::vector<std::int64_t> codes(n);
      CategoryEncoding encoding{f, model.base_prediction, config.ts_prior_weight, {}};
      for (std::size_t r = 0; r < n; ++r) {
        codes[r] = std::llround(features(r, f));
        auto& [sum, count] = encoding.stats[codes[r]];
        sum += targets[r];
        count += 1;
      }
      const auto encoded = ordered_target_stats(codes, targets, config.ts_prior_weight, order, config.ts_initial_prior);
      for (std::size_t r = 0; r < n; ++r) work(r, f) = encoded[r];
      model.encodings.push_back(std::move(encoding));
    }
  }

  const BinnedMatrix binned = bin_features(work, config.n_bins);
  model.bin_edges = binned.edges;
  const std::vector<FeatureBundle> bundles = config.bundle_features
                                                 ? efb_bundle(binned.columns, config.conflict_budget)
                                                 : singleton_bundles(binned.columns);
  const BinColumns bundle_columns = encode_bundles(binned.columns, bundles);

  std::vector<double> predictions(n, model.base_prediction);
  std::vector<double> gradients(n);
  const std::vector<double> hessians(n, 1.0);
  std::vector<double> weights(n, 1.0);
  std::vector<std::uint32_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), std::uint32_t{0});
  Rng rng(config.seed);

  if (trace != nullptr) {
    trace->train_mse.clear();
    trace->train_mse.push_back(mean_squared_residual(predictions, targets));
  }

  for (std::size_t m = 0; m < config.n_iterations; ++m) {
    for (std::size_t i = 0; i < n; ++i) gradients[i] = predictions[i] - targets[i];

    GrowContext context;
    context.binned = &binned;
    context.bundle_columns = &bundle_columns;
    context.bundles = bundles;
    context.gradients = gradients;
    context.hessians = hessians;
    context.split = SplitParams{config.lambda, config.gamma, static_cast<std::int64_t>(config.min_samples_leaf)};
    context.n_threads = config.n_threads;

    GossSample sample;
    if (config.goss && m >= config.goss->warmup_iterations) {
      sample = goss_sample(gradients, *config.goss, rng);
      std::fill(weights.begin(), weights.end(), 0.0);
      for (std::size_t k = 0; k < sample.indices.size(); ++k) weights[sample.indices[k]] = sample.weights[k];
      context.rows = sample.indices;
    } else {
      std::fill(weights.begin(), weights.end(), 1.0);
      context.rows = all_rows;
    }
    context.weights = weights;

    Tree tree = config.mode == GrowthMode::kLeafwise ? grow_tree_leafwise(context, config.max_leaves)
                                                     : grow_tree_oblivious(context, config.depth);
    for (std::size_t i = 0; i < n; ++i) predictions[i] += model.learning_rate * tree.predict_binned(binned.columns, i);
    model.trees.push_back(std::move(tree));
    if (trace != nullptr) trace->train_mse.push_back(mean_squared_residual(predictions, targets));
  }
  return model;
}

std::string_view to_string(GrowthMode mode) { return mode == GrowthMode::kLeafwise ? "leafwise" : "oblivious"; }

GrowthMode parse_growth_mode(std::string_view text) {
  if (text == "leafwise") return GrowthMode::kLeafwise;
  if (text == "oblivious") return GrowthMode::kOblivious;
  throw Error(ErrorCode::kConfigInvalid, "unknown growth mode '" + std::string(text) + "'");
}

namespace {

constexpr int kGbdtFormatVersion = 1;

json tree_to_json(const Tree& tree) {
  json features = json::array(), thresholds = json::array(), bins = json::array(), lefts = json::array(),
       rights = json::array(), values = json::array();
  for (const TreeNode& node : tree.nodes) {
    features.push_back(node.feature);
    thresholds.push_back(node.threshold);
    bins.push_back(node.threshold_bin);
    lefts.push_back(node.left);
    rights.push_back(node.right);
    values.push_back(node.value);
  }
  return json{{"mode", to_string(tree.mode)}, {"feature", features}, {"threshold", thresholds},
              {"threshold_bin", bins},        {"left", lefts},       {"right", rights},
              {"value", values}};
}

Tree tree_from_json(const json& doc) {
  Tree tree;
  tree.mode = parse_growth_mode(doc.at("mode").get<std::string>());
  const auto& features = doc.at("feature");
  const std::size_t n = features.size();
  for (const char* key : {"threshold", "threshold_bin", "left", "right", "value"}) {
    if (doc.at(key).size() != n) throw Error(ErrorCode::kFormatError, std::string("tree array '") + key + "' length");
  }
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    TreeNode& node = tree.nodes[i];
    node.feature = features[i].get<int>();
    node.threshold = doc["threshold"][i].get<double>();
    node.threshold_bin = doc["threshold_bin"][i].get<BinIndex>();
    node.left = doc["left"][i].get<int>();
    node.right = doc["right"][i].get<int>();
    node.value = doc["value"][i].get<double>();
    if (!node.is_leaf() && (node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
                            node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n))) {
      throw Error(ErrorCode::kFormatError, "tree child index out of range");
    }
  }
  if (n == 0) throw Error(ErrorCode::kFormatError, "tree without nodes");
  return tree;
}

}  // namespace

std::string save_gbdt(const GbdtModel& model) {
  json doc;
  doc["format_version"] = kGbdtFormatVersion;
  doc["kind"] = "gbdt";
  doc["config"] = model.config;
  doc["base_prediction"] = model.base_prediction;
  doc["learning_rate"] = model.learning_rate;
  doc["n_features"] = model.n_features;
  doc["bin_edges"] = model.bin_edges;
  json encodings = json::array();
  for (const auto& encoding : model.encodings) {
    json codes = json::array(), sums = json::array(), counts = json::array();
    for (const auto& [code, stat] : encoding.stats) {
      codes.push_back(code);
      sums.push_back(stat.first);
      counts.push_back(stat.second);
    }
    encodings.push_back(json{{"feature", encoding.feature},
                             {"prior", encoding.prior},
                             {"prior_weight", encoding.prior_weight},
                             {"codes", codes},
                             {"sums", sums},
                             {"counts", counts}});
  }
  doc["encodings"] = encodings;
  json trees = json::array();
  for (const Tree& tree : model.trees) trees.push_back(tree_to_json(tree));
  doc["trees"] = trees;
  return doc.dump(1);
}

GbdtModel load_gbdt(std::string_view document) {
  try {
    const json doc = json::parse(document);
    if (doc.at("kind").get<std::string>() != "gbdt") throw Error(ErrorCode::kFormatError, "not a gbdt document");
    if (doc.at("format_version").get<int>() != kGbdtFormatVersion) {
      throw Error(ErrorCode::kFormatError, "unsupported gbdt format version");
    }
    GbdtModel model;
    model.config = doc.at("config").get<BoostConfig>();
    model.base_prediction = doc.at("base_prediction").get<double>();
    model.learning_rate = doc.at("learning_rate").get<double>();
    model.n_features = doc.at("n_features").get<std::size_t>();
    model.bin_edges = doc.at("bin_edges").get<std::vector<std::vector<double>>>();
    for (const auto& entry : doc.at("encodings")) {
      CategoryEncoding encoding;
      encoding.feature = entry.at("feature").get<std::size_t>();
      encoding.prior = entry.at("prior").get<double>();
      encoding.prior_weight = entry.at("prior_weight").get<double>();
      const auto& codes = entry.at("codes");
      for (std::size_t k = 0; k < codes.size(); ++k) {
        encoding.stats[codes[k].get<std::int64_t>()] = {entry.at("sums")[k].get<double>(),
                                                        entry.at("counts")[k].get<std::int64_t>()};
      }
      model.encodings.push_back(std::move(encoding));
    }
    for (const auto& entry : doc.at("trees")) {
      Tree tree = tree_from_json(entry);
      for (const TreeNode& node : tree.nodes) {
        if (!node.is_leaf() && static_cast<std::size_t>(node.feature) >= model.n_features) {
          throw Error(ErrorCode::kFormatError, "tree references feature beyond n_features");
        }
      }
      model.trees.push_back(std::move(tree));
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, e.what());
  }
}

}  // namespace stackcast::gbdt
