#include "stackcast/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include <nlohmann/json.hpp>

#include "stackcast/error.hpp"
#include "stackcast/json_io.hpp"
#include "stackcast/random.hpp"

namespace stackcast::ensemble {

using nlohmann::json;

gbdt::BoostConfig BaseConfigs::default_oblivious() {
  gbdt::BoostConfig config;
  config.mode = gbdt::GrowthMode::kOblivious;
  config.n_iterations = 100;
  config.learning_rate = 0.1;
  config.lambda = 1.0;
  config.depth = 4;
  config.min_samples_leaf = 3;
  return config;
}

gbdt::BoostConfig BaseConfigs::default_leafwise() {
  gbdt::BoostConfig config;
  config.mode = gbdt::GrowthMode::kLeafwise;
  config.n_iterations = 100;
  config.learning_rate = 0.1;
  config.lambda = 1.0;
  config.max_leaves = 15;
  config.min_samples_leaf = 5;
  config.goss = gbdt::GossConfig{0.2, 0.1, 0};
  config.bundle_features = true;
  return config;
}

lstm::LstmConfig EnsembleConfig::default_meta() {
  lstm::LstmConfig config;
  config.hidden_size = 8;
  config.n_layers = 2;
  config.epochs = 30;
  config.batch_size = 16;
  config.learning_rate = 0.01;
  return config;
}

std::uint64_t oblivious_seed(std::uint64_t seed) { return mix_seed(seed, 1); }
std::uint64_t leafwise_seed(std::uint64_t seed) { return mix_seed(seed, 2); }
std::uint64_t lstm_seed(std::uint64_t seed) { return mix_seed(seed, 3); }
std::uint64_t meta_seed(std::uint64_t seed) { return mix_seed(seed, 4); }

BaseConfigs seeded(BaseConfigs configs, std::uint64_t seed) {
  configs.oblivious.seed = oblivious_seed(seed);
  configs.leafwise.seed = leafwise_seed(seed);
  configs.lstm.seed = lstm_seed(seed);
  return configs;
}

Matrix flatten_windows(const data::WindowedDataset& windows) {
  return Matrix(windows.size(), windows.window_width(), windows.inputs);
}

std::vector<Triple> BaseModels::predict(const data::WindowedDataset& windows) const {
  const Matrix flat = flatten_windows(windows);
  const auto cb = oblivious.predict(flat);
  const auto lgb = leafwise.predict(flat);
  const auto rnn = lstm.predict(windows);
  std::vector<Triple> out(windows.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Triple{cb[i], rnn[i], lgb[i]};
  return out;
}

BaseModels fit_base_models(const data::WindowedDataset& train, const BaseConfigs& configs) {
  if (configs.oblivious.mode != gbdt::GrowthMode::kOblivious || configs.leafwise.mode != gbdt::GrowthMode::kLeafwise) {
    throw Error(ErrorCode::kConfigInvalid, "base configs must pair an oblivious and a leaf-wise booster");
  }
  const Matrix flat = flatten_windows(train);
  auto fit_oblivious = [&] { return gbdt::fit_gbdt(flat, train.targets, configs.oblivious); };
  auto fit_leafwise = [&] { return gbdt::fit_gbdt(flat, train.targets, configs.leafwise); };
  auto fit_rnn = [&] { return lstm::fit_lstm(train, configs.lstm); };
  if (configs.n_threads <= 1) return BaseModels{fit_oblivious(), fit_leafwise(), fit_rnn()};
  auto oblivious = std::async(std::launch::async, fit_oblivious);
  auto leafwise = std::async(std::launch::async, fit_leafwise);
  lstm::LstmModel rnn = fit_rnn();
  return BaseModels{oblivious.get(), leafwise.get(), std::move(rnn)};
}

std::vector<FoldRange> make_folds(std::size_t n_samples, std::size_t k_folds) {
  if (k_folds < 2) throw Error(ErrorCode::kConfigInvalid, "k_folds must be at least 2");
  if (n_samples < k_folds) {
    throw Error(ErrorCode::kTooFewSamples,
                std::to_string(n_samples) + " samples cannot fill " + std::to_string(k_folds) + " folds");
  }
  std::vector<FoldRange> folds;
  const std::size_t base = n_samples / k_folds;
  const std::size_t extra = n_samples % k_folds;
  std::size_t begin = 0;
  for (std::size_t j = 0; j < k_folds; ++j) {
    const std::size_t size = base + (j < extra ? 1 : 0);
    folds.push_back(FoldRange{j + 1, begin, begin + size});
    begin += size;
  }
  return folds;
}

OofMatrix oof_predictions(const data::WindowedDataset& train, const BaseConfigs& configs, std::size_t k_folds,
                          std::uint64_t seed) {
  OofMatrix oof;
  oof.folds = make_folds(train.size(), k_folds);
  const BaseConfigs fold_configs = seeded(configs, seed);
  for (std::size_t j = 1; j < oof.folds.size(); ++j) {
    const FoldRange& fold = oof.folds[j];
    const auto history = train.slice(0, fold.begin);
    const auto held_out = train.slice(fold.begin, fold.end);
    const BaseModels models = fit_base_models(history, fold_configs);
    const auto preds = models.predict(held_out);
    for (std::size_t k = 0; k < preds.size(); ++k) {
      oof.rows.push_back(OofRow{preds[k], held_out.targets[k], fold.fold, fold.begin + k, held_out.sample_timestamps[k]});
    }
  }
  return oof;
}

WeightRow softmax_weights(double z_cb, double z_lstm, double z_lgb) {
  const double top = std::max({z_cb, z_lstm, z_lgb});
  const double e_cb = std::exp(z_cb - top);
  const double e_lstm = std::exp(z_lstm - top);
  const double e_lgb = std::exp(z_lgb - top);
  const double total = e_cb + e_lstm + e_lgb;
  return WeightRow{e_cb / total, e_lstm / total, e_lgb / total};
}

double combine(const WeightRow& weights, const Triple& preds) {
  const double lo = std::min({preds.cb, preds.lstm, preds.lgb});
  const double hi = std::max({preds.cb, preds.lstm, preds.lgb});
  if (lo == hi) return lo;
  const double blended = weights.alpha * preds.cb + weights.beta * preds.lstm + weights.gamma * preds.lgb;
  return std::clamp(blended, lo, hi);
}

std::vector<double> combine(std::span<const WeightRow> weights, std::span<const Triple> preds) {
  if (weights.size() != preds.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(weights.size()) + " weight rows for " + std::to_string(preds.size()) + " steps");
  }
  std::vector<double> out(preds.size());
  for (std::size_t t = 0; t < preds.size(); ++t) out[t] = combine(weights[t], preds[t]);
  return out;
}

namespace {

Matrix triple_matrix(std::span<const Triple> sequence) {
  Matrix m(sequence.size(), 3);
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    m(t, 0) = sequence[t].cb;
    m(t, 1) = sequence[t].lstm;
    m(t, 2) = sequence[t].lgb;
  }
  return m;
}

WeightRow weights_from_logits(const Matrix& logits, std::size_t t) {
  return softmax_weights(logits(t, 0), logits(t, 1), logits(t, 2));
}

double raw_blend(const WeightRow& w, const Triple& p) { return w.alpha * p.cb + w.beta * p.lstm + w.gamma * p.lgb; }

void add_into(lstm::ParamGrads& dst, const lstm::ParamGrads& src) {
  std::vector<std::span<double>> out;
  dst.for_each_tensor([&](std::span<double> t) { out.push_back(t); });
  std::size_t k = 0;
  src.for_each_tensor([&](std::span<const double> t) {
    for (std::size_t j = 0; j < t.size(); ++j) out[k][j] += t[j];
    ++k;
  });
}

void scale(lstm::ParamGrads& grads, double factor) {
  grads.for_each_tensor([&](std::span<double> t) {
    for (double& v : t) v *= factor;
  });
}

}  // namespace

double meta_loss(const lstm::LstmParams& params, std::span<const Triple> sequence, std::span<const double> targets) {
  if (sequence.size() != targets.size() || sequence.empty()) {
    throw Error(ErrorCode::kLengthMismatch, "meta sequence and targets must be non-empty and aligned");
  }
  const auto forward = lstm::lstm_forward(params, triple_matrix(sequence));
  double loss = 0.0;
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    const double r = raw_blend(weights_from_logits(forward.outputs, t), sequence[t]) - targets[t];
    loss += 0.5 * r * r;
  }
  return loss / static_cast<double>(sequence.size());
}

lstm::ParamGrads meta_loss_gradient(const lstm::LstmParams& params, std::span<const Triple> sequence,
                                    std::span<const double> targets) {
  if (sequence.size() != targets.size() || sequence.empty()) {
    throw Error(ErrorCode::kLengthMismatch, "meta sequence and targets must be non-empty and aligned");
  }
  const auto forward = lstm::lstm_forward(params, triple_matrix(sequence));
  const double steps = static_cast<double>(sequence.size());
  Matrix d_logits(sequence.size(), 3);
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    const WeightRow w = weights_from_logits(forward.outputs, t);
    const Triple& p = sequence[t];
    const double blended = raw_blend(w, p);
    const double r = (blended - targets[t]) / steps;
    // d blend / d z_k = w_k (p_k - blend) for softmax weights.
    d_logits(t, 0) = r * w.alpha * (p.cb - blended);
    d_logits(t, 1) = r * w.beta * (p.lstm - blended);
    d_logits(t, 2) = r * w.gamma * (p.lgb - blended);
  }
  return lstm::lstm_backward(params, forward.cache, d_logits);
}

lstm::LstmParams init_meta_params(const lstm::LstmConfig& config) {
  lstm::LstmParams params = lstm::init_params(3, config.hidden_size, config.n_layers, 3, config.seed);
  std::fill(params.head_w.values().begin(), params.head_w.values().end(), 0.0);
  std::fill(params.head_b.begin(), params.head_b.end(), 0.0);
  return params;
}

MetaWeights MetaModel::weights(std::span<const Triple> sequence) const {
  if (sequence.empty()) return {};
  const auto forward = lstm::lstm_forward(params, triple_matrix(sequence));
  MetaWeights out(sequence.size());
  for (std::size_t t = 0; t < sequence.size(); ++t) out[t] = weights_from_logits(forward.outputs, t);
  return out;
}

MetaWeights MetaModel::windowed_weights(std::span<const Triple> sequence, std::size_t n_targets) const {
  if (n_targets > sequence.size()) throw Error(ErrorCode::kLengthMismatch, "more targets than sequence steps");
  MetaWeights out;
  out.reserve(n_targets);
  for (std::size_t t = sequence.size() - n_targets; t < sequence.size(); ++t) {
    const std::size_t first = t + 1 >= window ? t + 1 - window : 0;
    const auto forward = lstm::lstm_forward(params, triple_matrix(sequence.subspan(first, t + 1 - first)));
    out.push_back(weights_from_logits(forward.outputs, forward.outputs.rows() - 1));
  }
  return out;
}

MetaModel fit_meta(const OofMatrix& oof, const lstm::LstmConfig& config, std::size_t window) {
  if (oof.rows.empty()) throw Error(ErrorCode::kEmptyOof, "no out-of-fold rows to train the meta-learner on");
  if (config.n_layers != 2) throw Error(ErrorCode::kConfigInvalid, "the meta-learner is a two-layer LSTM");
  if (window < 1) throw Error(ErrorCode::kConfigInvalid, "meta window must be positive");
  config.validate();

  MetaModel model;
  model.config = config;
  model.window = window;
  model.params = init_meta_params(config);

  std::vector<Triple> sequence;
  std::vector<double> targets;
  for (const auto& row : oof.rows) {
    sequence.push_back(row.preds);
    targets.push_back(row.target);
  }
  // One training window ends at every OOF step; early ones are shorter.
  const std::size_t n = sequence.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(config.seed, 1));
  lstm::AdamState adam = lstm::AdamState::for_params(model.params);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      lstm::ParamGrads grads = model.params;
      scale(grads, 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t last = order[k];
        const std::size_t first = last + 1 >= window ? last + 1 - window : 0;
        const auto seq = std::span<const Triple>(sequence).subspan(first, last + 1 - first);
        const auto tgt = std::span<const double>(targets).subspan(first, last + 1 - first);
        epoch_loss += meta_loss(model.params, seq, tgt);
        add_into(grads, meta_loss_gradient(model.params, seq, tgt));
      }
      scale(grads, 1.0 / static_cast<double>(end - start));
      lstm::adam_step(model.params, std::move(grads), adam, config.learning_rate, config.gradient_clip_norm);
    }
    model.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }
  return model;
}

EnsembleModel fit_ensemble(const data::WindowedDataset& train, const EnsembleConfig& config, std::uint64_t seed) {
  EnsembleModel model;
  model.config = config;
  model.config.base = seeded(config.base, seed);
  model.config.meta.seed = meta_seed(seed);
  model.oof = oof_predictions(train, config.base, config.k_folds, seed);
  model.folds = model.oof.folds;
  model.meta = fit_meta(model.oof, model.config.meta, config.meta_window);
  model.bases = fit_base_models(train, model.config.base);
  const std::size_t keep = std::min(config.meta_window, model.oof.rows.size());
  for (std::size_t k = model.oof.rows.size() - keep; k < model.oof.rows.size(); ++k) {
    model.history.push_back(model.oof.rows[k].preds);
  }
  return model;
}

EnsemblePrediction blend(const EnsembleModel& model, std::vector<Triple> base) {
  EnsemblePrediction out;
  std::vector<Triple> sequence = model.history;
  sequence.insert(sequence.end(), base.begin(), base.end());
  out.weights = model.meta.windowed_weights(sequence, base.size());
  out.predictions = combine(out.weights, base);
  out.base = std::move(base);
  return out;
}

EnsemblePrediction predict_ensemble(const EnsembleModel& model, const data::WindowedDataset& windows) {
  const std::size_t expected = model.bases.oblivious.n_features;
  if (windows.window_width() != expected || windows.n_features != model.bases.lstm.params.input_size()) {
    throw Error(ErrorCode::kDimensionMismatch, "windows do not match the training feature layout");
  }
  return blend(model, model.bases.predict(windows));
}

namespace {

constexpr int kEnsembleFormatVersion = 1;

// Rows as [cb, lstm, lgb, target, fold, sample, date].
json oof_to_json(std::span<const OofRow> rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back(json::array({r.preds.cb, r.preds.lstm, r.preds.lgb, r.target, r.fold, r.sample,
                               data::format_date(r.timestamp)}));
  }
  return out;
}

std::vector<OofRow> oof_from_json(const json& doc) {
  std::vector<OofRow> rows;
  for (const auto& r : doc) {
    if (!r.is_array() || r.size() != 7) throw Error(ErrorCode::kFormatError, "malformed out-of-fold row");
    rows.push_back(OofRow{{r[0].get<double>(), r[1].get<double>(), r[2].get<double>()},
                          r[3].get<double>(),
                          r[4].get<std::size_t>(),
                          r[5].get<std::size_t>(),
                          data::parse_date(r[6].get<std::string>())});
  }
  return rows;
}

json triples_to_json(std::span<const Triple> triples) {
  json out = json::array();
  for (const auto& t : triples) out.push_back(json::array({t.cb, t.lstm, t.lgb}));
  return out;
}

std::vector<Triple> triples_from_json(const json& in) {
  std::vector<Triple> out;
  for (const auto& entry : in) {
    if (entry.size() != 3) throw Error(ErrorCode::kFormatError, "triple must have three entries");
    out.push_back(Triple{entry[0].get<double>(), entry[1].get<double>(), entry[2].get<double>()});
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> save_ensemble(const EnsembleModel& model, std::string_view stem) {
  const std::string base(stem);
  std::map<std::string, std::string> files;
  const std::string cb_name = base + ".cb.json";
  const std::string lgb_name = base + ".lgb.json";
  const std::string lstm_name = base + ".lstm.json";
  const std::string meta_name = base + ".meta.json";
  files[cb_name] = gbdt::save_gbdt(model.bases.oblivious);
  files[lgb_name] = gbdt::save_gbdt(model.bases.leafwise);
  files[lstm_name] = lstm::save_lstm(model.bases.lstm);
  files[meta_name] = json{{"format_version", kEnsembleFormatVersion},
                          {"kind", "meta"},
                          {"config", model.meta.config},
                          {"window", model.meta.window},
                          {"params", model.meta.params},
                          {"epoch_losses", model.meta.epoch_losses}}
                         .dump(1);

  json folds = json::array();
  for (const auto& fold : model.folds) {
    folds.push_back(json{{"fold", fold.fold}, {"begin", fold.begin}, {"end", fold.end}});
  }
  json container{{"format_version", kEnsembleFormatVersion},
                 {"kind", "ensemble"},
                 {"k_folds", model.config.k_folds},
                 {"meta_window", model.config.meta_window},
                 {"members", {{"cb", cb_name}, {"lgb", lgb_name}, {"lstm", lstm_name}, {"meta", meta_name}}},
                 {"folds", folds},
                 {"history", triples_to_json(model.history)},
                 {"oof", oof_to_json(model.oof.rows)}};
  files[base + ".json"] = container.dump(1);
  return files;
}

EnsembleModel load_ensemble(std::string_view container,
                            const std::function<std::string(const std::string&)>& read_member) {
  try {
    const json doc = json::parse(container);
    if (doc.at("kind").get<std::string>() != "ensemble") throw Error(ErrorCode::kFormatError, "not an ensemble document");
    if (doc.at("format_version").get<int>() != kEnsembleFormatVersion) {
      throw Error(ErrorCode::kFormatError, "unsupported ensemble format version");
    }
    EnsembleModel model;
    model.config.k_folds = doc.at("k_folds").get<std::size_t>();
    model.config.meta_window = doc.at("meta_window").get<std::size_t>();
    const auto& members = doc.at("members");
    model.bases.oblivious = gbdt::load_gbdt(read_member(members.at("cb").get<std::string>()));
    model.bases.leafwise = gbdt::load_gbdt(read_member(members.at("lgb").get<std::string>()));
    model.bases.lstm = lstm::load_lstm(read_member(members.at("lstm").get<std::string>()));
    const json meta = json::parse(read_member(members.at("meta").get<std::string>()));
    if (meta.at("kind").get<std::string>() != "meta") throw Error(ErrorCode::kFormatError, "not a meta document");
    model.meta.config = meta.at("config").get<lstm::LstmConfig>();
    model.meta.window = meta.at("window").get<std::size_t>();
    model.meta.params = meta.at("params").get<lstm::LstmParams>();
    model.meta.epoch_losses = meta.at("epoch_losses").get<std::vector<double>>();
    model.config.base.oblivious = model.bases.oblivious.config;
    model.config.base.leafwise = model.bases.leafwise.config;
    model.config.base.lstm = model.bases.lstm.config;
    model.config.meta = model.meta.config;
    for (const auto& fold : doc.at("folds")) {
      model.folds.push_back(FoldRange{fold.at("fold").get<std::size_t>(), fold.at("begin").get<std::size_t>(),
                                      fold.at("end").get<std::size_t>()});
    }
    model.history = triples_from_json(doc.at("history"));
    model.oof.folds = model.folds;
    model.oof.rows = oof_from_json(doc.at("oof"));
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, e.what());
  }
}

}  // namespace stackcast::ensemble
