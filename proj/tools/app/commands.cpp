#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>

#include "stackcast/error.hpp"
#include "stackcast/gbdt/booster.hpp"
#include "stackcast/json_io.hpp"
#include "stackcast/lstm.hpp"

namespace stackcast::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kPipelineFormatVersion = 1;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json scaler_to_json(const data::ScalerParams& scaler) {
  json ranges = json::array();
  for (const auto& r : scaler.ranges) ranges.push_back(json::array({r.min, r.max}));
  return json{{"names", scaler.names}, {"ranges", ranges}};
}

data::ScalerParams scaler_from_json(const json& doc) {
  data::ScalerParams scaler;
  scaler.names = doc.at("names").get<std::vector<std::string>>();
  for (const auto& r : doc.at("ranges")) scaler.ranges.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
  if (scaler.names.size() != scaler.ranges.size()) throw Error(ErrorCode::kFormatError, "scaler size mismatch");
  return scaler;
}

json report_to_json(const metrics::MetricsReport& r) {
  if (r.failed()) return json{{"model", r.model_name}, {"error", r.error}};
  return json{{"model", r.model_name}, {"r2", r.r2}, {"mae", r.mae}, {"mse", r.mse}, {"rmse", r.rmse}, {"n", r.n}};
}

// Frame cleaning and column selection shared by training and prediction.
data::TimeSeriesFrame clean_frame(const data::TimeSeriesFrame& raw, data::MissingPolicy missing,
                                  const std::vector<std::string>& features) {
  for (const auto& name : features) {
    if (!raw.has_column(name)) throw Error(ErrorCode::kSchemaMismatch, "data has no column '" + name + "'");
  }
  const data::TimeSeriesFrame selected = features.empty() ? raw : raw.select(features);
  return data::handle_missing(selected, missing);
}

PredictionTable make_table(const data::TimeSeriesFrame& frame, const data::ScalerParams& scaler,
                           const data::WindowedDataset& windows, std::span<const double> scaled_predictions) {
  PredictionTable table;
  table.predicted = data::invert_scaler(scaled_predictions, scaler, frame.target_name());
  const auto target = frame.target();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    table.dates.push_back(windows.sample_timestamps[i]);
    table.actual.push_back(target[windows.target_rows[i]]);
  }
  return table;
}

struct Fitted {
  std::map<std::string, std::string> model_files;
  std::vector<double> predictions;
  ensemble::MetaWeights weights;
};

Fitted fit_and_predict(const std::string& name, const RunConfig& config, const PreparedData& data) {
  const std::uint64_t seed = config.run_seed();
  const ensemble::EnsembleConfig resolved = config.effective_ensemble();
  const ensemble::BaseConfigs bases = ensemble::seeded(resolved.base, seed);
  const auto train = data.train();
  Fitted out;
  const std::string stem = name + ".model";
  if (name == "gbdt-oblivious" || name == "gbdt-leafwise") {
    const auto& boost = name == "gbdt-oblivious" ? bases.oblivious : bases.leafwise;
    const auto model = gbdt::fit_gbdt(ensemble::flatten_windows(train), train.targets, boost);
    out.predictions = model.predict(ensemble::flatten_windows(data.windows));
    out.model_files[stem + ".json"] = gbdt::save_gbdt(model);
  } else if (name == "lstm") {
    const auto model = lstm::fit_lstm(train, bases.lstm);
    out.predictions = model.predict(data.windows);
    out.model_files[stem + ".json"] = lstm::save_lstm(model);
  } else if (name == "ensemble") {
    const auto model = ensemble::fit_ensemble(train, resolved, seed);
    auto prediction = ensemble::predict_ensemble(model, data.windows);
    out.predictions = std::move(prediction.predictions);
    out.weights = std::move(prediction.weights);
    out.model_files = ensemble::save_ensemble(model, stem);
  } else {
    throw Error(ErrorCode::kConfigInvalid, "unknown model '" + name + "'");
  }
  return out;
}

std::string pipeline_document(const std::string& name, const RunConfig& config, const PreparedData& data) {
  const json doc{{"format_version", kPipelineFormatVersion},
                 {"kind", "pipeline"},
                 {"model", name},
                 {"model_file", name + ".model.json"},
                 {"lookback", data.windows.lookback},
                 {"target", data.frame.target_name()},
                 {"features", data.frame.names()},
                 {"missing", std::string(data::to_string(config.missing))},
                 {"scaler", scaler_to_json(data.scaler)},
                 {"seed", config.run_seed()},
                 {"config_hash", config_hash(config)}};
  return doc.dump(1) + "\n";
}

json data_summary(const PreparedData& data) {
  return json{{"source", data.source},
              {"rows", data.frame.rows()},
              {"windows", data.windows.size()},
              {"train_windows", data.n_train},
              {"test_windows", data.windows.size() - data.n_train},
              {"first_test_date", data::format_date(data.windows.sample_timestamps[data.n_train])}};
}

// With keep_going, a failing model becomes a failed report instead of an exception.
std::vector<ModelRun> run_models(const std::vector<std::string>& names, const RunConfig& config,
                                 const PreparedData& data, bool keep_going) {
  auto one = [&](const std::string& name) {
    return keep_going ? try_run_model(name, config, data) : run_model(name, config, data);
  };
  std::vector<ModelRun> runs;
  if (config.threads > 1 && names.size() > 1) {
    std::vector<std::future<ModelRun>> pending;
    for (const auto& name : names) pending.push_back(std::async(std::launch::async, one, name));
    for (auto& f : pending) runs.push_back(f.get());
  } else {
    for (const auto& name : names) runs.push_back(one(name));
  }
  return runs;
}

// Deterministic part first; wall-clock figures sit in their own section.
std::string manifest_document(const std::string& command, const RunConfig& config, const PreparedData& data,
                              const std::vector<ModelRun>& runs, const json& extra, double total_seconds) {
  json models = json::array();
  json timings = json::object();
  for (const auto& run : runs) {
    json files = json::array();
    for (const auto& [file, content] : run.files) files.push_back(file);
    models.push_back(json{{"name", run.name}, {"files", files}, {"metrics", report_to_json(run.report)}});
    timings[run.name] = run.seconds;
  }
  json doc{{"format_version", 1},
           {"command", command},
           {"config", config_to_json(config)},
           {"config_hash", config_hash(config)},
           {"seed", config.run_seed()},
           {"data", data_summary(data)},
           {"models", models}};
  for (const auto& [key, value] : extra.items()) doc[key] = value;
  doc["wallclock"] = json{{"threads", config.threads}, {"total_seconds", total_seconds}, {"model_seconds", timings}};
  return doc.dump(1) + "\n";
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

PreparedData prepare_data(const RunConfig& config) {
  config.validate();
  PreparedData out;
  data::TimeSeriesFrame raw;
  if (config.data) {
    raw = data::load_csv(*config.data, std::span<const std::string>(&config.target, 1), config.target);
    out.source = *config.data;
  } else {
    raw = generate_synthetic(*config.synthetic);
    out.source = "synthetic";
  }
  out.frame = clean_frame(raw, config.missing, config.features);
  if (out.frame.rows() <= config.lookback) {
    throw Error(ErrorCode::kFrameTooShort, "data has " + std::to_string(out.frame.rows()) +
                                               " usable rows; lookback " + std::to_string(config.lookback) +
                                               " needs at least " + std::to_string(config.lookback + 1));
  }
  // Split on unscaled windows first so the scaler sees training rows only:
  // the inputs and targets of the first n_train windows.
  const auto unscaled = data::make_windows(out.frame, config.lookback);
  out.n_train = data::chronological_split(unscaled, config.train_fraction).first.size();
  out.scaler = data::fit_scaler(out.frame, {0, out.n_train + config.lookback});
  out.windows = data::make_windows(data::apply_scaler(out.frame, out.scaler), config.lookback);
  return out;
}

std::string PredictionTable::to_csv() const {
  std::string out = weights.empty() ? "date,actual,predicted\n" : "date,actual,predicted,alpha,beta,gamma\n";
  for (std::size_t i = 0; i < dates.size(); ++i) {
    out += data::format_date(dates[i]) + "," + format_double(actual[i]) + "," + format_double(predicted[i]);
    if (!weights.empty()) {
      out += "," + format_double(weights[i].alpha) + "," + format_double(weights[i].beta) + "," +
             format_double(weights[i].gamma);
    }
    out += "\n";
  }
  return out;
}

ModelRun run_model(const std::string& name, const RunConfig& config, const PreparedData& data) {
  ModelRun run;
  run.name = name;
  const auto start = std::chrono::steady_clock::now();
  Fitted fitted = fit_and_predict(name, config, data);
  run.table = make_table(data.frame, data.scaler, data.windows, fitted.predictions);
  run.table.weights = std::move(fitted.weights);
  const auto test = data.test();
  const auto pred = std::span<const double>(fitted.predictions).subspan(data.n_train);
  run.report = metrics::build_report(pred, test.targets, name, data.scaler, data.frame.target_name());
  run.files = std::move(fitted.model_files);
  run.files[name + ".json"] = pipeline_document(name, config, data);
  run.files[name + ".predictions.csv"] = run.table.to_csv();
  run.seconds = seconds_since(start);
  return run;
}

ModelRun try_run_model(const std::string& name, const RunConfig& config, const PreparedData& data) {
  const auto start = std::chrono::steady_clock::now();
  try {
    return run_model(name, config, data);
  } catch (const std::exception& e) {
    ModelRun run;
    run.name = name;
    run.report = metrics::failed_report(name, e.what());
    run.seconds = seconds_since(start);
    return run;
  }
}

std::vector<metrics::MetricsReport> sort_reports(std::vector<metrics::MetricsReport> reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
    if (a.failed() != b.failed()) return !a.failed();
    return !a.failed() && a.r2 > b.r2;
  });
  return reports;
}

json improvement_summary(const std::vector<metrics::MetricsReport>& reports) {
  const metrics::MetricsReport* ens = nullptr;
  const metrics::MetricsReport* best_r2 = nullptr;
  const metrics::MetricsReport* best_mae = nullptr;
  const metrics::MetricsReport* best_rmse = nullptr;
  for (const auto& r : reports) {
    if (r.failed()) continue;
    if (r.model_name == "ensemble") {
      ens = &r;
      continue;
    }
    if (!best_r2 || r.r2 > best_r2->r2) best_r2 = &r;
    if (!best_mae || r.mae < best_mae->mae) best_mae = &r;
    if (!best_rmse || r.rmse < best_rmse->rmse) best_rmse = &r;
  }
  if (!ens || !best_r2) return nullptr;
  auto reduction = [](double base, double ours) { return base > 0.0 ? 100.0 * (base - ours) / base : 0.0; };
  return json{{"ensemble_r2", ens->r2},
              {"best_base_by_r2", best_r2->model_name},
              {"best_base_r2", best_r2->r2},
              {"r2_gain", ens->r2 - best_r2->r2},
              {"best_base_by_mae", best_mae->model_name},
              {"mae_reduction_percent", reduction(best_mae->mae, ens->mae)},
              {"best_base_by_rmse", best_rmse->model_name},
              {"rmse_reduction_percent", reduction(best_rmse->rmse, ens->rmse)}};
}

CommandResult train_command(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const PreparedData data = prepare_data(config);
  CommandResult result;
  result.runs = run_models(config.models, config, data, false);
  for (const auto& run : result.runs) {
    result.files.insert(run.files.begin(), run.files.end());
    result.reports.push_back(run.report);
  }
  if (config.synthetic) result.files["data.csv"] = frame_to_csv(generate_synthetic(*config.synthetic));
  result.files["manifest.json"] = manifest_document("train", config, data, result.runs, json::object(),
                                                    seconds_since(start));
  return result;
}

CommandResult compare_command(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig resolved = config;
  if (std::find(resolved.models.begin(), resolved.models.end(), "ensemble") == resolved.models.end()) {
    resolved.models.push_back("ensemble");
  }
  if (resolved.models.size() < 2) throw Error(ErrorCode::kConfigInvalid, "compare needs at least two models");
  const PreparedData data = prepare_data(resolved);
  CommandResult result;
  result.runs = run_models(resolved.models, resolved, data, true);
  std::vector<metrics::MetricsReport> reports;
  for (const auto& run : result.runs) {
    result.files.insert(run.files.begin(), run.files.end());
    reports.push_back(run.report);
  }
  result.reports = sort_reports(reports);
  result.files["comparison.csv"] = metrics::reports_to_csv(result.reports);
  result.files["comparison.json"] = metrics::reports_to_json(result.reports);
  if (resolved.synthetic) result.files["data.csv"] = frame_to_csv(generate_synthetic(*resolved.synthetic));
  const json extra{{"improvement", improvement_summary(result.reports)}};
  result.files["manifest.json"] = manifest_document("compare", resolved, data, result.runs, extra,
                                                    seconds_since(start));
  return result;
}

LoadedPrediction predict_command(const fs::path& pipeline_path, const fs::path& data_path) {
  const std::string text = read_file(pipeline_path);
  json doc;
  std::string name, model_file, target, missing;
  std::vector<std::string> features;
  std::size_t lookback = 0;
  data::ScalerParams scaler;
  try {
    doc = json::parse(text);
    if (doc.at("kind").get<std::string>() != "pipeline" || doc.at("format_version").get<int>() != kPipelineFormatVersion) {
      throw Error(ErrorCode::kFormatError, pipeline_path.string() + " is not a pipeline document");
    }
    name = doc.at("model").get<std::string>();
    model_file = doc.at("model_file").get<std::string>();
    target = doc.at("target").get<std::string>();
    missing = doc.at("missing").get<std::string>();
    features = doc.at("features").get<std::vector<std::string>>();
    lookback = doc.at("lookback").get<std::size_t>();
    scaler = scaler_from_json(doc.at("scaler"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, pipeline_path.string() + ": " + e.what());
  }

  const auto raw = data::load_csv(data_path, {}, target);
  const auto frame = clean_frame(raw, data::parse_missing_policy(missing), features);
  if (frame.rows() <= lookback) {
    throw Error(ErrorCode::kFrameTooShort, data_path.string() + " has " + std::to_string(frame.rows()) +
                                               " usable rows; forecasting needs at least lookback + 1 = " +
                                               std::to_string(lookback + 1));
  }
  const auto windows = data::make_windows(data::apply_scaler(frame, scaler), lookback);

  const fs::path dir = pipeline_path.parent_path();
  const std::string model_text = read_file(dir / model_file);
  LoadedPrediction out;
  out.model_name = name;
  std::vector<double> predictions;
  ensemble::MetaWeights weights;
  if (name == "gbdt-oblivious" || name == "gbdt-leafwise") {
    const auto model = gbdt::load_gbdt(model_text);
    if (model.n_features != windows.window_width()) {
      throw Error(ErrorCode::kSchemaMismatch, "data does not match the model's feature layout");
    }
    predictions = model.predict(ensemble::flatten_windows(windows));
  } else if (name == "lstm") {
    const auto model = lstm::load_lstm(model_text);
    if (model.params.input_size() != windows.n_features) {
      throw Error(ErrorCode::kSchemaMismatch, "data does not match the model's feature layout");
    }
    predictions = model.predict(windows);
  } else if (name == "ensemble") {
    const auto model =
        ensemble::load_ensemble(model_text, [&](const std::string& member) { return read_file(dir / member); });
    auto prediction = ensemble::predict_ensemble(model, windows);
    predictions = std::move(prediction.predictions);
    weights = std::move(prediction.weights);
  } else {
    throw Error(ErrorCode::kFormatError, "unknown model kind '" + name + "'");
  }
  out.table = make_table(frame, scaler, windows, predictions);
  out.table.weights = std::move(weights);
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

void write_files(const fs::path& dir, const std::map<std::string, std::string>& files) {
  for (const auto& [name, content] : files) write_file_atomic(dir / name, content);
}

}  // namespace stackcast::app
