#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "run_config.hpp"
#include "stackcast/dataframe.hpp"
#include "stackcast/ensemble.hpp"
#include "stackcast/metrics.hpp"

namespace stackcast::app {

// Cleaned frame in original units plus its scaled windows. Windows cover
// every forecastable step; the first n_train are the training split.
struct PreparedData {
  data::TimeSeriesFrame frame;
  data::ScalerParams scaler;
  data::WindowedDataset windows;
  std::size_t n_train = 0;
  std::string source;

  data::WindowedDataset train() const { return windows.slice(0, n_train); }
  data::WindowedDataset test() const { return windows.slice(n_train, windows.size()); }
};

PreparedData prepare_data(const RunConfig& config);

// One row per forecastable step, in original units.
struct PredictionTable {
  std::vector<data::Date> dates;
  std::vector<double> actual;
  std::vector<double> predicted;
  ensemble::MetaWeights weights;  // empty unless the model is an ensemble

  std::string to_csv() const;
};

struct ModelRun {
  std::string name;
  std::map<std::string, std::string> files;  // file name -> content
  PredictionTable table;
  metrics::MetricsReport report;  // test split
  double seconds = 0.0;
};

// Fits `name` on the training split and predicts every window.
ModelRun run_model(const std::string& name, const RunConfig& config, const PreparedData& data);
// Same, but a failure is returned as a failed report with no files.
ModelRun try_run_model(const std::string& name, const RunConfig& config, const PreparedData& data);

// Reports sorted by r2 descending; failed rows last, in listed order.
std::vector<metrics::MetricsReport> sort_reports(std::vector<metrics::MetricsReport> reports);

// Ensemble versus the best successful base model; null if either is missing.
nlohmann::json improvement_summary(const std::vector<metrics::MetricsReport>& reports);

struct CommandResult {
  std::map<std::string, std::string> files;  // relative to the output directory
  std::vector<ModelRun> runs;
  std::vector<metrics::MetricsReport> reports;
};

CommandResult train_command(const RunConfig& config);
CommandResult compare_command(const RunConfig& config);

// Loads a saved pipeline document and predicts every forecastable step of
// the CSV at `data_path`.
struct LoadedPrediction {
  std::string model_name;
  PredictionTable table;
};
LoadedPrediction predict_command(const std::filesystem::path& pipeline_path, const std::filesystem::path& data_path);

// Writes every file under `dir` through a temporary name and a rename.
void write_files(const std::filesystem::path& dir, const std::map<std::string, std::string>& files);
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Entry point of the command-line tool. Returns the process exit code:
// 0 success, 1 runtime or data error, 2 config error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stackcast::app
