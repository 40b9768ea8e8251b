#include "stackcast/metrics.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "stackcast/error.hpp"

namespace stackcast::metrics {
namespace {

void check_inputs(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(pred.size()) + " predictions vs " + std::to_string(actual.size()) + " actuals");
  }
  if (pred.empty()) throw Error(ErrorCode::kEmpty, "no samples to score");
}

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> actual) {
  check_inputs(pred, actual);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += std::abs(pred[i] - actual[i]);
  return total / static_cast<double>(pred.size());
}

double mse(std::span<const double> pred, std::span<const double> actual) {
  check_inputs(pred, actual);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - actual[i];
    total += d * d;
  }
  return total / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> actual) { return std::sqrt(mse(pred, actual)); }

double r2(std::span<const double> pred, std::span<const double> actual) {
  check_inputs(pred, actual);
  if (actual.size() < 2) throw Error(ErrorCode::kEmpty, "r2 needs at least two samples");
  double mean = 0.0;
  for (const double y : actual) mean += y;
  mean /= static_cast<double>(actual.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (actual[i] - pred[i]) * (actual[i] - pred[i]);
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
  }
  if (ss_tot == 0.0) throw Error(ErrorCode::kZeroVariance, "actual values are constant");
  return 1.0 - ss_res / ss_tot;
}

MetricsReport compute_report(std::span<const double> pred, std::span<const double> actual, std::string model_name) {
  MetricsReport report;
  report.model_name = std::move(model_name);
  report.r2 = r2(pred, actual);
  report.mae = mae(pred, actual);
  report.mse = mse(pred, actual);
  report.rmse = std::sqrt(report.mse);
  report.n = pred.size();
  return report;
}

MetricsReport build_report(std::span<const double> pred, std::span<const double> actual, std::string model_name,
                           const data::ScalerParams& scaler, std::string_view target_column) {
  const auto pred_units = data::invert_scaler(pred, scaler, target_column);
  const auto actual_units = data::invert_scaler(actual, scaler, target_column);
  return compute_report(pred_units, actual_units, std::move(model_name));
}

MetricsReport failed_report(std::string model_name, std::string error) {
  MetricsReport report;
  report.model_name = std::move(model_name);
  report.error = error.empty() ? "unknown error" : std::move(error);
  return report;
}

std::string reports_to_csv(std::span<const MetricsReport> reports) {
  std::string out(kReportCsvHeader);
  out += '\n';
  for (const auto& report : reports) {
    out += report.model_name;
    if (report.failed()) {
      out += ",ERROR,ERROR,ERROR,ERROR,0\n";
      continue;
    }
    for (const double value : {report.r2, report.mae, report.mse, report.rmse}) {
      out += ',';
      out += format_double(value);
    }
    out += ',' + std::to_string(report.n) + '\n';
  }
  return out;
}

std::string reports_to_json(std::span<const MetricsReport> reports) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& report : reports) {
    if (report.failed()) {
      rows.push_back({{"model", report.model_name}, {"error", report.error}});
    } else {
      rows.push_back({{"model", report.model_name},
                      {"r2", report.r2},
                      {"mae", report.mae},
                      {"mse", report.mse},
                      {"rmse", report.rmse},
                      {"n", report.n}});
    }
  }
  return rows.dump(2);
}

}  // namespace stackcast::metrics
