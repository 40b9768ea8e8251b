#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stackcast/dataframe.hpp"

namespace stackcast::metrics {

double mae(std::span<const double> pred, std::span<const double> actual);
double mse(std::span<const double> pred, std::span<const double> actual);
double rmse(std::span<const double> pred, std::span<const double> actual);

// 1 - SS_res / SS_tot. Throws Error(kZeroVariance) for constant actuals.
double r2(std::span<const double> pred, std::span<const double> actual);

struct MetricsReport {
  std::string model_name;
  double r2 = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
  std::string error;  // non-empty when the model failed; metrics are then meaningless

  bool failed() const noexcept { return !error.empty(); }
};

MetricsReport compute_report(std::span<const double> pred, std::span<const double> actual, std::string model_name);

// Inverse-scales both vectors through the target column's range, then scores
// them in original units.
MetricsReport build_report(std::span<const double> pred, std::span<const double> actual, std::string model_name,
                           const data::ScalerParams& scaler, std::string_view target_column);

MetricsReport failed_report(std::string model_name, std::string error);

inline constexpr std::string_view kReportCsvHeader = "model,r2,mae,mse,rmse,n";

// CSV with kReportCsvHeader; failed rows carry ERROR in every metric column.
std::string reports_to_csv(std::span<const MetricsReport> reports);
std::string reports_to_json(std::span<const MetricsReport> reports);

}  // namespace stackcast::metrics
