#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stackcast::data {

using Date = std::chrono::year_month_day;

// Strict YYYY-MM-DD. Throws Error(kParseError) on anything else.
Date parse_date(std::string_view text);
std::string format_date(const Date& date);

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double value) { return std::isnan(value); }

// Timestamped numeric columns plus the name of the column to forecast.
// Construction validates: strictly increasing timestamps, equal column
// lengths, unique column names, target present.
class TimeSeriesFrame {
 public:
  TimeSeriesFrame() = default;
  TimeSeriesFrame(std::vector<Date> timestamps, std::vector<std::string> names,
                  std::vector<std::vector<double>> columns, std::string target_name);

  std::size_t rows() const noexcept { return timestamps_.size(); }
  std::size_t n_columns() const noexcept { return names_.size(); }

  const std::vector<Date>& timestamps() const noexcept { return timestamps_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& target_name() const noexcept { return target_; }

  std::size_t index_of(std::string_view name) const;
  bool has_column(std::string_view name) const noexcept;

  std::span<const double> column(std::size_t index) const { return columns_.at(index); }
  std::span<const double> column(std::string_view name) const { return columns_[index_of(name)]; }
  std::span<const double> target() const { return column(target_); }

  bool has_missing() const noexcept;

  // Keeps the listed columns in the listed order. The target must be kept.
  TimeSeriesFrame select(std::span<const std::string> names) const;

  // Keeps rows [begin, end).
  TimeSeriesFrame slice_rows(std::size_t begin, std::size_t end) const;

  bool operator==(const TimeSeriesFrame& other) const;

 private:
  std::vector<Date> timestamps_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::string target_;
};

// Required columns of a price CSV, besides the date column.
std::vector<std::string> default_schema();

// Reads a comma-delimited CSV with a `date` column. Every non-date header
// column is loaded as a numeric column; `schema` lists columns that must be
// present. Unparseable numeric cells (including empty, N/A and NaN) become
// missing markers. Rows are sorted by date.
TimeSeriesFrame load_csv(const std::filesystem::path& path, std::span<const std::string> schema,
                         std::string target_name = "close");

// Same contract as load_csv, reading from an in-memory document.
TimeSeriesFrame parse_csv(std::string_view text, std::span<const std::string> schema,
                          std::string target_name = "close");

enum class MissingPolicy { kForwardFill, kDropRow };

MissingPolicy parse_missing_policy(std::string_view text);
std::string_view to_string(MissingPolicy policy);

TimeSeriesFrame handle_missing(const TimeSeriesFrame& frame, MissingPolicy policy);

struct ColumnRange {
  double min = 0.0;
  double max = 0.0;

  bool degenerate() const noexcept { return max == min; }
  double scale(double x) const noexcept { return degenerate() ? 0.0 : (x - min) / (max - min); }
  double invert(double y) const noexcept { return degenerate() ? min : y * (max - min) + min; }
};

// Min-max parameters learned on training rows, one entry per column name.
struct ScalerParams {
  std::vector<std::string> names;
  std::vector<ColumnRange> ranges;

  const ColumnRange& range(std::string_view name) const;
  bool operator==(const ScalerParams&) const = default;
};

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

ScalerParams fit_scaler(const TimeSeriesFrame& frame, RowRange train_rows);

// Rows outside the fitted range may scale outside [0, 1]; they are not clipped.
TimeSeriesFrame apply_scaler(const TimeSeriesFrame& frame, const ScalerParams& params);
std::vector<double> invert_scaler(std::span<const double> values, const ScalerParams& params,
                                  std::string_view column);

// Supervised samples: window i holds rows [i, i + lookback) of every column,
// row-major as [sample][step][feature]; its target is the target column at
// row i + lookback.
struct WindowedDataset {
  std::size_t lookback = 0;
  std::size_t n_features = 0;
  std::vector<std::string> feature_names;
  std::size_t target_feature = 0;
  std::vector<double> inputs;
  std::vector<double> targets;
  std::vector<Date> sample_timestamps;
  std::vector<std::size_t> target_rows;

  std::size_t size() const noexcept { return targets.size(); }
  bool empty() const noexcept { return targets.empty(); }
  std::size_t window_width() const noexcept { return lookback * n_features; }

  std::span<const double> window(std::size_t sample) const {
    return std::span<const double>(inputs).subspan(sample * window_width(), window_width());
  }
  double at(std::size_t sample, std::size_t step, std::size_t feature) const {
    return inputs[(sample * lookback + step) * n_features + feature];
  }

  WindowedDataset slice(std::size_t begin, std::size_t end) const;
};

WindowedDataset make_windows(const TimeSeriesFrame& frame, std::size_t lookback);

std::pair<WindowedDataset, WindowedDataset> chronological_split(const WindowedDataset& dataset,
                                                                double train_fraction);

}  // namespace stackcast::data
