#include "stackcast/dataframe.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stackcast/error.hpp"

namespace stackcast::data {
namespace {

std::string_view trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  return text;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

double parse_cell(std::string_view cell) {
  if (cell.empty() || iequals(cell, "N/A") || iequals(cell, "NaN")) return kMissing;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || end != cell.data() + cell.size() || !std::isfinite(value)) return kMissing;
  return value;
}

}  // namespace

Date parse_date(std::string_view text) {
  text = trim(text);
  auto parse_int = [&](std::size_t offset, std::size_t width) {
    int value = 0;
    const char* first = text.data() + offset;
    const auto [end, ec] = std::from_chars(first, first + width, value);
    if (ec != std::errc() || end != first + width) {
      throw Error(ErrorCode::kParseError, "invalid date '" + std::string(text) + "'");
    }
    return value;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorCode::kParseError, "invalid date '" + std::string(text) + "'");
  }
  const Date date{std::chrono::year{parse_int(0, 4)},
                  std::chrono::month{static_cast<unsigned>(parse_int(5, 2))},
                  std::chrono::day{static_cast<unsigned>(parse_int(8, 2))}};
  if (!date.ok()) throw Error(ErrorCode::kParseError, "invalid date '" + std::string(text) + "'");
  return date;
}

std::string format_date(const Date& date) {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buffer;
}

TimeSeriesFrame::TimeSeriesFrame(std::vector<Date> timestamps, std::vector<std::string> names,
                                 std::vector<std::vector<double>> columns, std::string target_name)
    : timestamps_(std::move(timestamps)),
      names_(std::move(names)),
      columns_(std::move(columns)),
      target_(std::move(target_name)) {
  if (names_.size() != columns_.size()) {
    throw Error(ErrorCode::kLengthMismatch, "column names and column data differ in count");
  }
  for (std::size_t i = 1; i < timestamps_.size(); ++i) {
    if (timestamps_[i] == timestamps_[i - 1]) {
      throw Error(ErrorCode::kDuplicateTimestamp, format_date(timestamps_[i]));
    }
    if (timestamps_[i] < timestamps_[i - 1]) {
      throw Error(ErrorCode::kParseError, "timestamps must be strictly increasing");
    }
  }
  for (std::size_t c = 0; c < names_.size(); ++c) {
    if (columns_[c].size() != timestamps_.size()) {
      throw Error(ErrorCode::kLengthMismatch, "column '" + names_[c] + "' length differs from timestamps");
    }
    for (std::size_t d = 0; d < c; ++d) {
      if (names_[d] == names_[c]) throw Error(ErrorCode::kSchemaMismatch, "duplicate column '" + names_[c] + "'");
    }
  }
  if (!has_column(target_)) throw Error(ErrorCode::kMissingColumn, "target column '" + target_ + "'");
}

std::size_t TimeSeriesFrame::index_of(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(ErrorCode::kUnknownColumn, std::string(name));
  return static_cast<std::size_t>(it - names_.begin());
}

bool TimeSeriesFrame::has_column(std::string_view name) const noexcept {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

bool TimeSeriesFrame::has_missing() const noexcept {
  return std::any_of(columns_.begin(), columns_.end(), [](const std::vector<double>& column) {
    return std::any_of(column.begin(), column.end(), is_missing);
  });
}

TimeSeriesFrame TimeSeriesFrame::select(std::span<const std::string> names) const {
  std::vector<std::vector<double>> columns;
  columns.reserve(names.size());
  for (const auto& name : names) columns.push_back(columns_[index_of(name)]);
  return TimeSeriesFrame(timestamps_, std::vector<std::string>(names.begin(), names.end()),
                         std::move(columns), target_);
}

TimeSeriesFrame TimeSeriesFrame::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows()) throw Error(ErrorCode::kEmptyRange, "row slice out of bounds");
  std::vector<std::vector<double>> columns;
  for (const auto& column : columns_) columns.emplace_back(column.begin() + begin, column.begin() + end);
  return TimeSeriesFrame({timestamps_.begin() + begin, timestamps_.begin() + end}, names_,
                         std::move(columns), target_);
}

bool TimeSeriesFrame::operator==(const TimeSeriesFrame& other) const {
  if (timestamps_ != other.timestamps_ || names_ != other.names_ || target_ != other.target_) return false;
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    for (std::size_t r = 0; r < rows(); ++r) {
      const double a = columns_[c][r];
      const double b = other.columns_[c][r];
      if (!(a == b || (is_missing(a) && is_missing(b)))) return false;
    }
  }
  return true;
}

std::vector<std::string> default_schema() { return {"open", "high", "low", "close", "volume"}; }

TimeSeriesFrame parse_csv(std::string_view text, std::span<const std::string> schema, std::string target_name) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(start, end - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!trim(line).empty()) lines.push_back(line);
      start = end + 1;
    }
  }
  if (lines.empty()) throw Error(ErrorCode::kEmptyFile, "no header row");

  const auto header = split_fields(lines.front());
  std::size_t date_index = header.size();
  std::vector<std::string> names;
  std::vector<std::size_t> source_index;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "date") {
      date_index = i;
    } else {
      names.emplace_back(header[i]);
      source_index.push_back(i);
    }
  }
  if (date_index == header.size()) throw Error(ErrorCode::kMissingColumn, "date");
  for (const auto& required : schema) {
    if (std::find(names.begin(), names.end(), required) == names.end()) {
      throw Error(ErrorCode::kMissingColumn, required);
    }
  }
  if (lines.size() == 1) throw Error(ErrorCode::kEmptyFile, "header present but no data rows");

  struct Row {
    Date date;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto fields = split_fields(lines[l]);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(l + 1) + " has " +
                                              std::to_string(fields.size()) + " fields, expected " +
                                              std::to_string(header.size()));
    }
    Row row{parse_date(fields[date_index]), {}};
    row.values.reserve(names.size());
    for (const std::size_t index : source_index) row.values.push_back(parse_cell(fields[index]));
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].date == rows[r - 1].date) {
      throw Error(ErrorCode::kDuplicateTimestamp, format_date(rows[r].date));
    }
  }

  std::vector<Date> timestamps;
  std::vector<std::vector<double>> columns(names.size(), std::vector<double>(rows.size()));
  timestamps.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    timestamps.push_back(rows[r].date);
    for (std::size_t c = 0; c < names.size(); ++c) columns[c][r] = rows[r].values[c];
  }
  return TimeSeriesFrame(std::move(timestamps), std::move(names), std::move(columns), std::move(target_name));
}

TimeSeriesFrame load_csv(const std::filesystem::path& path, std::span<const std::string> schema,
                         std::string target_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), schema, std::move(target_name));
}

MissingPolicy parse_missing_policy(std::string_view text) {
  if (text == "forward_fill") return MissingPolicy::kForwardFill;
  if (text == "drop_row") return MissingPolicy::kDropRow;
  throw Error(ErrorCode::kConfigInvalid, "unknown missing-value policy '" + std::string(text) + "'");
}

std::string_view to_string(MissingPolicy policy) {
  return policy == MissingPolicy::kForwardFill ? "forward_fill" : "drop_row";
}

TimeSeriesFrame handle_missing(const TimeSeriesFrame& frame, MissingPolicy policy) {
  const std::size_t n_rows = frame.rows();
  std::size_t first_complete = 0;
  for (std::size_t c = 0; c < frame.n_columns(); ++c) {
    const auto column = frame.column(c);
    const auto observed = std::find_if_not(column.begin(), column.end(), is_missing);
    if (observed == column.end()) throw Error(ErrorCode::kAllMissingColumn, frame.names()[c]);
    first_complete = std::max(first_complete, static_cast<std::size_t>(observed - column.begin()));
  }

  std::vector<std::size_t> keep;
  std::vector<std::vector<double>> columns(frame.n_columns());
  if (policy == MissingPolicy::kDropRow) {
    for (std::size_t r = 0; r < n_rows; ++r) {
      bool complete = true;
      for (std::size_t c = 0; c < frame.n_columns() && complete; ++c) complete = !is_missing(frame.column(c)[r]);
      if (complete) keep.push_back(r);
    }
    for (std::size_t c = 0; c < frame.n_columns(); ++c) {
      for (const std::size_t r : keep) columns[c].push_back(frame.column(c)[r]);
    }
  } else {
    for (std::size_t r = first_complete; r < n_rows; ++r) keep.push_back(r);
    for (std::size_t c = 0; c < frame.n_columns(); ++c) {
      const auto column = frame.column(c);
      // The last observation at or before first_complete seeds the fill.
      double last = kMissing;
      for (std::size_t r = 0; r <= first_complete; ++r) {
        if (!is_missing(column[r])) last = column[r];
      }
      for (const std::size_t r : keep) {
        if (!is_missing(column[r])) last = column[r];
        columns[c].push_back(last);
      }
    }
  }

  std::vector<Date> timestamps;
  timestamps.reserve(keep.size());
  for (const std::size_t r : keep) timestamps.push_back(frame.timestamps()[r]);
  return TimeSeriesFrame(std::move(timestamps), frame.names(), std::move(columns), frame.target_name());
}

const ColumnRange& ScalerParams::range(std::string_view name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorCode::kUnknownColumn, std::string(name));
  return ranges[static_cast<std::size_t>(it - names.begin())];
}

ScalerParams fit_scaler(const TimeSeriesFrame& frame, RowRange train_rows) {
  if (train_rows.begin >= train_rows.end || train_rows.end > frame.rows()) {
    throw Error(ErrorCode::kEmptyRange, "scaler training rows [" + std::to_string(train_rows.begin) + ", " +
                                            std::to_string(train_rows.end) + ") invalid for " +
                                            std::to_string(frame.rows()) + " rows");
  }
  ScalerParams params;
  params.names = frame.names();
  for (std::size_t c = 0; c < frame.n_columns(); ++c) {
    const auto column = frame.column(c).subspan(train_rows.begin, train_rows.end - train_rows.begin);
    ColumnRange range{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const double x : column) {
      if (is_missing(x)) continue;
      range.min = std::min(range.min, x);
      range.max = std::max(range.max, x);
    }
    if (range.min > range.max) throw Error(ErrorCode::kEmptyRange, "no observed values in '" + frame.names()[c] + "'");
    params.ranges.push_back(range);
  }
  return params;
}

TimeSeriesFrame apply_scaler(const TimeSeriesFrame& frame, const ScalerParams& params) {
  std::vector<std::vector<double>> columns;
  columns.reserve(frame.n_columns());
  for (std::size_t c = 0; c < frame.n_columns(); ++c) {
    const ColumnRange& range = params.range(frame.names()[c]);
    const auto source = frame.column(c);
    std::vector<double> scaled(source.size());
    std::transform(source.begin(), source.end(), scaled.begin(), [&](double x) { return range.scale(x); });
    columns.push_back(std::move(scaled));
  }
  return TimeSeriesFrame(frame.timestamps(), frame.names(), std::move(columns), frame.target_name());
}

std::vector<double> invert_scaler(std::span<const double> values, const ScalerParams& params,
                                  std::string_view column) {
  const ColumnRange& range = params.range(column);
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(), [&](double y) { return range.invert(y); });
  return out;
}

WindowedDataset WindowedDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw Error(ErrorCode::kEmptyRange, "sample slice out of bounds");
  WindowedDataset out;
  out.lookback = lookback;
  out.n_features = n_features;
  out.feature_names = feature_names;
  out.target_feature = target_feature;
  const std::size_t width = window_width();
  out.inputs.assign(inputs.begin() + begin * width, inputs.begin() + end * width);
  out.targets.assign(targets.begin() + begin, targets.begin() + end);
  out.sample_timestamps.assign(sample_timestamps.begin() + begin, sample_timestamps.begin() + end);
  out.target_rows.assign(target_rows.begin() + begin, target_rows.begin() + end);
  return out;
}

WindowedDataset make_windows(const TimeSeriesFrame& frame, std::size_t lookback) {
  if (lookback == 0) throw Error(ErrorCode::kConfigInvalid, "lookback must be positive");
  if (frame.rows() <= lookback) {
    throw Error(ErrorCode::kFrameTooShort, std::to_string(frame.rows()) + " rows cannot supply a window of " +
                                               std::to_string(lookback) + " plus a target");
  }
  WindowedDataset out;
  out.lookback = lookback;
  out.n_features = frame.n_columns();
  out.feature_names = frame.names();
  out.target_feature = frame.index_of(frame.target_name());
  const std::size_t n_samples = frame.rows() - lookback;
  out.inputs.resize(n_samples * lookback * out.n_features);
  const auto target = frame.target();
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (std::size_t step = 0; step < lookback; ++step) {
      for (std::size_t f = 0; f < out.n_features; ++f) {
        out.inputs[(i * lookback + step) * out.n_features + f] = frame.column(f)[i + step];
      }
    }
    out.targets.push_back(target[i + lookback]);
    out.sample_timestamps.push_back(frame.timestamps()[i + lookback]);
    out.target_rows.push_back(i + lookback);
  }
  return out;
}

std::pair<WindowedDataset, WindowedDataset> chronological_split(const WindowedDataset& dataset,
                                                                double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::kConfigInvalid, "train fraction must lie in (0, 1)");
  }
  if (dataset.empty()) throw Error(ErrorCode::kDegenerateSplit, "empty dataset");
  // The tolerance keeps products such as 100 * 0.29 from flooring one short.
  const auto n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(dataset.size()) * train_fraction + 1e-9));
  if (n_train == 0 || n_train == dataset.size()) {
    throw Error(ErrorCode::kDegenerateSplit, std::to_string(dataset.size()) + " samples at fraction " +
                                                 std::to_string(train_fraction) + " leave one side empty");
  }
  return {dataset.slice(0, n_train), dataset.slice(n_train, dataset.size())};
}

}  // namespace stackcast::data
