#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stackcast/dataframe.hpp"
#include "stackcast/matrix.hpp"
#include "stackcast/random.hpp"

namespace stackcast::testing {

inline std::filesystem::path fixture_path(const std::string& name) {
  return std::filesystem::path(STACKCAST_FIXTURE_DIR) / name;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Matrix column_matrix(const std::vector<double>& values) { return Matrix(values.size(), 1, values); }

// Consecutive calendar days starting at 2016-01-04.
inline std::vector<data::Date> consecutive_dates(std::size_t n) {
  using namespace std::chrono;
  std::vector<data::Date> out;
  const sys_days start = sys_days{year{2016} / January / 4};
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(start + days{static_cast<int>(i)});
  return out;
}

inline data::TimeSeriesFrame single_column_frame(const std::vector<double>& values, const std::string& name = "close") {
  return data::TimeSeriesFrame(consecutive_dates(values.size()), {name}, {values}, name);
}

}  // namespace stackcast::testing
