#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "stackcast/dataframe.hpp"

namespace stackcast::app {

// close_t = offset + trend * t + amplitude * sin(2 pi t / period) + noise * N(0, 1)
struct SyntheticSpec {
  std::size_t n_points = 500;
  double offset = 100.0;
  double trend = 0.05;
  double amplitude = 10.0;
  double period = 50.0;
  double noise = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
  bool operator==(const SyntheticSpec&) const = default;
};

// Columns open, high, low, close, volume on consecutive days from 2016-01-04.
// Values are rounded to six decimals, so the frame equals what the CSV holds.
data::TimeSeriesFrame generate_synthetic(const SyntheticSpec& spec);
std::string synthetic_csv(const SyntheticSpec& spec);

std::string frame_to_csv(const data::TimeSeriesFrame& frame);

}  // namespace stackcast::app
