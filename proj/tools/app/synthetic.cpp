#include "synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "stackcast/error.hpp"
#include "stackcast/random.hpp"

namespace stackcast::app {

namespace {

double round6(double x) {
  // + 0.0 turns -0.0 into 0.0.
  return std::round(x * 1e6) / 1e6 + 0.0;
}

std::string format_value(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_points < 2) throw Error(ErrorCode::kConfigInvalid, "synthetic n_points must be at least 2");
  if (!(period > 0.0)) throw Error(ErrorCode::kConfigInvalid, "synthetic period must be positive");
  if (!(noise >= 0.0)) throw Error(ErrorCode::kConfigInvalid, "synthetic noise must be non-negative");
  if (!std::isfinite(offset) || !std::isfinite(trend) || !std::isfinite(amplitude)) {
    throw Error(ErrorCode::kConfigInvalid, "synthetic parameters must be finite");
  }
}

data::TimeSeriesFrame generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_points;
  Rng noise_rng(mix_seed(spec.seed, 1));
  Rng spread_rng(mix_seed(spec.seed, 2));
  Rng volume_rng(mix_seed(spec.seed, 3));

  std::vector<double> open(n), high(n), low(n), close(n), volume(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double x = static_cast<double>(t);
    const double eps = spec.noise > 0.0 ? spec.noise * noise_rng.normal() : 0.0;
    close[t] = round6(spec.offset + spec.trend * x +
                      spec.amplitude * std::sin(2.0 * std::numbers::pi * x / spec.period) + eps);
  }
  for (std::size_t t = 0; t < n; ++t) {
    open[t] = t == 0 ? close[0] : close[t - 1];
    const double spread = 0.005 * std::abs(close[t]) * spread_rng.uniform();
    high[t] = round6(std::max(open[t], close[t]) + spread);
    low[t] = round6(std::min(open[t], close[t]) - spread);
    volume[t] = std::round(1e6 * std::exp(0.3 * volume_rng.normal()));
  }

  std::vector<data::Date> dates;
  dates.reserve(n);
  const std::chrono::sys_days start{std::chrono::year{2016} / std::chrono::January / 4};
  for (std::size_t t = 0; t < n; ++t) dates.emplace_back(start + std::chrono::days{static_cast<int>(t)});
  return data::TimeSeriesFrame(std::move(dates), {"open", "high", "low", "close", "volume"},
                               {std::move(open), std::move(high), std::move(low), std::move(close),
                                std::move(volume)},
                               "close");
}

std::string frame_to_csv(const data::TimeSeriesFrame& frame) {
  std::string out = "date";
  for (const auto& name : frame.names()) out += "," + name;
  out += "\n";
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    out += data::format_date(frame.timestamps()[r]);
    for (std::size_t c = 0; c < frame.n_columns(); ++c) out += "," + format_value(frame.column(c)[r]);
    out += "\n";
  }
  return out;
}

std::string synthetic_csv(const SyntheticSpec& spec) { return frame_to_csv(generate_synthetic(spec)); }

}  // namespace stackcast::app
