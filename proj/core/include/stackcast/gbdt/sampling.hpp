#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stackcast/random.hpp"

namespace stackcast::gbdt {

// Gradient-based one-side sampling parameters: keep the top `top_rate`
// fraction by |gradient|, sample `other_rate` of all rows from the rest.
struct GossConfig {
  double top_rate = 0.2;
  double other_rate = 0.1;
  std::size_t warmup_iterations = 0;

  double amplification() const noexcept { return (1.0 - top_rate) / other_rate; }
  void validate() const;
  bool operator==(const GossConfig&) const = default;
};

struct GossSample {
  std::vector<std::uint32_t> indices;  // ascending
  std::vector<double> weights;         // aligned with indices
};

// Top ceil(a*n) rows by |g| get weight 1; ceil(b*n) rows drawn uniformly
// without replacement from the remainder get weight (1-a)/b.
GossSample goss_sample(std::span<const double> gradients, const GossConfig& config, Rng& rng);

// Leakage-free target encoding. `order` lists row indices in processing
// order; each row is encoded from the rows before it only:
//   (sum of earlier same-category targets + w * prior) / (earlier count + w)
// where prior is the mean of all earlier targets, or `initial_prior` for the
// first row.
std::vector<double> ordered_target_stats(std::span<const std::int64_t> categories,
                                         std::span<const double> targets, double prior_weight,
                                         std::span<const std::size_t> order, double initial_prior);

}  // namespace stackcast::gbdt
