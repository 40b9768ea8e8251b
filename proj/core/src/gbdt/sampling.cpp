#include "stackcast/gbdt/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "stackcast/error.hpp"

namespace stackcast::gbdt {
namespace {

// ceil() that ignores representation error such as 0.2 * 10 = 2.0000000000000004.
std::size_t ceil_count(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n) - 1e-9));
}

}  // namespace

void GossConfig::validate() const {
  if (!(top_rate > 0.0 && top_rate < 1.0) || !(other_rate > 0.0 && other_rate < 1.0)) {
    throw Error(ErrorCode::kConfigInvalid, "GOSS rates must lie in (0, 1)");
  }
  if (top_rate + other_rate > 1.0) throw Error(ErrorCode::kConfigInvalid, "GOSS requires top_rate + other_rate <= 1");
}

GossSample goss_sample(std::span<const double> gradients, const GossConfig& config, Rng& rng) {
  config.validate();
  const std::size_t n = gradients.size();
  const std::size_t n_top = ceil_count(config.top_rate, n);
  const std::size_t n_other = ceil_count(config.other_rate, n);
  if (n == 0 || n_top + n_other > n) {
    throw Error(ErrorCode::kSampleBudgetExceedsData, std::to_string(n_top) + " + " + std::to_string(n_other) +
                                                         " samples requested from " + std::to_string(n) + " rows");
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), std::uint32_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return std::abs(gradients[a]) > std::abs(gradients[b]);
  });

  // Partial Fisher-Yates over the remainder.
  std::vector<std::uint32_t> rest(order.begin() + static_cast<std::ptrdiff_t>(n_top), order.end());
  std::sort(rest.begin(), rest.end());
  for (std::size_t k = 0; k < n_other; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.index(rest.size() - k));
    std::swap(rest[k], rest[j]);
  }

  const double amplification = config.amplification();
  std::vector<std::pair<std::uint32_t, double>> picked;
  picked.reserve(n_top + n_other);
  for (std::size_t k = 0; k < n_top; ++k) picked.emplace_back(order[k], 1.0);
  for (std::size_t k = 0; k < n_other; ++k) picked.emplace_back(rest[k], amplification);
  std::sort(picked.begin(), picked.end());

  GossSample sample;
  sample.indices.reserve(picked.size());
  sample.weights.reserve(picked.size());
  for (const auto& [index, weight] : picked) {
    sample.indices.push_back(index);
    sample.weights.push_back(weight);
  }
  return sample;
}

std::vector<double> ordered_target_stats(std::span<const std::int64_t> categories,
                                         std::span<const double> targets, double prior_weight,
                                         std::span<const std::size_t> order, double initial_prior) {
  const std::size_t n = categories.size();
  if (targets.size() != n || order.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "categories, targets and permutation must have equal length");
  }
  if (!(prior_weight > 0.0)) throw Error(ErrorCode::kConfigInvalid, "prior weight must be positive");
  std::vector<bool> seen(n, false);
  for (const std::size_t row : order) {
    if (row >= n || seen[row]) throw Error(ErrorCode::kConfigInvalid, "order is not a permutation of the rows");
    seen[row] = true;
  }

  std::vector<double> encoded(n);
  std::unordered_map<std::int64_t, std::pair<double, double>> running;  // category -> (sum, count)
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t row = order[k];
    const double prior = k == 0 ? initial_prior : total / static_cast<double>(k);
    auto& [sum, count] = running[categories[row]];
    encoded[row] = (sum + prior_weight * prior) / (count + prior_weight);
    sum += targets[row];
    count += 1.0;
    total += targets[row];
  }
  return encoded;
}

}  // namespace stackcast::gbdt
