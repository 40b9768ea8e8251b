#include "stackcast/gbdt/histogram.hpp"

#include <algorithm>
#include <limits>
#include <thread>

#include "stackcast/error.hpp"

namespace stackcast::gbdt {

HistogramSet::HistogramSet(std::span<const std::size_t> n_bins) {
  offsets_.reserve(n_bins.size() + 1);
  offsets_.push_back(0);
  for (const std::size_t n : n_bins) offsets_.push_back(offsets_.back() + n);
  bins_.assign(offsets_.back(), BinStats{});
}

HistogramSet& HistogramSet::operator-=(const HistogramSet& other) {
  if (other.bins_.size() != bins_.size()) throw Error(ErrorCode::kDimensionMismatch, "histogram layouts differ");
  for (std::size_t i = 0; i < bins_.size(); ++i) bins_[i] -= other.bins_[i];
  return *this;
}

HistogramSet& HistogramSet::operator+=(const HistogramSet& other) {
  if (other.bins_.size() != bins_.size()) throw Error(ErrorCode::kDimensionMismatch, "histogram layouts differ");
  for (std::size_t i = 0; i < bins_.size(); ++i) bins_[i] += other.bins_[i];
  return *this;
}

HistogramSet build_histograms(const BinColumns& columns, std::span<const double> gradients,
                              std::span<const double> hessians, std::span<const double> weights,
                              std::span<const std::uint32_t> indices, std::size_t n_threads) {
  if (gradients.size() != columns.n_rows || hessians.size() != columns.n_rows || weights.size() != columns.n_rows) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient, hessian and weight arrays must match the row count");
  }
  HistogramSet histograms(columns.n_bins);

  auto fill_columns = [&](std::size_t first, std::size_t last) {
    for (std::size_t c = first; c < last; ++c) {
      const auto& bins = columns.bins[c];
      auto out = histograms.column(c);
      for (const std::uint32_t i : indices) {
        BinStats& cell = out[bins[i]];
        cell.grad += weights[i] * gradients[i];
        cell.hess += weights[i] * hessians[i];
        cell.count += 1;
      }
    }
  };

  const std::size_t n_columns = columns.n_columns();
  // Thread start-up dominates on small nodes.
  const std::size_t workers = std::min(n_threads, n_columns);
  if (workers <= 1 || indices.size() * n_columns < 8192) {
    fill_columns(0, n_columns);
    return histograms;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n_columns + workers - 1) / workers;
  for (std::size_t first = 0; first < n_columns; first += chunk) {
    pool.emplace_back(fill_columns, first, std::min(n_columns, first + chunk));
  }
  return histograms;
}

BinStats sum_stats(std::span<const double> gradients, std::span<const double> hessians,
                   std::span<const double> weights, std::span<const std::uint32_t> indices) {
  BinStats total;
  for (const std::uint32_t i : indices) {
    total.grad += weights[i] * gradients[i];
    total.hess += weights[i] * hessians[i];
    total.count += 1;
  }
  return total;
}

std::vector<std::vector<BinStats>> expand_histograms(const HistogramSet& bundle_hist,
                                                     std::span<const FeatureBundle> bundles,
                                                     std::span<const std::size_t> feature_n_bins,
                                                     const BinStats& node_total) {
  std::vector<std::vector<BinStats>> features(feature_n_bins.size());
  for (std::size_t b = 0; b < bundles.size(); ++b) {
    const auto column = bundle_hist.column(b);
    const FeatureBundle& bundle = bundles[b];
    for (std::size_t k = 0; k < bundle.members.size(); ++k) {
      const std::size_t feature = bundle.members[k];
      auto& hist = features[feature];
      hist.assign(feature_n_bins[feature], BinStats{});
      BinStats present;
      for (std::size_t bin = 1; bin < hist.size(); ++bin) {
        hist[bin] = column[bundle.offsets[k] + bin - 1];
        present += hist[bin];
      }
      hist[0] = node_total;
      hist[0] -= present;
    }
  }
  return features;
}

double split_score(const BinStats& left, const BinStats& right, const BinStats& parent, double lambda) {
  const double hl = left.hess + lambda;
  const double hr = right.hess + lambda;
  const double hp = parent.hess + lambda;
  if (hl <= 0.0 || hr <= 0.0 || hp <= 0.0) return -std::numeric_limits<double>::infinity();
  return 0.5 * (left.grad * left.grad / hl + right.grad * right.grad / hr - parent.grad * parent.grad / hp);
}

double leaf_value(const BinStats& stats, double lambda) {
  const double denominator = stats.hess + lambda;
  return denominator > 0.0 ? -stats.grad / denominator : 0.0;
}

std::optional<SplitCandidate> best_split(std::span<const std::vector<BinStats>> histograms,
                                         const BinStats& parent, const SplitParams& params) {
  std::optional<SplitCandidate> best;
  double best_gain = 0.0;
  for (std::size_t f = 0; f < histograms.size(); ++f) {
    const auto& hist = histograms[f];
    BinStats left;
    for (std::size_t bin = 0; bin + 1 < hist.size(); ++bin) {
      left += hist[bin];
      BinStats right = parent;
      right -= left;
      if (left.count < params.min_samples_leaf || right.count < params.min_samples_leaf) continue;
      const double gain = split_score(left, right, parent, params.lambda) - params.gamma;
      if (gain > best_gain) {
        best_gain = gain;
        best = SplitCandidate{f, static_cast<BinIndex>(bin), gain, left, right};
      }
    }
  }
  return best;
}

}  // namespace stackcast::gbdt
