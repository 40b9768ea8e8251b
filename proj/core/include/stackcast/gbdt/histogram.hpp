#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "stackcast/gbdt/binning.hpp"

namespace stackcast::gbdt {

struct BinStats {
  double grad = 0.0;
  double hess = 0.0;
  std::int64_t count = 0;

  BinStats& operator+=(const BinStats& other) {
    grad += other.grad;
    hess += other.hess;
    count += other.count;
    return *this;
  }
  BinStats& operator-=(const BinStats& other) {
    grad -= other.grad;
    hess -= other.hess;
    count -= other.count;
    return *this;
  }
  bool operator==(const BinStats&) const = default;
};

// Gradient/hessian sums per (column, bin) for the samples of one node.
class HistogramSet {
 public:
  HistogramSet() = default;
  explicit HistogramSet(std::span<const std::size_t> n_bins);

  std::size_t n_columns() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::span<BinStats> column(std::size_t c) {
    return std::span<BinStats>(bins_).subspan(offsets_[c], offsets_[c + 1] - offsets_[c]);
  }
  std::span<const BinStats> column(std::size_t c) const {
    return std::span<const BinStats>(bins_).subspan(offsets_[c], offsets_[c + 1] - offsets_[c]);
  }

  // Elementwise; used for the sibling subtraction trick.
  HistogramSet& operator-=(const HistogramSet& other);
  HistogramSet& operator+=(const HistogramSet& other);

 private:
  std::vector<std::size_t> offsets_;
  std::vector<BinStats> bins_;
};

// Accumulates weight_i * g_i and weight_i * h_i per bin over `indices`, in the
// order given (callers pass ascending row indices). Columns are independent,
// so `n_threads` splits the work by column without changing any sum.
HistogramSet build_histograms(const BinColumns& columns, std::span<const double> gradients,
                              std::span<const double> hessians, std::span<const double> weights,
                              std::span<const std::uint32_t> indices, std::size_t n_threads = 1);

BinStats sum_stats(std::span<const double> gradients, std::span<const double> hessians,
                   std::span<const double> weights, std::span<const std::uint32_t> indices);

// Per-feature histograms recovered from bundle histograms. Bin 0 is always
// derived as node_total minus the other bins, for bundled and unbundled
// layouts alike, so both layouts give bit-identical feature histograms.
std::vector<std::vector<BinStats>> expand_histograms(const HistogramSet& bundle_hist,
                                                     std::span<const FeatureBundle> bundles,
                                                     std::span<const std::size_t> feature_n_bins,
                                                     const BinStats& node_total);

struct SplitParams {
  double lambda = 1.0;
  double gamma = 0.0;
  std::int64_t min_samples_leaf = 1;
};

struct SplitCandidate {
  std::size_t feature = 0;
  BinIndex bin = 0;  // left side holds bins <= bin
  double gain = 0.0;
  BinStats left;
  BinStats right;
};

// Half the regularized score improvement of splitting `parent` into
// `left`/`right`, before the gamma penalty.
double split_score(const BinStats& left, const BinStats& right, const BinStats& parent, double lambda);

double leaf_value(const BinStats& stats, double lambda);

// Highest-gain (feature, bin) split with gain > 0, scanning features and
// bins in ascending order and keeping the first maximum.
std::optional<SplitCandidate> best_split(std::span<const std::vector<BinStats>> histograms,
                                         const BinStats& parent, const SplitParams& params);

}  // namespace stackcast::gbdt
