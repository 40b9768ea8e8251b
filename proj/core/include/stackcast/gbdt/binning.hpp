#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stackcast/matrix.hpp"

namespace stackcast::gbdt {

using BinIndex = std::uint32_t;

// Upper bin edges at empirical quantiles, strictly increasing, at most
// n_bins - 1 of them. A value x falls in the first bin whose edge is >= x,
// so "x <= edges[k]" and "bin(x) <= k" are the same predicate.
std::vector<double> compute_bin_edges(std::span<const double> column, std::size_t n_bins);

BinIndex bin_of(std::span<const double> edges, double value);

// Column-major table of bin indices. Used both for per-feature bins and for
// bundled columns.
struct BinColumns {
  std::size_t n_rows = 0;
  std::vector<std::size_t> n_bins;
  std::vector<std::vector<BinIndex>> bins;

  std::size_t n_columns() const noexcept { return bins.size(); }
  BinIndex at(std::size_t column, std::size_t row) const { return bins[column][row]; }
};

struct BinnedMatrix {
  std::vector<std::vector<double>> edges;
  BinColumns columns;

  std::size_t n_rows() const noexcept { return columns.n_rows; }
  std::size_t n_features() const noexcept { return edges.size(); }
};

BinnedMatrix bin_features(const Matrix& features, std::size_t n_bins);

// Bins `features` against previously computed edges.
BinnedMatrix bin_features(const Matrix& features, std::vector<std::vector<double>> edges);

// Several features sharing one histogram column. Bin 0 of every member is
// "absent"; member m's bins 1..n_bins(m)-1 occupy bundle bins
// offsets[m]..offsets[m]+n_bins(m)-2, and bundle bin 0 means every member is
// absent.
struct FeatureBundle {
  std::vector<std::size_t> members;
  std::vector<BinIndex> offsets;
  std::size_t n_bins = 1;

  bool operator==(const FeatureBundle&) const = default;
};

// Greedy exclusive bundling. Features are visited by nonzero-bin count,
// descending (ties by index), and join the first bundle whose every member
// conflicts with them on at most `conflict_budget` rows.
std::vector<FeatureBundle> efb_bundle(const BinColumns& binned, std::size_t conflict_budget);

// One bundle per feature; the layout used when bundling is disabled.
std::vector<FeatureBundle> singleton_bundles(const BinColumns& binned);

// Encodes the per-feature bins into one column per bundle. On conflicting
// rows the first member in bundle order wins.
BinColumns encode_bundles(const BinColumns& binned, std::span<const FeatureBundle> bundles);

// Number of rows on which both features are outside bin 0.
std::size_t count_conflicts(const BinColumns& binned, std::size_t a, std::size_t b);

}  // namespace stackcast::gbdt
