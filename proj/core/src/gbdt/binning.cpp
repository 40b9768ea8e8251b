#include "stackcast/gbdt/binning.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "stackcast/error.hpp"

namespace stackcast::gbdt {

std::vector<double> compute_bin_edges(std::span<const double> column, std::size_t n_bins) {
  std::vector<double> sorted;
  sorted.reserve(column.size());
  for (const double x : column) {
    if (!std::isnan(x)) sorted.push_back(x);
  }
  std::vector<double> edges;
  if (sorted.empty() || n_bins < 2) return edges;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double max_value = sorted.back();
  for (std::size_t k = 1; k < n_bins; ++k) {
    // Upper edge of quantile bin k: the ceil(k*n/n_bins)-th smallest value.
    const std::size_t rank = (k * n + n_bins - 1) / n_bins;
    const double edge = sorted[rank - 1];
    // An edge at the maximum would leave an empty right bin.
    if (edge >= max_value) break;
    if (edges.empty() || edge > edges.back()) edges.push_back(edge);
  }
  return edges;
}

BinIndex bin_of(std::span<const double> edges, double value) {
  return static_cast<BinIndex>(std::lower_bound(edges.begin(), edges.end(), value) - edges.begin());
}

BinnedMatrix bin_features(const Matrix& features, std::vector<std::vector<double>> edges) {
  if (edges.size() != features.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "bin edges cover " + std::to_string(edges.size()) +
                                                   " features, matrix has " + std::to_string(features.cols()));
  }
  BinnedMatrix out;
  out.edges = std::move(edges);
  out.columns.n_rows = features.rows();
  out.columns.n_bins.resize(features.cols());
  out.columns.bins.assign(features.cols(), std::vector<BinIndex>(features.rows()));
  for (std::size_t f = 0; f < features.cols(); ++f) {
    out.columns.n_bins[f] = out.edges[f].size() + 1;
    for (std::size_t r = 0; r < features.rows(); ++r) {
      out.columns.bins[f][r] = bin_of(out.edges[f], features(r, f));
    }
  }
  return out;
}

BinnedMatrix bin_features(const Matrix& features, std::size_t n_bins) {
  std::vector<std::vector<double>> edges(features.cols());
  std::vector<double> column(features.rows());
  for (std::size_t f = 0; f < features.cols(); ++f) {
    for (std::size_t r = 0; r < features.rows(); ++r) column[r] = features(r, f);
    edges[f] = compute_bin_edges(column, n_bins);
  }
  return bin_features(features, std::move(edges));
}

namespace {

std::vector<std::uint64_t> nonzero_mask(const BinColumns& binned, std::size_t feature) {
  std::vector<std::uint64_t> mask((binned.n_rows + 63) / 64, 0);
  for (std::size_t r = 0; r < binned.n_rows; ++r) {
    if (binned.at(feature, r) != 0) mask[r / 64] |= std::uint64_t{1} << (r % 64);
  }
  return mask;
}

std::size_t overlap(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  std::size_t total = 0;
  for (std::size_t w = 0; w < a.size(); ++w) total += static_cast<std::size_t>(std::popcount(a[w] & b[w]));
  return total;
}

std::vector<FeatureBundle> assign_offsets(std::vector<std::vector<std::size_t>> groups, const BinColumns& binned) {
  std::vector<FeatureBundle> bundles;
  bundles.reserve(groups.size());
  for (auto& members : groups) {
    FeatureBundle bundle;
    bundle.members = std::move(members);
    BinIndex next = 1;
    for (const std::size_t m : bundle.members) {
      bundle.offsets.push_back(next);
      next += static_cast<BinIndex>(binned.n_bins[m] - 1);
    }
    bundle.n_bins = next;
    bundles.push_back(std::move(bundle));
  }
  return bundles;
}

}  // namespace

std::size_t count_conflicts(const BinColumns& binned, std::size_t a, std::size_t b) {
  return overlap(nonzero_mask(binned, a), nonzero_mask(binned, b));
}

std::vector<FeatureBundle> efb_bundle(const BinColumns& binned, std::size_t conflict_budget) {
  const std::size_t n_features = binned.n_columns();
  std::vector<std::vector<std::uint64_t>> masks;
  std::vector<std::size_t> nonzero(n_features);
  masks.reserve(n_features);
  for (std::size_t f = 0; f < n_features; ++f) {
    masks.push_back(nonzero_mask(binned, f));
    nonzero[f] = overlap(masks[f], masks[f]);
  }
  std::vector<std::size_t> order(n_features);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return nonzero[a] > nonzero[b]; });

  std::vector<std::vector<std::size_t>> groups;
  for (const std::size_t f : order) {
    auto fits = [&](const std::vector<std::size_t>& group) {
      return std::all_of(group.begin(), group.end(),
                         [&](std::size_t m) { return overlap(masks[f], masks[m]) <= conflict_budget; });
    };
    const auto target = std::find_if(groups.begin(), groups.end(), fits);
    if (target == groups.end()) {
      groups.push_back({f});
    } else {
      target->push_back(f);
    }
  }
  return assign_offsets(std::move(groups), binned);
}

std::vector<FeatureBundle> singleton_bundles(const BinColumns& binned) {
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t f = 0; f < binned.n_columns(); ++f) groups.push_back({f});
  return assign_offsets(std::move(groups), binned);
}

BinColumns encode_bundles(const BinColumns& binned, std::span<const FeatureBundle> bundles) {
  BinColumns out;
  out.n_rows = binned.n_rows;
  for (const auto& bundle : bundles) {
    out.n_bins.push_back(bundle.n_bins);
    std::vector<BinIndex> column(binned.n_rows, 0);
    for (std::size_t r = 0; r < binned.n_rows; ++r) {
      for (std::size_t k = 0; k < bundle.members.size(); ++k) {
        const BinIndex b = binned.at(bundle.members[k], r);
        if (b != 0) {
          column[r] = bundle.offsets[k] + b - 1;
          break;
        }
      }
    }
    out.bins.push_back(std::move(column));
  }
  return out;
}

}  // namespace stackcast::gbdt
