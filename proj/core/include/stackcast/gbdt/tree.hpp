#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stackcast/gbdt/binning.hpp"
#include "stackcast/gbdt/histogram.hpp"

namespace stackcast::gbdt {

enum class GrowthMode { kLeafwise, kOblivious };

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  BinIndex threshold_bin = 0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

// Regression tree over a flat node array; node 0 is the root. Rows with
// value <= threshold go left.
struct Tree {
  GrowthMode mode = GrowthMode::kLeafwise;
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const;
  double predict_binned(const BinColumns& binned, std::size_t row) const;
  std::size_t n_leaves() const;
  std::size_t depth() const;

  bool operator==(const Tree&) const = default;
};

// True when every internal node at each depth carries the same
// (feature, threshold) and each level is entirely internal or entirely leaves.
bool is_oblivious(const Tree& tree);

// Everything a tree grower reads. Gradients, hessians and weights are
// indexed by row; `rows` lists the participating rows in ascending order.
struct GrowContext {
  const BinnedMatrix* binned = nullptr;
  const BinColumns* bundle_columns = nullptr;
  std::span<const FeatureBundle> bundles;
  std::span<const double> gradients;
  std::span<const double> hessians;
  std::span<const double> weights;
  std::span<const std::uint32_t> rows;
  SplitParams split;
  std::size_t n_threads = 1;
};

// Best-first growth: always splits the leaf whose best split has the highest
// gain, until max_leaves or no leaf has a positive-gain split.
Tree grow_tree_leafwise(const GrowContext& context, std::size_t max_leaves);

// Symmetric growth: each level applies one (feature, threshold) to every
// node, chosen to maximize the gain summed over the level's nodes.
Tree grow_tree_oblivious(const GrowContext& context, std::size_t depth);

}  // namespace stackcast::gbdt
