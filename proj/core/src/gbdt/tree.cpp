#include "stackcast/gbdt/tree.hpp"

#include <algorithm>
#include <utility>

#include "stackcast/error.hpp"

namespace stackcast::gbdt {

double Tree::predict(std::span<const double> row) const {
  std::size_t node = 0;
  while (!nodes[node].is_leaf()) {
    const TreeNode& split = nodes[node];
    node = static_cast<std::size_t>(row[static_cast<std::size_t>(split.feature)] <= split.threshold ? split.left
                                                                                                   : split.right);
  }
  return nodes[node].value;
}

double Tree::predict_binned(const BinColumns& binned, std::size_t row) const {
  std::size_t node = 0;
  while (!nodes[node].is_leaf()) {
    const TreeNode& split = nodes[node];
    node = static_cast<std::size_t>(
        binned.at(static_cast<std::size_t>(split.feature), row) <= split.threshold_bin ? split.left : split.right);
  }
  return nodes[node].value;
}

std::size_t Tree::n_leaves() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t Tree::depth() const {
  std::size_t deepest = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [node, level] = stack.back();
    stack.pop_back();
    if (nodes[node].is_leaf()) {
      deepest = std::max(deepest, level);
    } else {
      stack.emplace_back(static_cast<std::size_t>(nodes[node].left), level + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[node].right), level + 1);
    }
  }
  return deepest;
}

bool is_oblivious(const Tree& tree) {
  if (tree.nodes.empty()) return false;
  std::vector<std::size_t> level{0};
  while (!level.empty()) {
    const TreeNode& first = tree.nodes[level.front()];
    std::vector<std::size_t> next;
    for (const std::size_t index : level) {
      const TreeNode& node = tree.nodes[index];
      if (node.is_leaf() != first.is_leaf()) return false;
      if (node.is_leaf()) continue;
      if (node.feature != first.feature || node.threshold != first.threshold) return false;
      next.push_back(static_cast<std::size_t>(node.left));
      next.push_back(static_cast<std::size_t>(node.right));
    }
    level = std::move(next);
  }
  return true;
}

namespace {

struct NodeState {
  std::vector<std::uint32_t> rows;
  BinStats total;
  HistogramSet hist;
};

std::vector<std::vector<BinStats>> feature_histograms(const GrowContext& context, const NodeState& node) {
  return expand_histograms(node.hist, context.bundles, context.binned->columns.n_bins, node.total);
}

HistogramSet direct_histogram(const GrowContext& context, std::span<const std::uint32_t> rows) {
  return build_histograms(*context.bundle_columns, context.gradients, context.hessians, context.weights, rows,
                          context.n_threads);
}

// Stable partition of the parent's rows; the smaller child gets direct
// statistics and the larger one inherits parent minus sibling.
std::pair<NodeState, NodeState> split_node(const GrowContext& context, NodeState parent, std::size_t feature,
                                           BinIndex bin) {
  NodeState left;
  NodeState right;
  const auto& bins = context.binned->columns.bins[feature];
  for (const std::uint32_t r : parent.rows) (bins[r] <= bin ? left.rows : right.rows).push_back(r);

  NodeState* small = left.rows.size() <= right.rows.size() ? &left : &right;
  NodeState* large = small == &left ? &right : &left;
  small->total = sum_stats(context.gradients, context.hessians, context.weights, small->rows);
  small->hist = direct_histogram(context, small->rows);
  large->total = parent.total;
  large->total -= small->total;
  large->hist = std::move(parent.hist);
  large->hist -= small->hist;
  return {std::move(left), std::move(right)};
}

NodeState root_state(const GrowContext& context) {
  if (context.binned == nullptr || context.bundle_columns == nullptr) {
    throw Error(ErrorCode::kConfigInvalid, "grow context is missing binned data");
  }
  if (context.rows.empty()) throw Error(ErrorCode::kEmpty, "cannot grow a tree on zero rows");
  NodeState root;
  root.rows.assign(context.rows.begin(), context.rows.end());
  root.total = sum_stats(context.gradients, context.hessians, context.weights, root.rows);
  root.hist = direct_histogram(context, root.rows);
  return root;
}

}  // namespace

Tree grow_tree_leafwise(const GrowContext& context, std::size_t max_leaves) {
  struct Leaf {
    NodeState state;
    std::optional<SplitCandidate> split;
    std::size_t node = 0;
  };

  Tree tree;
  tree.mode = GrowthMode::kLeafwise;
  tree.nodes.push_back(TreeNode{});

  std::vector<Leaf> leaves;
  {
    Leaf root{root_state(context), std::nullopt, 0};
    const auto hist = feature_histograms(context, root.state);
    root.split = best_split(hist, root.state.total, context.split);
    leaves.push_back(std::move(root));
  }

  while (leaves.size() < max_leaves) {
    std::size_t chosen = leaves.size();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (!leaves[i].split) continue;
      if (chosen == leaves.size() || leaves[i].split->gain > leaves[chosen].split->gain) chosen = i;
    }
    if (chosen == leaves.size()) break;

    Leaf parent = std::move(leaves[chosen]);
    const SplitCandidate split = *parent.split;
    auto [left_state, right_state] = split_node(context, std::move(parent.state), split.feature, split.bin);

    const int left_index = static_cast<int>(tree.nodes.size());
    TreeNode& node = tree.nodes[parent.node];
    node.feature = static_cast<int>(split.feature);
    node.threshold = context.binned->edges[split.feature][split.bin];
    node.threshold_bin = split.bin;
    node.left = left_index;
    node.right = left_index + 1;
    tree.nodes.push_back(TreeNode{});
    tree.nodes.push_back(TreeNode{});

    Leaf left{std::move(left_state), std::nullopt, static_cast<std::size_t>(left_index)};
    Leaf right{std::move(right_state), std::nullopt, static_cast<std::size_t>(left_index + 1)};
    left.split = best_split(feature_histograms(context, left.state), left.state.total, context.split);
    right.split = best_split(feature_histograms(context, right.state), right.state.total, context.split);
    // Keep leaves in node-creation order so gain ties resolve to the older leaf.
    leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(chosen));
    leaves.push_back(std::move(left));
    leaves.push_back(std::move(right));
  }

  for (const Leaf& leaf : leaves) tree.nodes[leaf.node].value = leaf_value(leaf.state.total, context.split.lambda);
  return tree;
}

Tree grow_tree_oblivious(const GrowContext& context, std::size_t depth) {
  struct LevelSplit {
    std::size_t feature;
    BinIndex bin;
  };

  const auto& n_bins = context.binned->columns.n_bins;
  std::vector<NodeState> level;
  level.push_back(root_state(context));
  std::vector<LevelSplit> splits;

  for (std::size_t d = 0; d < depth; ++d) {
    // gains[f][k]: summed gain over this level's nodes of splitting at bin k.
    std::vector<std::vector<double>> gains(n_bins.size());
    for (std::size_t f = 0; f < n_bins.size(); ++f) gains[f].assign(n_bins[f] > 0 ? n_bins[f] - 1 : 0, 0.0);
    for (const NodeState& node : level) {
      const auto hist = feature_histograms(context, node);
      for (std::size_t f = 0; f < hist.size(); ++f) {
        BinStats left;
        for (std::size_t bin = 0; bin + 1 < hist[f].size(); ++bin) {
          left += hist[f][bin];
          BinStats right = node.total;
          right -= left;
          // A node whose sides would break min_samples_leaf still follows the
          // level's split but adds no gain.
          if (left.count < context.split.min_samples_leaf || right.count < context.split.min_samples_leaf) continue;
          gains[f][bin] += split_score(left, right, node.total, context.split.lambda);
        }
      }
    }
    const double penalty = context.split.gamma * static_cast<double>(level.size());
    std::optional<LevelSplit> best;
    double best_gain = 0.0;
    for (std::size_t f = 0; f < gains.size(); ++f) {
      for (std::size_t bin = 0; bin < gains[f].size(); ++bin) {
        const double gain = gains[f][bin] - penalty;
        if (gain > best_gain) {
          best_gain = gain;
          best = LevelSplit{f, static_cast<BinIndex>(bin)};
        }
      }
    }
    if (!best) break;

    std::vector<NodeState> next;
    next.reserve(level.size() * 2);
    for (NodeState& node : level) {
      auto [left, right] = split_node(context, std::move(node), best->feature, best->bin);
      next.push_back(std::move(left));
      next.push_back(std::move(right));
    }
    level = std::move(next);
    splits.push_back(*best);
  }

  // Breadth-first complete tree: node i has children 2i+1 and 2i+2.
  Tree tree;
  tree.mode = GrowthMode::kOblivious;
  const std::size_t n_internal = (std::size_t{1} << splits.size()) - 1;
  tree.nodes.resize(n_internal + level.size());
  for (std::size_t d = 0; d < splits.size(); ++d) {
    const std::size_t first = (std::size_t{1} << d) - 1;
    for (std::size_t k = 0; k < (std::size_t{1} << d); ++k) {
      TreeNode& node = tree.nodes[first + k];
      node.feature = static_cast<int>(splits[d].feature);
      node.threshold = context.binned->edges[splits[d].feature][splits[d].bin];
      node.threshold_bin = splits[d].bin;
      node.left = static_cast<int>(2 * (first + k) + 1);
      node.right = static_cast<int>(2 * (first + k) + 2);
    }
  }
  for (std::size_t k = 0; k < level.size(); ++k) {
    tree.nodes[n_internal + k].value = leaf_value(level[k].total, context.split.lambda);
  }
  return tree;
}

}  // namespace stackcast::gbdt
