#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stackcast/dataframe.hpp"
#include "stackcast/matrix.hpp"

namespace stackcast::lstm {

struct LstmConfig {
  std::size_t hidden_size = 16;
  std::size_t n_layers = 1;
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double learning_rate = 0.005;
  double gradient_clip_norm = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const LstmConfig&) const = default;
};

// Gate blocks are stacked row-wise in the order forget, input, candidate,
// output: rows [k*H, (k+1)*H) of w, u and b belong to gate k.
struct LayerParams {
  Matrix w;  // 4H x input
  Matrix u;  // 4H x H
  std::vector<double> b;

  std::size_t hidden_size() const noexcept { return b.size() / 4; }
  std::size_t input_size() const noexcept { return w.cols(); }
  bool operator==(const LayerParams&) const = default;
};

enum class Gate : std::size_t { kForget = 0, kInput = 1, kCandidate = 2, kOutput = 3 };

struct LstmParams {
  std::vector<LayerParams> layers;
  Matrix head_w;  // out x H
  std::vector<double> head_b;

  static LstmParams zeros(std::size_t input_size, std::size_t hidden_size, std::size_t n_layers,
                          std::size_t output_size);

  std::size_t input_size() const { return layers.front().input_size(); }
  std::size_t hidden_size() const { return layers.front().hidden_size(); }
  std::size_t output_size() const noexcept { return head_b.size(); }
  std::size_t parameter_count() const;

  // Visits every parameter tensor as a flat span, in a fixed order.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    for (auto& layer : layers) {
      fn(layer.w.values());
      fn(layer.u.values());
      fn(std::span<double>(layer.b));
    }
    fn(head_w.values());
    fn(std::span<double>(head_b));
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    for (const auto& layer : layers) {
      fn(layer.w.values());
      fn(layer.u.values());
      fn(std::span<const double>(layer.b));
    }
    fn(head_w.values());
    fn(std::span<const double>(head_b));
  }

  bool operator==(const LstmParams&) const = default;
};

using ParamGrads = LstmParams;

// Xavier-uniform weights per gate block, zero biases except forget = 1.
LstmParams init_params(std::size_t input_size, std::size_t hidden_size, std::size_t n_layers,
                       std::size_t output_size, std::uint64_t seed);

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;

  static LstmState zeros(std::size_t hidden) { return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)}; }
};

struct CellCache {
  std::vector<double> x;
  std::vector<double> h_prev;
  std::vector<double> c_prev;
  std::vector<double> f;
  std::vector<double> i;
  std::vector<double> g;  // candidate cell state
  std::vector<double> c;
  std::vector<double> o;
  std::vector<double> tanh_c;
  std::vector<double> h;
};

struct ForwardCache {
  std::vector<std::vector<CellCache>> layers;  // [layer][step]

  std::size_t steps() const noexcept { return layers.empty() ? 0 : layers.front().size(); }
};

struct ForwardResult {
  Matrix outputs;  // steps x output_size
  ForwardCache cache;
};

std::pair<LstmState, CellCache> lstm_cell_forward(const LayerParams& params, std::span<const double> x,
                                                  const LstmState& state);

// Runs every layer left to right from a zero state; the linear head is
// applied to the top layer's hidden state at every step.
ForwardResult lstm_forward(const LstmParams& params, const Matrix& sequence);

// BPTT. `output_grads` holds dLoss/dOutput per step (zero rows for
// unsupervised steps).
ParamGrads lstm_backward(const LstmParams& params, const ForwardCache& cache, const Matrix& output_grads);

double global_norm(const ParamGrads& grads);

// Rescales grads so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_gradients(ParamGrads& grads, double max_norm);

struct AdamState {
  ParamGrads m;
  ParamGrads v;
  std::size_t step = 0;

  static AdamState for_params(const LstmParams& params);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

// Clips `grads` to clip_norm, then applies one bias-corrected Adam update.
void adam_step(LstmParams& params, ParamGrads grads, AdamState& state, double learning_rate, double clip_norm);

// Squared-error loss 0.5 * sum (output - target)^2. A target with one row
// supervises the final step only; otherwise it must have a row per step.
double sequence_loss(const LstmParams& params, const Matrix& sequence, const Matrix& target);
ParamGrads sequence_loss_gradient(const LstmParams& params, const Matrix& sequence, const Matrix& target);

// How the perturbed losses of a gradient check are evaluated. kDouble uses
// the ordinary forward pass; its round-off (~1e-11 absolute on unit-scale
// losses) dominates the relative error of gradients below ~1e-6. kExtended
// accumulates in long double, which is wider than double on x86-64 only.
enum class FdPrecision { kDouble, kExtended };

// Max over parameters of |analytic - central difference| / (|analytic| + 1e-8).
double finite_diff_gradcheck(const LstmParams& params, const Matrix& sequence, const Matrix& target, double eps,
                             FdPrecision precision = FdPrecision::kExtended);
double finite_diff_gradcheck(const LstmParams& params, const Matrix& sequence, const Matrix& target, double eps,
                             const ParamGrads& analytic, FdPrecision precision = FdPrecision::kExtended);

// Single-output regressor over lookback windows; predicts from the final step.
struct LstmModel {
  LstmConfig config;
  LstmParams params;
  std::vector<double> epoch_losses;

  double predict(const Matrix& sequence) const;
  std::vector<double> predict(const data::WindowedDataset& windows) const;

  bool operator==(const LstmModel&) const = default;
};

Matrix window_matrix(const data::WindowedDataset& windows, std::size_t sample);

LstmModel fit_lstm(const data::WindowedDataset& windows, const LstmConfig& config);
// Starts from `initial` instead of the seeded initialization. Shapes must match
// the config and the dataset; the seed still drives shuffling.
LstmModel fit_lstm(const data::WindowedDataset& windows, const LstmConfig& config, const LstmParams& initial);

// Appends a layer that approximately copies h through: forget gate closed,
// input and output gates open, candidate = tanh(scale * h_below).
void append_passthrough_layer(LstmParams& params, double scale = 1.0);

std::string save_lstm(const LstmModel& model);
LstmModel load_lstm(std::string_view document);

}  // namespace stackcast::lstm
