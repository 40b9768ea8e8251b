#include "stackcast/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "stackcast/error.hpp"
#include "stackcast/json_io.hpp"
#include "stackcast/random.hpp"

namespace stackcast::lstm {

using nlohmann::json;

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// out[r] += sum_c m(r, c) * x[c]
void gemv_add(const Matrix& m, std::span<const double> x, std::span<double> out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    out[r] += acc;
  }
}

// out[c] += sum_r m(r, c) * y[r]
void gemv_transposed_add(const Matrix& m, std::span<const double> y, std::span<double> out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    const double scale = y[r];
    if (scale == 0.0) continue;
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * scale;
  }
}

// m(r, c) += y[r] * x[c]
void outer_add(Matrix& m, std::span<const double> y, std::span<const double> x) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double scale = y[r];
    if (scale == 0.0) continue;
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += scale * x[c];
  }
}

void check_layer_shapes(const LayerParams& layer) {
  const std::size_t gates = layer.b.size();
  if (gates == 0 || gates % 4 != 0 || layer.w.rows() != gates || layer.u.rows() != gates ||
      layer.u.cols() != gates / 4) {
    throw Error(ErrorCode::kDimensionMismatch, "inconsistent LSTM layer shapes");
  }
}

}  // namespace

void LstmConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfigInvalid, what); };
  if (hidden_size < 1) fail("hidden_size must be at least 1");
  if (n_layers != 1 && n_layers != 2) fail("n_layers must be 1 or 2");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(gradient_clip_norm > 0.0)) fail("gradient_clip_norm must be positive");
}

LstmParams LstmParams::zeros(std::size_t input_size, std::size_t hidden_size, std::size_t n_layers,
                             std::size_t output_size) {
  LstmParams params;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t in = l == 0 ? input_size : hidden_size;
    params.layers.push_back(
        LayerParams{Matrix(4 * hidden_size, in), Matrix(4 * hidden_size, hidden_size), std::vector<double>(4 * hidden_size)});
  }
  params.head_w = Matrix(output_size, hidden_size);
  params.head_b.assign(output_size, 0.0);
  return params;
}

std::size_t LstmParams::parameter_count() const {
  std::size_t total = head_w.size() + head_b.size();
  for (const auto& layer : layers) total += layer.w.size() + layer.u.size() + layer.b.size();
  return total;
}

LstmParams init_params(std::size_t input_size, std::size_t hidden_size, std::size_t n_layers,
                       std::size_t output_size, std::uint64_t seed) {
  LstmParams params = LstmParams::zeros(input_size, hidden_size, n_layers, output_size);
  Rng rng(seed);
  auto fill = [&](std::span<double> values, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : values) v = rng.uniform(-limit, limit);
  };
  for (auto& layer : params.layers) {
    fill(layer.w.values(), layer.input_size(), hidden_size);
    fill(layer.u.values(), hidden_size, hidden_size);
    for (std::size_t k = 0; k < hidden_size; ++k) layer.b[k] = 1.0;  // forget gate
  }
  fill(params.head_w.values(), hidden_size, output_size);
  return params;
}

std::pair<LstmState, CellCache> lstm_cell_forward(const LayerParams& params, std::span<const double> x,
                                                  const LstmState& state) {
  check_layer_shapes(params);
  const std::size_t hidden = params.hidden_size();
  if (x.size() != params.input_size() || state.h.size() != hidden || state.c.size() != hidden) {
    throw Error(ErrorCode::kDimensionMismatch, "cell input or state size does not match the layer");
  }
  std::vector<double> z(params.b);
  gemv_add(params.w, x, z);
  gemv_add(params.u, state.h, z);

  CellCache cache;
  cache.x.assign(x.begin(), x.end());
  cache.h_prev = state.h;
  cache.c_prev = state.c;
  cache.f.resize(hidden);
  cache.i.resize(hidden);
  cache.g.resize(hidden);
  cache.o.resize(hidden);
  cache.c.resize(hidden);
  cache.tanh_c.resize(hidden);
  cache.h.resize(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    cache.f[k] = sigmoid(z[k]);
    cache.i[k] = sigmoid(z[hidden + k]);
    cache.g[k] = std::tanh(z[2 * hidden + k]);
    cache.o[k] = sigmoid(z[3 * hidden + k]);
    cache.c[k] = cache.f[k] * state.c[k] + cache.i[k] * cache.g[k];
    cache.tanh_c[k] = std::tanh(cache.c[k]);
    cache.h[k] = cache.o[k] * cache.tanh_c[k];
  }
  LstmState next{cache.h, cache.c};
  return {std::move(next), std::move(cache)};
}

ForwardResult lstm_forward(const LstmParams& params, const Matrix& sequence) {
  if (params.layers.empty()) throw Error(ErrorCode::kDimensionMismatch, "LSTM without layers");
  if (sequence.rows() == 0) throw Error(ErrorCode::kDimensionMismatch, "empty input sequence");
  if (sequence.cols() != params.input_size()) {
    throw Error(ErrorCode::kDimensionMismatch, "sequence has " + std::to_string(sequence.cols()) +
                                                   " features, model expects " + std::to_string(params.input_size()));
  }
  const std::size_t steps = sequence.rows();
  ForwardResult result;
  result.cache.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& layer = params.layers[l];
    LstmState state = LstmState::zeros(layer.hidden_size());
    auto& caches = result.cache.layers[l];
    caches.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      std::span<const double> x = l == 0 ? sequence.row(t) : std::span<const double>(result.cache.layers[l - 1][t].h);
      auto [next, cache] = lstm_cell_forward(layer, x, state);
      state = std::move(next);
      caches.push_back(std::move(cache));
    }
  }
  const auto& top = result.cache.layers.back();
  if (params.head_w.cols() != params.layers.back().hidden_size() || params.head_w.rows() != params.head_b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "output head does not match the top layer");
  }
  result.outputs = Matrix(steps, params.output_size());
  for (std::size_t t = 0; t < steps; ++t) {
    auto out = result.outputs.row(t);
    std::copy(params.head_b.begin(), params.head_b.end(), out.begin());
    gemv_add(params.head_w, top[t].h, out);
  }
  return result;
}

ParamGrads lstm_backward(const LstmParams& params, const ForwardCache& cache, const Matrix& output_grads) {
  const std::size_t steps = cache.steps();
  if (cache.layers.size() != params.layers.size() || output_grads.rows() != steps ||
      output_grads.cols() != params.output_size()) {
    throw Error(ErrorCode::kCacheMismatch, "forward cache or output gradients do not match the parameters");
  }
  for (std::size_t l = 0; l < cache.layers.size(); ++l) {
    if (cache.layers[l].size() != steps ||
        (steps > 0 && cache.layers[l].front().h.size() != params.layers[l].hidden_size())) {
      throw Error(ErrorCode::kCacheMismatch, "forward cache layer shape mismatch");
    }
  }

  ParamGrads grads = LstmParams::zeros(params.input_size(), params.hidden_size(), params.layers.size(),
                                       params.output_size());
  // Layers can differ in width only through the input of layer 0.
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    grads.layers[l].w = Matrix(params.layers[l].w.rows(), params.layers[l].w.cols());
    grads.layers[l].u = Matrix(params.layers[l].u.rows(), params.layers[l].u.cols());
    grads.layers[l].b.assign(params.layers[l].b.size(), 0.0);
  }

  // dh_from_above[t]: gradient reaching layer l's h_t from the head or layer l+1.
  const std::size_t top_hidden = params.layers.back().hidden_size();
  std::vector<std::vector<double>> dh_from_above(steps, std::vector<double>(top_hidden, 0.0));
  for (std::size_t t = 0; t < steps; ++t) {
    const auto dy = output_grads.row(t);
    outer_add(grads.head_w, dy, cache.layers.back()[t].h);
    for (std::size_t k = 0; k < dy.size(); ++k) grads.head_b[k] += dy[k];
    gemv_transposed_add(params.head_w, dy, dh_from_above[t]);
  }

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const LayerParams& layer = params.layers[l];
    LayerParams& grad = grads.layers[l];
    const std::size_t hidden = layer.hidden_size();
    std::vector<double> dh_next(hidden, 0.0);
    std::vector<double> dc_next(hidden, 0.0);
    std::vector<double> dz(4 * hidden);
    std::vector<std::vector<double>> dx(steps, std::vector<double>(layer.input_size(), 0.0));
    for (std::size_t t = steps; t-- > 0;) {
      const CellCache& c = cache.layers[l][t];
      for (std::size_t k = 0; k < hidden; ++k) {
        const double dh = dh_from_above[t][k] + dh_next[k];
        const double d_o = dh * c.tanh_c[k];
        const double dc = dc_next[k] + dh * c.o[k] * (1.0 - c.tanh_c[k] * c.tanh_c[k]);
        const double df = dc * c.c_prev[k];
        const double di = dc * c.g[k];
        const double dg = dc * c.i[k];
        dz[k] = df * c.f[k] * (1.0 - c.f[k]);
        dz[hidden + k] = di * c.i[k] * (1.0 - c.i[k]);
        dz[2 * hidden + k] = dg * (1.0 - c.g[k] * c.g[k]);
        dz[3 * hidden + k] = d_o * c.o[k] * (1.0 - c.o[k]);
        dc_next[k] = dc * c.f[k];
      }
      outer_add(grad.w, dz, c.x);
      outer_add(grad.u, dz, c.h_prev);
      for (std::size_t k = 0; k < dz.size(); ++k) grad.b[k] += dz[k];
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      gemv_transposed_add(layer.u, dz, dh_next);
      if (l > 0) gemv_transposed_add(layer.w, dz, dx[t]);
    }
    if (l > 0) dh_from_above = std::move(dx);
  }
  return grads;
}

double global_norm(const ParamGrads& grads) {
  double total = 0.0;
  grads.for_each_tensor([&](std::span<const double> values) {
    for (const double v : values) total += v * v;
  });
  return std::sqrt(total);
}

double clip_gradients(ParamGrads& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    grads.for_each_tensor([&](std::span<double> values) {
      for (double& v : values) v *= scale;
    });
  }
  return norm;
}

AdamState AdamState::for_params(const LstmParams& params) {
  AdamState state{params, params, 0};
  state.m.for_each_tensor([](std::span<double> values) { std::fill(values.begin(), values.end(), 0.0); });
  state.v.for_each_tensor([](std::span<double> values) { std::fill(values.begin(), values.end(), 0.0); });
  return state;
}

void adam_step(LstmParams& params, ParamGrads grads, AdamState& state, double learning_rate, double clip_norm) {
  if (params.parameter_count() != grads.parameter_count() || params.parameter_count() != state.m.parameter_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "parameter, gradient and optimizer shapes differ");
  }
  clip_gradients(grads, clip_norm);
  state.step += 1;
  const double correction1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));

  std::vector<std::span<double>> p, g, m, v;
  params.for_each_tensor([&](std::span<double> t) { p.push_back(t); });
  grads.for_each_tensor([&](std::span<double> t) { g.push_back(t); });
  state.m.for_each_tensor([&](std::span<double> t) { m.push_back(t); });
  state.v.for_each_tensor([&](std::span<double> t) { v.push_back(t); });
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].size() != g[k].size()) throw Error(ErrorCode::kDimensionMismatch, "tensor shape mismatch in adam_step");
    for (std::size_t j = 0; j < p[k].size(); ++j) {
      m[k][j] = kAdamBeta1 * m[k][j] + (1.0 - kAdamBeta1) * g[k][j];
      v[k][j] = kAdamBeta2 * v[k][j] + (1.0 - kAdamBeta2) * g[k][j] * g[k][j];
      const double m_hat = m[k][j] / correction1;
      const double v_hat = v[k][j] / correction2;
      p[k][j] -= learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
    }
  }
}

namespace {

// Residuals (output - target) laid out per step; rows without supervision are zero.
Matrix output_residuals(const Matrix& outputs, const Matrix& target) {
  Matrix residual(outputs.rows(), outputs.cols());
  if (target.cols() != outputs.cols() || (target.rows() != 1 && target.rows() != outputs.rows())) {
    throw Error(ErrorCode::kDimensionMismatch, "target must have one row or one row per step");
  }
  const std::size_t first = target.rows() == 1 ? outputs.rows() - 1 : 0;
  for (std::size_t t = first; t < outputs.rows(); ++t) {
    for (std::size_t k = 0; k < outputs.cols(); ++k) residual(t, k) = outputs(t, k) - target(t - first, k);
  }
  return residual;
}

}  // namespace

double sequence_loss(const LstmParams& params, const Matrix& sequence, const Matrix& target) {
  const auto forward = lstm_forward(params, sequence);
  const Matrix residual = output_residuals(forward.outputs, target);
  double loss = 0.0;
  for (const double r : residual.values()) loss += 0.5 * r * r;
  return loss;
}

ParamGrads sequence_loss_gradient(const LstmParams& params, const Matrix& sequence, const Matrix& target) {
  const auto forward = lstm_forward(params, sequence);
  return lstm_backward(params, forward.cache, output_residuals(forward.outputs, target));
}

namespace {

// Same loss as sequence_loss, accumulated in Real throughout.
template <typename Real>
Real sequence_loss_as(const LstmParams& params, const Matrix& sequence, const Matrix& target) {
  const std::size_t steps = sequence.rows();
  std::vector<std::vector<Real>> inputs(steps);
  for (std::size_t t = 0; t < steps; ++t) inputs[t].assign(sequence.row(t).begin(), sequence.row(t).end());
  for (const LayerParams& layer : params.layers) {
    const std::size_t hidden = layer.hidden_size();
    std::vector<Real> h(hidden, 0), c(hidden, 0), z(4 * hidden);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t r = 0; r < 4 * hidden; ++r) {
        Real acc = layer.b[r];
        for (std::size_t k = 0; k < inputs[t].size(); ++k) acc += Real(layer.w(r, k)) * inputs[t][k];
        for (std::size_t k = 0; k < hidden; ++k) acc += Real(layer.u(r, k)) * h[k];
        z[r] = acc;
      }
      auto sig = [](Real v) { return Real(1) / (Real(1) + std::exp(-v)); };
      for (std::size_t k = 0; k < hidden; ++k) {
        c[k] = sig(z[k]) * c[k] + sig(z[hidden + k]) * std::tanh(z[2 * hidden + k]);
        h[k] = sig(z[3 * hidden + k]) * std::tanh(c[k]);
      }
      inputs[t] = h;
    }
  }
  const std::size_t first = target.rows() == 1 ? steps - 1 : 0;
  Real loss = 0;
  for (std::size_t t = first; t < steps; ++t) {
    for (std::size_t o = 0; o < params.output_size(); ++o) {
      Real y = params.head_b[o];
      for (std::size_t k = 0; k < inputs[t].size(); ++k) y += Real(params.head_w(o, k)) * inputs[t][k];
      const Real r = y - Real(target(t - first, o));
      loss += r * r / Real(2);
    }
  }
  return loss;
}

}  // namespace

double finite_diff_gradcheck(const LstmParams& params, const Matrix& sequence, const Matrix& target, double eps,
                             FdPrecision precision) {
  return finite_diff_gradcheck(params, sequence, target, eps, sequence_loss_gradient(params, sequence, target),
                               precision);
}

double finite_diff_gradcheck(const LstmParams& params, const Matrix& sequence, const Matrix& target, double eps,
                             const ParamGrads& analytic, FdPrecision precision) {
  // Validates shapes once; the perturbed evaluations below assume them.
  (void)sequence_loss(params, sequence, target);
  auto loss = [&](const LstmParams& probe) -> long double {
    if (precision == FdPrecision::kExtended) return sequence_loss_as<long double>(probe, sequence, target);
    return sequence_loss(probe, sequence, target);
  };
  if (!(eps > 0.0)) throw Error(ErrorCode::kConfigInvalid, "eps must be positive");
  LstmParams probe = params;
  ParamGrads analytic_copy = analytic;
  std::vector<std::span<double>> probe_tensors, analytic_tensors;
  probe.for_each_tensor([&](std::span<double> t) { probe_tensors.push_back(t); });
  analytic_copy.for_each_tensor([&](std::span<double> t) { analytic_tensors.push_back(t); });
  if (probe_tensors.size() != analytic_tensors.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "analytic gradient shape differs from parameters");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < probe_tensors.size(); ++k) {
    if (probe_tensors[k].size() != analytic_tensors[k].size()) {
      throw Error(ErrorCode::kDimensionMismatch, "analytic gradient shape differs from parameters");
    }
    for (std::size_t j = 0; j < probe_tensors[k].size(); ++j) {
      const double original = probe_tensors[k][j];
      probe_tensors[k][j] = original + eps;
      const long double plus = loss(probe);
      probe_tensors[k][j] = original - eps;
      const long double minus = loss(probe);
      probe_tensors[k][j] = original;
      const double numeric = static_cast<double>((plus - minus) / (2.0L * eps));
      const double exact = analytic_tensors[k][j];
      worst = std::max(worst, std::abs(exact - numeric) / (std::abs(exact) + 1e-8));
    }
  }
  return worst;
}

double LstmModel::predict(const Matrix& sequence) const {
  const auto forward = lstm_forward(params, sequence);
  return forward.outputs(forward.outputs.rows() - 1, 0);
}

Matrix window_matrix(const data::WindowedDataset& windows, std::size_t sample) {
  const auto values = windows.window(sample);
  return Matrix(windows.lookback, windows.n_features, std::vector<double>(values.begin(), values.end()));
}

std::vector<double> LstmModel::predict(const data::WindowedDataset& windows) const {
  std::vector<double> out(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) out[i] = predict(window_matrix(windows, i));
  return out;
}

LstmModel fit_lstm(const data::WindowedDataset& windows, const LstmConfig& config) {
  config.validate();
  return fit_lstm(windows, config,
                  init_params(windows.n_features, config.hidden_size, config.n_layers, 1, config.seed));
}

void append_passthrough_layer(LstmParams& params, double scale) {
  if (params.layers.empty()) throw Error(ErrorCode::kConfigInvalid, "no layer to pass through");
  const std::size_t h = params.layers.back().hidden_size();
  LayerParams layer{Matrix(4 * h, h), Matrix(4 * h, h), std::vector<double>(4 * h, 0.0)};
  constexpr double kSaturate = 20.0;
  for (std::size_t k = 0; k < h; ++k) {
    layer.b[k] = -kSaturate;
    layer.b[h + k] = kSaturate;
    layer.b[3 * h + k] = kSaturate;
    layer.w(2 * h + k, k) = scale;
  }
  params.layers.push_back(std::move(layer));
}

LstmModel fit_lstm(const data::WindowedDataset& windows, const LstmConfig& config, const LstmParams& initial) {
  config.validate();
  if (windows.empty()) throw Error(ErrorCode::kEmpty, "no training windows");
  if (initial.layers.size() != config.n_layers || initial.input_size() != windows.n_features ||
      initial.output_size() != 1 || initial.layers.back().hidden_size() != config.hidden_size) {
    throw Error(ErrorCode::kConfigInvalid, "initial parameters do not match the config");
  }
  LstmModel model;
  model.config = config;
  model.params = initial;
  AdamState adam = AdamState::for_params(model.params);

  const std::size_t n = windows.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(mix_seed(config.seed, 1));
  std::vector<Matrix> sequences;
  sequences.reserve(n);
  for (std::size_t i = 0; i < n; ++i) sequences.push_back(window_matrix(windows, i));

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const double batch = static_cast<double>(end - start);
      ParamGrads grads = LstmParams::zeros(windows.n_features, config.hidden_size, config.n_layers, 1);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t sample = order[k];
        auto forward = lstm_forward(model.params, sequences[sample]);
        const std::size_t last = forward.outputs.rows() - 1;
        const double residual = forward.outputs(last, 0) - windows.targets[sample];
        epoch_loss += 0.5 * residual * residual;
        Matrix dy(forward.outputs.rows(), 1);
        dy(last, 0) = residual / batch;
        const ParamGrads sample_grads = lstm_backward(model.params, forward.cache, dy);
        std::vector<std::span<double>> dst;
        grads.for_each_tensor([&](std::span<double> t) { dst.push_back(t); });
        std::size_t tensor = 0;
        sample_grads.for_each_tensor([&](std::span<const double> t) {
          for (std::size_t j = 0; j < t.size(); ++j) dst[tensor][j] += t[j];
          ++tensor;
        });
      }
      adam_step(model.params, std::move(grads), adam, config.learning_rate, config.gradient_clip_norm);
    }
    model.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }
  return model;
}

namespace {

constexpr int kLstmFormatVersion = 1;

}  // namespace

std::string save_lstm(const LstmModel& model) {
  json doc;
  doc["format_version"] = kLstmFormatVersion;
  doc["kind"] = "lstm";
  doc["config"] = model.config;
  doc["params"] = model.params;
  doc["epoch_losses"] = model.epoch_losses;
  return doc.dump(1);
}

LstmModel load_lstm(std::string_view document) {
  try {
    const json doc = json::parse(document);
    if (doc.at("kind").get<std::string>() != "lstm") throw Error(ErrorCode::kFormatError, "not an lstm document");
    if (doc.at("format_version").get<int>() != kLstmFormatVersion) {
      throw Error(ErrorCode::kFormatError, "unsupported lstm format version");
    }
    LstmModel model;
    model.config = doc.at("config").get<LstmConfig>();
    model.params = doc.at("params").get<LstmParams>();
    model.epoch_losses = doc.at("epoch_losses").get<std::vector<double>>();
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, e.what());
  }
}

}  // namespace stackcast::lstm
