#include "filtnet/stream_engine.hpp"

#include <algorithm>
#include <cmath>

namespace filtnet {

OpCounts& OpCounts::operator+=(const OpCounts& o) {
  adds += o.adds;
  abs_evals += o.abs_evals;
  mults += o.mults;
  tanh_evals += o.tanh_evals;
  relu_ops += o.relu_ops;
  argmax_ops += o.argmax_ops;
  return *this;
}

OpCounts StageOpCounts::total() const {
  OpCounts t = normalization;
  t += features;
  t += classification;
  return t;
}

StageOpCounts op_count_report(const Dims& dims) {
  dims.validate();
  const std::int64_t n = static_cast<std::int64_t>(dims.n);
  const std::int64_t k1 = static_cast<std::int64_t>(dims.k1);
  const std::int64_t k2 = static_cast<std::int64_t>(dims.k2);
  const std::int64_t f = static_cast<std::int64_t>(dims.f);
  const std::int64_t l = static_cast<std::int64_t>(dims.l);
  const std::int64_t c = static_cast<std::int64_t>(dims.c);

  StageOpCounts r;
  r.normalization.adds = 3 * n;
  r.normalization.mults = 3 * n;

  r.features.adds = 9 * n + 3 * (n - k1 + 2) * k1 + 3 * (n - k1 - k2 + 2) * k2 - 18;
  r.features.abs_evals = 3 * (2 * n - k1 - k2 + 2);
  r.features.mults = 3 * n + 3 * (n - k1 + 1) * k1 + 3 * (n - k1 - k2 + 2) * k2 + 6;
  r.features.tanh_evals = 3 * (n - k1 + 1);

  r.classification.adds = l * f + c * l;
  r.classification.mults = l * f + c * l;
  r.classification.relu_ops = l;
  r.classification.argmax_ops = 1;
  return r;
}

template <typename T>
std::size_t StreamState<T>::footprint() const {
  std::size_t scalars = 1;  // counter
  for (const auto& a : axes) scalars += 2 + a.iir_ring.size() + a.tanh_ring.size() + 3;
  return scalars;
}

template <typename T>
StreamState<T> stream_init(const ModelParams<T>& params) {
  params.check_shapes();
  StreamState<T> s;
  for (auto& a : s.axes) {
    a.iir_ring.assign(params.dims.k1, T(0));
    a.tanh_ring.assign(params.dims.k2, T(0));
  }
  return s;
}

template <typename T>
std::optional<StreamOutput<T>> stream_push(StreamState<T>& state, const std::array<std::int16_t, kAxes>& sample,
                                           const ModelParams<T>& params, StageOpCounts* counter) {
  const Dims& dims = params.dims;
  const std::size_t t = state.counter;
  const std::size_t k1 = dims.k1;
  const std::size_t k2 = dims.k2;
  const bool nonlinear = params.variant == Variant::kNonlinear;
  OpCounts local_norm, local_feat;

  for (std::size_t d = 0; d < kAxes; ++d) {
    auto& a = state.axes[d];
    const T x = params.norm.inv_std[d] * (static_cast<T>(sample[d]) - params.norm.mean[d]);
    local_norm.adds += 1;
    local_norm.mults += 1;

    a.sum_normalized += x;
    const T y = params.gamma(d) * a.prev_output + (x - a.prev_input);
    a.prev_input = x;
    a.prev_output = y;
    a.sum_abs_highpassed += std::abs(y);
    local_feat.adds += 4;
    local_feat.mults += 1;
    local_feat.abs_evals += 1;

    a.iir_ring[t % k1] = y;
    if (t + 1 < k1) continue;

    // First valid FIR output: sum_k h[k] * y[t - k], k ascending.
    const T* h = nonlinear ? params.h1.data() + d * k1 : params.h_lin.data() + d * k1;
    T u = T(0);
    for (std::size_t k = 0; k < k1; ++k) u += h[k] * a.iir_ring[(t - k) % k1];
    local_feat.adds += static_cast<std::int64_t>(k1);
    local_feat.mults += static_cast<std::int64_t>(k1);

    if (!nonlinear) {
      a.sum_abs_filtered += std::abs(u);
      local_feat.adds += 1;
      local_feat.abs_evals += 1;
      continue;
    }

    const std::size_t j = t + 1 - k1;  // index of this tanh output
    a.tanh_ring[j % k2] = std::tanh(u);
    local_feat.tanh_evals += 1;
    if (j + 1 < k2) continue;

    const T* g = params.h2.data() + d * k2;
    T w = T(0);
    for (std::size_t k = 0; k < k2; ++k) w += g[k] * a.tanh_ring[(j - k) % k2];
    a.sum_abs_filtered += std::abs(w);
    local_feat.adds += static_cast<std::int64_t>(k2) + 1;
    local_feat.mults += static_cast<std::int64_t>(k2);
    local_feat.abs_evals += 1;
  }

  if (counter) {
    counter->normalization += local_norm;
    counter->features += local_feat;
  }

  state.counter += 1;
  if (state.counter < dims.n) return std::nullopt;

  StreamOutput<T> out;
  const T n = static_cast<T>(dims.n);
  for (std::size_t d = 0; d < kAxes; ++d) {
    const auto& a = state.axes[d];
    out.features[feature_index(0, d)] = a.sum_normalized / n;
    out.features[feature_index(1, d)] = a.sum_abs_highpassed / n;
    out.features[feature_index(2, d)] = a.sum_abs_filtered / n;
  }
  const auto logits = mlp_logits<T>(out.features, params);
  out.class_index = argmax<T>(logits);

  if (counter) {
    counter->features.mults += 9;  // the three divisions by N per axis
    counter->classification.adds += static_cast<std::int64_t>(dims.l * dims.f + dims.c * dims.l);
    counter->classification.mults += static_cast<std::int64_t>(dims.l * dims.f + dims.c * dims.l);
    counter->classification.relu_ops += static_cast<std::int64_t>(dims.l);
    counter->classification.argmax_ops += 1;
  }

  for (auto& a : state.axes) {
    a.prev_input = a.prev_output = T(0);
    std::fill(a.iir_ring.begin(), a.iir_ring.end(), T(0));
    std::fill(a.tanh_ring.begin(), a.tanh_ring.end(), T(0));
    a.sum_normalized = a.sum_abs_highpassed = a.sum_abs_filtered = T(0);
  }
  state.counter = 0;
  return out;
}

template struct StreamState<float>;
template struct StreamState<double>;
template StreamState<float> stream_init<float>(const ModelParams<float>&);
template StreamState<double> stream_init<double>(const ModelParams<double>&);
template std::optional<StreamOutput<float>> stream_push<float>(StreamState<float>&,
                                                               const std::array<std::int16_t, kAxes>&,
                                                               const ModelParams<float>&, StageOpCounts*);
template std::optional<StreamOutput<double>> stream_push<double>(StreamState<double>&,
                                                                 const std::array<std::int16_t, kAxes>&,
                                                                 const ModelParams<double>&, StageOpCounts*);

}  // namespace filtnet
