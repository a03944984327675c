#include "filtnet/featurizer.hpp"

#include <cmath>
#include <string>

namespace filtnet {

NormStats<double> fit_norm_stats(const Dataset& ds) {
  if (ds.empty()) throw DegenerateDataError("cannot fit normalization on an empty dataset");
  NormStats<double> out;
  for (std::size_t d = 0; d < kAxes; ++d) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : ds.segments) {
      for (auto v : s.readings[d]) sum += v;
      count += s.readings[d].size();
    }
    if (count == 0) throw DegenerateDataError("dataset has no samples");
    const double mean = sum / double(count);
    double ss = 0.0;
    for (const auto& s : ds.segments) {
      for (auto v : s.readings[d]) ss += (v - mean) * (v - mean);
    }
    const double var = ss / double(count);
    if (!(var > 0.0)) {
      throw DegenerateDataError("zero variance on axis " + std::to_string(d) + ", cannot normalize");
    }
    out.mean[d] = mean;
    out.inv_std[d] = 1.0 / std::sqrt(var);
  }
  return out;
}

template <typename T>
void normalize_axis(std::span<const std::int16_t> raw, T mean, T inv_std, std::span<T> out) {
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = inv_std * (static_cast<T>(raw[i]) - mean);
}

template <typename T>
std::array<std::vector<T>, kAxes> normalize(const Segment& seg, const NormStats<T>& norm) {
  std::array<std::vector<T>, kAxes> out;
  for (std::size_t d = 0; d < kAxes; ++d) {
    out[d].resize(seg.readings[d].size());
    normalize_axis<T>(seg.readings[d], norm.mean[d], norm.inv_std[d], out[d]);
  }
  return out;
}

template <typename T>
T mean_feature(std::span<const T> x) {
  T acc = T(0);
  for (T v : x) acc += v;
  return acc / static_cast<T>(x.size());
}

template <typename T>
void iir_highpass(std::span<const T> x, T gamma, std::span<T> out) {
  if (!(gamma >= T(0) && gamma < T(1))) throw DomainError("IIR pole must lie in [0, 1)");
  T x_prev = T(0);
  T y_prev = T(0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const T y = gamma * y_prev + (x[n] - x_prev);
    out[n] = y;
    y_prev = y;
    x_prev = x[n];
  }
}

template <typename T>
std::vector<T> iir_highpass(std::span<const T> x, T gamma) {
  std::vector<T> y(x.size());
  iir_highpass<T>(x, gamma, y);
  return y;
}

template <typename T>
T mean_abs(std::span<const T> x, std::size_t divisor) {
  T acc = T(0);
  for (T v : x) acc += std::abs(v);
  return acc / static_cast<T>(divisor);
}

template <typename T>
void fir_valid_conv(std::span<const T> x, std::span<const T> h, std::span<T> out) {
  const std::size_t k_len = h.size();
  if (k_len == 0 || x.size() < k_len) {
    throw ShapeError("convolution input of length " + std::to_string(x.size()) + " is shorter than kernel of length " +
                     std::to_string(k_len));
  }
  const std::size_t m = x.size() - k_len + 1;
  // k-outer keeps the per-output accumulation order k = 0, 1, ... which the
  // streaming engine reproduces sample by sample.
  for (std::size_t n = 0; n < m; ++n) out[n] = T(0);
  for (std::size_t k = 0; k < k_len; ++k) {
    const T tap = h[k];
    const T* src = x.data() + (k_len - 1 - k);
    for (std::size_t n = 0; n < m; ++n) out[n] += tap * src[n];
  }
}

template <typename T>
std::vector<T> fir_valid_conv(std::span<const T> x, std::span<const T> h) {
  if (h.empty() || x.size() < h.size()) {
    throw ShapeError("convolution input of length " + std::to_string(x.size()) + " is shorter than kernel of length " +
                     std::to_string(h.size()));
  }
  std::vector<T> y(x.size() - h.size() + 1);
  fir_valid_conv<T>(x, h, y);
  return y;
}

template <typename T>
FeatureVector<T> compute_features(const Segment& seg, const ModelParams<T>& params, ForwardCache<T>& cache,
                                  bool with_f3) {
  const Dims& dims = params.dims;
  const std::size_t n = dims.n;
  if (seg.length() != n) {
    throw DimensionError("segment has " + std::to_string(seg.length()) + " samples, model expects " +
                         std::to_string(n));
  }
  FeatureVector<T> f{};
  for (std::size_t d = 0; d < kAxes; ++d) {
    auto& norm = cache.normalized[d];
    auto& hp = cache.highpassed[d];
    norm.resize(n);
    hp.resize(n);
    normalize_axis<T>(seg.readings[d], params.norm.mean[d], params.norm.inv_std[d], norm);
    f[feature_index(0, d)] = mean_feature<T>(norm);
    iir_highpass<T>(norm, params.gamma(d), hp);
    f[feature_index(1, d)] = mean_abs<T>(hp, n);

    if (!with_f3) {
      cache.conv1[d].clear();
      cache.activated[d].clear();
      cache.filtered[d].clear();
      continue;
    }
    if (params.variant == Variant::kNonlinear) {
      auto& u = cache.conv1[d];
      auto& v = cache.activated[d];
      auto& w = cache.filtered[d];
      u.resize(dims.conv1_length());
      v.resize(dims.conv1_length());
      w.resize(dims.conv2_length());
      fir_valid_conv<T>(hp, std::span<const T>(params.h1).subspan(d * dims.k1, dims.k1), u);
      for (std::size_t i = 0; i < u.size(); ++i) v[i] = std::tanh(u[i]);
      fir_valid_conv<T>(v, std::span<const T>(params.h2).subspan(d * dims.k2, dims.k2), w);
      f[feature_index(2, d)] = mean_abs<T>(w, n);
    } else {
      cache.conv1[d].clear();
      cache.activated[d].clear();
      auto& w = cache.filtered[d];
      w.resize(dims.conv1_length());
      fir_valid_conv<T>(hp, std::span<const T>(params.h_lin).subspan(d * dims.k1, dims.k1), w);
      f[feature_index(2, d)] = mean_abs<T>(w, n);
    }
  }
  cache.f = f;
  return f;
}

template <typename T>
FeatureResult<T> features(const Segment& seg, const ModelParams<T>& params) {
  FeatureResult<T> r;
  r.f = compute_features(seg, params, r.cache);
  r.cache.logits = mlp_logits<T>(r.f, params, &r.cache.hidden_pre);
  return r;
}

template <typename T>
std::vector<T> mlp_logits(std::span<const T> f, const ModelParams<T>& params, std::vector<T>* hidden_pre) {
  const Dims& dims = params.dims;
  if (f.size() != dims.f) throw DimensionError("feature vector length does not match model");
  std::vector<T> hidden(dims.l);
  if (hidden_pre) hidden_pre->resize(dims.l);
  for (std::size_t i = 0; i < dims.l; ++i) {
    T acc = params.b1[i];
    for (std::size_t j = 0; j < dims.f; ++j) acc += params.w1[i * dims.f + j] * f[j];
    if (hidden_pre) (*hidden_pre)[i] = acc;
    hidden[i] = acc > T(0) ? acc : T(0);
  }
  std::vector<T> logits(dims.c);
  for (std::size_t c = 0; c < dims.c; ++c) {
    T acc = params.b2[c];
    for (std::size_t i = 0; i < dims.l; ++i) acc += params.w2[c * dims.l + i] * hidden[i];
    logits[c] = acc;
  }
  return logits;
}

template <typename T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

template <typename T>
std::size_t infer(const Segment& seg, const ModelParams<T>& params) {
  ForwardCache<T> cache;
  const auto f = compute_features(seg, params, cache);
  const auto logits = mlp_logits<T>(f, params);
  return argmax<T>(logits);
}

#define FILTNET_INSTANTIATE(T)                                                                            \
  template void normalize_axis<T>(std::span<const std::int16_t>, T, T, std::span<T>);                     \
  template std::array<std::vector<T>, kAxes> normalize<T>(const Segment&, const NormStats<T>&);          \
  template T mean_feature<T>(std::span<const T>);                                                         \
  template void iir_highpass<T>(std::span<const T>, T, std::span<T>);                                     \
  template std::vector<T> iir_highpass<T>(std::span<const T>, T);                                         \
  template T mean_abs<T>(std::span<const T>, std::size_t);                                                \
  template void fir_valid_conv<T>(std::span<const T>, std::span<const T>, std::span<T>);                  \
  template std::vector<T> fir_valid_conv<T>(std::span<const T>, std::span<const T>);                      \
  template FeatureVector<T> compute_features<T>(const Segment&, const ModelParams<T>&, ForwardCache<T>&, \
                                                bool);                                                    \
  template FeatureResult<T> features<T>(const Segment&, const ModelParams<T>&);                           \
  template std::vector<T> mlp_logits<T>(std::span<const T>, const ModelParams<T>&, std::vector<T>*);      \
  template std::size_t argmax<T>(std::span<const T>);                                                     \
  template std::size_t infer<T>(const Segment&, const ModelParams<T>&);

FILTNET_INSTANTIATE(float)
FILTNET_INSTANTIATE(double)

#undef FILTNET_INSTANTIATE

}  // namespace filtnet
