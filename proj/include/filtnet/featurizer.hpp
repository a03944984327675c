#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "filtnet/core_model.hpp"

namespace filtnet {

/// [f1x, f1y, f1z, f2x, f2y, f2z, f3x, f3y, f3z]
template <typename T>
using FeatureVector = std::array<T, kFeatureCount>;

constexpr std::size_t feature_index(std::size_t set, std::size_t axis) { return set * kAxes + axis; }

/// Every intermediate of one forward pass, kept for backpropagation.
///
/// Convolutions are "valid": `conv1`/`activated` have n - k1 + 1 entries per
/// axis and `filtered` has n - k1 - k2 + 2. In the linear variant `conv1` and
/// `activated` stay empty and `filtered` holds the single FIR output
/// (n - k1 + 1 entries).
template <typename T>
struct ForwardCache {
  std::array<std::vector<T>, kAxes> normalized;
  std::array<std::vector<T>, kAxes> highpassed;
  std::array<std::vector<T>, kAxes> conv1;
  std::array<std::vector<T>, kAxes> activated;
  std::array<std::vector<T>, kAxes> filtered;
  FeatureVector<T> f{};
  std::vector<T> hidden_pre;
  std::vector<T> logits;
};

/// Population mean and inverse standard deviation per axis over every sample.
/// Throws DegenerateDataError on an empty dataset or zero variance.
NormStats<double> fit_norm_stats(const Dataset& ds);

template <typename T>
NormStats<T> cast_norm(const NormStats<double>& n) {
  NormStats<T> out;
  for (std::size_t d = 0; d < kAxes; ++d) {
    out.mean[d] = static_cast<T>(n.mean[d]);
    out.inv_std[d] = static_cast<T>(n.inv_std[d]);
  }
  return out;
}

/// s_d * (a_d[n] - m_d) for one axis.
template <typename T>
void normalize_axis(std::span<const std::int16_t> raw, T mean, T inv_std, std::span<T> out);

template <typename T>
std::array<std::vector<T>, kAxes> normalize(const Segment& seg, const NormStats<T>& norm);

template <typename T>
T mean_feature(std::span<const T> x);

/// y[n] = gamma * y[n-1] + x[n] - x[n-1], with x[-1] = y[-1] = 0.
/// Throws DomainError unless gamma is in [0, 1). `out` may not alias `x`.
template <typename T>
void iir_highpass(std::span<const T> x, T gamma, std::span<T> out);

template <typename T>
std::vector<T> iir_highpass(std::span<const T> x, T gamma);

/// Sum of |x| divided by `divisor` (the segment length, not x.size()).
template <typename T>
T mean_abs(std::span<const T> x, std::size_t divisor);

/// Valid convolution, y[n] = sum_k h[k] * x[n + K - 1 - k], n = 0..M-K.
/// Throws ShapeError when x is shorter than h.
template <typename T>
void fir_valid_conv(std::span<const T> x, std::span<const T> h, std::span<T> out);

template <typename T>
std::vector<T> fir_valid_conv(std::span<const T> x, std::span<const T> h);

/// Full feature pipeline for one segment, filling `cache`. With `with_f3`
/// false the third feature set is left at zero and no filtering is done.
template <typename T>
FeatureVector<T> compute_features(const Segment& seg, const ModelParams<T>& params, ForwardCache<T>& cache,
                                  bool with_f3 = true);

template <typename T>
struct FeatureResult {
  FeatureVector<T> f;
  ForwardCache<T> cache;
};

template <typename T>
FeatureResult<T> features(const Segment& seg, const ModelParams<T>& params);

/// W2 * max(0, W1 f + b1) + b2. Pre-activation hidden values go to `hidden_pre` when non-null.
template <typename T>
std::vector<T> mlp_logits(std::span<const T> f, const ModelParams<T>& params, std::vector<T>* hidden_pre = nullptr);

/// Index of the largest value; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> values);

template <typename T>
std::size_t infer(const Segment& seg, const ModelParams<T>& params);

}  // namespace filtnet
