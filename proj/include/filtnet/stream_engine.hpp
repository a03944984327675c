#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "filtnet/core_model.hpp"
#include "filtnet/featurizer.hpp"

namespace filtnet {

/// Per-segment operation tallies.
struct OpCounts {
  std::int64_t adds = 0;
  std::int64_t abs_evals = 0;
  std::int64_t mults = 0;
  std::int64_t tanh_evals = 0;
  std::int64_t relu_ops = 0;
  std::int64_t argmax_ops = 0;

  OpCounts& operator+=(const OpCounts& o);
  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

struct StageOpCounts {
  OpCounts normalization;
  OpCounts features;
  OpCounts classification;

  OpCounts total() const;
};

/// Closed-form operation counts for one inference, stage by stage, exactly as
/// tabulated for the deployed model (including its -18 / +6 correction terms).
StageOpCounts op_count_report(const Dims& dims);

/// Constant-size inference state for one sensor stream.
///
/// Per axis: previous normalized input, previous IIR output, the last K1 IIR
/// outputs, the last K2 tanh outputs, and three running sums. Ring positions
/// follow from the sample counter, so no extra indices are stored.
template <typename T>
struct StreamState {
  struct Axis {
    T prev_input = T(0);
    T prev_output = T(0);
    std::vector<T> iir_ring;   // K1
    std::vector<T> tanh_ring;  // K2
    T sum_normalized = T(0);
    T sum_abs_highpassed = T(0);
    T sum_abs_filtered = T(0);

    friend bool operator==(const Axis&, const Axis&) = default;
  };
  std::array<Axis, kAxes> axes;
  std::size_t counter = 0;

  /// Scalars held: 3 * (2 + K1 + K2 + 3) + 1, independent of N.
  std::size_t footprint() const;

  friend bool operator==(const StreamState&, const StreamState&) = default;
};

template <typename T>
struct StreamOutput {
  std::size_t class_index = 0;
  FeatureVector<T> features{};
};

template <typename T>
StreamState<T> stream_init(const ModelParams<T>& params);

/// Consumes one triaxial sample. Every N-th call returns the class and
/// features of the completed segment and resets the state. Results are
/// bit-identical to compute_features + mlp_logits + argmax on the same segment.
/// When `counter` is non-null every arithmetic operation is tallied by stage.
template <typename T>
std::optional<StreamOutput<T>> stream_push(StreamState<T>& state, const std::array<std::int16_t, kAxes>& sample,
                                           const ModelParams<T>& params, StageOpCounts* counter = nullptr);

}  // namespace filtnet
