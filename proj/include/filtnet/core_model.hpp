#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "filtnet/errors.hpp"

namespace filtnet {

inline constexpr std::size_t kAxes = 3;
inline constexpr std::size_t kFeatureCount = 9;
inline constexpr double kSampleRateHz = 50.0;

/// Model and segment dimensions.
///
/// `n` samples per segment, FIR lengths `k1`/`k2`, `f` features (always 9),
/// hidden width `l` and `c` classes.
struct Dims {
  std::size_t n = 256;
  std::size_t k1 = 8;
  std::size_t k2 = 8;
  std::size_t f = kFeatureCount;
  std::size_t l = 6;
  std::size_t c = 5;

  /// Throws DimensionError unless n >= k1 + k2 - 1, k1, k2, l >= 1, f == 9, c >= 2.
  void validate() const;

  std::size_t conv1_length() const { return n - k1 + 1; }
  std::size_t conv2_length() const { return n - k1 - k2 + 2; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Which filter produces the third feature set.
enum class Variant : std::uint8_t {
  kNonlinear = 0,  // FIR -> tanh -> FIR
  kLinear = 1,     // single FIR
};

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

/// One labeled window of raw triaxial accelerometer counts.
struct Segment {
  std::array<std::vector<std::int16_t>, kAxes> readings;
  std::size_t label = 0;
  std::string animal_id;
  std::string dataset_id;

  std::size_t length() const { return readings[0].size(); }
};

struct Dataset {
  std::vector<Segment> segments;
  std::vector<std::string> class_names;
  std::size_t segment_length = 0;

  std::size_t class_count() const { return class_names.size(); }
  bool empty() const { return segments.empty(); }

  /// Checks shared length, dense labels and per-axis sizes. Throws DimensionError.
  void validate() const;

  /// Distinct animal ids in first-appearance order.
  std::vector<std::string> animals() const;

  /// Copy of this dataset restricted to the given segment indices.
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// Per-axis normalization: mean (raw units) and inverse standard deviation.
template <typename T>
struct NormStats {
  std::array<T, kAxes> mean{};
  std::array<T, kAxes> inv_std{T(1), T(1), T(1)};
};

enum class ParamGroup { kGammaLogit, kH1, kH2, kHLin, kW1, kB1, kW2, kB2 };

const char* param_group_name(ParamGroup g);

/// Whether L2 weight decay applies to a parameter group (everything but gamma).
constexpr bool decays(ParamGroup g) { return g != ParamGroup::kGammaLogit; }

/// The trainable parameters. Shared layout for model weights and their gradients.
///
/// Filter taps are stored axis-major (`h1[d * k1 + k]`), matrices row-major
/// (`w1[i * f + j]`). In the nonlinear variant `h_lin` is empty; in the
/// linear variant `h1`/`h2` are empty.
template <typename T>
struct Trainables {
  std::array<T, kAxes> gamma_logit{};
  std::vector<T> h1, h2, h_lin;
  std::vector<T> w1, b1, w2, b2;

  /// Calls `fn(ParamGroup, std::span<T>)` for every non-empty group in file order.
  template <typename Fn>
  void visit(Fn&& fn) {
    fn(ParamGroup::kGammaLogit, std::span<T>(gamma_logit));
    visit_rest(*this, fn);
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    fn(ParamGroup::kGammaLogit, std::span<const T>(gamma_logit));
    visit_rest(*this, fn);
  }

  /// Same shape, all zeros.
  Trainables zeros_like() const;

  std::size_t scalar_count() const;

 private:
  template <typename Self, typename Fn>
  static void visit_rest(Self& self, Fn& fn) {
    if (!self.h1.empty()) fn(ParamGroup::kH1, std::span(self.h1));
    if (!self.h2.empty()) fn(ParamGroup::kH2, std::span(self.h2));
    if (!self.h_lin.empty()) fn(ParamGroup::kHLin, std::span(self.h_lin));
    fn(ParamGroup::kW1, std::span(self.w1));
    fn(ParamGroup::kB1, std::span(self.b1));
    fn(ParamGroup::kW2, std::span(self.w2));
    fn(ParamGroup::kB2, std::span(self.b2));
  }
};

template <typename T>
using Gradients = Trainables<T>;

template <typename T>
struct ModelParams : Trainables<T> {
  Dims dims;
  Variant variant = Variant::kNonlinear;
  NormStats<T> norm;

  /// gamma_d = logistic(gamma_logit_d), always in (0, 1).
  T gamma(std::size_t axis) const;

  /// Element-wise conversion to another precision.
  template <typename U>
  ModelParams<U> cast() const;

  /// Throws DimensionError when vector sizes disagree with dims/variant.
  void check_shapes() const;

  bool all_finite() const;
};

/// Numerically stable logistic function.
template <typename T>
T logistic(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <typename T>
T logit(T p) {
  return std::log(p / (T(1) - p));
}

/// Deterministic initialization: gamma = 0.9, FIR taps U[-1/sqrt(K), 1/sqrt(K)],
/// MLP weights U[-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases, identity norm.
template <typename T>
ModelParams<T> init_model(const Dims& dims, std::uint64_t seed, Variant variant);

struct ParamCount {
  std::array<std::size_t, 3> per_stage{};  // normalization, features, classification
  std::size_t total = 0;
};

/// Closed-form parameter count of the nonlinear model.
ParamCount param_count(const Dims& dims);

/// Number of scalars actually serialized for a model of this variant.
std::size_t stored_param_count(const Dims& dims, Variant variant);

/// Size in bytes of the fixed model-file header.
inline constexpr std::size_t kModelHeaderBytes = 4 + 2 + 1 + 6 * 4;
inline constexpr std::uint16_t kModelFormatVersion = 1;

/// Serializes as "DBC1" + version + variant + dims + little-endian float32 payload.
template <typename T>
std::vector<std::uint8_t> save_model(const ModelParams<T>& params);

/// Inverse of save_model. Throws FormatError or CorruptionError.
ModelParams<float> load_model(std::span<const std::uint8_t> bytes);

void write_model_file(const std::string& path, const ModelParams<float>& params);
ModelParams<float> read_model_file(const std::string& path);

// ---------------------------------------------------------------------------

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.dims = dims;
  out.variant = variant;
  auto conv = [](const std::vector<T>& v) { return std::vector<U>(v.begin(), v.end()); };
  for (std::size_t d = 0; d < kAxes; ++d) {
    out.gamma_logit[d] = static_cast<U>(this->gamma_logit[d]);
    out.norm.mean[d] = static_cast<U>(norm.mean[d]);
    out.norm.inv_std[d] = static_cast<U>(norm.inv_std[d]);
  }
  out.h1 = conv(this->h1);
  out.h2 = conv(this->h2);
  out.h_lin = conv(this->h_lin);
  out.w1 = conv(this->w1);
  out.b1 = conv(this->b1);
  out.w2 = conv(this->w2);
  out.b2 = conv(this->b2);
  return out;
}

}  // namespace filtnet
