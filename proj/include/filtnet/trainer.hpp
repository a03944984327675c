#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "filtnet/core_model.hpp"
#include "filtnet/featurizer.hpp"

namespace filtnet {

struct Hyper {
  double learning_rate = 0.0002;
  double weight_decay = 0.002;
  std::size_t batch_size = 1024;
  std::size_t iterations = 60000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  /// Pin the W1 columns reading f3 at zero: the 6-feature ablation.
  bool drop_f3 = false;
  /// Worker threads for per-sample passes; 0 picks hardware concurrency.
  std::size_t threads = 0;

  /// Throws ConfigError on non-positive sizes/rates or betas outside (0,1).
  void validate() const;
};

/// Tuned model and training settings for a class layout.
struct Profile {
  Dims dims;
  Hyper hyper;
};

/// 5 classes: K1 = K2 = 8, L = 6, lr 0.0002, decay 0.002, batch 1024, 60,000 iterations.
Profile profile_5class();
/// 6 classes: K1 = K2 = 8, L = 7, lr 0.0005, decay 0.004, batch 1024, 40,000 iterations.
Profile profile_6class();

/// Non-owning view of a batch; labels come from the segments.
using Batch = std::vector<const Segment*>;

Batch make_batch(std::span<const Segment> segments);

template <typename T>
struct LossResult {
  double loss = 0.0;
  std::vector<ForwardCache<T>> caches;
};

/// Mean softmax cross-entropy over the batch. Throws NumericError on non-finite logits.
template <typename T>
LossResult<T> forward_loss(const Batch& batch, const ModelParams<T>& params);

/// Loss only, without keeping caches.
template <typename T>
double batch_loss(const Batch& batch, const ModelParams<T>& params);

/// Exact reverse-mode gradient of the mean loss, using caches from forward_loss.
template <typename T>
Gradients<T> backward(const Batch& batch, const ModelParams<T>& params, const std::vector<ForwardCache<T>>& caches);

/// Central differences of `fn` around `point`, one coordinate at a time.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& fn,
                                       std::span<const double> point, double eps);

/// Finite-difference gradient of batch_loss in 64-bit arithmetic.
///
/// When a perturbation flips the sign of any |.| or ReLU argument the stencil
/// straddles a kink; the step is then shrunk by 10x (up to 4 times) so the
/// difference measures the same smooth piece the analytic gradient does.
Gradients<double> finite_diff_grad(const Batch& batch, const ModelParams<double>& params, double eps);

template <typename T>
struct AdamState {
  Trainables<T> m;
  Trainables<T> v;
  std::size_t step = 0;

  static AdamState zeros_for(const ModelParams<T>& params) {
    return AdamState{params.zeros_like(), params.zeros_like(), 0};
  }
};

/// One Adam update with L2 weight decay coupled into the gradient (all groups but gamma).
template <typename T>
void adam_step(ModelParams<T>& params, const Gradients<T>& grads, AdamState<T>& state, const Hyper& hyper);

template <typename T>
struct TrainResult {
  ModelParams<T> params;
  std::vector<double> loss_history;
};

using ProgressFn = std::function<void(std::size_t iteration, double loss)>;

/// Fits normalization on `train_set`, then runs hyper.iterations Adam steps on
/// batches sampled uniformly with replacement. Deterministic for a given seed.
template <typename T>
TrainResult<T> train(const Dataset& train_set, const Hyper& hyper, const Dims& dims, Variant variant,
                     const ProgressFn& progress = {});

/// Mean loss and gradient of a batch in one pass (the training inner loop).
template <typename T>
double loss_and_gradient(const Batch& batch, const ModelParams<T>& params, Gradients<T>& grads,
                         bool with_f3 = true, std::size_t threads = 1);

/// Zeroes the W1 entries (or gradients) that read the f3 features.
template <typename T>
void zero_f3_columns(std::vector<T>& w1, const Dims& dims);


/// Central differences with a 1e-4 step resolve a unit-scale loss to ~1e-12, so
/// relative error is measured against max(|a|, |b|, kGradcheckFloor).
inline constexpr double kGradcheckFloor = 1e-6;

/// Largest per-coordinate |a - b| / max(|a|, |b|, floor) over all groups.
double max_relative_error(const Gradients<double>& a, const Gradients<double>& b, double floor = kGradcheckFloor);

struct GradcheckCase {
  Dims dims;
  Variant variant = Variant::kNonlinear;
  std::size_t batch = 0;
  double max_rel_error = 0.0;
  ParamGroup worst_group = ParamGroup::kGammaLogit;
};

/// Analytic vs central-difference gradients on `configs` random small models
/// (N <= 32, K1, K2 <= 4, L <= 4, C <= 4, batch <= 8), alternating variants.
std::vector<GradcheckCase> gradient_check(std::uint64_t seed, std::size_t configs = 20);

}  // namespace filtnet
