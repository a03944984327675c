#include "filtnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <thread>

namespace filtnet {

void Hyper::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (iterations == 0) throw ConfigError("iteration count must be positive");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

Profile profile_5class() {
  Profile p;
  p.dims = Dims{256, 8, 8, kFeatureCount, 6, 5};
  p.hyper.learning_rate = 0.0002;
  p.hyper.weight_decay = 0.002;
  p.hyper.batch_size = 1024;
  p.hyper.iterations = 60000;
  return p;
}

Profile profile_6class() {
  Profile p;
  p.dims = Dims{256, 8, 8, kFeatureCount, 7, 6};
  p.hyper.learning_rate = 0.0005;
  p.hyper.weight_decay = 0.004;
  p.hyper.batch_size = 1024;
  p.hyper.iterations = 40000;
  return p;
}

Batch make_batch(std::span<const Segment> segments) {
  Batch b;
  b.reserve(segments.size());
  for (const auto& s : segments) b.push_back(&s);
  return b;
}

template <typename T>
void zero_f3_columns(std::vector<T>& w1, const Dims& dims) {
  for (std::size_t i = 0; i < dims.l; ++i) {
    for (std::size_t d = 0; d < kAxes; ++d) w1[i * dims.f + feature_index(2, d)] = T(0);
  }
}

namespace {

template <typename T>
T sign_of(T x) {
  return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0));
}

/// -log softmax(logits)[label], with max subtraction. Fills `probs`.
template <typename T>
double cross_entropy(const std::vector<T>& logits, std::size_t label, std::vector<T>* probs) {
  T max_logit = logits[0];
  for (T z : logits) {
    if (!std::isfinite(z)) throw NumericError("non-finite logit");
    max_logit = std::max(max_logit, z);
  }
  T denom = T(0);
  for (T z : logits) denom += std::exp(z - max_logit);
  if (probs) {
    probs->resize(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) (*probs)[c] = std::exp(logits[c] - max_logit) / denom;
  }
  return static_cast<double>(std::log(denom) - (logits[label] - max_logit));
}

template <typename T>
struct Workspace {
  ForwardCache<T> cache;
  std::vector<T> probs, dlogits, dhidden, dpre, dhp, dw, dv, du, adjoint;
};

/// Adds scale * d(loss of one sample)/d(theta) into `g`.
template <typename T>
void accumulate_sample(const ModelParams<T>& p, const ForwardCache<T>& cache, std::size_t label, T scale,
                       Gradients<T>& g, Workspace<T>& ws, bool with_f3) {
  const Dims& dims = p.dims;
  const std::size_t n = dims.n;

  // Output layer.
  cross_entropy(cache.logits, label, &ws.probs);
  ws.dlogits.resize(dims.c);
  for (std::size_t c = 0; c < dims.c; ++c) ws.dlogits[c] = scale * (ws.probs[c] - (c == label ? T(1) : T(0)));

  ws.dhidden.assign(dims.l, T(0));
  for (std::size_t c = 0; c < dims.c; ++c) {
    const T dz = ws.dlogits[c];
    g.b2[c] += dz;
    for (std::size_t i = 0; i < dims.l; ++i) {
      const T h = cache.hidden_pre[i] > T(0) ? cache.hidden_pre[i] : T(0);
      g.w2[c * dims.l + i] += dz * h;
      ws.dhidden[i] += dz * p.w2[c * dims.l + i];
    }
  }

  // Hidden layer; ReLU subgradient is 0 at 0.
  FeatureVector<T> df{};
  for (std::size_t i = 0; i < dims.l; ++i) {
    const T dpre = cache.hidden_pre[i] > T(0) ? ws.dhidden[i] : T(0);
    if (dpre == T(0)) continue;
    g.b1[i] += dpre;
    for (std::size_t j = 0; j < dims.f; ++j) {
      g.w1[i * dims.f + j] += dpre * cache.f[j];
      df[j] += dpre * p.w1[i * dims.f + j];
    }
  }

  // Feature stage, per axis. f1 depends on frozen normalization only.
  const T inv_n = T(1) / static_cast<T>(n);
  for (std::size_t d = 0; d < kAxes; ++d) {
    const auto& hp = cache.highpassed[d];
    const T df2 = df[feature_index(1, d)] * inv_n;
    ws.dhp.resize(n);
    for (std::size_t t = 0; t < n; ++t) ws.dhp[t] = df2 * sign_of(hp[t]);

    const T df3 = df[feature_index(2, d)] * inv_n;
    if (with_f3 && df3 != T(0)) {
      const auto& w = cache.filtered[d];
      ws.dw.resize(w.size());
      for (std::size_t t = 0; t < w.size(); ++t) ws.dw[t] = df3 * sign_of(w[t]);

      // Backprop through y[t] = sum_k h[k] x[t + K - 1 - k]: returns dx, accumulates dh.
      auto conv_backward = [](std::span<const T> x, std::span<const T> h, std::span<const T> dy, std::span<T> dh,
                              std::vector<T>& dx, bool accumulate_dx) {
        const std::size_t k_len = h.size();
        const std::size_t m = dy.size();
        if (!accumulate_dx) dx.assign(x.size(), T(0));
        for (std::size_t k = 0; k < k_len; ++k) {
          const T* src = x.data() + (k_len - 1 - k);
          T acc = T(0);
#pragma omp simd reduction(+ : acc)
          for (std::size_t t = 0; t < m; ++t) acc += dy[t] * src[t];
          dh[k] += acc;
          T* dst = dx.data() + (k_len - 1 - k);
          const T tap = h[k];
          for (std::size_t t = 0; t < m; ++t) dst[t] += dy[t] * tap;
        }
      };

      if (p.variant == Variant::kNonlinear) {
        const auto& v = cache.activated[d];
        conv_backward(v, std::span<const T>(p.h2).subspan(d * dims.k2, dims.k2), ws.dw,
                      std::span<T>(g.h2).subspan(d * dims.k2, dims.k2), ws.dv, false);
        ws.du.resize(v.size());
        for (std::size_t t = 0; t < v.size(); ++t) ws.du[t] = ws.dv[t] * (T(1) - v[t] * v[t]);
        conv_backward(hp, std::span<const T>(p.h1).subspan(d * dims.k1, dims.k1), ws.du,
                      std::span<T>(g.h1).subspan(d * dims.k1, dims.k1), ws.dhp, true);
      } else {
        conv_backward(hp, std::span<const T>(p.h_lin).subspan(d * dims.k1, dims.k1), ws.dw,
                      std::span<T>(g.h_lin).subspan(d * dims.k1, dims.k1), ws.dhp, true);
      }
    }

    // IIR adjoint: lambda[t] = dhp[t] + gamma * lambda[t + 1]; dgamma = sum lambda[t] * y[t - 1].
    const T gamma = p.gamma(d);
    T lambda = T(0);
    T dgamma = T(0);
    for (std::size_t t = n; t-- > 0;) {
      lambda = ws.dhp[t] + gamma * lambda;
      if (t > 0) dgamma += lambda * hp[t - 1];
    }
    g.gamma_logit[d] += dgamma * gamma * (T(1) - gamma);
  }
}

template <typename T>
void add_into(Gradients<T>& dst, const Gradients<T>& src) {
  std::vector<std::span<const T>> parts;
  src.visit([&](ParamGroup, std::span<const T> s) { parts.push_back(s); });
  std::size_t idx = 0;
  dst.visit([&](ParamGroup, std::span<T> s) {
    const auto from = parts[idx++];
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += from[i];
  });
}

template <typename T>
void fill_zero(Gradients<T>& g) {
  g.visit([](ParamGroup, std::span<T> s) { std::fill(s.begin(), s.end(), T(0)); });
}

constexpr std::size_t kMaxChunks = 8;

}  // namespace

template <typename T>
LossResult<T> forward_loss(const Batch& batch, const ModelParams<T>& params) {
  if (batch.empty()) throw ConfigError("empty batch");
  LossResult<T> r;
  r.caches.resize(batch.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Segment& s = *batch[i];
    if (s.label >= params.dims.c) throw DimensionError("label outside class range");
    auto& cache = r.caches[i];
    compute_features(s, params, cache);
    cache.logits = mlp_logits<T>(cache.f, params, &cache.hidden_pre);
    sum += cross_entropy(cache.logits, s.label, static_cast<std::vector<T>*>(nullptr));
  }
  r.loss = sum / double(batch.size());
  return r;
}

template <typename T>
double batch_loss(const Batch& batch, const ModelParams<T>& params) {
  if (batch.empty()) throw ConfigError("empty batch");
  ForwardCache<T> cache;
  double sum = 0.0;
  for (const Segment* s : batch) {
    compute_features(*s, params, cache);
    cache.logits = mlp_logits<T>(cache.f, params, &cache.hidden_pre);
    sum += cross_entropy(cache.logits, s->label, static_cast<std::vector<T>*>(nullptr));
  }
  return sum / double(batch.size());
}

template <typename T>
Gradients<T> backward(const Batch& batch, const ModelParams<T>& params, const std::vector<ForwardCache<T>>& caches) {
  if (caches.size() != batch.size()) throw ShapeError("cache count does not match batch size");
  Gradients<T> g = params.zeros_like();
  Workspace<T> ws;
  const T scale = T(1) / static_cast<T>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (caches[i].logits.size() != params.dims.c || caches[i].highpassed[0].size() != params.dims.n) {
      throw ShapeError("forward cache does not match model dimensions");
    }
    accumulate_sample(params, caches[i], batch[i]->label, scale, g, ws, true);
  }
  return g;
}

template <typename T>
double loss_and_gradient(const Batch& batch, const ModelParams<T>& params, Gradients<T>& grads, bool with_f3,
                         std::size_t threads) {
  if (batch.empty()) throw ConfigError("empty batch");
  const std::size_t chunks = std::min(batch.size(), kMaxChunks);
  const T scale = T(1) / static_cast<T>(batch.size());

  // Fixed contiguous chunks summed in order: the result does not depend on
  // how many threads process them.
  struct Chunk {
    Gradients<T> grads;
    Workspace<T> ws;
    double loss = 0.0;
  };
  std::vector<Chunk> parts(chunks);
  auto run_chunk = [&](std::size_t c) {
    Chunk& part = parts[c];
    part.grads = params.zeros_like();
    const std::size_t begin = c * batch.size() / chunks;
    const std::size_t end = (c + 1) * batch.size() / chunks;
    for (std::size_t i = begin; i < end; ++i) {
      const Segment& s = *batch[i];
      auto& cache = part.ws.cache;
      compute_features(s, params, cache, with_f3);
      cache.logits = mlp_logits<T>(cache.f, params, &cache.hidden_pre);
      part.loss += cross_entropy(cache.logits, s.label, static_cast<std::vector<T>*>(nullptr));
      accumulate_sample(params, cache, s.label, scale, part.grads, part.ws, with_f3);
    }
  };

  const std::size_t workers = std::min(threads == 0 ? std::size_t(1) : threads, chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
      });
    }
    for (auto& t : pool) t.join();
  }

  if (grads.w1.size() != params.w1.size()) grads = params.zeros_like();
  fill_zero(grads);
  double loss = 0.0;
  for (const auto& part : parts) {
    add_into(grads, part.grads);
    loss += part.loss;
  }
  return loss / double(batch.size());
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& fn,
                                       std::span<const double> point, double eps) {
  if (!(eps > 0.0)) throw DomainError("finite-difference step must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = fn(x);
    x[i] = saved - eps;
    const double down = fn(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

namespace {

/// Signs of every |.| and ReLU argument over the batch.
std::vector<signed char> kink_signature(const Batch& batch, const ModelParams<double>& p) {
  std::vector<signed char> sig;
  ForwardCache<double> cache;
  auto push = [&](double v) { sig.push_back(static_cast<signed char>(v > 0 ? 1 : (v < 0 ? -1 : 0))); };
  for (const Segment* s : batch) {
    compute_features(*s, p, cache);
    mlp_logits<double>(cache.f, p, &cache.hidden_pre);
    for (std::size_t d = 0; d < kAxes; ++d) {
      for (double v : cache.highpassed[d]) push(v);
      for (double v : cache.filtered[d]) push(v);
    }
    for (double v : cache.hidden_pre) push(v);
  }
  return sig;
}

}  // namespace

Gradients<double> finite_diff_grad(const Batch& batch, const ModelParams<double>& params, double eps) {
  if (!(eps > 0.0)) throw DomainError("finite-difference step must be positive");
  ModelParams<double> work = params;
  const auto base_sig = kink_signature(batch, params);
  Gradients<double> g = params.zeros_like();

  std::vector<std::span<double>> out_groups;
  g.visit([&](ParamGroup, std::span<double> s) { out_groups.push_back(s); });
  std::size_t group = 0;
  work.visit([&](ParamGroup, std::span<double> values) {
    auto out = out_groups[group++];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      // Loss at saved + m * h, and whether the kink pattern stayed put.
      auto probe = [&](double m, double h, bool& same) {
        values[i] = saved + m * h;
        const double l = batch_loss(batch, work);
        same = kink_signature(batch, work) == base_sig;
        values[i] = saved;
        return l;
      };
      double h = eps;
      double estimate = 0.0;
      for (int attempt = 0; attempt < 5; ++attempt, h *= 0.1) {
        bool up_same = false, down_same = false;
        const double up = probe(1.0, h, up_same);
        const double down = probe(-1.0, h, down_same);
        estimate = (up - down) / (2.0 * h);
        if (up_same && down_same) break;
        // Only one side crosses: second-order one-sided stencil on the clean side.
        const double centre = batch_loss(batch, work);
        bool far_same = false;
        if (down_same) {
          const double down2 = probe(-2.0, h, far_same);
          if (far_same) {
            estimate = (3.0 * centre - 4.0 * down + down2) / (2.0 * h);
            break;
          }
        } else if (up_same) {
          const double up2 = probe(2.0, h, far_same);
          if (far_same) {
            estimate = (-3.0 * centre + 4.0 * up - up2) / (2.0 * h);
            break;
          }
        }
      }
      out[i] = estimate;
    }
  });
  return g;
}

template <typename T>
void adam_step(ModelParams<T>& params, const Gradients<T>& grads, AdamState<T>& state, const Hyper& hyper) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const T beta1 = static_cast<T>(hyper.adam_beta1);
  const T beta2 = static_cast<T>(hyper.adam_beta2);
  const T bias1 = static_cast<T>(1.0 - std::pow(hyper.adam_beta1, t));
  const T sqrt_bias2 = static_cast<T>(std::sqrt(1.0 - std::pow(hyper.adam_beta2, t)));
  const T step_size = static_cast<T>(hyper.learning_rate) / bias1;
  const T eps = static_cast<T>(hyper.adam_eps);
  const T decay = static_cast<T>(hyper.weight_decay);

  std::vector<std::span<const T>> g_parts;
  std::vector<std::span<T>> m_parts, v_parts;
  grads.visit([&](ParamGroup, std::span<const T> s) { g_parts.push_back(s); });
  state.m.visit([&](ParamGroup, std::span<T> s) { m_parts.push_back(s); });
  state.v.visit([&](ParamGroup, std::span<T> s) { v_parts.push_back(s); });

  std::size_t idx = 0;
  params.visit([&](ParamGroup group, std::span<T> theta) {
    const auto g = g_parts.at(idx);
    auto m = m_parts.at(idx);
    auto v = v_parts.at(idx);
    ++idx;
    if (g.size() != theta.size() || m.size() != theta.size()) throw ShapeError("gradient shape mismatch");
    const bool decayed = decays(group) && decay != T(0);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const T gi = decayed ? g[i] + decay * theta[i] : g[i];
      m[i] = beta1 * m[i] + (T(1) - beta1) * gi;
      v[i] = beta2 * v[i] + (T(1) - beta2) * gi * gi;
      const T denom = std::sqrt(v[i]) / sqrt_bias2 + eps;
      theta[i] -= step_size * (m[i] / denom);
    }
  });
}

template <typename T>
TrainResult<T> train(const Dataset& train_set, const Hyper& hyper, const Dims& dims, Variant variant,
                     const ProgressFn& progress) {
  hyper.validate();
  dims.validate();
  if (train_set.empty()) throw DegenerateDataError("training set is empty");
  if (train_set.segment_length != dims.n) throw DimensionError("dataset segment length does not match dims.n");
  if (train_set.class_count() != dims.c) throw DimensionError("dataset class count does not match dims.c");

  TrainResult<T> result;
  ModelParams<T>& params = result.params;
  params = init_model<T>(dims, hyper.seed, variant);
  params.norm = cast_norm<T>(fit_norm_stats(train_set));
  if (hyper.drop_f3) zero_f3_columns(params.w1, dims);

  AdamState<T> state = AdamState<T>::zeros_for(params);
  Gradients<T> grads = params.zeros_like();
  std::mt19937_64 rng(hyper.seed ^ 0x5851f42d4c957f2dULL);
  std::uniform_int_distribution<std::size_t> pick(0, train_set.segments.size() - 1);
  const std::size_t threads = hyper.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : hyper.threads;

  Batch batch(hyper.batch_size);
  result.loss_history.reserve(hyper.iterations);
  for (std::size_t it = 0; it < hyper.iterations; ++it) {
    for (auto& slot : batch) slot = &train_set.segments[pick(rng)];
    const double loss = loss_and_gradient(batch, params, grads, !hyper.drop_f3, threads);
    if (hyper.drop_f3) zero_f3_columns(grads.w1, dims);
    adam_step(params, grads, state, hyper);
    result.loss_history.push_back(loss);
    if (progress) progress(it, loss);
  }
  return result;
}

#define FILTNET_INSTANTIATE(T)                                                                                  \
  template void zero_f3_columns<T>(std::vector<T>&, const Dims&);                                               \
  template LossResult<T> forward_loss<T>(const Batch&, const ModelParams<T>&);                                  \
  template double batch_loss<T>(const Batch&, const ModelParams<T>&);                                           \
  template Gradients<T> backward<T>(const Batch&, const ModelParams<T>&, const std::vector<ForwardCache<T>>&);  \
  template double loss_and_gradient<T>(const Batch&, const ModelParams<T>&, Gradients<T>&, bool, std::size_t);  \
  template void adam_step<T>(ModelParams<T>&, const Gradients<T>&, AdamState<T>&, const Hyper&);                \
  template TrainResult<T> train<T>(const Dataset&, const Hyper&, const Dims&, Variant, const ProgressFn&);

FILTNET_INSTANTIATE(float)
FILTNET_INSTANTIATE(double)

#undef FILTNET_INSTANTIATE


double max_relative_error(const Gradients<double>& a, const Gradients<double>& b, double floor) {
  std::vector<std::span<const double>> parts;
  b.visit([&](ParamGroup, std::span<const double> s) { parts.push_back(s); });
  std::size_t idx = 0;
  double worst = 0.0;
  a.visit([&](ParamGroup, std::span<const double> x) {
    const auto y = parts.at(idx++);
    if (x.size() != y.size()) throw ShapeError("gradient shape mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double denom = std::max({std::abs(x[i]), std::abs(y[i]), floor});
      worst = std::max(worst, std::abs(x[i] - y[i]) / denom);
    }
  });
  if (idx != parts.size()) throw ShapeError("gradient group mismatch");
  return worst;
}

std::vector<GradcheckCase> gradient_check(std::uint64_t seed, std::size_t configs) {
  std::mt19937_64 rng(seed);
  auto uniform_int = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  std::vector<GradcheckCase> cases;
  for (std::size_t cfg = 0; cfg < configs; ++cfg) {
    GradcheckCase gc;
    gc.variant = cfg % 2 == 0 ? Variant::kNonlinear : Variant::kLinear;
    Dims& d = gc.dims;
    d.k1 = uniform_int(1, 4);
    d.k2 = uniform_int(1, 4);
    d.n = uniform_int(std::max<std::size_t>(8, d.k1 + d.k2), 32);
    d.f = kFeatureCount;
    d.l = uniform_int(1, 4);
    d.c = uniform_int(2, 4);
    gc.batch = uniform_int(2, 8);

    Dataset ds;
    ds.segment_length = d.n;
    for (std::size_t k = 0; k < d.c; ++k) ds.class_names.push_back("c" + std::to_string(k));
    for (std::size_t b = 0; b < gc.batch; ++b) {
      Segment seg;
      seg.label = uniform_int(0, d.c - 1);
      for (std::size_t axis = 0; axis < kAxes; ++axis) {
        const double mean = uniform(-600.0, 600.0);
        const double amp = uniform(20.0, 400.0);
        const double omega = uniform(0.1, 3.0);
        auto& r = seg.readings[axis];
        r.resize(d.n);
        for (std::size_t i = 0; i < d.n; ++i) {
          const double v = mean + amp * std::sin(omega * double(i)) + uniform(-150.0, 150.0);
          r[i] = static_cast<std::int16_t>(std::lround(v));
        }
      }
      ds.segments.push_back(std::move(seg));
    }

    ModelParams<double> params = init_model<double>(d, rng(), gc.variant);
    params.norm = fit_norm_stats(ds);
    for (auto& g : params.gamma_logit) g = logit(uniform(0.2, 0.95));
    for (auto& b : params.b1) b = uniform(-0.3, 0.3);
    for (auto& b : params.b2) b = uniform(-0.3, 0.3);

    const Batch batch = make_batch(ds.segments);
    const auto fwd = forward_loss(batch, params);
    const Gradients<double> analytic = backward(batch, params, fwd.caches);
    const Gradients<double> numeric = finite_diff_grad(batch, params, 1e-4);

    std::vector<std::span<const double>> parts;
    numeric.visit([&](ParamGroup, std::span<const double> s) { parts.push_back(s); });
    std::size_t idx = 0;
    analytic.visit([&](ParamGroup group, std::span<const double> x) {
      const auto y = parts[idx++];
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double denom = std::max({std::abs(x[i]), std::abs(y[i]), kGradcheckFloor});
        const double rel = std::abs(x[i] - y[i]) / denom;
        if (rel > gc.max_rel_error) {
          gc.max_rel_error = rel;
          gc.worst_group = group;
        }
      }
    });
    cases.push_back(gc);
  }
  return cases;
}

}  // namespace filtnet
