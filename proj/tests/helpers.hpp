#pragma once

#include <cstdint>
#include <random>

#include "filtnet/core_model.hpp"

namespace filtnet::testing {

inline Segment random_segment(std::size_t n, std::mt19937_64& rng, int lo = -2048, int hi = 2047) {
  std::uniform_int_distribution<int> sample(lo, hi);
  Segment s;
  for (auto& axis : s.readings) {
    axis.resize(n);
    for (auto& v : axis) v = static_cast<std::int16_t>(sample(rng));
  }
  return s;
}

/// Random finite norm stats, gamma logits and biases on top of init_model.
template <typename T>
ModelParams<T> random_model(const Dims& dims, Variant variant, std::mt19937_64& rng) {
  auto p = init_model<T>(dims, rng(), variant);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t d = 0; d < kAxes; ++d) {
    p.norm.mean[d] = static_cast<T>(300.0 * u(rng));
    p.norm.inv_std[d] = static_cast<T>(std::exp(-6.0 + u(rng)));
    p.gamma_logit[d] = static_cast<T>(2.5 * u(rng));
  }
  for (auto& b : p.b1) b = static_cast<T>(0.2 * u(rng));
  for (auto& b : p.b2) b = static_cast<T>(0.2 * u(rng));
  return p;
}

}  // namespace filtnet::testing
