#include <cstring>
#include <random>

#include "doctest.h"
#include "filtnet/stream_engine.hpp"
#include "helpers.hpp"

using namespace filtnet;

namespace {

template <typename T>
std::optional<StreamOutput<T>> push_segment(StreamState<T>& st, const Segment& seg, const ModelParams<T>& p,
                                            StageOpCounts* counter = nullptr) {
  std::optional<StreamOutput<T>> out;
  for (std::size_t i = 0; i < seg.length(); ++i) {
    auto r = stream_push(st, {seg.readings[0][i], seg.readings[1][i], seg.readings[2][i]}, p, counter);
    if (i + 1 < seg.length()) CHECK_FALSE(r.has_value());
    out = r;
  }
  return out;
}

}  // namespace

TEST_CASE("closed-form operation counts") {
  const auto paper = op_count_report(Dims{256, 8, 8, 9, 7, 6}).total();
  CHECK(paper.adds == 14967);
  CHECK(paper.abs_evals == 1494);
  CHECK(paper.mults == 13431);
  CHECK(paper.tanh_evals == 747);
  CHECK(paper.relu_ops == 7);
  CHECK(paper.argmax_ops == 1);

  // K1 = K2 = 1, N = 4, L = 1, C = 2, substituted by hand:
  // adds  = 3*4 + (9*4 + 3*5*1 + 3*4*1 - 18) + (9 + 2) = 12 + 45 + 11
  // mults = 3*4 + (3*4 + 3*4*1 + 3*4*1 + 6) + (9 + 2) = 12 + 42 + 11
  // abs   = 3*(8 - 2 + 2) = 24, tanh = 3*4 = 12
  const auto r = op_count_report(Dims{4, 1, 1, 9, 1, 2});
  CHECK(r.normalization.adds == 12);
  CHECK(r.features.adds == 45);
  CHECK(r.classification.adds == 11);
  CHECK(r.total().adds == 68);
  CHECK(r.features.mults == 42);
  CHECK(r.total().mults == 65);
  CHECK(r.total().abs_evals == 24);
  CHECK(r.total().tanh_evals == 12);
  CHECK(r.total().relu_ops == 1);
  CHECK(r.total().argmax_ops == 1);

  CHECK_THROWS_AS(op_count_report(Dims{4, 4, 4, 9, 1, 2}), DimensionError);
}

TEST_CASE("fresh state and footprint") {
  std::mt19937_64 rng(1);
  for (std::size_t n : {64u, 256u, 1024u}) {
    const auto p = init_model<float>(Dims{n, 8, 8, 9, 6, 5}, 0, Variant::kNonlinear);
    const auto s = stream_init(p);
    CHECK(s.footprint() == 3 * (2 + 8 + 8 + 3) + 1);
    CHECK(s.counter == 0);
    for (const auto& a : s.axes) {
      CHECK(a.sum_normalized == 0.0f);
      CHECK(a.sum_abs_highpassed == 0.0f);
      CHECK(a.sum_abs_filtered == 0.0f);
      CHECK(a.prev_input == 0.0f);
      CHECK(a.prev_output == 0.0f);
    }
    CHECK(s == stream_init(p));
  }
  for (int t = 0; t < 20; ++t) {
    const std::size_t k1 = 1 + rng() % 9, k2 = 1 + rng() % 9;
    const auto p = init_model<double>(Dims{64, k1, k2, 9, 2, 2}, 0, Variant::kNonlinear);
    CHECK(stream_init(p).footprint() == 3 * (2 + k1 + k2 + 3) + 1);
  }
}

TEST_CASE("streaming is bit-identical to batch inference") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 300; ++t) {
    const std::size_t k1 = 1 + rng() % 6, k2 = 1 + rng() % 6;
    const Dims dims{k1 + k2 + rng() % 40, k1, k2, 9, 1 + rng() % 6, 2 + rng() % 5};
    const Variant v = t % 2 ? Variant::kLinear : Variant::kNonlinear;
    const auto p = testing::random_model<float>(dims, v, rng);
    auto st = stream_init(p);
    for (int rep = 0; rep < 3; ++rep) {
      const auto seg = testing::random_segment(dims.n, rng);
      const auto out = push_segment(st, seg, p);
      REQUIRE(out.has_value());
      const auto batch = features<float>(seg, p).f;
      CHECK(std::memcmp(out->features.data(), batch.data(), sizeof(batch)) == 0);
      CHECK(out->class_index == infer<float>(seg, p));
      CHECK(st == stream_init(p));
    }
  }
}

TEST_CASE("instrumented counts against the closed forms") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 40; ++t) {
    const std::size_t k1 = 1 + rng() % 8, k2 = 1 + rng() % 8;
    const Dims dims{k1 + k2 + rng() % 200, k1, k2, 9, 1 + rng() % 8, 2 + rng() % 6};
    const auto p = testing::random_model<double>(dims, Variant::kNonlinear, rng);
    auto st = stream_init(p);
    StageOpCounts counted;
    push_segment(st, testing::random_segment(dims.n, rng), p, &counted);
    const auto formula = op_count_report(dims);

    CHECK(counted.normalization == formula.normalization);
    CHECK(counted.classification == formula.classification);
    CHECK(counted.features.tanh_evals == formula.features.tanh_evals);
    CHECK(counted.features.abs_evals == formula.features.abs_evals);

    // The printed add and multiply totals are not what a direct implementation
    // performs; the offsets are fixed functions of the dimensions.
    const auto n = static_cast<std::int64_t>(dims.n);
    const auto a1 = static_cast<std::int64_t>(k1), a2 = static_cast<std::int64_t>(k2);
    CHECK(counted.features.adds - formula.features.adds == 6 * n - 6 * a1 - 3 * a2 + 24);
    CHECK(counted.features.mults - formula.features.mults == 3);
  }
}
