#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "filtnet/evaluator.hpp"
#include "filtnet/synthgen.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace filtnet;

namespace {

double binary_mcc(double tp, double fn, double fp, double tn) {
  const double den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  return den == 0.0 ? 0.0 : (tp * tn - fp * fn) / den;
}

ConfusionMatrix from_rows(std::size_t c, std::initializer_list<std::uint64_t> v) {
  ConfusionMatrix cm(c);
  std::size_t i = 0;
  for (auto x : v) {
    cm.add(i / c, i % c, x);
    ++i;
  }
  return cm;
}

Dataset tiny_dataset(std::size_t animals) {
  Dataset ds;
  ds.class_names = {"lo", "hi"};
  ds.segment_length = 16;
  std::mt19937_64 rng(animals);
  for (std::size_t a = 0; a < animals; ++a) {
    for (std::size_t i = 0; i < 6; ++i) {
      auto s = testing::random_segment(16, rng, -40, 40);
      s.label = i % 2;
      if (s.label == 1)
        for (auto& axis : s.readings)
          for (auto& v : axis) v = static_cast<std::int16_t>(v + 500);
      s.animal_id = "animal" + std::to_string(a);
      ds.segments.push_back(s);
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("confusion tallies") {
  const std::vector<std::size_t> same = {0, 1, 2};
  const auto id = confusion(same, same, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(id.at(i, j) == (i == j ? 1u : 0u));

  const auto empty = confusion(std::vector<std::size_t>{}, std::vector<std::size_t>{}, 4);
  CHECK(empty.total() == 0);
  CHECK(empty.classes() == 4);

  const std::vector<std::size_t> preds = {0, 0, 1}, labels = {0, 1, 1};
  const auto cm = confusion(preds, labels, 2);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(0, 1) == 0);
  CHECK(cm.total() == 3);

  CHECK_THROWS_AS(confusion(std::vector<std::size_t>{2}, std::vector<std::size_t>{0}, 2), DomainError);
  CHECK_THROWS_AS(confusion(std::vector<std::size_t>{0}, std::vector<std::size_t>{0, 1}, 2), Error);
}

TEST_CASE("multiclass MCC examples") {
  CHECK(mcc_multiclass(from_rows(3, {4, 0, 0, 0, 7, 0, 0, 0, 2})) == 1.0);
  CHECK(mcc_multiclass(from_rows(2, {2, 1, 1, 2})) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(mcc_multiclass(from_rows(2, {0, 3, 0, 5})) == 0.0);  // one predicted class
  CHECK_THROWS_AS(mcc_multiclass(ConfusionMatrix(3)), DomainError);

  std::mt19937_64 rng(1);
  std::vector<std::size_t> p, l;
  for (int i = 0; i < 200000; ++i) {
    p.push_back(rng() % 4);
    l.push_back(rng() % 4);
  }
  CHECK(std::abs(mcc_multiclass(confusion(p, l, 4))) < 0.01);
}

TEST_CASE("binary MCC agrees with the textbook formula") {
  for (std::uint64_t a = 0; a <= 5; ++a)
    for (std::uint64_t b = 0; b <= 5; ++b)
      for (std::uint64_t c = 0; c <= 5; ++c)
        for (std::uint64_t d = 0; d <= 5; ++d) {
          if (a + b + c + d == 0) continue;
          const auto cm = from_rows(2, {a, b, c, d});
          CHECK(mcc_multiclass(cm) == doctest::Approx(binary_mcc(a, b, c, d)).epsilon(1e-12).scale(1e-12));
        }
}

TEST_CASE("MCC is symmetric under transposition and bounded") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 500; ++t) {
    const std::size_t c = 2 + rng() % 5;
    ConfusionMatrix cm(c);
    for (std::size_t i = 0; i < c * c; ++i) cm.add(i / c, i % c, rng() % 20);
    if (cm.total() == 0) continue;
    const double m = mcc_multiclass(cm);
    CHECK(m >= -1.0);
    CHECK(m <= 1.0);
    CHECK(mcc_multiclass(cm.transposed()) == doctest::Approx(m).epsilon(1e-12).scale(1e-12));
    for (std::size_t k = 0; k < c; ++k) {
      const double pk = mcc_per_class(cm, k);
      CHECK(pk >= -1.0);
      CHECK(pk <= 1.0);
    }
  }
}

TEST_CASE("per-class MCC") {
  const auto diag = from_rows(3, {3, 0, 0, 0, 2, 0, 0, 0, 5});
  for (std::size_t k = 0; k < 3; ++k) CHECK(mcc_per_class(diag, k) == 1.0);

  const auto absent = from_rows(3, {3, 1, 0, 2, 2, 0, 0, 0, 0});
  CHECK(mcc_per_class(absent, 2) == 0.0);

  const auto cm = from_rows(3, {5, 2, 1, 1, 6, 3, 0, 2, 7});
  const auto two = collapse_one_vs_rest(cm, 1);
  CHECK(two.at(0, 0) == 6);
  CHECK(two.at(0, 1) == 4);
  CHECK(two.at(1, 0) == 4);
  CHECK(two.at(1, 1) == 13);
  CHECK(mcc_per_class(cm, 1) == doctest::Approx(mcc_multiclass(two)).epsilon(1e-15));
  CHECK(mcc_per_class(cm, 1) == doctest::Approx(binary_mcc(6, 4, 4, 13)).epsilon(1e-12));
}

TEST_CASE("merge and report") {
  auto a = from_rows(2, {1, 0, 0, 1});
  a.merge(from_rows(2, {0, 2, 1, 0}));
  CHECK(a == from_rows(2, {1, 2, 1, 1}));
  CHECK(a.trace() == 2);
  CHECK(a.row_sum(0) == 3);
  CHECK(a.col_sum(0) == 2);

  const auto r = make_report(a, {"x", "y"});
  CHECK(r.per_class_mcc.size() == 2);
  const auto j = nlohmann::json::parse(report_to_json(r));
  CHECK(j.contains("confusion"));
  CHECK(j["overall_mcc"].get<double>() == doctest::Approx(r.overall_mcc));
}

TEST_CASE("leave-one-animal-out partitions the data") {
  const auto ds = tiny_dataset(3);
  Hyper h;
  h.iterations = 60;
  h.batch_size = 8;
  h.learning_rate = 0.02;
  h.threads = 1;
  const Dims dims{16, 2, 2, 9, 3, 2};
  const auto r = loao_cv(ds, h, dims, Variant::kNonlinear);
  CHECK(r.folds.size() == 3);
  CHECK(r.confusion.total() == ds.segments.size());
  std::set<std::string> held;
  std::size_t sum = 0;
  for (const auto& f : r.folds) {
    held.insert(f.held_out);
    sum += f.segments;
    CHECK(f.confusion.total() == f.segments);
  }
  CHECK(held.size() == 3);
  CHECK(sum == ds.segments.size());

  CHECK_THROWS_AS(loao_cv(tiny_dataset(1), h, dims, Variant::kNonlinear), ConfigError);
}

TEST_CASE("cross-dataset evaluation") {
  const auto ds = tiny_dataset(2);
  Hyper h;
  h.iterations = 60;
  h.batch_size = 8;
  h.learning_rate = 0.02;
  h.threads = 1;
  const Dims dims{16, 2, 2, 9, 3, 2};
  const auto cross = cross_dataset_eval(ds, ds, h, dims, Variant::kLinear);
  const auto trained = train<float>(ds, h, dims, Variant::kLinear);
  CHECK(cross.confusion == evaluate<float>(ds, trained.params).confusion);

  auto three = ds;
  three.class_names.push_back("extra");
  CHECK_THROWS_AS(cross_dataset_eval(ds, three, h, dims, Variant::kLinear), ConfigError);
}
