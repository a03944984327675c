#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "filtnet/analysis.hpp"
#include "filtnet/featurizer.hpp"
#include "helpers.hpp"

using namespace filtnet;

namespace {

Dataset sinusoid_dataset(double hz, double amp, std::size_t n, std::size_t count) {
  Dataset ds;
  ds.class_names = {"tone", "empty"};
  ds.segment_length = n;
  for (std::size_t i = 0; i < count; ++i) {
    Segment s;
    s.animal_id = "a";
    for (std::size_t d = 0; d < kAxes; ++d)
      for (std::size_t k = 0; k < n; ++k)
        s.readings[d].push_back(static_cast<std::int16_t>(
            std::lround(amp * std::sin(2.0 * std::numbers::pi * hz * k / kSampleRateHz + 0.3 * i))));
    ds.segments.push_back(s);
  }
  return ds;
}

ModelParams<double> identity_norm(const Dims& dims, Variant v) {
  auto p = init_model<double>(dims, 4, v);
  p.norm.inv_std = {1.0, 1.0, 1.0};
  return p;
}

}  // namespace

TEST_CASE("stage names") {
  for (Stage s : {Stage::kNormalized, Stage::kIirFiltered, Stage::kNonlinearFiltered})
    CHECK(parse_stage(stage_name(s)) == s);
  CHECK(std::string(stage_name(Stage::kIirFiltered)) == "iir_filtered");
  CHECK_THROWS_AS(parse_stage("raw"), ConfigError);
}

TEST_CASE("periodogram satisfies Parseval") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd;
  for (std::size_t m : {7u, 16u, 64u, 255u, 256u}) {
    for (int t = 0; t < 20; ++t) {
      std::vector<double> x(m);
      double mean = 0.0;
      for (auto& v : x) mean += v = 3.0 * nd(rng);
      mean /= double(m);
      for (auto& v : x) v -= mean;
      double var = 0.0;
      for (double v : x) var += v * v;
      var /= double(m);
      const auto psd = periodogram(x, kSampleRateHz);
      CHECK(psd.size() == m / 2 + 1);
      double total = 0.0;
      for (double p : psd) {
        CHECK(p >= 0.0);
        total += p * kSampleRateHz / double(m);
      }
      CHECK(total == doctest::Approx(var).epsilon(0.01));
    }
  }
  CHECK_THROWS_AS(periodogram(std::vector<double>{}, 50.0), ShapeError);
}

TEST_CASE("a 5 Hz tone peaks in the 5 Hz bin") {
  const auto ds = sinusoid_dataset(5.0, 500.0, 256, 4);
  const auto p = identity_norm(Dims{256, 8, 8, 9, 3, 2}, Variant::kNonlinear);
  std::vector<std::size_t> skipped;
  const auto curves = asd(ds, p, Stage::kNormalized, &skipped);
  CHECK(skipped == std::vector<std::size_t>{1});
  REQUIRE(curves.size() == 3);
  for (const auto& c : curves) {
    CHECK(c.class_index == 0);
    CHECK(c.segments == 4);
    CHECK(c.frequencies.size() == 129);
    CHECK(c.frequencies.back() == 25.0);
    std::size_t best = 0;
    for (std::size_t k = 0; k < c.amplitude.size(); ++k) {
      CHECK(c.amplitude[k] >= 0.0);
      if (c.amplitude[k] > c.amplitude[best]) best = k;
    }
    CHECK(std::abs(c.frequencies[best] - 5.0) <= 50.0 / 256.0);
  }
}

TEST_CASE("zero signal gives a zero curve") {
  Dataset ds;
  ds.class_names = {"still", "other"};
  ds.segment_length = 32;
  Segment s;
  for (auto& axis : s.readings) axis.assign(32, 0);
  ds.segments = {s, s};
  const auto p = identity_norm(Dims{32, 4, 4, 9, 2, 2}, Variant::kLinear);
  for (Stage st : {Stage::kNormalized, Stage::kIirFiltered, Stage::kNonlinearFiltered}) {
    for (const auto& c : asd(ds, p, st))
      for (double a : c.amplitude) CHECK(a == 0.0);
  }
  // Linear filter output has n - k1 + 1 samples.
  CHECK(asd(ds, p, Stage::kNonlinearFiltered)[0].amplitude.size() == (32 - 4 + 1) / 2 + 1);
  const auto nl = identity_norm(Dims{32, 4, 4, 9, 2, 2}, Variant::kNonlinear);
  CHECK(asd(ds, nl, Stage::kNonlinearFiltered)[0].amplitude.size() == (32 - 4 - 4 + 2) / 2 + 1);
}

TEST_CASE("high-pass stage never raises the DC bin") {
  std::mt19937_64 rng(5);
  Dataset ds;
  ds.class_names = {"a", "b"};
  ds.segment_length = 64;
  for (int i = 0; i < 20; ++i) {
    auto s = testing::random_segment(64, rng, 200, 600);
    s.label = i % 2;
    ds.segments.push_back(s);
  }
  auto p = init_model<double>(Dims{64, 4, 4, 9, 2, 2}, 1, Variant::kNonlinear);
  p.norm = fit_norm_stats(ds);
  p.norm.mean = {0.0, 0.0, 0.0};  // keep the offset so DC is large
  const auto before = asd(ds, p, Stage::kNormalized);
  const auto after = asd(ds, p, Stage::kIirFiltered);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i].amplitude[0] <= before[i].amplitude[0]);
}

TEST_CASE("FIR frequency responses") {
  const auto flat = fir_frequency_response(std::vector<double>{1.0}, 11);
  CHECK(flat.frequencies.front() == 0.0);
  CHECK(flat.frequencies.back() == 25.0);
  for (double m : flat.magnitude) CHECK(m == doctest::Approx(1.0).epsilon(1e-15));

  const auto diff = fir_frequency_response(std::vector<double>{1.0, -1.0}, 33);
  for (std::size_t i = 0; i < 33; ++i) {
    const double w = std::numbers::pi * i / 32.0;
    CHECK(diff.magnitude[i] == doctest::Approx(2.0 * std::sin(w / 2.0)).epsilon(1e-12).scale(1e-12));
  }
  CHECK(diff.magnitude[0] == 0.0);

  const auto avg = fir_frequency_response(std::vector<double>{0.5, 0.5}, 5);
  CHECK(avg.magnitude.back() < 1e-15);
  CHECK(avg.magnitude.front() == 1.0);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> h(1 + rng() % 9);
    double sum = 0.0;
    for (auto& v : h) sum += v = nd(rng);
    CHECK(fir_frequency_response(h, 4).magnitude[0] == std::abs(sum));
  }
  CHECK_THROWS_AS(fir_frequency_response(std::vector<double>{1.0}, 1), DomainError);
}

TEST_CASE("feature export") {
  std::mt19937_64 rng(9);
  Dataset ds;
  ds.class_names = {"a", "b"};
  ds.segment_length = 24;
  for (int i = 0; i < 6; ++i) {
    auto s = testing::random_segment(24, rng);
    s.label = i % 2;
    s.animal_id = "cow" + std::to_string(i);
    s.dataset_id = "d";
    ds.segments.push_back(s);
  }
  const auto p = testing::random_model<double>(Dims{24, 3, 3, 9, 2, 2}, Variant::kNonlinear, rng);
  const auto rows = export_features(ds, p);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto f = features<double>(ds.segments[i], p).f;
    CHECK(rows[i].features == std::vector<double>(f.begin(), f.end()));
    CHECK(rows[i].animal_id == ds.segments[i].animal_id);
    CHECK(rows[i].label == ds.segments[i].label);
  }
  const auto six = export_features(ds, p, true);
  CHECK(six[0].features.size() == 6);

  std::ostringstream out;
  write_features_csv(out, six);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "dataset_id,animal_id,label,f1,f2,f3,f4,f5,f6");
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 6);
}

TEST_CASE("CSV writers") {
  const auto ds = sinusoid_dataset(3.0, 200.0, 32, 2);
  const auto p = identity_norm(Dims{32, 2, 2, 9, 2, 2}, Variant::kNonlinear);
  std::ostringstream out;
  write_asd_csv(out, asd(ds, p, Stage::kIirFiltered));
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# periodogram", 0) == 0);
  std::getline(in, line);
  CHECK(line == "stage,class,axis,freq_hz,asd");
  std::getline(in, line);
  CHECK(line.rfind("iir_filtered,0,x,0,", 0) == 0);

  std::ostringstream fr;
  write_frequency_response_csv(fr, p, 3);
  std::istringstream fin(fr.str());
  std::getline(fin, line);
  CHECK(line == "filter,axis,freq_hz,magnitude");
  std::size_t rows = 0;
  while (std::getline(fin, line)) ++rows;
  CHECK(rows == 2 * 3 * 3);
}
