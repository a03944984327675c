#include "filtnet/analysis.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>

#include "filtnet/featurizer.hpp"

namespace filtnet {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kNormalized: return "normalized";
    case Stage::kIirFiltered: return "iir_filtered";
    case Stage::kNonlinearFiltered: return "nonlinear_filtered";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  if (name == "normalized") return Stage::kNormalized;
  if (name == "iir_filtered") return Stage::kIirFiltered;
  if (name == "nonlinear_filtered") return Stage::kNonlinearFiltered;
  throw ConfigError("unknown stage '" + name + "'");
}

namespace {

/// Real-to-complex FFT of a fixed length, plan reused across calls.
class RealFft {
 public:
  explicit RealFft(std::size_t m)
      : m_(m),
        in_(fftw_alloc_real(m)),
        out_(fftw_alloc_complex(m / 2 + 1)),
        plan_(fftw_plan_dft_r2c_1d(static_cast<int>(m), in_, out_, FFTW_ESTIMATE)) {}
  ~RealFft() {
    fftw_destroy_plan(plan_);
    fftw_free(out_);
    fftw_free(in_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  /// One-sided PSD into `psd` (size m/2 + 1).
  void psd(std::span<const double> x, double fs, std::vector<double>& psd) {
    std::copy(x.begin(), x.end(), in_);
    fftw_execute(plan_);
    const std::size_t bins = m_ / 2 + 1;
    psd.resize(bins);
    const double scale = 1.0 / (fs * double(m_));
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = out_[k][0];
      const double im = out_[k][1];
      const bool doubled = k > 0 && !(m_ % 2 == 0 && k == m_ / 2);
      psd[k] = (re * re + im * im) * scale * (doubled ? 2.0 : 1.0);
    }
  }

 private:
  std::size_t m_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

}  // namespace

std::vector<double> periodogram(std::span<const double> x, double fs) {
  if (x.empty()) throw ShapeError("periodogram of an empty signal");
  RealFft fft(x.size());
  std::vector<double> out;
  fft.psd(x, fs, out);
  return out;
}

std::vector<AsdCurve> asd(const Dataset& ds, const ModelParams<double>& params, Stage stage,
                          std::vector<std::size_t>* skipped) {
  params.check_shapes();
  const std::size_t classes = ds.class_count();
  const std::size_t m = stage == Stage::kNormalized || stage == Stage::kIirFiltered
                            ? params.dims.n
                            : (params.variant == Variant::kNonlinear ? params.dims.conv2_length()
                                                                      : params.dims.conv1_length());
  const std::size_t bins = m / 2 + 1;
  const double fs = kSampleRateHz;
  RealFft fft(m);

  std::vector<std::array<std::vector<double>, kAxes>> sums(classes);
  std::vector<std::size_t> counts(classes, 0);
  for (auto& per_class : sums) {
    for (auto& v : per_class) v.assign(bins, 0.0);
  }

  ForwardCache<double> cache;
  std::vector<double> psd;
  for (const auto& seg : ds.segments) {
    compute_features(seg, params, cache, stage == Stage::kNonlinearFiltered);
    for (std::size_t d = 0; d < kAxes; ++d) {
      const std::vector<double>& signal = stage == Stage::kNormalized    ? cache.normalized[d]
                                          : stage == Stage::kIirFiltered ? cache.highpassed[d]
                                                                         : cache.filtered[d];
      fft.psd(signal, fs, psd);
      auto& acc = sums[seg.label][d];
      for (std::size_t k = 0; k < bins; ++k) acc[k] += psd[k];
    }
    counts[seg.label] += 1;
  }

  std::vector<AsdCurve> curves;
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0) {
      if (skipped) skipped->push_back(c);
      continue;
    }
    for (std::size_t d = 0; d < kAxes; ++d) {
      AsdCurve curve;
      curve.stage = stage;
      curve.class_index = c;
      curve.axis = d;
      curve.segments = counts[c];
      curve.frequencies.resize(bins);
      curve.amplitude.resize(bins);
      for (std::size_t k = 0; k < bins; ++k) {
        curve.frequencies[k] = double(k) * fs / double(m);
        curve.amplitude[k] = std::sqrt(sums[c][d][k] / double(counts[c]));
      }
      curves.push_back(std::move(curve));
    }
  }
  return curves;
}

FrequencyResponse fir_frequency_response(std::span<const double> h, std::size_t n_points, double fs) {
  if (n_points < 2) throw DomainError("frequency response needs at least two points");
  FrequencyResponse r;
  r.frequencies.resize(n_points);
  r.magnitude.resize(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double omega = std::numbers::pi * double(i) / double(n_points - 1);
    std::complex<double> acc = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * std::polar(1.0, -omega * double(k));
    r.frequencies[i] = omega * fs / (2.0 * std::numbers::pi);
    r.magnitude[i] = std::abs(acc);
  }
  return r;
}

std::vector<FeatureRow> export_features(const Dataset& ds, const ModelParams<double>& params, bool six_features) {
  std::vector<FeatureRow> rows;
  rows.reserve(ds.segments.size());
  ForwardCache<double> cache;
  const std::size_t width = six_features ? 6 : kFeatureCount;
  for (const auto& seg : ds.segments) {
    const auto f = compute_features(seg, params, cache, !six_features);
    FeatureRow row{seg.dataset_id, seg.animal_id, seg.label, std::vector<double>(f.begin(), f.begin() + width)};
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_asd_csv(std::ostream& out, const std::vector<AsdCurve>& curves, bool header) {
  if (header) {
    out << "# periodogram: rectangular window, one-sided, psd = |X_k|^2 / (fs * M), asd = sqrt(class mean psd)\n";
    out << "stage,class,axis,freq_hz,asd\n";
  }
  const auto precision = out.precision(10);
  static constexpr const char* kAxisNames[kAxes] = {"x", "y", "z"};
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < c.frequencies.size(); ++k) {
      out << stage_name(c.stage) << ',' << c.class_index << ',' << kAxisNames[c.axis] << ',' << c.frequencies[k]
          << ',' << c.amplitude[k] << '\n';
    }
  }
  out.precision(precision);
}

void write_frequency_response_csv(std::ostream& out, const ModelParams<double>& params, std::size_t n_points) {
  static constexpr const char* kAxisNames[kAxes] = {"x", "y", "z"};
  out << "filter,axis,freq_hz,magnitude\n";
  const auto precision = out.precision(10);
  auto emit = [&](const char* name, const std::vector<double>& taps, std::size_t k) {
    for (std::size_t d = 0; d < kAxes; ++d) {
      const auto r = fir_frequency_response(std::span<const double>(taps).subspan(d * k, k), n_points);
      for (std::size_t i = 0; i < n_points; ++i) {
        out << name << ',' << kAxisNames[d] << ',' << r.frequencies[i] << ',' << r.magnitude[i] << '\n';
      }
    }
  };
  if (params.variant == Variant::kNonlinear) {
    emit("h1", params.h1, params.dims.k1);
    emit("h2", params.h2, params.dims.k2);
  } else {
    emit("h_lin", params.h_lin, params.dims.k1);
  }
  out.precision(precision);
}

void write_features_csv(std::ostream& out, const std::vector<FeatureRow>& rows) {
  const std::size_t width = rows.empty() ? kFeatureCount : rows.front().features.size();
  out << "dataset_id,animal_id,label";
  for (std::size_t i = 0; i < width; ++i) out << ",f" << (i + 1);
  out << '\n';
  const auto precision = out.precision(9);
  for (const auto& r : rows) {
    out << r.dataset_id << ',' << r.animal_id << ',' << r.label;
    for (double v : r.features) out << ',' << v;
    out << '\n';
  }
  out.precision(precision);
}

}  // namespace filtnet
