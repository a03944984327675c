#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "filtnet/core_model.hpp"

namespace filtnet {

enum class Stage { kNormalized, kIirFiltered, kNonlinearFiltered };

const char* stage_name(Stage s);
Stage parse_stage(const std::string& name);

/// Class-averaged amplitude spectral density of one axis at one pipeline stage.
struct AsdCurve {
  Stage stage = Stage::kNormalized;
  std::size_t class_index = 0;
  std::size_t axis = 0;
  std::size_t segments = 0;
  std::vector<double> frequencies;  // k * fs / M, k = 0..M/2
  std::vector<double> amplitude;
};

/// One-sided periodogram PSD of a real signal with a rectangular window:
/// |X_k|^2 / (fs * M), interior bins doubled, so sum(psd) * fs / M equals the
/// mean square of x.
std::vector<double> periodogram(std::span<const double> x, double fs);

/// For every class and axis: per-segment periodogram of the stage signal,
/// averaged over the class, square-rooted. Classes without segments are
/// skipped and named in `skipped` when it is non-null.
std::vector<AsdCurve> asd(const Dataset& ds, const ModelParams<double>& params, Stage stage,
                          std::vector<std::size_t>* skipped = nullptr);

/// |sum_k h[k] e^{-j w k}| on n_points uniformly spaced w in [0, pi], mapped to
/// Hz at fs (0 .. fs/2). Throws DomainError when n_points < 2.
struct FrequencyResponse {
  std::vector<double> frequencies;
  std::vector<double> magnitude;
};
FrequencyResponse fir_frequency_response(std::span<const double> h, std::size_t n_points,
                                         double fs = kSampleRateHz);

struct FeatureRow {
  std::string dataset_id;
  std::string animal_id;
  std::size_t label = 0;
  std::vector<double> features;  // 9, or 6 without f3
};

/// Feature vector of every segment; `six_features` drops f3.
std::vector<FeatureRow> export_features(const Dataset& ds, const ModelParams<double>& params,
                                        bool six_features = false);

/// A `#` line naming the estimator, then `stage,class,axis,freq_hz,asd`.
void write_asd_csv(std::ostream& out, const std::vector<AsdCurve>& curves, bool header = true);
/// `filter,axis,freq_hz,magnitude` for every learned FIR filter of the model.
void write_frequency_response_csv(std::ostream& out, const ModelParams<double>& params, std::size_t n_points);
/// `dataset_id,animal_id,label,f1..f9`
void write_features_csv(std::ostream& out, const std::vector<FeatureRow>& rows);

}  // namespace filtnet
