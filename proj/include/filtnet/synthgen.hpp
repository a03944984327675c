#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "filtnet/core_model.hpp"

namespace filtnet {

/// A sinusoid with frequency drawn uniformly in [low_hz, high_hz], random
/// phase, and amplitude scaled by (1 + spread * U[-1, 1]) per segment.
struct Band {
  double low_hz = 1.0;
  double high_hz = 2.0;
  double amplitude = 0.0;
  double spread = 0.2;
};

struct ClassSpec {
  std::string name;
  std::array<double, kAxes> mean{};            // raw counts
  std::array<std::vector<Band>, kAxes> bands;  // per axis
  double jitter = 0.0;                         // std of the per-animal mean offset, counts
  double noise_std = 0.0;                      // white noise floor, counts
};

struct SynthConfig {
  std::vector<ClassSpec> classes;
  std::size_t animals = 8;
  std::vector<std::size_t> segments_per_class_per_animal;
  std::size_t n = 256;
  double sample_rate = kSampleRateHz;
  std::uint64_t seed = 0;
  /// Std of the log of a per-animal movement gain.
  double animal_gain_jitter = 0.1;
  /// Sensor saturation (12-bit signed).
  std::int32_t clip = 2047;
  std::string dataset_id = "synth";

  /// Throws ConfigError on < 2 classes or animals, bad band ranges, negative amplitudes.
  void validate() const;
};

/// Five classes (grazing, walking, ruminating/resting, drinking, other), 8
/// animals, imbalance near 6156:910:4080:594:222.
///
/// drinking and ruminating/resting are spectral twins: same means, same x/y
/// bands, same strong 10 Hz component on z, and the same z band amplitude,
/// but that band sits in 1-3 Hz for one and 4-6 Hz for the other.
SynthConfig default_config();

/// Deterministic per seed. Throws GenerationError if a sample leaves int16 range.
Dataset gen_dataset(const SynthConfig& config);

/// Expected per-axis signal variance of a class (sum of band powers plus noise),
/// ignoring per-animal gain and amplitude spread.
double nominal_variance(const ClassSpec& spec, std::size_t axis);

}  // namespace filtnet
