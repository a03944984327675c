#include "filtnet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace filtnet {

void SynthConfig::validate() const {
  if (classes.size() < 2) throw ConfigError("synthetic config needs at least two classes");
  if (animals < 2) throw ConfigError("synthetic config needs at least two animals");
  if (segments_per_class_per_animal.size() != classes.size()) {
    throw ConfigError("segments_per_class_per_animal must list one count per class");
  }
  if (n < 1) throw ConfigError("segment length must be positive");
  if (!(sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
  const double nyquist = sample_rate / 2.0;
  for (const auto& c : classes) {
    for (const auto& axis : c.bands) {
      for (const auto& b : axis) {
        if (!(b.low_hz > 0.0) || b.high_hz > nyquist || b.low_hz > b.high_hz) {
          throw ConfigError("class '" + c.name + "' has a band outside (0, Nyquist]");
        }
        if (b.amplitude < 0.0 || b.spread < 0.0) throw ConfigError("band amplitudes must be non-negative");
      }
    }
    if (c.jitter < 0.0 || c.noise_std < 0.0) throw ConfigError("jitter and noise must be non-negative");
  }
}

SynthConfig default_config() {
  SynthConfig cfg;
  cfg.animals = 8;
  cfg.seed = 2020;
  cfg.n = 256;

  ClassSpec grazing;
  grazing.name = "grazing";
  grazing.mean = {-550.0, 80.0, 780.0};
  grazing.bands[0] = {{0.5, 2.0, 160.0}, {2.0, 4.0, 70.0}};
  grazing.bands[1] = {{0.5, 2.0, 90.0}};
  grazing.bands[2] = {{0.5, 2.0, 140.0}, {2.0, 4.0, 60.0}};
  grazing.jitter = 40.0;
  grazing.noise_std = 6.0;

  ClassSpec walking;
  walking.name = "walking";
  walking.mean = {250.0, -60.0, 920.0};
  walking.bands[0] = {{1.0, 2.5, 280.0}};
  walking.bands[1] = {{0.8, 1.5, 180.0}};
  walking.bands[2] = {{1.5, 3.0, 320.0}};
  walking.jitter = 40.0;
  walking.noise_std = 6.0;

  ClassSpec resting;
  resting.name = "ruminating/resting";
  resting.mean = {420.0, 150.0, 860.0};
  resting.bands[0] = {{0.2, 1.0, 30.0}};
  resting.bands[1] = {{0.2, 1.0, 25.0}};
  resting.bands[2] = {{1.0, 3.0, 80.0}, {9.5, 10.5, 100.0, 0.6}};
  resting.jitter = 40.0;
  resting.noise_std = 6.0;

  ClassSpec drinking = resting;
  drinking.name = "drinking";
  drinking.bands[2] = {{4.0, 6.0, 80.0}, {9.5, 10.5, 100.0, 0.6}};

  ClassSpec other;
  other.name = "other";
  other.mean = {100.0, 450.0, 750.0};
  other.bands[0] = {{0.3, 5.0, 120.0, 0.8}};
  other.bands[1] = {{0.3, 5.0, 150.0, 0.8}};
  other.bands[2] = {{0.3, 5.0, 120.0, 0.8}};
  other.jitter = 80.0;
  other.noise_std = 6.0;

  cfg.classes = {grazing, walking, resting, drinking, other};
  // Arm20-like proportions 6156:910:4080:594:222, divided by 32 per animal.
  cfg.segments_per_class_per_animal = {192, 28, 128, 19, 7};
  return cfg;
}

double nominal_variance(const ClassSpec& spec, std::size_t axis) {
  double v = spec.noise_std * spec.noise_std;
  for (const auto& b : spec.bands.at(axis)) v += 0.5 * b.amplitude * b.amplitude;
  return v;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(splitmix64(splitmix64(seed ^ splitmix64(a)) ^ b) ^ c);
}

}  // namespace

Dataset gen_dataset(const SynthConfig& config) {
  config.validate();
  Dataset ds;
  ds.segment_length = config.n;
  for (const auto& c : config.classes) ds.class_names.push_back(c.name);

  constexpr std::uint64_t kAnimalStream = ~0ULL;
  for (std::size_t animal = 0; animal < config.animals; ++animal) {
    const std::string animal_id = "animal" + std::to_string(animal);
    std::mt19937_64 animal_rng(substream(config.seed, animal, kAnimalStream, 0));
    const double gain = std::exp(config.animal_gain_jitter * std::normal_distribution<double>()(animal_rng));

    for (std::size_t cls = 0; cls < config.classes.size(); ++cls) {
      const ClassSpec& spec = config.classes[cls];
      std::mt19937_64 offset_rng(substream(config.seed, animal, cls, kAnimalStream));
      std::normal_distribution<double> offset_dist(0.0, 1.0);
      std::array<double, kAxes> offset{};
      for (auto& o : offset) o = spec.jitter * offset_dist(offset_rng);

      for (std::size_t seg = 0; seg < config.segments_per_class_per_animal[cls]; ++seg) {
        std::mt19937_64 rng(substream(config.seed, animal, cls, seg));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::normal_distribution<double> unit(0.0, 1.0);
        Segment s;
        s.label = cls;
        s.animal_id = animal_id;
        s.dataset_id = config.dataset_id;
        for (std::size_t d = 0; d < kAxes; ++d) {
          std::vector<double> signal(config.n, spec.mean[d] + offset[d]);
          for (const Band& b : spec.bands[d]) {
            const double freq = b.low_hz + (b.high_hz - b.low_hz) * u01(rng);
            const double phase = 2.0 * std::numbers::pi * u01(rng);
            const double amp = gain * b.amplitude * (1.0 + b.spread * (2.0 * u01(rng) - 1.0));
            const double omega = 2.0 * std::numbers::pi * freq / config.sample_rate;
            for (std::size_t i = 0; i < config.n; ++i) signal[i] += amp * std::sin(omega * double(i) + phase);
          }
          auto& axis = s.readings[d];
          axis.resize(config.n);
          for (std::size_t i = 0; i < config.n; ++i) {
            double v = signal[i];
            if (spec.noise_std > 0.0) v += spec.noise_std * unit(rng);
            v = std::round(v);
            if (v < -32768.0 || v > 32767.0) {
              throw GenerationError("class '" + spec.name + "' produced " + std::to_string(v) +
                                    ", outside signed 16-bit range");
            }
            v = std::clamp(v, double(-config.clip - 1), double(config.clip));
            axis[i] = static_cast<std::int16_t>(v);
          }
        }
        ds.segments.push_back(std::move(s));
      }
    }
  }
  return ds;
}

}  // namespace filtnet
