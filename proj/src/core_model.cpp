#include "filtnet/core_model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <unordered_set>

namespace filtnet {

void Dims::validate() const {
  if (k1 < 1 || k2 < 1) throw DimensionError("FIR lengths must be at least 1");
  if (n < k1 + k2 - 1) {
    throw DimensionError("segment length " + std::to_string(n) + " is shorter than k1 + k2 - 1");
  }
  if (f != kFeatureCount) throw DimensionError("feature count must be 9");
  if (l < 1) throw DimensionError("hidden width must be at least 1");
  if (c < 2) throw DimensionError("class count must be at least 2");
}

const char* variant_name(Variant v) { return v == Variant::kLinear ? "linear" : "nonlinear"; }

Variant parse_variant(const std::string& name) {
  if (name == "nonlinear") return Variant::kNonlinear;
  if (name == "linear") return Variant::kLinear;
  throw ConfigError("unknown variant '" + name + "'");
}

const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kGammaLogit: return "gamma_logit";
    case ParamGroup::kH1: return "h1";
    case ParamGroup::kH2: return "h2";
    case ParamGroup::kHLin: return "h_lin";
    case ParamGroup::kW1: return "W1";
    case ParamGroup::kB1: return "b1";
    case ParamGroup::kW2: return "W2";
    case ParamGroup::kB2: return "b2";
  }
  return "?";
}

void Dataset::validate() const {
  const std::size_t c = class_count();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    for (const auto& axis : s.readings) {
      if (axis.size() != segment_length) {
        throw DimensionError("segment " + std::to_string(i) + " has " + std::to_string(axis.size()) +
                             " samples, expected " + std::to_string(segment_length));
      }
    }
    if (s.label >= c) {
      throw DimensionError("segment " + std::to_string(i) + " label " + std::to_string(s.label) +
                           " outside [0, " + std::to_string(c) + ")");
    }
  }
}

std::vector<std::string> Dataset::animals() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& s : segments) {
    if (seen.insert(s.animal_id).second) out.push_back(s.animal_id);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.class_names = class_names;
  out.segment_length = segment_length;
  out.segments.reserve(indices.size());
  for (std::size_t i : indices) out.segments.push_back(segments.at(i));
  return out;
}

template <typename T>
Trainables<T> Trainables<T>::zeros_like() const {
  Trainables<T> z;
  auto zero = [](const std::vector<T>& v) { return std::vector<T>(v.size(), T(0)); };
  z.h1 = zero(h1);
  z.h2 = zero(h2);
  z.h_lin = zero(h_lin);
  z.w1 = zero(w1);
  z.b1 = zero(b1);
  z.w2 = zero(w2);
  z.b2 = zero(b2);
  return z;
}

template <typename T>
std::size_t Trainables<T>::scalar_count() const {
  std::size_t n = 0;
  visit([&](ParamGroup, auto span) { n += span.size(); });
  return n;
}

template <typename T>
T ModelParams<T>::gamma(std::size_t axis) const {
  return logistic(this->gamma_logit[axis]);
}

template <typename T>
void ModelParams<T>::check_shapes() const {
  dims.validate();
  auto expect = [](const std::vector<T>& v, std::size_t n, const char* what) {
    if (v.size() != n) {
      throw DimensionError(std::string(what) + " has " + std::to_string(v.size()) + " values, expected " +
                           std::to_string(n));
    }
  };
  if (variant == Variant::kNonlinear) {
    expect(this->h1, kAxes * dims.k1, "h1");
    expect(this->h2, kAxes * dims.k2, "h2");
    expect(this->h_lin, 0, "h_lin");
  } else {
    expect(this->h1, 0, "h1");
    expect(this->h2, 0, "h2");
    expect(this->h_lin, kAxes * dims.k1, "h_lin");
  }
  expect(this->w1, dims.l * dims.f, "W1");
  expect(this->b1, dims.l, "b1");
  expect(this->w2, dims.c * dims.l, "W2");
  expect(this->b2, dims.c, "b2");
}

template <typename T>
bool ModelParams<T>::all_finite() const {
  bool ok = true;
  this->visit([&](ParamGroup, auto span) {
    for (auto v : span) ok = ok && std::isfinite(v);
  });
  for (std::size_t d = 0; d < kAxes; ++d) {
    ok = ok && std::isfinite(norm.mean[d]) && std::isfinite(norm.inv_std[d]);
  }
  return ok;
}

template <typename T>
ModelParams<T> init_model(const Dims& dims, std::uint64_t seed, Variant variant) {
  dims.validate();
  ModelParams<T> p;
  p.dims = dims;
  p.variant = variant;
  p.gamma_logit.fill(logit(T(0.9)));

  std::mt19937_64 rng(seed);
  auto uniform = [&](std::size_t count, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> v(count);
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return v;
  };
  if (variant == Variant::kNonlinear) {
    p.h1 = uniform(kAxes * dims.k1, double(dims.k1));
    p.h2 = uniform(kAxes * dims.k2, double(dims.k2));
  } else {
    p.h_lin = uniform(kAxes * dims.k1, double(dims.k1));
  }
  p.w1 = uniform(dims.l * dims.f, double(dims.f));
  p.b1.assign(dims.l, T(0));
  p.w2 = uniform(dims.c * dims.l, double(dims.l));
  p.b2.assign(dims.c, T(0));
  return p;
}

ParamCount param_count(const Dims& dims) {
  dims.validate();
  ParamCount pc;
  pc.per_stage = {6, 3 * (dims.k1 + dims.k2 + 1), dims.l * (dims.f + dims.c) + dims.c + dims.l};
  pc.total = pc.per_stage[0] + pc.per_stage[1] + pc.per_stage[2];
  return pc;
}

std::size_t stored_param_count(const Dims& dims, Variant variant) {
  const ParamCount pc = param_count(dims);
  if (variant == Variant::kNonlinear) return pc.total;
  return pc.total - 3 * dims.k2;
}

// --- serialization ---------------------------------------------------------

namespace {

class ByteWriter {
 public:
  void bytes(const char* s, std::size_t n) { out_.insert(out_.end(), s, s + n); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw FormatError("model file truncated at byte " + std::to_string(pos_));
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const float v = std::bit_cast<float>(u32());
    if (!std::isfinite(v)) throw CorruptionError("non-finite value at byte " + std::to_string(pos_ - 4));
    return v;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'D', 'B', 'C', '1'};

}  // namespace

template <typename T>
std::vector<std::uint8_t> save_model(const ModelParams<T>& params) {
  params.check_shapes();
  if (!params.all_finite()) throw DomainError("cannot save a model with non-finite parameters");

  ByteWriter w;
  w.bytes(kMagic, 4);
  w.u16(kModelFormatVersion);
  w.u8(static_cast<std::uint8_t>(params.variant));
  const Dims& d = params.dims;
  for (std::size_t v : {d.n, d.k1, d.k2, d.f, d.l, d.c}) w.u32(static_cast<std::uint32_t>(v));
  for (auto m : params.norm.mean) w.f32(static_cast<float>(m));
  for (auto s : params.norm.inv_std) w.f32(static_cast<float>(s));
  params.visit([&](ParamGroup, auto span) {
    for (auto v : span) w.f32(static_cast<float>(v));
  });
  return w.take();
}

ModelParams<float> load_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.need(4);
  char magic[4];
  for (char& ch : magic) ch = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic, not a model file");
  const std::uint16_t version = r.u16();
  if (version != kModelFormatVersion) throw FormatError("unsupported model version " + std::to_string(version));
  const std::uint8_t variant = r.u8();
  if (variant > 1) throw FormatError("unknown variant tag " + std::to_string(variant));

  ModelParams<float> p;
  p.variant = static_cast<Variant>(variant);
  Dims& d = p.dims;
  d.n = r.u32();
  d.k1 = r.u32();
  d.k2 = r.u32();
  d.f = r.u32();
  d.l = r.u32();
  d.c = r.u32();
  try {
    d.validate();
  } catch (const DimensionError& e) {
    throw FormatError(std::string("invalid dimensions in header: ") + e.what());
  }
  const std::size_t payload = stored_param_count(d, p.variant) * 4;
  if (r.remaining() < payload) throw FormatError("model file truncated: payload shorter than dims imply");
  if (r.remaining() > payload) throw FormatError("trailing bytes after model payload");

  for (auto& m : p.norm.mean) m = r.f32();
  for (auto& s : p.norm.inv_std) {
    s = r.f32();
    if (!(s > 0.0f)) throw CorruptionError("inverse standard deviation must be positive");
  }
  if (p.variant == Variant::kNonlinear) {
    p.h1.resize(kAxes * d.k1);
    p.h2.resize(kAxes * d.k2);
  } else {
    p.h_lin.resize(kAxes * d.k1);
  }
  p.w1.resize(d.l * d.f);
  p.b1.resize(d.l);
  p.w2.resize(d.c * d.l);
  p.b2.resize(d.c);
  p.visit([&](ParamGroup, std::span<float> span) {
    for (auto& v : span) v = r.f32();
  });
  return p;
}

void write_model_file(const std::string& path, const ModelParams<float>& params) {
  const auto bytes = save_model(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write to '" + path + "' failed");
}

ModelParams<float> read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_model(bytes);
}

template struct Trainables<float>;
template struct Trainables<double>;
template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> init_model<float>(const Dims&, std::uint64_t, Variant);
template ModelParams<double> init_model<double>(const Dims&, std::uint64_t, Variant);
template std::vector<std::uint8_t> save_model<float>(const ModelParams<float>&);
template std::vector<std::uint8_t> save_model<double>(const ModelParams<double>&);

}  // namespace filtnet
