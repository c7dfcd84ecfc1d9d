#include "sqpf/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

#include "sqpf/image_ops.hpp"

namespace sqpf {

namespace {

struct ParamBuilder {
  ParamSet params;
  std::mt19937_64 rng;

  explicit ParamBuilder(std::uint64_t seed) : rng(seed) {}

  Tensor conv_weight(const std::string& name, int cout, int cin, int k) {
    const double sd = std::sqrt(2.0 / (cin * k * k));
    std::normal_distribution<double> dist(0.0, sd);
    std::vector<double> v(static_cast<size_t>(cout) * cin * k * k);
    for (double& e : v) e = dist(rng);
    Tensor t = Tensor::from_values({cout, cin, k, k}, std::move(v), /*requires_grad=*/true);
    params.emplace_back(name, t);
    return t;
  }

  Tensor filled(const std::string& name, int n, double value) {
    Tensor t = Tensor::full({n}, value, /*requires_grad=*/true);
    params.emplace_back(name, t);
    return t;
  }
};

Tensor find_param(const ParamSet& params, const std::string& name) {
  for (const auto& [n, t] : params)
    if (n == name) return t;
  throw DataError("encoder parameter '" + name + "' missing");
}

void check_finite(const RealGrid& image) {
  for (double v : image.raw())
    if (!std::isfinite(v)) throw NumericError("encode: non-finite input value");
}

}  // namespace

std::string encoder_kind_name(EncoderKind kind) {
  return kind == EncoderKind::kTiny ? "tiny" : "pretrained_deep";
}

EncoderKind encoder_kind_from_name(const std::string& name) {
  if (name == "tiny") return EncoderKind::kTiny;
  if (name == "pretrained_deep") return EncoderKind::kPretrainedDeep;
  throw DataError("unknown encoder kind '" + name + "'");
}

Encoder::Encoder(EncoderSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)) {
  if (spec_.feature_channels < 8) throw DataError("encoder: feature_channels must be >= 8");
  if (spec_.stride != 4)
    throw DataError("encoder: both realizations reduce spatial dims by 4; got stride " +
                    std::to_string(spec_.stride));

  ParamBuilder b(init_seed);
  const int c = spec_.feature_channels;
  if (spec_.kind == EncoderKind::kTiny) {
    const int mid = c / 2;
    b.conv_weight("b1.conv.w", mid, 1, 3);
    b.filled("b1.conv.b", mid, 0.0);
    b.filled("b1.norm.gamma", mid, 1.0);
    b.filled("b1.norm.beta", mid, 0.0);
    b.conv_weight("b2.conv.w", c, mid, 3);
    b.filled("b2.conv.b", c, 0.0);
    b.filled("b2.norm.gamma", c, 1.0);
    b.filled("b2.norm.beta", c, 0.0);
    b.conv_weight("b3.conv.w", c, c, 3);
    b.filled("b3.conv.b", c, 0.0);
    b.filled("b3.norm.gamma", c, 1.0);
    b.filled("b3.norm.beta", c, 0.0);
    b.conv_weight("b4.conv.w", c, c, 3);
    b.filled("b4.conv.b", c, 0.0);
    b.filled("b4.norm.gamma", c, 1.0);
    b.filled("b4.norm.beta", c, 0.0);
  } else {
    const int stem = 64, s1 = 128;
    b.conv_weight("stem.conv.w", stem, 1, 7);
    b.filled("stem.conv.b", stem, 0.0);
    b.filled("stem.norm.gamma", stem, 1.0);
    b.filled("stem.norm.beta", stem, 0.0);
    // residual stage 1 (stride 2)
    b.conv_weight("res1.conv1.w", s1, stem, 3);
    b.filled("res1.conv1.b", s1, 0.0);
    b.filled("res1.norm1.gamma", s1, 1.0);
    b.filled("res1.norm1.beta", s1, 0.0);
    b.conv_weight("res1.conv2.w", s1, s1, 3);
    b.filled("res1.conv2.b", s1, 0.0);
    b.filled("res1.norm2.gamma", s1, 1.0);
    b.filled("res1.norm2.beta", s1, 0.0);
    b.conv_weight("res1.skip.w", s1, stem, 1);
    b.filled("res1.skip.b", s1, 0.0);
    b.filled("res1.skipnorm.gamma", s1, 1.0);
    b.filled("res1.skipnorm.beta", s1, 0.0);
    // residual stage 2 (stride 1)
    b.conv_weight("res2.conv1.w", c, s1, 3);
    b.filled("res2.conv1.b", c, 0.0);
    b.filled("res2.norm1.gamma", c, 1.0);
    b.filled("res2.norm1.beta", c, 0.0);
    b.conv_weight("res2.conv2.w", c, c, 3);
    b.filled("res2.conv2.b", c, 0.0);
    b.filled("res2.norm2.gamma", c, 1.0);
    b.filled("res2.norm2.beta", c, 0.0);
    b.conv_weight("res2.skip.w", c, s1, 1);
    b.filled("res2.skip.b", c, 0.0);
    b.filled("res2.skipnorm.gamma", c, 1.0);
    b.filled("res2.skipnorm.beta", c, 0.0);
  }
  params_ = std::move(b.params);

  if (!spec_.weights_source.empty()) load_params(spec_.weights_source);
}

FeatureMap Encoder::encode(const RealGrid& image) const {
  if (image.rows() % spec_.stride != 0 || image.cols() % spec_.stride != 0)
    throw DataError("encode: input " + std::to_string(image.rows()) + "x" +
                    std::to_string(image.cols()) + " not divisible by stride " +
                    std::to_string(spec_.stride));
  check_finite(image);

  Tensor x = Tensor::from_values({1, image.rows(), image.cols()}, image.raw());
  auto p = [this](const std::string& name) { return find_param(params_, name); };

  auto block = [&](const Tensor& in, const std::string& prefix, int stride) {
    Tensor y = conv2d(in, p(prefix + ".conv.w"), p(prefix + ".conv.b"), stride, 1);
    y = instance_norm(y, p(prefix + ".norm.gamma"), p(prefix + ".norm.beta"));
    return relu(y);
  };

  if (spec_.kind == EncoderKind::kTiny) {
    Tensor y = block(x, "b1", 1);
    y = block(y, "b2", 2);
    y = block(y, "b3", 2);
    y = block(y, "b4", 1);
    return y;
  }

  // pretrained_deep: stem (7x7, stride 2) + two residual stages
  Tensor y = conv2d(x, p("stem.conv.w"), p("stem.conv.b"), 2, 3);
  y = instance_norm(y, p("stem.norm.gamma"), p("stem.norm.beta"));
  y = relu(y);

  auto residual = [&](const Tensor& in, const std::string& prefix, int stride) {
    Tensor main = conv2d(in, p(prefix + ".conv1.w"), p(prefix + ".conv1.b"), stride, 1);
    main = instance_norm(main, p(prefix + ".norm1.gamma"), p(prefix + ".norm1.beta"));
    main = relu(main);
    main = conv2d(main, p(prefix + ".conv2.w"), p(prefix + ".conv2.b"), 1, 1);
    main = instance_norm(main, p(prefix + ".norm2.gamma"), p(prefix + ".norm2.beta"));
    Tensor skip = conv2d(in, p(prefix + ".skip.w"), p(prefix + ".skip.b"), stride, 0);
    skip = instance_norm(skip, p(prefix + ".skipnorm.gamma"), p(prefix + ".skipnorm.beta"));
    return relu(linear2(1.0, main, 1.0, skip));
  };
  y = residual(y, "res1", 2);
  y = residual(y, "res2", 1);
  return y;
}

void Encoder::set_param_values(
    const std::vector<std::pair<std::string, std::vector<double>>>& values) {
  std::map<std::string, const std::vector<double>*> lookup;
  for (const auto& [name, v] : values) lookup[name] = &v;
  for (auto& [name, tensor] : params_) {
    auto it = lookup.find(name);
    if (it == lookup.end()) throw DataError("parameter '" + name + "' missing from checkpoint");
    if (it->second->size() != tensor.size())
      throw DataError("parameter '" + name + "' size mismatch: checkpoint has " +
                      std::to_string(it->second->size()) + ", encoder expects " +
                      std::to_string(tensor.size()));
    tensor.values() = *it->second;
    lookup.erase(it);
  }
  if (!lookup.empty())
    throw DataError("checkpoint carries unknown parameter '" + lookup.begin()->first + "'");
}

std::vector<std::pair<std::string, std::vector<double>>> Encoder::param_values() const {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  out.reserve(params_.size());
  for (const auto& [name, tensor] : params_) out.emplace_back(name, tensor.values());
  return out;
}

namespace {

constexpr char kParamsMagic[8] = {'S', 'Q', 'P', 'F', 'P', 'A', 'R', '1'};

}  // namespace

void Encoder::save_params(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(kParamsMagic, sizeof(kParamsMagic));
  const std::uint32_t count = static_cast<std::uint32_t>(params_.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, tensor] : params_) {
    const std::uint32_t namelen = static_cast<std::uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&namelen), sizeof(namelen));
    out.write(name.data(), namelen);
    const std::uint64_t n = tensor.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

void Encoder::load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open weights source: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kParamsMagic, sizeof(magic)) != 0)
    throw DataError("not an encoder parameter file: " + path.string());
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  std::vector<std::pair<std::string, std::vector<double>>> values;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t namelen = 0;
    in.read(reinterpret_cast<char*>(&namelen), sizeof(namelen));
    std::string name(namelen, '\0');
    in.read(name.data(), namelen);
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    values.emplace_back(std::move(name), std::move(v));
  }
  if (!in) throw DataError("truncated parameter file: " + path.string());
  set_param_values(values);
}

RealGrid downsample_mask(const MaskGrid& mask, int out_rows, int out_cols) {
  RealGrid real(mask.rows(), mask.cols());
  for (size_t i = 0; i < mask.size(); ++i) real.raw()[i] = mask.raw()[i] ? 1.0 : 0.0;
  return block_average(real, out_rows, out_cols);
}

RealGrid downsample_mask(const RealGrid& mask, int out_rows, int out_cols) {
  return block_average(mask, out_rows, out_cols);
}

}  // namespace sqpf
