#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <random>

#include "abacf/errors.hpp"
#include "abacf/features.hpp"

namespace abacf::features {

namespace {

constexpr int kStageChannels = 32;
constexpr int kDescriptorInput = 64;
constexpr int kPoolGrid = 4;
constexpr int kPooledDim = 2 * kStageChannels * kPoolGrid * kPoolGrid;

// Planar activation map.
struct Activation {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> v;

  Activation(int c, int h, int w)
      : channels(c), height(h), width(w), v(static_cast<std::size_t>(c) * h * w, 0.0) {}
  double& at(int c, int r, int col) { return v[(static_cast<std::size_t>(c) * height + r) * width + col]; }
  double at(int c, int r, int col) const {
    return v[(static_cast<std::size_t>(c) * height + r) * width + col];
  }
};

struct ConvLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // [out][in][3][3]
  std::vector<double> bias;
};

struct Network {
  std::array<ConvLayer, 3> conv;
  std::vector<double> fc;  // kSynthDescriptorDim x kPooledDim, row-major
  std::vector<double> baseline;  // pooled activations of a flat input
};

struct Activation;
std::vector<double> pooled_activations(const Network& net, const Activation& input);

// Uniform doubles from raw mt19937_64 output so the weights do not depend on
// the standard library's distribution implementations.
class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : engine_(seed) {}
  double operator()(double bound) {
    const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return (2.0 * unit - 1.0) * bound;
  }

 private:
  std::mt19937_64 engine_;
};

ConvLayer make_conv(Uniform& rng, int in, int out) {
  ConvLayer layer{in, out, std::vector<double>(static_cast<std::size_t>(out) * in * 9),
                  std::vector<double>(static_cast<std::size_t>(out))};
  const double bound = std::sqrt(6.0 / (in * 9));
  for (auto& w : layer.weights) w = rng(bound);
  for (auto& b : layer.bias) b = rng(0.05);
  return layer;
}

std::shared_ptr<const Network> network_for(std::uint64_t seed) {
  static std::mutex mutex;
  static std::map<std::uint64_t, std::shared_ptr<const Network>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  if (auto it = cache.find(seed); it != cache.end()) return it->second;
  Uniform rng(seed);
  auto net = std::make_shared<Network>();
  net->conv[0] = make_conv(rng, 3, kStageChannels);
  net->conv[1] = make_conv(rng, kStageChannels, kStageChannels);
  net->conv[2] = make_conv(rng, kStageChannels, kStageChannels);
  net->fc.resize(static_cast<std::size_t>(kSynthDescriptorDim) * kPooledDim);
  const double bound = std::sqrt(3.0 / kPooledDim);
  for (auto& w : net->fc) w = rng(bound);
  net->baseline = pooled_activations(*net, Activation(3, kDescriptorInput, kDescriptorInput));
  cache.emplace(seed, net);
  return net;
}

Activation from_image(const Image& patch) {
  Activation a(3, patch.height, patch.width);
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < patch.height; ++r)
      for (int c = 0; c < patch.width; ++c) a.at(ch, r, c) = patch.at(r, c, ch) / 255.0 - 0.5;
  return a;
}

// 3x3 convolution with replicated borders, evaluated every `stride` pixels,
// followed by ReLU.
Activation conv_relu(const Activation& in, const ConvLayer& layer, int stride) {
  const int oh = (in.height + stride - 1) / stride;
  const int ow = (in.width + stride - 1) / stride;
  Activation out(layer.out, oh, ow);
  std::vector<int> rows(static_cast<std::size_t>(oh) * 3), cols(static_cast<std::size_t>(ow) * 3);
  for (int r = 0; r < oh; ++r)
    for (int k = 0; k < 3; ++k) rows[r * 3 + k] = std::clamp(r * stride + k - 1, 0, in.height - 1);
  for (int c = 0; c < ow; ++c)
    for (int k = 0; k < 3; ++k) cols[c * 3 + k] = std::clamp(c * stride + k - 1, 0, in.width - 1);

  for (int o = 0; o < layer.out; ++o) {
    double* dst = &out.v[static_cast<std::size_t>(o) * oh * ow];
    std::fill(dst, dst + static_cast<std::size_t>(oh) * ow, layer.bias[o]);
    for (int i = 0; i < layer.in; ++i) {
      const double* w = &layer.weights[(static_cast<std::size_t>(o) * layer.in + i) * 9];
      const double* src = &in.v[static_cast<std::size_t>(i) * in.height * in.width];
      for (int r = 0; r < oh; ++r) {
        const double* r0 = src + static_cast<std::size_t>(rows[r * 3]) * in.width;
        const double* r1 = src + static_cast<std::size_t>(rows[r * 3 + 1]) * in.width;
        const double* r2 = src + static_cast<std::size_t>(rows[r * 3 + 2]) * in.width;
        double* d = dst + static_cast<std::size_t>(r) * ow;
        for (int c = 0; c < ow; ++c) {
          const int c0 = cols[c * 3], c1 = cols[c * 3 + 1], c2 = cols[c * 3 + 2];
          d[c] += w[0] * r0[c0] + w[1] * r0[c1] + w[2] * r0[c2] + w[3] * r1[c0] + w[4] * r1[c1] +
                  w[5] * r1[c2] + w[6] * r2[c0] + w[7] * r2[c1] + w[8] * r2[c2];
        }
      }
    }
  }
  for (auto& v : out.v) v = std::max(v, 0.0);
  return out;
}

// Average pooling over non-overlapping factor x factor blocks (floor size,
// at least one output cell per axis).
Activation avg_pool(const Activation& in, int factor) {
  const int oh = std::max(1, in.height / factor);
  const int ow = std::max(1, in.width / factor);
  Activation out(in.channels, oh, ow);
  for (int ch = 0; ch < in.channels; ++ch)
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        double sum = 0.0;
        int n = 0;
        for (int y = r * factor; y < std::min((r + 1) * factor, in.height); ++y)
          for (int x = c * factor; x < std::min((c + 1) * factor, in.width); ++x) {
            sum += in.at(ch, y, x);
            ++n;
          }
        out.at(ch, r, c) = sum / n;
      }
  return out;
}

FeatureTensor to_tensor(const Activation& a, int cell_size) {
  FeatureTensor t(a.height, a.width, a.channels, cell_size, FeatureKind::DeepSynth);
  std::copy(a.v.begin(), a.v.end(), t.values().begin());
  return t;
}

void check_patch(const Image& patch) {
  if (patch.width < 16 || patch.height < 16) {
    throw InputError("synthetic deep features need a patch of at least 16x16 pixels");
  }
}

// Stage-2 and stage-3 activations pooled onto a 4x4 layout.
std::vector<double> pooled_activations(const Network& net, const Activation& input) {
  const Activation s1 = avg_pool(conv_relu(input, net.conv[0], 2), 2);
  const Activation s2 = avg_pool(conv_relu(s1, net.conv[1], 1), 2);
  const Activation s3 = avg_pool(conv_relu(s2, net.conv[2], 1), 2);
  const Activation p2 = avg_pool(s2, s2.height / kPoolGrid);
  const Activation p3 = avg_pool(s3, s3.height / kPoolGrid);
  std::vector<double> pooled;
  pooled.reserve(kPooledDim);
  pooled.insert(pooled.end(), p2.v.begin(), p2.v.end());
  pooled.insert(pooled.end(), p3.v.begin(), p3.v.end());
  return pooled;
}

}  // namespace

FeatureTensor synth_deep_tensor(const Image& patch, std::uint64_t seed) {
  check_patch(patch);
  const auto net = network_for(seed);
  const Activation s1 = avg_pool(conv_relu(from_image(patch), net->conv[0], 2), 2);
  const Activation s2 = avg_pool(conv_relu(s1, net->conv[1], 1), 2);
  const Activation s3 = avg_pool(conv_relu(s2, net->conv[2], 1), 2);
  const std::array<FeatureTensor, 3> layers = {to_tensor(s1, 4), to_tensor(s2, 8),
                                               to_tensor(s3, 16)};
  return fuse_conv_layers(layers);
}

DescriptorVector synth_descriptor(const Image& patch, std::uint64_t seed) {
  check_patch(patch);
  const auto net = network_for(seed);
  Image input = patch;
  if (patch.width != kDescriptorInput || patch.height != kDescriptorInput) {
    input = resample_region(patch, {(patch.width + 1) / 2.0, (patch.height + 1) / 2.0}, patch.width,
                            patch.height, kDescriptorInput, kDescriptorInput);
  }
  // Colour-neutral input: each channel minus its mean over the patch.
  Activation a = from_image(input);
  const std::size_t plane = static_cast<std::size_t>(a.height) * a.width;
  for (int ch = 0; ch < 3; ++ch) {
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += a.v[ch * plane + i];
    mean /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) a.v[ch * plane + i] -= mean;
  }
  std::vector<double> pooled = pooled_activations(*net, a);
  double centre = 0.0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    pooled[i] -= net->baseline[i];
    centre += pooled[i];
  }
  centre /= static_cast<double>(pooled.size());
  for (double& v : pooled) v -= centre;

  DescriptorVector out;
  out.values.assign(kSynthDescriptorDim, 0.0);
  for (int i = 0; i < kSynthDescriptorDim; ++i) {
    const double* row = &net->fc[static_cast<std::size_t>(i) * kPooledDim];
    double acc = 0.0;
    for (int j = 0; j < kPooledDim; ++j) acc += row[j] * pooled[j];
    out.values[i] = acc;
  }
  return out;
}

SynthOutput synth_deep_features(const Image& patch, std::uint64_t seed) {
  return {synth_deep_tensor(patch, seed), synth_descriptor(patch, seed)};
}

}  // namespace abacf::features
