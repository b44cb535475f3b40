#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "abacf/image.hpp"
#include "abacf/spectral.hpp"

namespace abacf::features {

enum class FeatureKind { Hog, DeepSynth, DeepRemote };

inline constexpr int kHogChannels = 31;
inline constexpr int kSynthChannels = 96;
inline constexpr int kSynthDescriptorDim = 256;

// Spatial grid of multi-channel features, stored channel-planar:
// value(row, col, ch) lives at ch * height * width + row * width + col.
class FeatureTensor {
 public:
  FeatureTensor() = default;
  FeatureTensor(int height, int width, int channels, int cell_size, FeatureKind kind);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  int cell_size() const noexcept { return cell_size_; }
  FeatureKind kind() const noexcept { return kind_; }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  double& at(int row, int col, int ch) { return values_[offset(row, col, ch)]; }
  double at(int row, int col, int ch) const { return values_[offset(row, col, ch)]; }

  std::span<double> plane(int ch) { return {values_.data() + ch * plane_size(), plane_size()}; }
  std::span<const double> plane(int ch) const {
    return {values_.data() + ch * plane_size(), plane_size()};
  }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const FeatureTensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

 private:
  std::size_t offset(int row, int col, int ch) const noexcept {
    return ch * plane_size() + static_cast<std::size_t>(row) * width_ + col;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  int cell_size_ = 1;
  FeatureKind kind_ = FeatureKind::Hog;
  std::vector<double> values_;
};

// Semantic fingerprint of a region (FC7 stand-in or the real FC7 vector).
struct DescriptorVector {
  std::vector<double> values;
  std::size_t dim() const noexcept { return values.size(); }
};

// Context region: target plus surrounding background.
struct PatchSpec {
  Point center;
  double width = 0.0;
  double height = 0.0;
  double padding_factor = 1.0;
};

// Nearest-pixel crop of round(size * padding_factor) pixels centred at
// spec.center; out-of-frame pixels replicate the frame edge.
Image extract_patch(const Image& frame, const PatchSpec& spec);

// 31-channel HOG: 18 contrast-sensitive and 9 contrast-insensitive
// orientation channels plus 4 texture (block-energy) channels per cell.
// Gradients use centred differences with replicated borders on the channel
// of largest magnitude; each pixel votes into its own cell, split linearly
// between the two nearest of 18 orientation bins (bin k centred at k*20 deg).
// Cells are then normalised against their four 2x2 blocks and truncated at
// 0.2. Grid is floor(H/cell) x floor(W/cell).
FeatureTensor extract_hog(const Image& patch, int cell_size);

// Bilinear resize of every channel (cell-centre aligned).
FeatureTensor resize_tensor(const FeatureTensor& tensor, int height, int width);

// Resize every layer to the first layer's grid and concatenate channels.
FeatureTensor fuse_conv_layers(std::span<const FeatureTensor> layers);

FeatureTensor apply_window(const FeatureTensor& features, const spectral::RealGrid& window);

struct SynthOutput {
  FeatureTensor tensor;
  DescriptorVector descriptor;
};

// Deterministic stand-in for pretrained deep features: three seeded
// convolution + ReLU + average-pooling stages (strides 4, 8, 16) fused onto
// the stride-4 grid (96 channels), and a 256-dim descriptor: the patch is
// resized to 64x64 with its per-channel mean colour removed, stage-2/3
// activations are pooled onto a 4x4 layout, offset by the activations of a
// flat input, centred, and passed through a fixed random fully-connected
// layer.
SynthOutput synth_deep_features(const Image& patch, std::uint64_t seed);
FeatureTensor synth_deep_tensor(const Image& patch, std::uint64_t seed);
DescriptorVector synth_descriptor(const Image& patch, std::uint64_t seed);

}  // namespace abacf::features
