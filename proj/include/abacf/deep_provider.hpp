#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "abacf/feature_protocol.hpp"
#include "abacf/features.hpp"

namespace abacf::features {

// Source of deep features for the CNN context model and the semantic gate.
// The tracker only talks to this interface.
class DeepFeatureProvider {
 public:
  virtual ~DeepFeatureProvider() = default;

  // Spatial conv stack for a search patch (any grid; the caller resizes).
  virtual FeatureTensor conv_features(const Image& patch) = 0;
  // Semantic descriptor of a region already resampled to
  // descriptor_input_size() squared.
  virtual DescriptorVector descriptor(const Image& patch) = 0;
  virtual int descriptor_input_size() const = 0;
  virtual std::string name() const = 0;
};

class SyntheticProvider final : public DeepFeatureProvider {
 public:
  explicit SyntheticProvider(std::uint64_t seed) : seed_(seed) {}
  FeatureTensor conv_features(const Image& patch) override { return synth_deep_tensor(patch, seed_); }
  DescriptorVector descriptor(const Image& patch) override { return synth_descriptor(patch, seed_); }
  int descriptor_input_size() const override { return 64; }
  std::string name() const override { return "synthetic"; }

 private:
  std::uint64_t seed_;
};

// Client of the external feature server. FC7 inputs are 224x224.
class RemoteProvider final : public DeepFeatureProvider {
 public:
  explicit RemoteProvider(Endpoint endpoint) : client_(std::move(endpoint)) {}
  FeatureTensor conv_features(const Image& patch) override {
    return std::move(*client_.request(patch, {true, false}).conv);
  }
  DescriptorVector descriptor(const Image& patch) override {
    return std::move(*client_.request(patch, {false, true}).fc7);
  }
  int descriptor_input_size() const override { return 224; }
  std::string name() const override { return "remote"; }

 private:
  FeatureClient client_;
};

}  // namespace abacf::features
