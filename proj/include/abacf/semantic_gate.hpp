#pragma once

// Semantic validation of estimated regions: memory of valid descriptors, its
// mean, similarity scores, the FC7 / rejection flags, deep feature-model
// blending and the final choice between the two context models.

#include <cstddef>
#include <optional>
#include <vector>

#include "abacf/features.hpp"
#include "abacf/image.hpp"

namespace abacf::gate {

using features::DescriptorVector;

struct GateConfig {
  double t_high = 0.7;
  double t_low = 0.4;
  double t_nms = 0.7;
  double eta = 0.0125;
  std::size_t capacity = 50;

  void validate() const;
};

struct GateFlags {
  bool fc7_flag = true;
  bool rejection_flag = false;
  friend bool operator==(const GateFlags&, const GateFlags&) = default;
};

// Rows of valid descriptors. Row 0 (the first-frame descriptor) is never
// evicted; beyond capacity the oldest other row goes first.
class SemanticMemory {
 public:
  explicit SemanticMemory(std::size_t capacity = 50);

  std::size_t size() const noexcept { return rows_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return rows_.empty(); }
  const std::vector<DescriptorVector>& rows() const noexcept { return rows_; }

 private:
  friend DescriptorVector fcm(const SemanticMemory& memory);
  friend void append_valid(SemanticMemory& memory, DescriptorVector vec);

  std::size_t capacity_;
  std::vector<DescriptorVector> rows_;
  mutable std::optional<DescriptorVector> fcm_cache_;
};

// Element-wise mean of the rows. Empty memory raises StateError.
DescriptorVector fcm(const SemanticMemory& memory);

// Dimension mismatch with existing rows raises ShapeError.
void append_valid(SemanticMemory& memory, DescriptorVector vec);

// Cosine similarity in [-1, 1]; 0 when either vector has zero norm.
double semantic_score(const DescriptorVector& reference, const DescriptorVector& candidate);

// fc7 = score >= t_high, rejection = score < t_low.
GateFlags update_flags(double score, const GateConfig& config);

// (1 - eta) * old + eta * fresh, cell-wise.
features::FeatureTensor blend_features(const features::FeatureTensor& old_model,
                                       const features::FeatureTensor& fresh, double eta);

enum class Source { Hog, Cnn };

struct Estimate {
  Point location;       // frame coordinates of the target centre
  double scale = 1.0;   // size relative to the initial target size
  Source source = Source::Hog;
  double score = 0.0;   // semantic score against the memory mean
  double response = 0.0;
};

// The CNN estimate wins only with a strictly higher score.
const Estimate& select_estimate(const Estimate& hog, const Estimate& cnn);

}  // namespace abacf::gate
