#include "abacf/semantic_gate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "abacf/errors.hpp"

namespace abacf::gate {

void GateConfig::validate() const {
  if (!(t_low > 0.0 && t_low < t_high && t_high <= 1.0)) {
    throw ParameterError("gate: thresholds must satisfy 0 < t_low < t_high <= 1");
  }
  if (!(t_nms > 0.0 && t_nms <= 1.0)) throw ParameterError("gate: t_nms must lie in (0, 1]");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("gate: eta must lie in [0, 1]");
  if (capacity < 1) throw ParameterError("gate: capacity must be >= 1");
}

SemanticMemory::SemanticMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 1) throw ParameterError("semantic memory capacity must be >= 1");
}

DescriptorVector fcm(const SemanticMemory& memory) {
  if (memory.rows_.empty()) throw StateError("fcm: semantic memory is empty");
  if (!memory.fcm_cache_) {
    DescriptorVector mean;
    mean.values.assign(memory.rows_.front().dim(), 0.0);
    for (const auto& row : memory.rows_)
      for (std::size_t i = 0; i < row.dim(); ++i) mean.values[i] += row.values[i];
    const double inv = 1.0 / static_cast<double>(memory.rows_.size());
    for (double& v : mean.values) v *= inv;
    memory.fcm_cache_ = std::move(mean);
  }
  return *memory.fcm_cache_;
}

void append_valid(SemanticMemory& memory, DescriptorVector vec) {
  if (vec.dim() == 0) throw ShapeError("append_valid: empty descriptor");
  if (!memory.rows_.empty() && vec.dim() != memory.rows_.front().dim()) {
    throw ShapeError("append_valid: descriptor dim " + std::to_string(vec.dim()) +
                     " differs from memory dim " + std::to_string(memory.rows_.front().dim()));
  }
  memory.rows_.push_back(std::move(vec));
  if (memory.rows_.size() > memory.capacity_) {
    memory.rows_.erase(memory.rows_.begin() + 1);
  }
  memory.fcm_cache_.reset();
}

double semantic_score(const DescriptorVector& reference, const DescriptorVector& candidate) {
  if (reference.dim() != candidate.dim()) {
    throw ShapeError("semantic_score: descriptor dims differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < reference.dim(); ++i) {
    dot += reference.values[i] * candidate.values[i];
    na += reference.values[i] * reference.values[i];
    nb += candidate.values[i] * candidate.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

GateFlags update_flags(double score, const GateConfig& config) {
  if (!std::isfinite(score)) throw ParameterError("update_flags: score must be finite");
  return {score >= config.t_high, score < config.t_low};
}

features::FeatureTensor blend_features(const features::FeatureTensor& old_model,
                                       const features::FeatureTensor& fresh, double eta) {
  if (!old_model.same_shape(fresh)) throw ShapeError("blend_features: tensor shapes differ");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("blend_features: eta must lie in [0, 1]");
  features::FeatureTensor out = old_model;
  auto dst = out.values();
  auto src = fresh.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (1.0 - eta) * dst[i] + eta * src[i];
  return out;
}

const Estimate& select_estimate(const Estimate& hog, const Estimate& cnn) {
  return cnn.score > hog.score ? cnn : hog;
}

}  // namespace abacf::gate
