#pragma once

// Adaptive two-model tracker: a HOG context model trained every frame and a
// deep-feature context model brought in only when the HOG response is
// ambiguous or the semantic gate has rejected recent estimates.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "abacf/bacf_solver.hpp"
#include "abacf/deep_provider.hpp"
#include "abacf/features.hpp"
#include "abacf/geometry.hpp"
#include "abacf/nms.hpp"
#include "abacf/semantic_gate.hpp"

namespace abacf::tracking {

enum class ProviderKind { Synthetic, Remote };

struct TrackerConfig {
  solver::SolverConfig hog_solver{};
  solver::SolverConfig cnn_solver{0.01, 1.0, 10.0, 1000.0, 20};
  gate::GateConfig gate{};

  int scale_count = 5;
  double scale_step = 1.02;
  double scale_min = 0.2;  // relative to the initial target size
  double scale_max = 5.0;
  double padding_factor = 5.0;
  int cell_size = 4;
  int max_template_size = 200;  // pixels per side of the resampled search patch
  double label_sigma_factor = 0.1;
  double window_fraction = 0.25;
  double newton_tolerance = 1e-7;
  int newton_max_iters = 5;
  double learning_rate_hog = 0.0125;
  double descriptor_padding = 1.0;  // descriptor region relative to the target box

  ProviderKind deep_provider = ProviderKind::Synthetic;
  std::string server;  // host:port for the remote provider
  bool fallback_to_synthetic = false;
  std::uint64_t seed = 7;

  void validate() const;
};

// Sub-cell location on a response grid.
struct SubCell {
  double row = 0.0;
  double col = 0.0;
  int iterations = 0;
};

// Newton ascent on the bilinearly interpolated, circularly wrapped response
// using 3x3 central differences. Stops when the step is shorter than
// `tolerance`, after `max_iters` steps, when the local Hessian is not
// negative definite, or when a step would leave the unit disc around
// `start`; the last accepted point is returned.
SubCell newton_refine(const spectral::RealGrid& response, spectral::Cell start, double tolerance,
                      int max_iters);

// Geometry shared by every search: a square region of `base_side` frame
// pixels at scale 1, resampled to `template_px` pixels, i.e. a grid of
// template_px / cell_size cells.
struct SearchGeometry {
  double base_side = 0.0;
  int template_px = 0;
  int cell_size = 4;
  int grid() const { return template_px / cell_size; }
  double pixels_per_cell(double scale) const { return base_side * scale / template_px * cell_size; }
};

using FeatureFn = std::function<features::FeatureTensor(const Image& patch)>;

struct ScaleResult {
  gate::Estimate estimate;
  int scale_index = 0;  // offset from the centre scale
  solver::ResponseMap response;  // response at the selected scale
};

// Evaluates the model over scale * scale_step^k, k = -(n-1)/2 .. (n-1)/2,
// of the region centred at `center`; the highest discrete peak wins, the
// centre scale on ties. The location is the Newton-refined peak mapped back
// to frame coordinates.
ScaleResult scale_search(const solver::FilterBank& model, const Image& frame, Point center, double scale,
                         const SearchGeometry& geometry, const FeatureFn& extract, const TrackerConfig& config);

struct FrameEvent {
  int frame = 0;
  Point search_center;  // centre of the region searched in this frame
  double search_scale = 1.0;
  bool reliable = true;
  bool challenging = false;
  bool cnn_trained = false;
  gate::Source source = gate::Source::Hog;
  double hog_peak = 0.0;
  std::size_t local_peaks = 0;
  double hog_score = 0.0;
  double cnn_score = 0.0;  // 0 when the CNN model was not consulted
  double final_score = 0.0;
  gate::GateFlags flags;
  std::size_t memory_size = 0;
  bool memory_grew = false;
  std::string note;  // provider fallbacks and similar diagnostics
};

struct TrackerState {
  BoundingBox bbox;
  gate::GateFlags flags;
  solver::FilterBank hog_model;
  features::FeatureTensor hog_features_model;
  std::optional<solver::FilterBank> cnn_model;
  std::optional<features::FeatureTensor> cnn_features_model;
  gate::SemanticMemory memory;
  int frame_index = 1;
  double scale = 1.0;          // current size relative to the initial target
  Point anchor;                // last location accepted without rejection
  double anchor_scale = 1.0;
  bool previous_challenging = false;
  std::vector<FrameEvent> events;
};

class Tracker {
 public:
  // Trains the HOG model on the first context region, seeds the semantic
  // memory and the deep feature model. `provider` overrides the provider
  // named in the config.
  static Tracker init(const Image& frame, const BoundingBox& box, TrackerConfig config,
                      std::unique_ptr<features::DeepFeatureProvider> provider = nullptr);

  BoundingBox step(const Image& frame);

  const TrackerState& state() const noexcept { return state_; }
  const TrackerConfig& config() const noexcept { return config_; }
  const SearchGeometry& geometry() const noexcept { return geometry_; }
  const std::string& provider_name() const noexcept { return provider_name_; }

 private:
  Tracker() = default;

  features::FeatureTensor hog_features(const Image& patch) const;
  features::FeatureTensor deep_features(const Image& patch);
  features::DescriptorVector describe(const Image& frame, Point center, double scale);
  features::FeatureTensor region_features(const Image& frame, Point center, double scale, bool deep);
  void train_hog(const features::FeatureTensor& x, bool warm);
  void seed_deep_state(const Image& frame);
  BoundingBox step_once(const Image& frame);

  TrackerConfig config_;
  SearchGeometry geometry_;
  solver::Support support_;
  spectral::RealGrid label_;
  spectral::RealGrid window_;
  double base_width_ = 0.0;
  double base_height_ = 0.0;
  std::unique_ptr<features::DeepFeatureProvider> provider_;
  std::string provider_name_;
  TrackerState state_;
};

}  // namespace abacf::tracking
