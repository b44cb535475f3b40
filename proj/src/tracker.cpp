#include "abacf/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "abacf/errors.hpp"

namespace abacf::tracking {

namespace {

double wrapped_sample(const spectral::RealGrid& grid, double row, double col) {
  const int h = grid.height();
  const int w = grid.width();
  const double fr = std::floor(row);
  const double fc = std::floor(col);
  const double tr = row - fr;
  const double tc = col - fc;
  auto wrap = [](long v, int n) { return static_cast<int>(((v % n) + n) % n); };
  const int r0 = wrap(static_cast<long>(fr), h);
  const int r1 = wrap(static_cast<long>(fr) + 1, h);
  const int c0 = wrap(static_cast<long>(fc), w);
  const int c1 = wrap(static_cast<long>(fc) + 1, w);
  const double top = (1.0 - tc) * grid.at(r0, c0) + tc * grid.at(r0, c1);
  const double bottom = (1.0 - tc) * grid.at(r1, c0) + tc * grid.at(r1, c1);
  return (1.0 - tr) * top + tr * bottom;
}

// Offset of a peak from the grid centre, wrapped into [-n/2, n/2).
double centred_offset(double position, int n) {
  double d = position - n / 2;
  if (d >= n / 2.0) d -= n;
  if (d < -n / 2.0) d += n;
  return d;
}

// Scales a deep tensor to unit mean per-cell energy.
void normalise_energy(features::FeatureTensor& tensor) {
  double energy = 0.0;
  for (double v : tensor.values()) energy += v * v;
  if (!(energy > 0.0)) return;
  const double gain = std::sqrt(static_cast<double>(tensor.plane_size()) / energy);
  for (double& v : tensor.values()) v *= gain;
}

std::unique_ptr<features::DeepFeatureProvider> make_provider(const TrackerConfig& config) {
  if (config.deep_provider == ProviderKind::Remote) {
    return std::make_unique<features::RemoteProvider>(features::Endpoint::parse(config.server));
  }
  return std::make_unique<features::SyntheticProvider>(config.seed);
}

}  // namespace

void TrackerConfig::validate() const {
  hog_solver.validate();
  cnn_solver.validate();
  gate.validate();
  if (scale_count < 1 || scale_count % 2 == 0) throw ParameterError("tracker: scale_count must be odd and >= 1");
  if (!(scale_step > 1.0)) throw ParameterError("tracker: scale_step must be > 1");
  if (!(scale_min > 0.0) || !(scale_max >= scale_min)) {
    throw ParameterError("tracker: scale clamp must satisfy 0 < scale_min <= scale_max");
  }
  if (!(padding_factor >= 1.0)) throw ParameterError("tracker: padding_factor must be >= 1");
  if (cell_size < 1) throw ParameterError("tracker: cell_size must be >= 1");
  if (max_template_size < 3 * cell_size) {
    throw ParameterError("tracker: max_template_size must cover at least 3 cells");
  }
  if (!(label_sigma_factor > 0.0)) throw ParameterError("tracker: label_sigma_factor must be > 0");
  if (!(window_fraction > 0.0)) throw ParameterError("tracker: window_fraction must be > 0");
  if (!(newton_tolerance > 0.0)) throw ParameterError("tracker: newton_tolerance must be > 0");
  if (newton_max_iters < 0) throw ParameterError("tracker: newton_max_iters must be >= 0");
  if (!(learning_rate_hog > 0.0 && learning_rate_hog <= 1.0)) {
    throw ParameterError("tracker: learning_rate_hog must lie in (0, 1]");
  }
  if (!(descriptor_padding > 0.0)) throw ParameterError("tracker: descriptor_padding must be > 0");
  if (deep_provider == ProviderKind::Remote && server.empty()) {
    throw ParameterError("tracker: the remote provider needs a server address");
  }
}

SubCell newton_refine(const spectral::RealGrid& response, spectral::Cell start, double tolerance,
                      int max_iters) {
  SubCell p{static_cast<double>(start.row), static_cast<double>(start.col), 0};
  for (int it = 0; it < max_iters; ++it) {
    auto f = [&](double dr, double dc) { return wrapped_sample(response, p.row + dr, p.col + dc); };
    const double centre = f(0, 0);
    const double gr = (f(1, 0) - f(-1, 0)) / 2.0;
    const double gc = (f(0, 1) - f(0, -1)) / 2.0;
    const double hrr = f(1, 0) - 2.0 * centre + f(-1, 0);
    const double hcc = f(0, 1) - 2.0 * centre + f(0, -1);
    const double hrc = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / 4.0;
    const double det = hrr * hcc - hrc * hrc;
    if (!(hrr < 0.0 && det > 0.0)) break;

    const double dr = -(hcc * gr - hrc * gc) / det;
    const double dc = -(hrr * gc - hrc * gr) / det;
    const double nr = p.row + dr;
    const double nc = p.col + dc;
    if (std::hypot(nr - start.row, nc - start.col) > 1.0) break;
    p.row = nr;
    p.col = nc;
    p.iterations = it + 1;
    if (std::hypot(dr, dc) < tolerance) break;
  }
  return p;
}

ScaleResult scale_search(const solver::FilterBank& model, const Image& frame, Point center, double scale,
                         const SearchGeometry& geometry, const FeatureFn& extract, const TrackerConfig& config) {
  const int half = (config.scale_count - 1) / 2;
  // Centre scale first so that ties keep it.
  std::vector<int> order{0};
  for (int k = 1; k <= half; ++k) {
    order.push_back(-k);
    order.push_back(k);
  }

  ScaleResult best;
  bool have = false;
  for (int k : order) {
    const double s = scale * std::pow(config.scale_step, k);
    const double side = geometry.base_side * s;
    const Image patch = resample_region(frame, center, side, side, geometry.template_px, geometry.template_px);
    solver::ResponseMap response = solver::compute_response(model, extract(patch));
    if (!have || response.peak_value > best.response.peak_value) {
      best.response = std::move(response);
      best.scale_index = k;
      best.estimate.scale = s;
      have = true;
    }
  }

  const SubCell peak = newton_refine(best.response.grid, best.response.peak_location, config.newton_tolerance,
                                     config.newton_max_iters);
  const int g = geometry.grid();
  const double ppc = geometry.pixels_per_cell(best.estimate.scale);
  best.estimate.location = {center.x + centred_offset(peak.col, g) * ppc,
                            center.y + centred_offset(peak.row, g) * ppc};
  best.estimate.response = best.response.peak_value;
  return best;
}

features::FeatureTensor Tracker::hog_features(const Image& patch) const {
  return features::extract_hog(patch, geometry_.cell_size);
}

features::FeatureTensor Tracker::deep_features(const Image& patch) {
  features::FeatureTensor raw = provider_->conv_features(patch);
  const int g = geometry_.grid();
  features::FeatureTensor out =
      raw.height() == g && raw.width() == g ? std::move(raw) : features::resize_tensor(raw, g, g);
  normalise_energy(out);
  return out;
}

features::FeatureTensor Tracker::region_features(const Image& frame, Point center, double scale, bool deep) {
  const double side = geometry_.base_side * scale;
  const Image patch = resample_region(frame, center, side, side, geometry_.template_px, geometry_.template_px);
  return deep ? deep_features(patch) : hog_features(patch);
}

features::DescriptorVector Tracker::describe(const Image& frame, Point center, double scale) {
  const int d = provider_->descriptor_input_size();
  const double w = base_width_ * scale * config_.descriptor_padding;
  const double h = base_height_ * scale * config_.descriptor_padding;
  return provider_->descriptor(resample_region(frame, center, w, h, d, d));
}

void Tracker::train_hog(const features::FeatureTensor& x, bool warm) {
  const features::FeatureTensor windowed = features::apply_window(x, window_);
  state_.hog_model =
      solver::train(windowed, label_, support_, config_.hog_solver, warm ? &state_.hog_model : nullptr);
}

void Tracker::seed_deep_state(const Image& frame) {
  state_.memory = gate::SemanticMemory(config_.gate.capacity);
  gate::append_valid(state_.memory, describe(frame, state_.bbox.center, state_.scale));
  state_.cnn_features_model = region_features(frame, state_.bbox.center, state_.scale, true);
  state_.cnn_model.reset();
}

Tracker Tracker::init(const Image& frame, const BoundingBox& box, TrackerConfig config,
                      std::unique_ptr<features::DeepFeatureProvider> provider) {
  config.validate();
  if (frame.empty()) throw InputError("tracker init: empty frame");
  if (!(box.width > 0.0 && box.height > 0.0)) throw InputError("tracker init: box size must be positive");
  if (box.center.x < 0.5 || box.center.y < 0.5 || box.center.x > frame.width + 0.5 ||
      box.center.y > frame.height + 0.5) {
    throw InputError("tracker init: box centre lies outside the frame");
  }

  Tracker t;
  t.config_ = std::move(config);
  const TrackerConfig& cfg = t.config_;
  t.base_width_ = box.width;
  t.base_height_ = box.height;

  const double base_side = cfg.padding_factor * std::sqrt(box.width * box.height);
  const double capped = std::min(base_side, static_cast<double>(cfg.max_template_size));
  const int cells = std::max(3, static_cast<int>(std::floor(capped / cfg.cell_size)));
  t.geometry_ = {base_side, cells * cfg.cell_size, cfg.cell_size};

  const int g = t.geometry_.grid();
  const double px_per_cell = t.geometry_.pixels_per_cell(1.0);
  t.support_ = {std::clamp(static_cast<int>(std::lround(box.height / px_per_cell)), 1, g),
                std::clamp(static_cast<int>(std::lround(box.width / px_per_cell)), 1, g)};
  const double sigma = cfg.label_sigma_factor * std::sqrt(static_cast<double>(t.support_.rows) * t.support_.cols);
  t.label_ = spectral::gaussian_label(g, g, sigma, {g / 2, g / 2});
  t.window_ = spectral::gaussian_window(g, g, cfg.window_fraction);

  t.state_.bbox = box;
  t.state_.memory = gate::SemanticMemory(cfg.gate.capacity);
  t.state_.anchor = box.center;

  std::string note;
  t.provider_ = provider ? std::move(provider) : make_provider(cfg);
  try {
    t.seed_deep_state(frame);
  } catch (const TransportError& e) {
    if (!cfg.fallback_to_synthetic) throw;
    t.provider_ = std::make_unique<features::SyntheticProvider>(cfg.seed);
    note = std::string("deep provider failed, using synthetic features: ") + e.what();
    t.seed_deep_state(frame);
  }
  t.provider_name_ = t.provider_->name();

  t.state_.hog_features_model = t.region_features(frame, box.center, 1.0, false);
  t.train_hog(t.state_.hog_features_model, false);

  FrameEvent event;
  event.frame = 1;
  event.search_center = box.center;
  event.final_score = 1.0;
  event.memory_size = t.state_.memory.size();
  event.memory_grew = true;
  event.note = std::move(note);
  t.state_.events.push_back(std::move(event));
  return t;
}

BoundingBox Tracker::step(const Image& frame) {
  if (frame.empty()) throw InputError("tracker step: empty frame");
  try {
    return step_once(frame);
  } catch (const TransportError& e) {
    if (!config_.fallback_to_synthetic) throw;
    provider_ = std::make_unique<features::SyntheticProvider>(config_.seed);
    provider_name_ = provider_->name();
    seed_deep_state(frame);
    const BoundingBox out = step_once(frame);
    state_.events.back().note = std::string("deep provider failed, using synthetic features: ") + e.what();
    return out;
  }
}

BoundingBox Tracker::step_once(const Image& frame) {
  TrackerState& s = state_;
  FrameEvent event;
  event.frame = s.frame_index + 1;

  // Under rejection the search stays at the last confident location.
  const Point center = s.flags.rejection_flag ? s.anchor : s.bbox.center;
  const double scale = s.flags.rejection_flag ? s.anchor_scale : s.scale;
  event.search_center = center;
  event.search_scale = scale;

  const FeatureFn hog_fn = [this](const Image& patch) {
    return features::apply_window(hog_features(patch), window_);
  };
  const ScaleResult hog = scale_search(s.hog_model, frame, center, scale, geometry_, hog_fn, config_);
  const nms::NmsPeaks peaks = nms::fast_nms_3x3(hog.response.grid);
  event.reliable = nms::assess_reliability(peaks, config_.gate.t_nms) == nms::Reliability::Reliable;
  event.hog_peak = peaks.global_peak.value;
  event.local_peaks = peaks.count();
  event.challenging = !event.reliable || s.flags.rejection_flag;

  const features::DescriptorVector reference = gate::fcm(s.memory);
  gate::Estimate hog_est = hog.estimate;
  features::DescriptorVector hog_desc = describe(frame, hog_est.location, hog_est.scale);
  hog_est.score = gate::semantic_score(reference, hog_desc);
  event.hog_score = hog_est.score;

  gate::Estimate final_est = hog_est;
  features::DescriptorVector final_desc = std::move(hog_desc);
  if (event.challenging) {
    if (!s.cnn_model || !s.previous_challenging) {
      const features::FeatureTensor windowed = features::apply_window(*s.cnn_features_model, window_);
      s.cnn_model = solver::train(windowed, label_, support_, config_.cnn_solver,
                                  s.cnn_model ? &*s.cnn_model : nullptr);
      event.cnn_trained = true;
    }
    const FeatureFn cnn_fn = [this](const Image& patch) {
      return features::apply_window(deep_features(patch), window_);
    };
    gate::Estimate cnn_est = scale_search(*s.cnn_model, frame, center, scale, geometry_, cnn_fn, config_).estimate;
    cnn_est.source = gate::Source::Cnn;
    features::DescriptorVector cnn_desc = describe(frame, cnn_est.location, cnn_est.scale);
    cnn_est.score = gate::semantic_score(reference, cnn_desc);
    event.cnn_score = cnn_est.score;
    if (&gate::select_estimate(hog_est, cnn_est) == &cnn_est) {
      final_est = cnn_est;
      final_desc = std::move(cnn_desc);
    }
  }
  final_est.scale = std::clamp(final_est.scale, config_.scale_min, config_.scale_max);

  const gate::GateFlags flags = gate::update_flags(final_est.score, config_.gate);
  const bool accept = flags.fc7_flag && !flags.rejection_flag;
  std::optional<features::FeatureTensor> fresh_deep;
  if (accept) fresh_deep = region_features(frame, final_est.location, final_est.scale, true);

  // All provider calls are done; commit the frame.
  s.flags = flags;
  if (accept) {
    gate::append_valid(s.memory, std::move(final_desc));
    s.cnn_features_model = gate::blend_features(*s.cnn_features_model, *fresh_deep, config_.gate.eta);
  }
  if (!flags.rejection_flag) {
    s.anchor = final_est.location;
    s.anchor_scale = final_est.scale;
  }
  s.scale = final_est.scale;
  s.bbox = {final_est.location, base_width_ * s.scale, base_height_ * s.scale};

  const features::FeatureTensor fresh_hog = region_features(frame, final_est.location, final_est.scale, false);
  s.hog_features_model = gate::blend_features(s.hog_features_model, fresh_hog, config_.learning_rate_hog);
  train_hog(s.hog_features_model, true);

  s.previous_challenging = event.challenging;
  ++s.frame_index;
  event.source = final_est.source;
  event.final_score = final_est.score;
  event.flags = flags;
  event.memory_grew = accept;
  event.memory_size = s.memory.size();
  s.events.push_back(std::move(event));
  return s.bbox;
}

}  // namespace abacf::tracking
