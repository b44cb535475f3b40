#include "abacf/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace abacf::eval {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string(), 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',' || ch == ' ' || ch == '\t' || ch == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double parse_number(const std::string& field, std::size_t line) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw ParseError("not a number: '" + field + "'", line);
  }
  return v;
}

bool is_frame_file(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".ppm";
}

class CoreTracker final : public SequenceTracker {
 public:
  CoreTracker(const Image& frame, const BoundingBox& box, const tracking::TrackerConfig& config)
      : tracker_(tracking::Tracker::init(frame, box, config)) {}
  BoundingBox step(const Image& frame) override { return tracker_.step(frame); }

 private:
  tracking::Tracker tracker_;
};

}  // namespace

std::vector<BoundingBox> parse_boxes(const std::string& text) {
  std::vector<BoundingBox> boxes;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 4) {
      throw ParseError("expected 4 fields, got " + std::to_string(fields.size()), number);
    }
    const double x = parse_number(fields[0], number);
    const double y = parse_number(fields[1], number);
    const double w = parse_number(fields[2], number);
    const double h = parse_number(fields[3], number);
    if (w < 0.0 || h < 0.0) throw ParseError("negative box size", number);
    boxes.push_back(BoundingBox::from_top_left(x, y, w, h));
  }
  return boxes;
}

std::vector<BoundingBox> read_boxes(const fs::path& path) {
  try {
    return parse_boxes(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

SequenceSpec load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ParseError("sequence directory not found: " + dir.string(), 0);
  const fs::path img = dir / "img";
  const fs::path gt = dir / "groundtruth_rect.txt";
  if (!fs::is_directory(img)) throw ParseError("missing frame directory " + img.string(), 0);
  if (!fs::is_regular_file(gt)) throw ParseError("missing ground truth " + gt.string(), 0);

  SequenceSpec seq;
  seq.name = fs::absolute(dir).lexically_normal().filename().string();
  if (seq.name.empty()) seq.name = fs::absolute(dir).lexically_normal().parent_path().filename().string();
  for (const auto& entry : fs::directory_iterator(img)) {
    if (entry.is_regular_file() && is_frame_file(entry.path())) seq.frame_paths.push_back(entry.path());
  }
  std::sort(seq.frame_paths.begin(), seq.frame_paths.end());
  if (seq.frame_paths.empty()) throw ParseError("no frames in " + img.string(), 0);

  const std::string text = read_text(gt);
  seq.ground_truth = parse_boxes(text);
  if (seq.ground_truth.size() != seq.frame_paths.size()) {
    std::size_t lines = 0;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) ++lines;
    throw ParseError(gt.string() + ": " + std::to_string(seq.ground_truth.size()) + " boxes for " +
                         std::to_string(seq.frame_paths.size()) + " frames",
                     lines);
  }
  if (!has_ground_truth(seq.ground_truth.front())) {
    throw ParseError(gt.string() + ": the first frame needs a ground-truth box", 1);
  }

  const fs::path attrs = dir / "attributes.txt";
  if (fs::is_regular_file(attrs)) seq.attributes = split_fields(read_text(attrs));
  for (auto& a : seq.attributes) a.erase(std::remove(a.begin(), a.end(), '\n'), a.end());
  std::erase_if(seq.attributes, [](const std::string& a) { return a.empty(); });
  return seq;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::min(a.center.x + a.width / 2.0, b.center.x + b.width / 2.0) -
                    std::max(a.center.x - a.width / 2.0, b.center.x - b.width / 2.0);
  const double iy = std::min(a.center.y + a.height / 2.0, b.center.y + b.height / 2.0) -
                    std::max(a.center.y - a.height / 2.0, b.center.y - b.height / 2.0);
  const double inter = std::max(0.0, ix) * std::max(0.0, iy);
  const double uni = a.width * a.height + b.width * b.height - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double center_error(const BoundingBox& a, const BoundingBox& b) {
  return std::hypot(a.center.x - b.center.x, a.center.y - b.center.y);
}

double precision_threshold(std::size_t index) { return static_cast<double>(index); }
double success_threshold(std::size_t index) { return static_cast<double>(index) / 20.0; }

EvalResult score_trajectory(std::string name, std::vector<BoundingBox> trajectory,
                            const std::vector<BoundingBox>& ground_truth) {
  if (trajectory.size() != ground_truth.size()) {
    throw ShapeError("score_trajectory: " + std::to_string(trajectory.size()) + " estimates for " +
                     std::to_string(ground_truth.size()) + " ground-truth boxes");
  }
  EvalResult r;
  r.name = std::move(name);
  std::vector<double> errors, overlaps;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    if (!has_ground_truth(ground_truth[i])) continue;
    errors.push_back(center_error(trajectory[i], ground_truth[i]));
    overlaps.push_back(iou(trajectory[i], ground_truth[i]));
  }
  r.trajectory = std::move(trajectory);
  r.evaluated_frames = overlaps.size();
  if (overlaps.empty()) return r;

  const double n = static_cast<double>(overlaps.size());
  for (std::size_t k = 0; k < kPrecisionThresholds; ++k) {
    const double t = precision_threshold(k);
    r.precision_curve[k] = std::count_if(errors.begin(), errors.end(), [t](double e) { return e <= t; }) / n;
  }
  for (std::size_t k = 0; k < kSuccessThresholds; ++k) {
    const double t = success_threshold(k);
    r.success_curve[k] = std::count_if(overlaps.begin(), overlaps.end(), [t](double o) { return o >= t; }) / n;
  }
  double sum = 0.0;
  for (double v : r.success_curve) sum += v;
  r.auc = sum / static_cast<double>(kSuccessThresholds);
  r.precision_at_20 = r.precision_curve[20];
  r.failures = static_cast<std::size_t>(std::count(overlaps.begin(), overlaps.end(), 0.0));
  double total = 0.0;
  for (double o : overlaps) total += o;
  r.mean_iou = total / n;
  return r;
}

TrackerFactory default_factory(const tracking::TrackerConfig& config) {
  return [config](const Image& frame, const BoundingBox& box) -> std::unique_ptr<SequenceTracker> {
    return std::make_unique<CoreTracker>(frame, box, config);
  };
}

EvalResult run_ope(const SequenceSpec& seq, const TrackerFactory& factory) {
  if (seq.frame_paths.empty() || seq.frame_paths.size() != seq.ground_truth.size()) {
    throw ShapeError("run_ope: sequence '" + seq.name + "' has mismatched frames and ground truth");
  }
  std::vector<BoundingBox> trajectory;
  trajectory.reserve(seq.frame_paths.size());
  Clock::duration busy{};
  std::unique_ptr<SequenceTracker> tracker;
  for (std::size_t i = 0; i < seq.frame_paths.size(); ++i) {
    try {
      const Image frame = read_image(seq.frame_paths[i]);
      const auto start = Clock::now();
      if (i == 0) {
        tracker = factory(frame, seq.ground_truth[0]);
        trajectory.push_back(seq.ground_truth[0]);
      } else {
        trajectory.push_back(tracker->step(frame));
      }
      busy += Clock::now() - start;
    } catch (const Error& e) {
      throw RunError(seq.name + ": frame " + std::to_string(i + 1) + ": " + e.what(), i + 1,
                     std::move(trajectory));
    }
  }
  EvalResult r = score_trajectory(seq.name, std::move(trajectory), seq.ground_truth);
  r.seconds = std::chrono::duration<double>(busy).count();
  r.fps = r.seconds > 0.0 ? static_cast<double>(seq.frame_paths.size()) / r.seconds : 0.0;
  return r;
}

EvalResult run_ope(const tracking::TrackerConfig& config, const SequenceSpec& seq) {
  return run_ope(seq, default_factory(config));
}

std::vector<SequenceOutcome> run_many(const std::vector<SequenceSpec>& sequences, const TrackerFactory& factory,
                                      int jobs) {
  std::vector<SequenceOutcome> outcomes(sequences.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < sequences.size(); i = next++) {
      SequenceOutcome& out = outcomes[i];
      out.name = sequences[i].name;
      try {
        out.result = run_ope(sequences[i], factory);
      } catch (const RunError& e) {
        out.error = e.what();
        out.partial_trajectory = e.partial_trajectory();
      } catch (const Error& e) {
        out.error = e.what();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(1, sequences.size())));
  std::vector<std::jthread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const SequenceOutcome& a, const SequenceOutcome& b) { return a.name < b.name; });
  return outcomes;
}

std::vector<fs::path> find_sequences(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / "groundtruth_rect.txt")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::string format_number(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

namespace {

// Top-left coordinate that converts back to exactly `center`, searched a few
// ulps around the direct value.
double exact_corner(double center, double size) {
  const double direct = center - size / 2.0 + 0.5;
  double corner = direct;
  for (int i = 0; i < 16; ++i) {
    const double back = corner + size / 2.0 - 0.5;
    if (back == center) return corner;
    corner = std::nextafter(corner, back < center ? HUGE_VAL : -HUGE_VAL);
  }
  return direct;
}

}  // namespace

std::string format_trajectory(const std::vector<BoundingBox>& trajectory) {
  std::string out;
  for (const BoundingBox& b : trajectory) {
    out += format_number(exact_corner(b.center.x, b.width)) + ',' + format_number(exact_corner(b.center.y, b.height)) +
           ',' + format_number(b.width) + ',' + format_number(b.height) + '\n';
  }
  return out;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void emit_results(const EvalResult& result, const fs::path& out_dir, const std::string& config_json) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  write_file(out_dir / "trajectory.txt", format_trajectory(result.trajectory));

  std::string curves = "curve,threshold,value\n";
  for (std::size_t k = 0; k < kPrecisionThresholds; ++k) {
    curves += "precision," + format_number(precision_threshold(k)) + ',' + format_number(result.precision_curve[k]) + '\n';
  }
  for (std::size_t k = 0; k < kSuccessThresholds; ++k) {
    curves += "success," + format_number(success_threshold(k)) + ',' + format_number(result.success_curve[k]) + '\n';
  }
  write_file(out_dir / "curves.csv", curves);

  nlohmann::ordered_json summary;
  summary["name"] = result.name;
  summary["frames"] = result.trajectory.size();
  summary["evaluated_frames"] = result.evaluated_frames;
  summary["auc"] = result.auc;
  summary["precision_at_20"] = result.precision_at_20;
  summary["failures"] = result.failures;
  summary["mean_iou"] = result.mean_iou;
  if (!config_json.empty()) summary["config"] = nlohmann::ordered_json::parse(config_json);
  write_file(out_dir / "summary.json", summary.dump(2) + '\n');

  nlohmann::ordered_json timing;
  timing["name"] = result.name;
  timing["seconds"] = result.seconds;
  timing["fps"] = result.fps;
  write_file(out_dir / "timing.json", timing.dump(2) + '\n');
}

}  // namespace abacf::eval
