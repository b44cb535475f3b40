#pragma once

// OTB-layout sequence loading, one-pass evaluation and the precision /
// success metrics.

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "abacf/errors.hpp"
#include "abacf/geometry.hpp"
#include "abacf/image.hpp"
#include "abacf/tracker.hpp"

namespace abacf::eval {

inline constexpr std::size_t kPrecisionThresholds = 51;  // 0..50 px
inline constexpr std::size_t kSuccessThresholds = 21;    // 0, 0.05, .., 1

struct SequenceSpec {
  std::string name;
  std::vector<std::filesystem::path> frame_paths;
  std::vector<BoundingBox> ground_truth;  // zero-size boxes mark frames without ground truth
  std::vector<std::string> attributes;
};

// Boxes with a non-positive side carry no ground truth.
inline bool has_ground_truth(const BoundingBox& box) { return box.width > 0.0 && box.height > 0.0; }

// One box per non-empty line, "x,y,w,h" with 1-based top-left corner;
// commas, spaces and tabs all separate fields. Malformed lines raise
// ParseError with the line number.
std::vector<BoundingBox> parse_boxes(const std::string& text);
std::vector<BoundingBox> read_boxes(const std::filesystem::path& path);

// <dir>/img/* (PNG, JPEG, PPM; sorted by file name), <dir>/groundtruth_rect.txt
// and optionally <dir>/attributes.txt (comma or whitespace separated tags).
SequenceSpec load_sequence(const std::filesystem::path& dir);

double iou(const BoundingBox& a, const BoundingBox& b);
double center_error(const BoundingBox& a, const BoundingBox& b);

double precision_threshold(std::size_t index);  // pixels
double success_threshold(std::size_t index);    // overlap

struct EvalResult {
  std::string name;
  std::vector<BoundingBox> trajectory;
  std::array<double, kPrecisionThresholds> precision_curve{};  // fraction with centre error <= t
  std::array<double, kSuccessThresholds> success_curve{};      // fraction with IoU >= t
  double auc = 0.0;
  double precision_at_20 = 0.0;
  std::size_t failures = 0;  // frames whose estimate does not overlap the ground truth
  double mean_iou = 0.0;
  std::size_t evaluated_frames = 0;  // frames with ground truth
  double seconds = 0.0;              // tracker time, image decoding excluded
  double fps = 0.0;
};

// Curves and summary numbers over the frames that have ground truth.
EvalResult score_trajectory(std::string name, std::vector<BoundingBox> trajectory,
                            const std::vector<BoundingBox>& ground_truth);

// Anything that can be started on a frame and then stepped.
class SequenceTracker {
 public:
  virtual ~SequenceTracker() = default;
  virtual BoundingBox step(const Image& frame) = 0;
};

using TrackerFactory =
    std::function<std::unique_ptr<SequenceTracker>(const Image& first_frame, const BoundingBox& box)>;

TrackerFactory default_factory(const tracking::TrackerConfig& config);

// Tracker failure while running a sequence. The boxes produced before the
// failing frame are kept.
class RunError : public Error {
 public:
  RunError(const std::string& what, std::size_t frame, std::vector<BoundingBox> partial)
      : Error(what), frame_(frame), partial_(std::move(partial)) {}
  std::size_t frame() const noexcept { return frame_; }  // 1-based
  const std::vector<BoundingBox>& partial_trajectory() const noexcept { return partial_; }

 private:
  std::size_t frame_;
  std::vector<BoundingBox> partial_;
};

// One-pass evaluation: start from the frame-1 ground truth and step through
// every remaining frame.
EvalResult run_ope(const SequenceSpec& seq, const TrackerFactory& factory);
EvalResult run_ope(const tracking::TrackerConfig& config, const SequenceSpec& seq);

struct SequenceOutcome {
  std::string name;
  std::optional<EvalResult> result;
  std::string error;  // set when result is empty
  std::vector<BoundingBox> partial_trajectory;
};

// Evaluates sequences on up to `jobs` threads, one tracker per sequence.
// Outcomes come back sorted by sequence name.
std::vector<SequenceOutcome> run_many(const std::vector<SequenceSpec>& sequences, const TrackerFactory& factory,
                                      int jobs);

// Sorted sub-directories of `root` that contain groundtruth_rect.txt.
std::vector<std::filesystem::path> find_sequences(const std::filesystem::path& root);

// Shortest text that parses back to the same double.
std::string format_number(double value);

std::string format_trajectory(const std::vector<BoundingBox>& trajectory);

// trajectory.txt, curves.csv ("curve,threshold,value", 72 data rows),
// summary.json and timing.json. Everything except timing.json depends only on
// the trajectory and ground truth. `config_json` is embedded as the "config"
// member of the summary when non-empty.
void emit_results(const EvalResult& result, const std::filesystem::path& out_dir,
                  const std::string& config_json = {});

}  // namespace abacf::eval
