#include "abacf/toy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "abacf/errors.hpp"
#include "abacf/eval.hpp"

namespace abacf::toy {

namespace {

constexpr int kWidth = 192;
constexpr int kHeight = 144;
constexpr int kFrames = 60;
constexpr int kSubsamples = 4;

using Rgb = std::array<double, 3>;

struct Wave {
  double fx, fy, phase;
  Rgb gain;
};

// Smooth background: a few low-frequency colour waves over a mid-grey base.
class Background {
 public:
  explicit Background(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> freq(0.02, 0.09);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> gain(-30.0, 30.0);
    for (auto& w : waves_) w = {freq(rng), freq(rng), phase(rng), {gain(rng), gain(rng), gain(rng)}};
  }

  Rgb at(double x, double y) const {
    Rgb c{118.0, 122.0, 112.0};
    for (const Wave& w : waves_) {
      const double s = std::sin(w.fx * x + w.fy * y + w.phase);
      for (int k = 0; k < 3; ++k) c[k] += w.gain[k] * s;
    }
    return c;
  }

 private:
  std::array<Wave, 5> waves_{};
};

// Target appearance in normalised coordinates u, v in [0, 1): a 4x4 checker
// of saturated colours inside a dark frame.
Rgb target_colour(double u, double v) {
  static constexpr std::array<Rgb, 4> palette{{{230, 40, 40}, {250, 220, 30}, {30, 60, 220}, {240, 240, 240}}};
  if (u < 0.1 || u >= 0.9 || v < 0.1 || v >= 0.9) return {20, 20, 20};
  const int i = std::min(3, static_cast<int>((u - 0.1) / 0.2));
  const int j = std::min(3, static_cast<int>((v - 0.1) / 0.2));
  return palette[static_cast<std::size_t>((i + 2 * j + (i * j) % 3) % 4)];
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Image render(const Background& background, const BoundingBox* target, std::mt19937_64& noise_rng) {
  std::uniform_real_distribution<double> noise(-3.0, 3.0);
  Image img(kWidth, kHeight);
  for (int r = 0; r < kHeight; ++r) {
    for (int c = 0; c < kWidth; ++c) {
      Rgb acc{};
      for (int sy = 0; sy < kSubsamples; ++sy) {
        for (int sx = 0; sx < kSubsamples; ++sx) {
          // Frame coordinates: pixel (r, c) is centred at (c + 1, r + 1).
          const double x = c + 0.5 + (sx + 0.5) / kSubsamples;
          const double y = r + 0.5 + (sy + 0.5) / kSubsamples;
          Rgb px = background.at(x, y);
          if (target != nullptr) {
            const double u = (x - (target->center.x - target->width / 2.0)) / target->width;
            const double v = (y - (target->center.y - target->height / 2.0)) / target->height;
            if (u >= 0.0 && u < 1.0 && v >= 0.0 && v < 1.0) px = target_colour(u, v);
          }
          for (int k = 0; k < 3; ++k) acc[k] += px[k];
        }
      }
      const double n = kSubsamples * kSubsamples;
      for (int k = 0; k < 3; ++k) img.at(r, c, k) = to_byte(acc[k] / n + noise(noise_rng));
    }
  }
  return img;
}

BoundingBox moving_box(int t) {
  const double phase = 2.0 * std::numbers::pi * t / kFrames;
  const double size = 32.0 * (1.0 + 0.3 * t / (kFrames - 1));
  return {{48.0 + 1.8 * t, 72.0 + 24.0 * std::sin(phase)}, size, size};
}

BoundingBox occlusion_box(int t) {
  return {{70.0 + 1.0 * t, 66.0 + 8.0 * std::sin(2.0 * std::numbers::pi * t / kFrames)}, 32.0, 32.0};
}

}  // namespace

Kind parse_kind(const std::string& text) {
  if (text == "moving") return Kind::Moving;
  if (text == "occlusion") return Kind::Occlusion;
  throw ParameterError("unknown toy sequence kind '" + text + "' (expected moving or occlusion)");
}

std::string kind_name(Kind kind) { return kind == Kind::Moving ? "moving" : "occlusion"; }

Sequence make_sequence(Kind kind, std::uint64_t seed) {
  Sequence seq;
  seq.name = "toy_" + kind_name(kind);
  if (kind == Kind::Occlusion) {
    seq.hidden_first = 20;
    seq.hidden_last = 30;
  }
  const Background background(seed);
  std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (int t = 0; t < kFrames; ++t) {
    const BoundingBox box = kind == Kind::Moving ? moving_box(t) : occlusion_box(t);
    const int frame = t + 1;
    const bool hidden = frame >= seq.hidden_first && frame <= seq.hidden_last;
    seq.frames.push_back(render(background, hidden ? nullptr : &box, noise_rng));
    seq.ground_truth.push_back(box);
  }
  return seq;
}

void write_sequence(const std::filesystem::path& dir, const Sequence& sequence) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "img", ec);
  if (ec) throw IoError("cannot create " + (dir / "img").string() + ": " + ec.message());
  for (std::size_t i = 0; i < sequence.frames.size(); ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "%04zu.png", i + 1);
    write_image(dir / "img" / name, sequence.frames[i]);
  }
  std::ofstream gt(dir / "groundtruth_rect.txt", std::ios::binary);
  if (!gt) throw IoError("cannot write " + (dir / "groundtruth_rect.txt").string());
  gt << eval::format_trajectory(sequence.ground_truth);
  if (!gt) throw IoError("write failed for " + (dir / "groundtruth_rect.txt").string());
}

}  // namespace abacf::toy
