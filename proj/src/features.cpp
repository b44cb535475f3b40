#include "abacf/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "abacf/errors.hpp"

namespace abacf::features {

namespace {

constexpr int kOrientations = 18;
constexpr double kNormEps = 1e-4;
constexpr double kTruncation = 0.2;
constexpr double kTextureWeight = 0.2357;

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace

FeatureTensor::FeatureTensor(int height, int width, int channels, int cell_size, FeatureKind kind)
    : height_(height), width_(width), channels_(channels), cell_size_(cell_size), kind_(kind) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ShapeError("feature tensor dimensions must be positive");
  }
  if (cell_size < 1) throw ParameterError("cell_size must be >= 1");
  if (kind == FeatureKind::Hog && channels != kHogChannels) {
    throw ShapeError("hog tensors have exactly 31 channels");
  }
  values_.assign(plane_size() * static_cast<std::size_t>(channels), 0.0);
}

Image extract_patch(const Image& frame, const PatchSpec& spec) {
  if (frame.empty()) throw InputError("extract_patch: zero-area frame");
  if (!(spec.width > 0) || !(spec.height > 0) || !(spec.padding_factor >= 1.0)) {
    throw ParameterError("extract_patch: invalid patch spec");
  }
  const int pw = std::max(1, round_half_up(spec.width * spec.padding_factor));
  const int ph = std::max(1, round_half_up(spec.height * spec.padding_factor));
  const int left = round_half_up(spec.center.x - 1.0 - (pw - 1) / 2.0);
  const int top = round_half_up(spec.center.y - 1.0 - (ph - 1) / 2.0);
  Image out(pw, ph);
  for (int r = 0; r < ph; ++r) {
    const int sr = std::clamp(top + r, 0, frame.height - 1);
    for (int c = 0; c < pw; ++c) {
      const int sc = std::clamp(left + c, 0, frame.width - 1);
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = frame.at(sr, sc, ch);
    }
  }
  return out;
}

FeatureTensor extract_hog(const Image& patch, int cell_size) {
  if (cell_size < 1) throw ParameterError("extract_hog: cell_size must be >= 1");
  if (patch.width < 2 * cell_size || patch.height < 2 * cell_size) {
    throw InputError("extract_hog: patch must be at least two cells in each axis");
  }
  const int W = patch.width;
  const int H = patch.height;
  const int rows = H / cell_size;
  const int cols = W / cell_size;
  const std::size_t cells = static_cast<std::size_t>(rows) * cols;

  // Orientation histograms, 18 bins per cell.
  std::vector<double> hist(cells * kOrientations, 0.0);
  const double bins_per_radian = kOrientations / (2.0 * std::numbers::pi);
  for (int y = 0; y < rows * cell_size; ++y) {
    const int up = std::max(y - 1, 0);
    const int down = std::min(y + 1, H - 1);
    const std::size_t cell_row = static_cast<std::size_t>(y / cell_size) * cols;
    for (int x = 0; x < cols * cell_size; ++x) {
      const int left = std::max(x - 1, 0);
      const int right = std::min(x + 1, W - 1);
      int best = -1, gx = 0, gy = 0;
      for (int ch = 0; ch < 3; ++ch) {
        const int dx = patch.at(y, right, ch) - patch.at(y, left, ch);
        const int dy = patch.at(down, x, ch) - patch.at(up, x, ch);
        const int m2 = dx * dx + dy * dy;
        if (m2 > best) {
          best = m2;
          gx = dx;
          gy = dy;
        }
      }
      if (best <= 0) continue;
      const double mag = std::sqrt(static_cast<double>(best)) / 255.0;
      double theta = std::atan2(static_cast<double>(gy), static_cast<double>(gx));
      if (theta < 0) theta += 2.0 * std::numbers::pi;
      const double pos = theta * bins_per_radian;
      const double base = std::floor(pos);
      const double frac = pos - base;
      const int b0 = static_cast<int>(base) % kOrientations;
      const int b1 = (b0 + 1) % kOrientations;
      double* h = &hist[(cell_row + x / cell_size) * kOrientations];
      h[b0] += mag * (1.0 - frac);
      h[b1] += mag * frac;
    }
  }

  // Unsigned-orientation energy per cell.
  std::vector<double> energy(cells, 0.0);
  for (std::size_t i = 0; i < cells; ++i) {
    const double* h = &hist[i * kOrientations];
    double e = 0.0;
    for (int o = 0; o < 9; ++o) {
      const double u = h[o] + h[o + 9];
      e += u * u;
    }
    energy[i] = e;
  }
  auto energy_at = [&](int r, int c) {
    r = std::clamp(r, 0, rows - 1);
    c = std::clamp(c, 0, cols - 1);
    return energy[static_cast<std::size_t>(r) * cols + c];
  };
  auto block_norm = [&](int r0, int c0) {
    const double s = energy_at(r0, c0) + energy_at(r0, c0 + 1) + energy_at(r0 + 1, c0) +
                     energy_at(r0 + 1, c0 + 1);
    return 1.0 / std::sqrt(s + kNormEps);
  };

  FeatureTensor out(rows, cols, kHogChannels, cell_size, FeatureKind::Hog);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double n[4] = {block_norm(r, c), block_norm(r - 1, c), block_norm(r, c - 1),
                           block_norm(r - 1, c - 1)};
      const double* h = &hist[(static_cast<std::size_t>(r) * cols + c) * kOrientations];
      double texture[4] = {0, 0, 0, 0};
      for (int o = 0; o < kOrientations; ++o) {
        double sum = 0.0;
        for (int k = 0; k < 4; ++k) {
          const double t = std::min(h[o] * n[k], kTruncation);
          sum += t;
          texture[k] += t;
        }
        out.at(r, c, o) = 0.5 * sum;
      }
      for (int o = 0; o < 9; ++o) {
        const double u = h[o] + h[o + 9];
        double sum = 0.0;
        for (int k = 0; k < 4; ++k) sum += std::min(u * n[k], kTruncation);
        out.at(r, c, kOrientations + o) = 0.5 * sum;
      }
      for (int k = 0; k < 4; ++k) out.at(r, c, 27 + k) = kTextureWeight * texture[k];
    }
  }
  return out;
}

FeatureTensor resize_tensor(const FeatureTensor& tensor, int height, int width) {
  if (height < 1 || width < 1) throw ShapeError("resize_tensor: target shape must be positive");
  if (height == tensor.height() && width == tensor.width()) return tensor;
  const int cell = std::max(1, tensor.cell_size() * tensor.height() / height);
  FeatureTensor out(height, width, tensor.channels(), cell, tensor.kind());

  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int out_n, int in_n) {
    std::vector<Tap> t(static_cast<std::size_t>(out_n));
    const double scale = static_cast<double>(in_n) / out_n;
    for (int i = 0; i < out_n; ++i) {
      const double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(in_n - 1));
      const int i0 = static_cast<int>(std::floor(s));
      t[i] = {i0, std::min(i0 + 1, in_n - 1), s - i0};
    }
    return t;
  };
  const auto ty = taps(height, tensor.height());
  const auto tx = taps(width, tensor.width());
  for (int ch = 0; ch < tensor.channels(); ++ch) {
    for (int r = 0; r < height; ++r) {
      const Tap& y = ty[r];
      for (int c = 0; c < width; ++c) {
        const Tap& x = tx[c];
        const double top = tensor.at(y.i0, x.i0, ch) * (1 - x.f) + tensor.at(y.i0, x.i1, ch) * x.f;
        const double bot = tensor.at(y.i1, x.i0, ch) * (1 - x.f) + tensor.at(y.i1, x.i1, ch) * x.f;
        out.at(r, c, ch) = top * (1 - y.f) + bot * y.f;
      }
    }
  }
  return out;
}

FeatureTensor fuse_conv_layers(std::span<const FeatureTensor> layers) {
  if (layers.empty()) throw InputError("fuse_conv_layers: empty layer list");
  if (layers.size() == 1) return layers.front();
  const FeatureTensor& first = layers.front();
  int channels = 0;
  for (const auto& l : layers) channels += l.channels();
  FeatureTensor out(first.height(), first.width(), channels, first.cell_size(), first.kind());
  int offset = 0;
  for (const auto& layer : layers) {
    const FeatureTensor resized = resize_tensor(layer, first.height(), first.width());
    for (int ch = 0; ch < resized.channels(); ++ch) {
      auto src = resized.plane(ch);
      std::copy(src.begin(), src.end(), out.plane(offset + ch).begin());
    }
    offset += layer.channels();
  }
  return out;
}

FeatureTensor apply_window(const FeatureTensor& features, const spectral::RealGrid& window) {
  if (window.height() != features.height() || window.width() != features.width()) {
    throw ShapeError("apply_window: window " + std::to_string(window.height()) + "x" +
                     std::to_string(window.width()) + " does not match features " +
                     std::to_string(features.height()) + "x" + std::to_string(features.width()));
  }
  FeatureTensor out = features;
  auto w = window.values();
  for (int ch = 0; ch < out.channels(); ++ch) {
    auto p = out.plane(ch);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] *= w[i];
  }
  return out;
}

}  // namespace abacf::features
