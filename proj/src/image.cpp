#include "abacf/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>

#include "abacf/errors.hpp"

namespace abacf {

Image::Image(int w, int h, std::uint8_t fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw InputError("image dimensions must be non-negative");
  pixels.assign(static_cast<std::size_t>(w) * h * 3, fill);
}

Image resample_region(const Image& frame, Point center, double region_w, double region_h, int out_w,
                      int out_h) {
  if (frame.empty()) throw InputError("resample_region: empty frame");
  if (out_w < 1 || out_h < 1 || !(region_w > 0) || !(region_h > 0)) {
    throw ParameterError("resample_region: sizes must be positive");
  }
  Image out(out_w, out_h);
  const double sx = region_w / out_w;
  const double sy = region_h / out_h;
  // 0-based pixel-centre coordinates of the region centre.
  const double cx = center.x - 1.0;
  const double cy = center.y - 1.0;

  std::vector<int> x0(out_w), x1(out_w);
  std::vector<double> fx(out_w);
  for (int c = 0; c < out_w; ++c) {
    double x = cx + (c + 0.5 - out_w / 2.0) * sx;
    x = std::clamp(x, 0.0, static_cast<double>(frame.width - 1));
    x0[c] = static_cast<int>(std::floor(x));
    x1[c] = std::min(x0[c] + 1, frame.width - 1);
    fx[c] = x - x0[c];
  }
  for (int r = 0; r < out_h; ++r) {
    double y = cy + (r + 0.5 - out_h / 2.0) * sy;
    y = std::clamp(y, 0.0, static_cast<double>(frame.height - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, frame.height - 1);
    const double fy = y - y0;
    for (int c = 0; c < out_w; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        const double top = frame.at(y0, x0[c], ch) * (1 - fx[c]) + frame.at(y0, x1[c], ch) * fx[c];
        const double bottom = frame.at(y1, x0[c], ch) * (1 - fx[c]) + frame.at(y1, x1[c], ch) * fx[c];
        const double v = top * (1 - fy) + bottom * fy;
        out.at(r, c, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

Image rotate90(const Image& image) {
  Image out(image.height, image.width);
  for (int r = 0; r < image.height; ++r)
    for (int c = 0; c < image.width; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(image.width - 1 - c, r, ch) = image.at(r, c, ch);
  return out;
}

Image read_image(const std::filesystem::path& path) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image: " + path.string());
  Image out(bgr.cols, bgr.rows);
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      out.at(r, c, 0) = row[c][2];
      out.at(r, c, 1) = row[c][1];
      out.at(r, c, 2) = row[c][0];
    }
  }
  return out;
}

void write_image(const std::filesystem::path& path, const Image& image) {
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  for (int r = 0; r < image.height; ++r) {
    auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < image.width; ++c)
      row[c] = cv::Vec3b(image.at(r, c, 2), image.at(r, c, 1), image.at(r, c, 0));
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write image " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write image: " + path.string());
}

}  // namespace abacf
