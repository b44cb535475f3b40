#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace abacf {

// Interleaved 8-bit RGB image, row-major.
//
// Frame coordinates used throughout the tracker follow the OTB ground-truth
// convention: the pixel at (row i, col j) has its centre at x = j + 1,
// y = i + 1.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // 3 * width * height

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0);

  bool empty() const noexcept { return width <= 0 || height <= 0; }

  std::uint8_t& at(int row, int col, int channel) {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + channel];
  }
  std::uint8_t at(int row, int col, int channel) const {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + channel];
  }
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Bilinear resampling of the region of `region_w` x `region_h` frame pixels
// centred at `center` onto an `out_w` x `out_h` grid. Out-of-frame samples
// replicate the nearest edge pixel.
Image resample_region(const Image& frame, Point center, double region_w, double region_h, int out_w,
                      int out_h);

Image rotate90(const Image& image);  // counter-clockwise

// PNG / JPEG / PPM via OpenCV. Throws IoError with the path on failure.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);

}  // namespace abacf
