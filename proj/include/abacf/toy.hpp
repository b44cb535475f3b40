#pragma once

// Bundled synthetic sequences: a textured target moving and growing over a
// smooth textured background, and a variant where the target vanishes for a
// stretch of frames.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "abacf/geometry.hpp"
#include "abacf/image.hpp"

namespace abacf::toy {

enum class Kind { Moving, Occlusion };

Kind parse_kind(const std::string& text);  // "moving" | "occlusion"
std::string kind_name(Kind kind);

struct Sequence {
  std::string name;
  std::vector<Image> frames;
  std::vector<BoundingBox> ground_truth;
  int hidden_first = 0;  // 1-based frame range where the target is not drawn; 0 when none
  int hidden_last = 0;
};

Sequence make_sequence(Kind kind, std::uint64_t seed = 7);

// OTB layout: <dir>/img/0001.png ... and <dir>/groundtruth_rect.txt.
void write_sequence(const std::filesystem::path& dir, const Sequence& sequence);

}  // namespace abacf::toy
