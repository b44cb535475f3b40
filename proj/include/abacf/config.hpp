#pragma once

// Text configuration for the tracker: "key = value" lines, '#' comments.
// Keys mirror TrackerConfig, with solver and gate fields prefixed by
// "hog.", "cnn." and "gate." (e.g. "cnn.iterations = 20").

#include <filesystem>
#include <string>
#include <vector>

#include "abacf/tracker.hpp"

namespace abacf::config {

// Sets one field. Unknown keys and unparsable values raise ParameterError.
void set_option(tracking::TrackerConfig& config, const std::string& key, const std::string& value);

// Applies every line in order; errors become ParseError with the line number.
void apply_text(tracking::TrackerConfig& config, const std::string& text);
void apply_file(tracking::TrackerConfig& config, const std::filesystem::path& path);

std::vector<std::string> known_keys();

std::string provider_name(tracking::ProviderKind kind);
tracking::ProviderKind parse_provider(const std::string& text);  // "synthetic" | "remote"

// Every field as a JSON object keyed like the text format.
std::string to_json(const tracking::TrackerConfig& config);

}  // namespace abacf::config
