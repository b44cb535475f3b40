#include "abacf/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "abacf/errors.hpp"

namespace abacf::config {

namespace {

using tracking::TrackerConfig;
using Json = nlohmann::ordered_json;

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ParameterError(key + ": expected a number, got '" + text + "'");
  }
  return v;
}

template <typename Int>
Int to_integer(const std::string& key, const std::string& text) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParameterError(key + ": expected an integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ParameterError(key + ": expected true or false, got '" + text + "'");
}

struct Field {
  std::string key;
  std::function<void(TrackerConfig&, const std::string& key, const std::string& value)> set;
  std::function<Json(const TrackerConfig&)> get;
};

template <typename T>
Field number(std::string key, T TrackerConfig::*member) {
  return {std::move(key),
          [member](TrackerConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>) c.*member = to_double(k, v);
            else c.*member = to_integer<T>(k, v);
          },
          [member](const TrackerConfig& c) { return Json(c.*member); }};
}

template <typename S, typename T>
Field nested(std::string key, S TrackerConfig::*outer, T S::*member) {
  return {std::move(key),
          [outer, member](TrackerConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>) c.*outer.*member = to_double(k, v);
            else c.*outer.*member = to_integer<T>(k, v);
          },
          [outer, member](const TrackerConfig& c) { return Json(c.*outer.*member); }};
}

void add_solver(std::vector<Field>& fields, const std::string& prefix, solver::SolverConfig TrackerConfig::*s) {
  fields.push_back(nested(prefix + ".lambda", s, &solver::SolverConfig::lambda));
  fields.push_back(nested(prefix + ".mu0", s, &solver::SolverConfig::mu0));
  fields.push_back(nested(prefix + ".beta", s, &solver::SolverConfig::beta));
  fields.push_back(nested(prefix + ".mu_max", s, &solver::SolverConfig::mu_max));
  fields.push_back(nested(prefix + ".iterations", s, &solver::SolverConfig::iterations));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    add_solver(f, "hog", &TrackerConfig::hog_solver);
    add_solver(f, "cnn", &TrackerConfig::cnn_solver);
    f.push_back(nested("gate.t_high", &TrackerConfig::gate, &gate::GateConfig::t_high));
    f.push_back(nested("gate.t_low", &TrackerConfig::gate, &gate::GateConfig::t_low));
    f.push_back(nested("gate.t_nms", &TrackerConfig::gate, &gate::GateConfig::t_nms));
    f.push_back(nested("gate.eta", &TrackerConfig::gate, &gate::GateConfig::eta));
    f.push_back(nested("gate.capacity", &TrackerConfig::gate, &gate::GateConfig::capacity));
    f.push_back(number("scale_count", &TrackerConfig::scale_count));
    f.push_back(number("scale_step", &TrackerConfig::scale_step));
    f.push_back(number("scale_min", &TrackerConfig::scale_min));
    f.push_back(number("scale_max", &TrackerConfig::scale_max));
    f.push_back(number("padding_factor", &TrackerConfig::padding_factor));
    f.push_back(number("cell_size", &TrackerConfig::cell_size));
    f.push_back(number("max_template_size", &TrackerConfig::max_template_size));
    f.push_back(number("label_sigma_factor", &TrackerConfig::label_sigma_factor));
    f.push_back(number("window_fraction", &TrackerConfig::window_fraction));
    f.push_back(number("newton_tolerance", &TrackerConfig::newton_tolerance));
    f.push_back(number("newton_max_iters", &TrackerConfig::newton_max_iters));
    f.push_back(number("learning_rate_hog", &TrackerConfig::learning_rate_hog));
    f.push_back(number("descriptor_padding", &TrackerConfig::descriptor_padding));
    f.push_back({"provider",
                 [](TrackerConfig& c, const std::string&, const std::string& v) { c.deep_provider = parse_provider(v); },
                 [](const TrackerConfig& c) { return Json(provider_name(c.deep_provider)); }});
    f.push_back({"server", [](TrackerConfig& c, const std::string&, const std::string& v) { c.server = v; },
                 [](const TrackerConfig& c) { return Json(c.server); }});
    f.push_back({"fallback_to_synthetic",
                 [](TrackerConfig& c, const std::string& k, const std::string& v) {
                   c.fallback_to_synthetic = to_bool(k, v);
                 },
                 [](const TrackerConfig& c) { return Json(c.fallback_to_synthetic); }});
    f.push_back(number("seed", &TrackerConfig::seed));
    return f;
  }();
  return table;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string provider_name(tracking::ProviderKind kind) {
  return kind == tracking::ProviderKind::Remote ? "remote" : "synthetic";
}

tracking::ProviderKind parse_provider(const std::string& text) {
  if (text == "synthetic") return tracking::ProviderKind::Synthetic;
  if (text == "remote") return tracking::ProviderKind::Remote;
  throw ParameterError("provider must be synthetic or remote, got '" + text + "'");
}

void set_option(TrackerConfig& config, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(config, key, value);
      return;
    }
  }
  throw ParameterError("unknown configuration key '" + key + "'");
}

void apply_text(TrackerConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", number);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key", number);
    try {
      set_option(config, key, value);
    } catch (const ParameterError& e) {
      throw ParseError(e.what(), number);
    }
  }
}

void apply_file(TrackerConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    apply_text(config, buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.key);
  return keys;
}

std::string to_json(const TrackerConfig& config) {
  Json out = Json::object();
  for (const Field& f : fields()) out[f.key] = f.get(config);
  return out.dump();
}

}  // namespace abacf::config
