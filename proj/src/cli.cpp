#include "abacf/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "abacf/config.hpp"
#include "abacf/errors.hpp"
#include "abacf/eval.hpp"
#include "abacf/toy.hpp"

namespace abacf::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

// Signals a usage-level problem found after parsing.
struct UsageError {
  std::string message;
};

struct TrackerFlags {
  std::string config_file;
  std::string provider;
  std::string server;
  std::uint64_t seed = 7;
  CLI::Option* provider_opt = nullptr;
  CLI::Option* server_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* config_opt = nullptr;

  void attach(CLI::App& cmd) {
    config_opt = cmd.add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
    provider_opt = cmd.add_option("--provider", provider, "deep feature provider")
                       ->check(CLI::IsMember({"synthetic", "remote"}));
    server_opt = cmd.add_option("--server", server, "feature server host:port (default: $BACF_SERVER)");
    seed_opt = cmd.add_option("--seed", seed, "seed of the synthetic deep features");
  }

  // defaults < BACF_SERVER < config file < explicit flags
  tracking::TrackerConfig resolve() const {
    tracking::TrackerConfig cfg;
    if (const char* env = std::getenv("BACF_SERVER"); env != nullptr && *env != '\0') cfg.server = env;
    try {
      if (config_opt->count() > 0) config::apply_file(cfg, config_file);
      if (provider_opt->count() > 0) cfg.deep_provider = config::parse_provider(provider);
      if (server_opt->count() > 0) cfg.server = server;
      if (seed_opt->count() > 0) cfg.seed = seed;
      if (cfg.deep_provider == tracking::ProviderKind::Remote && cfg.server.empty()) {
        throw UsageError{"--provider remote needs --server, a 'server' config entry or BACF_SERVER"};
      }
      cfg.validate();
    } catch (const Error& e) {
      throw UsageError{e.what()};
    }
    return cfg;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void report(std::ostream& out, const eval::EvalResult& r) {
  out << r.name << ": auc=" << eval::format_number(r.auc)
      << " precision@20=" << eval::format_number(r.precision_at_20) << " failures=" << r.failures
      << " mean_iou=" << eval::format_number(r.mean_iou) << " fps=" << r.fps << '\n';
}

int cmd_track(const fs::path& seq_dir, const fs::path& out_dir, const tracking::TrackerConfig& cfg,
              std::ostream& out, std::ostream& err) {
  const eval::SequenceSpec seq = eval::load_sequence(seq_dir);
  try {
    const eval::EvalResult r = eval::run_ope(cfg, seq);
    eval::emit_results(r, out_dir, config::to_json(cfg));
    report(out, r);
    return 0;
  } catch (const eval::RunError& e) {
    fs::create_directories(out_dir);
    write_text(out_dir / "trajectory.txt", eval::format_trajectory(e.partial_trajectory()));
    err << "error: " << e.what() << "\n(partial trajectory of " << e.partial_trajectory().size()
        << " frames written)\n";
    return kRuntimeFailure;
  }
}

int cmd_eval(const fs::path& root, const fs::path& out_dir, int jobs, const tracking::TrackerConfig& cfg,
             std::ostream& out, std::ostream& err) {
  const std::vector<fs::path> dirs = eval::find_sequences(root);
  if (dirs.empty()) {
    err << "error: no sequences found in " << root.string() << '\n';
    return kRuntimeFailure;
  }

  std::vector<eval::SequenceSpec> specs;
  std::vector<eval::SequenceOutcome> load_failures;
  for (const fs::path& dir : dirs) {
    try {
      specs.push_back(eval::load_sequence(dir));
    } catch (const Error& e) {
      load_failures.push_back({dir.filename().string(), std::nullopt, e.what(), {}});
    }
  }
  std::vector<eval::SequenceOutcome> outcomes = eval::run_many(specs, eval::default_factory(cfg), jobs);
  outcomes.insert(outcomes.end(), load_failures.begin(), load_failures.end());
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const auto& a, const auto& b) { return a.name < b.name; });

  const std::string cfg_json = config::to_json(cfg);
  Json sequences = Json::array();
  Json timing_rows = Json::array();
  double auc = 0.0, p20 = 0.0, fps = 0.0;
  std::size_t failures = 0, succeeded = 0;
  for (const auto& o : outcomes) {
    if (!o.result) {
      err << "error: " << o.name << ": " << o.error << '\n';
      sequences.push_back({{"name", o.name}, {"error", o.error}});
      if (!o.partial_trajectory.empty()) {
        fs::create_directories(out_dir / o.name);
        write_text(out_dir / o.name / "trajectory.txt", eval::format_trajectory(o.partial_trajectory));
      }
      continue;
    }
    const eval::EvalResult& r = *o.result;
    eval::emit_results(r, out_dir / r.name, cfg_json);
    report(out, r);
    sequences.push_back({{"name", r.name},
                         {"auc", r.auc},
                         {"precision_at_20", r.precision_at_20},
                         {"failures", r.failures},
                         {"mean_iou", r.mean_iou}});
    timing_rows.push_back({{"name", r.name}, {"seconds", r.seconds}, {"fps", r.fps}});
    auc += r.auc;
    p20 += r.precision_at_20;
    fps += r.fps;
    failures += r.failures;
    ++succeeded;
  }

  const double n = succeeded > 0 ? static_cast<double>(succeeded) : 1.0;
  Json aggregate;
  aggregate["sequences"] = sequences;
  aggregate["succeeded"] = succeeded;
  aggregate["failed"] = outcomes.size() - succeeded;
  aggregate["mean_auc"] = auc / n;
  aggregate["mean_precision_at_20"] = p20 / n;
  aggregate["total_failures"] = failures;
  aggregate["config"] = Json::parse(cfg_json);
  fs::create_directories(out_dir);
  write_text(out_dir / "aggregate.json", aggregate.dump(2) + '\n');
  Json timing;
  timing["sequences"] = timing_rows;
  timing["mean_fps"] = fps / n;
  write_text(out_dir / "timing.json", timing.dump(2) + '\n');

  out << "aggregate: " << succeeded << '/' << outcomes.size() << " sequences, mean auc="
      << eval::format_number(auc / n) << '\n';
  return succeeded == outcomes.size() ? 0 : kRuntimeFailure;
}

void draw_box(Image& img, const BoundingBox& box, std::array<std::uint8_t, 3> colour) {
  // Frame coordinate x covers column x - 1.
  const long x0 = std::lround(box.left()) - 1;
  const long y0 = std::lround(box.top()) - 1;
  const long x1 = x0 + std::max(1L, std::lround(box.width)) - 1;
  const long y1 = y0 + std::max(1L, std::lround(box.height)) - 1;
  auto put = [&](long r, long c) {
    if (r < 0 || c < 0 || r >= img.height || c >= img.width) return;
    for (int k = 0; k < 3; ++k) img.at(static_cast<int>(r), static_cast<int>(c), k) = colour[k];
  };
  for (long c = x0; c <= x1; ++c) {
    put(y0, c);
    put(y1, c);
  }
  for (long r = y0; r <= y1; ++r) {
    put(r, x0);
    put(r, x1);
  }
}

int cmd_overlay(const fs::path& seq_dir, const fs::path& traj, const fs::path& out_dir, std::ostream& out,
                std::ostream& err) {
  const eval::SequenceSpec seq = eval::load_sequence(seq_dir);
  const std::vector<BoundingBox> boxes = eval::read_boxes(traj);
  if (boxes.size() != seq.frame_paths.size()) {
    err << "error: trajectory has " << boxes.size() << " boxes for " << seq.frame_paths.size() << " frames\n";
    return kRuntimeFailure;
  }
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    Image img = read_image(seq.frame_paths[i]);
    if (eval::has_ground_truth(seq.ground_truth[i])) draw_box(img, seq.ground_truth[i], {40, 220, 40});
    draw_box(img, boxes[i], {230, 30, 30});
    char name[16];
    std::snprintf(name, sizeof name, "%04zu.png", i + 1);
    write_image(out_dir / name, img);
  }
  out << "wrote " << boxes.size() << " frames to " << out_dir.string() << '\n';
  return 0;
}

int cmd_make_toy(const fs::path& out_dir, const std::string& kind, std::uint64_t seed, std::ostream& out) {
  std::vector<toy::Kind> kinds;
  if (kind == "all") kinds = {toy::Kind::Moving, toy::Kind::Occlusion};
  else kinds = {toy::parse_kind(kind)};
  for (toy::Kind k : kinds) {
    const toy::Sequence seq = toy::make_sequence(k, seed);
    toy::write_sequence(out_dir / seq.name, seq);
    out << "wrote " << (out_dir / seq.name).string() << " (" << seq.frames.size() << " frames)\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive background-aware correlation-filter tracker"};
  app.name("abacf");
  app.require_subcommand(1);

  std::string seq_dir, out_dir, seqs_dir, traj, kind = "all";
  int jobs = 1;
  std::uint64_t toy_seed = 7;

  CLI::App* track = app.add_subcommand("track", "track one OTB-layout sequence");
  track->add_option("--seq", seq_dir, "sequence directory")->required();
  track->add_option("--out", out_dir, "output directory")->required();
  TrackerFlags track_flags;
  track_flags.attach(*track);

  CLI::App* ev = app.add_subcommand("eval", "one-pass evaluation over a directory of sequences");
  ev->add_option("--seqs", seqs_dir, "directory of sequence directories")->required();
  ev->add_option("--out", out_dir, "output directory")->required();
  ev->add_option("--jobs", jobs, "sequences evaluated in parallel")->check(CLI::PositiveNumber);
  TrackerFlags eval_flags;
  eval_flags.attach(*ev);

  CLI::App* overlay = app.add_subcommand("overlay", "draw a trajectory and the ground truth onto the frames");
  overlay->add_option("--seq", seq_dir, "sequence directory")->required();
  overlay->add_option("--traj", traj, "trajectory file")->required();
  overlay->add_option("--out", out_dir, "output directory")->required();

  CLI::App* make_toy = app.add_subcommand("make-toy", "write the bundled synthetic sequences");
  make_toy->add_option("--out", out_dir, "output directory")->required();
  make_toy->add_option("--kind", kind, "moving, occlusion or all")
      ->check(CLI::IsMember({"moving", "occlusion", "all"}));
  make_toy->add_option("--seed", toy_seed, "background seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : kUsageError;
  }

  try {
    if (*track) return cmd_track(seq_dir, out_dir, track_flags.resolve(), out, err);
    if (*ev) return cmd_eval(seqs_dir, out_dir, jobs, eval_flags.resolve(), out, err);
    if (*overlay) return cmd_overlay(seq_dir, traj, out_dir, out, err);
    if (*make_toy) return cmd_make_toy(out_dir, kind, toy_seed, out);
  } catch (const UsageError& e) {
    err << "error: " << e.message << '\n' << app.help();
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}

}  // namespace abacf::cli
