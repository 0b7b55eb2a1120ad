// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "streamrecon/engine.hpp"
#include "streamrecon/error.hpp"
#include "streamrecon/io.hpp"
#include "streamrecon/metrics.hpp"
#include "streamrecon/simulator.hpp"

namespace sr::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Cap on points each frame contributes to the fused cloud.
constexpr std::size_t kPlyPointsPerFrame = 1024;

fs::path numbered(const fs::path& dir, const char* prefix, std::int64_t index, const char* ext) {
  char name[64];
  std::snprintf(name, sizeof(name), "%s_%04lld.%s", prefix, static_cast<long long>(index), ext);
  return dir / name;
}

std::size_t count_numbered(const fs::path& dir, const char* prefix, const char* ext) {
  std::size_t n = 0;
  while (fs::exists(numbered(dir, prefix, static_cast<std::int64_t>(n) + 1, ext))) ++n;
  return n;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorKind::kIo, "cannot create directory " + dir.string());
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::uint64_t seed = 0;
  std::size_t frames = 0;
  std::string traj = "orbit";
  std::size_t height = 64;
  std::size_t width = 64;
  std::string out;
};

ordered_json scene_manifest(const Scene& scene, const SimulateArgs& a, const Intrinsics& k) {
  ordered_json prims = ordered_json::array();
  for (const Primitive& p : scene.primitives) {
    ordered_json j;
    j["kind"] = p.kind == PrimitiveKind::kPlane ? "plane" : "sphere";
    j["center"] = {p.center.x(), p.center.y(), p.center.z()};
    if (p.kind == PrimitiveKind::kPlane) {
      j["half_extent"] = {p.half_extent.x(), p.half_extent.y(), p.half_extent.z()};
      j["normal_axis"] = p.normal_axis;
    } else {
      j["radius"] = p.radius;
    }
    j["color"] = {p.color.x(), p.color.y(), p.color.z()};
    j["shell"] = p.shell;
    prims.push_back(std::move(j));
  }
  ordered_json m;
  m["seed"] = a.seed;
  m["frames"] = a.frames;
  m["trajectory"] = a.traj;
  m["height"] = a.height;
  m["width"] = a.width;
  m["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
  m["bounds_min"] = {scene.bounds_min.x(), scene.bounds_min.y(), scene.bounds_min.z()};
  m["bounds_max"] = {scene.bounds_max.x(), scene.bounds_max.y(), scene.bounds_max.z()};
  m["free_radius"] = scene.free_radius;
  m["primitives"] = std::move(prims);
  return m;
}

void simulate(const SimulateArgs& a, std::ostream& out) {
  require(a.frames > 0, ErrorKind::kInvalidInput, "--frames must be positive");
  const TrajectoryKind kind = parse_trajectory_kind(a.traj);
  const fs::path dir(a.out);
  ensure_dir(dir);

  const Scene scene = make_scene(a.seed);
  const Trajectory traj = make_trajectory(scene, kind, a.frames, a.seed);
  const Intrinsics k = make_intrinsics(a.height, a.width);
  const Pose& anchor = traj.poses.front();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const FrameTruth truth = render_frame(scene, traj.poses[i], k, a.height, a.width, anchor);
    const auto idx = static_cast<std::int64_t>(i) + 1;
    write_ppm(truth.image, numbered(dir, "frame", idx, "ppm"));
    write_pointmap(truth.pm_cam, numbered(dir, "pm_cam", idx, "pmap"));
    write_pointmap(truth.pm_world, numbered(dir, "pm_world", idx, "pmap"));
  }
  write_trajectory(relative_to_first(traj), dir / "trajectory.txt");
  write_text_file(dir / "scene.json", scene_manifest(scene, a, k).dump(2) + "\n");
  out << "wrote " << a.frames << " frames to " << dir.string() << "\n";
}

// ---- run --------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string input;
  std::string out;
  bool timing = false;
};

class RunSink {
 public:
  RunSink(fs::path input, fs::path out, std::vector<Image> images)
      : input_(std::move(input)), out_(std::move(out)), images_(std::move(images)) {}

  void consume(const FrameResult& r, double ms) {
    write_pointmap(r.pointmap, numbered(out_, "pred", r.frame_index, "pmap"));
    poses_.push_back(estimate_pose(r));
    collect_points(r);

    ordered_json rec;
    rec["frame"] = r.frame_index;
    rec["short_tokens"] = r.stats.short_tokens;
    rec["long_tokens"] = r.stats.long_tokens;
    rec["snapshot_size"] = r.stats.snapshot_size;
    rec["kept_after_gating"] = r.stats.kept;
    rec["gated_fraction"] = r.stats.gated_fraction;
    rec["v_scene"] = r.stats.v_scene;
    rec["ms_per_frame"] = ms;
    trace_ += rec.dump() + "\n";
  }

  void finish() {
    Trajectory traj;
    traj.poses = poses_;
    write_trajectory(traj, out_ / "trajectory.txt");
    write_ply(points_, colors_, out_ / "scene.ply");
    write_text_file(out_ / "trace.jsonl", trace_);
  }

 private:
  // Pose of the camera in the predicted global frame, from the ground-truth
  // camera-frame map of the same input frame.
  Pose estimate_pose(const FrameResult& r) {
    const Pointmap cam = read_pointmap(numbered(input_, "pm_cam", r.frame_index, "pmap"));
    try {
      return extract_pose(r.pointmap, cam).pose;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerate) throw;
      return poses_.empty() ? Pose{} : poses_.back();
    }
  }

  // Pixels at or above the frame's median confidence, thinned to a fixed
  // per-frame budget.
  void collect_points(const FrameResult& r) {
    const Pointmap& pm = r.pointmap;
    std::vector<double> sorted = pm.confidence;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                     sorted.end());
    const double threshold = sorted[sorted.size() / 2];
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < pm.size(); ++i) {
      if (pm.confidence[i] >= threshold) keep.push_back(i);
    }
    const std::size_t stride = std::max<std::size_t>(1, (keep.size() + kPlyPointsPerFrame - 1) /
                                                            kPlyPointsPerFrame);
    const Image& img = images_[static_cast<std::size_t>(r.frame_index) - 1];
    for (std::size_t j = 0; j < keep.size(); j += stride) {
      const std::size_t i = keep[j];
      points_.push_back(pm.points[i]);
      colors_.push_back(to_rgb(img, i / pm.w, i % pm.w));
    }
  }

  fs::path input_;
  fs::path out_;
  std::vector<Image> images_;
  std::vector<Pose> poses_;
  std::vector<Vec3> points_;
  std::vector<Rgb> colors_;
  std::string trace_;
};

void run_engine(const RunArgs& a, std::ostream& out) {
  const EngineConfig cfg = read_config(a.config);
  const fs::path input(a.input);
  const std::size_t n = count_numbered(input, "frame", "ppm");
  if (n == 0) fail(ErrorKind::kInvalidInput, "no frame_0001.ppm in " + input.string());

  std::vector<Image> images;
  images.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    Image img = read_ppm(numbered(input, "frame", static_cast<std::int64_t>(i), "ppm"));
    if (img.h != cfg.model.image_h || img.w != cfg.model.image_w) {
      fail(ErrorKind::kInvalidInput, "frame " + std::to_string(i) + " is " + std::to_string(img.h) +
                                         "x" + std::to_string(img.w) + ", config expects " +
                                         std::to_string(cfg.model.image_h) + "x" +
                                         std::to_string(cfg.model.image_w));
    }
    images.push_back(std::move(img));
  }

  const fs::path dir(a.out);
  ensure_dir(dir);
  Engine engine(cfg);
  RunSink sink(input, dir, images);
  using clock = std::chrono::steady_clock;
  auto elapsed_ms = [&](clock::time_point t0) {
    if (!a.timing) return 0.0;
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  for (const Image& img : images) {
    const auto t0 = clock::now();
    std::optional<FrameResult> r = engine.ingest(img);
    if (r) sink.consume(*r, elapsed_ms(t0));
  }
  const auto t0 = clock::now();
  const FrameResult last = engine.finalize();
  sink.consume(last, elapsed_ms(t0));
  sink.finish();
  out << "processed " << n << " frames into " << dir.string() << "\n";
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string out;
};

void evaluate(const EvalArgs& a, std::ostream& out) {
  const fs::path pred_dir(a.pred);
  const fs::path gt_dir(a.gt);
  const std::size_t n = count_numbered(pred_dir, "pred", "pmap");
  if (n == 0) fail(ErrorKind::kInvalidInput, "no pred_0001.pmap in " + pred_dir.string());

  std::vector<Pointmap> preds;
  std::vector<Pointmap> gts;
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
  for (std::size_t i = 1; i <= n; ++i) {
    const auto idx = static_cast<std::int64_t>(i);
    Pointmap p = read_pointmap(numbered(pred_dir, "pred", idx, "pmap"));
    Pointmap g = read_pointmap(numbered(gt_dir, "pm_world", idx, "pmap"));
    if (p.h != g.h || p.w != g.w) {
      fail(ErrorKind::kInvalidInput, "frame " + std::to_string(i) + ": prediction and ground truth sizes differ");
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (!g.valid(k)) continue;
      src.push_back(p.points[k]);
      dst.push_back(g.points[k]);
    }
    preds.push_back(std::move(p));
    gts.push_back(std::move(g));
  }

  // Predictions are only defined up to a similarity; align with the
  // per-pixel correspondences before measuring distances.
  const Sim3 align = umeyama(src, dst, true);
  std::vector<Vec3> pred_cloud;
  std::vector<Vec3> gt_cloud;
  std::vector<double> scores;
  for (std::size_t i = 0; i < n; ++i) {
    Pointmap& p = preds[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      p.points[k] = align.apply(p.points[k]);
      if (!gts[i].valid(k)) p.confidence[k] = 0.0;
      if (p.valid(k)) pred_cloud.push_back(p.points[k]);
      if (gts[i].valid(k)) gt_cloud.push_back(gts[i].points[k]);
    }
    const std::vector<double> s = normal_scores(p, gts[i]);
    scores.insert(scores.end(), s.begin(), s.end());
  }
  const ReconReport recon = make_recon_report(cloud_distance(pred_cloud, gt_cloud), std::move(scores));

  const TrajectoryFile pred_traj = read_trajectory(pred_dir / "trajectory.txt");
  const TrajectoryFile gt_traj = read_trajectory(gt_dir / "trajectory.txt");
  if (pred_traj.trajectory.size() != n || gt_traj.trajectory.size() < n) {
    fail(ErrorKind::kInvalidInput, "trajectory lengths do not match the predicted frames");
  }
  Trajectory gt_head;
  gt_head.poses.assign(gt_traj.trajectory.poses.begin(),
                       gt_traj.trajectory.poses.begin() + static_cast<std::ptrdiff_t>(n));
  const PoseReport pose = trajectory_errors(pred_traj.trajectory, gt_head);

  ordered_json report;
  report["frames"] = n;
  report["recon"] = {{"acc_mean", recon.acc_mean},   {"acc_median", recon.acc_median},
                     {"comp_mean", recon.comp_mean}, {"comp_median", recon.comp_median},
                     {"nc_mean", recon.nc_mean},     {"nc_median", recon.nc_median}};
  report["pose"] = {{"ate", pose.ate}, {"rpe_t", pose.rpe_t}, {"rpe_r", pose.rpe_r}};
  const fs::path out_path(a.out);
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  write_text_file(out_path, report.dump(2) + "\n");
  out << "wrote " << out_path.string() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming pointmap reconstruction with spatio-temporal memory", "streamrecon"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Render a synthetic RGB + pointmap sequence");
  sim_cmd->add_option("--seed", sim.seed, "Scene and trajectory seed")->required();
  sim_cmd->add_option("--frames", sim.frames, "Number of frames")->required();
  sim_cmd->add_option("--traj", sim.traj, "Camera path")
      ->check(CLI::IsMember({"orbit", "walk"}))
      ->capture_default_str();
  sim_cmd->add_option("--height", sim.height, "Image height")->capture_default_str();
  sim_cmd->add_option("--width", sim.width, "Image width")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "Output directory")->required();

  RunArgs run_args;
  CLI::App* run_cmd = app.add_subcommand("run", "Stream a frame directory through the engine");
  run_cmd->add_option("--config", run_args.config, "Engine config file")->required();
  run_cmd->add_option("--input", run_args.input, "Directory written by simulate")->required();
  run_cmd->add_option("--out", run_args.out, "Output directory")->required();
  run_cmd->add_flag("--timing", run_args.timing, "Record wall time per frame in the trace");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  eval_cmd->add_option("--pred", eval_args.pred, "Directory written by run")->required();
  eval_cmd->add_option("--gt", eval_args.gt, "Directory written by simulate")->required();
  eval_cmd->add_option("--out", eval_args.out, "Report path (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;  // --help
    err << app.help();
    return kExitUsage;
  }

  try {
    if (sim_cmd->parsed()) simulate(sim, out);
    else if (run_cmd->parsed()) run_engine(run_args, out);
    else evaluate(eval_args, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace sr::cli
