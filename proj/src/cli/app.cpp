#include "ascore/cli/app.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ascore/cli/heatmap.hpp"
#include "ascore/error.hpp"
#include "ascore/geometry/io.hpp"

namespace ascore::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> overrides;
};

template <typename... Sets>
std::set<std::string> merge(const Sets&... sets) {
  std::set<std::string> all;
  (all.insert(sets.begin(), sets.end()), ...);
  return all;
}

KeyValueConfig load_config(const CommonOptions& o) {
  KeyValueConfig cfg = o.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(o.config);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::string require_path(const KeyValueConfig& cfg, const std::string& key) {
  const auto v = cfg.get(key);
  if (!v || v->empty()) throw ConfigError("missing required key '" + key + "'");
  return *v;
}

geometry::Vec3 vec3(const KeyValueConfig& cfg, const std::string& key, const geometry::Vec3& fallback) {
  const auto v = cfg.get_doubles(key, {fallback.x(), fallback.y(), fallback.z()});
  if (v.size() != 3) throw ConfigError("'" + key + "' needs 3 numbers");
  return {v[0], v[1], v[2]};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

training::Mode model_mode(const Model& model) { return model.config().mode; }

// Detector settings saved next to a sparse model, or defaults.
data::DetectorConfig model_detector(const fs::path& model_dir) {
  const fs::path p = model_dir / "detector.cfg";
  if (!fs::exists(p)) return {};
  const KeyValueConfig cfg = KeyValueConfig::load(p);
  cfg.require_known(detector_keys());
  return detector_from_config(cfg);
}

data::Frame frame_from_files(const KeyValueConfig& cfg) {
  const data::RgbImage img = data::read_ppm(require_path(cfg, "image"));
  geometry::CameraIntrinsics k{1.0, 1.0, 0.0, 0.0};
  if (cfg.has("intrinsics")) k = geometry::read_intrinsics_file(require_path(cfg, "intrinsics"));
  return data::make_frame(0, data::Split::test, img, std::nullopt, geometry::Pose{}, k);
}

int gen_scene(const CommonOptions& o, std::ostream& out) {
  const KeyValueConfig cfg = load_config(o);
  cfg.require_known(scene_keys());
  const data::SyntheticSceneSpec spec = scene_spec_from_config(cfg);
  const data::SceneDataset ds = data::generate_synthetic_scene(spec, o.seed);
  data::save_scene(ds, o.out);
  out << "wrote " << ds.frames.size() << " frames (" << ds.indices(data::Split::train).size()
      << " train, " << ds.indices(data::Split::test).size() << " test) to " << o.out << '\n';
  return kExitOk;
}

const std::set<std::string>& train_keys() {
  static const std::set<std::string> k =
      merge(training::ModelConfig::keys(), detector_keys(), sparse_gt_keys(),
            std::set<std::string>{"scene", "iterations", "lr", "batch_size", "reduction",
                                  "checkpoint_interval", "log_every", "shift_augmentation"});
  return k;
}

int train_cmd(const CommonOptions& o, std::ostream& out) {
  const KeyValueConfig cfg = load_config(o);
  cfg.require_known(train_keys());
  const data::SceneDataset ds = data::load_scene(require_path(cfg, "scene"));
  const training::ModelConfig mc = training::ModelConfig::from_config(cfg);
  Model model(mc, o.seed);

  training::TrainConfig tc;
  tc.mode = mc.mode;
  tc.total_iterations = cfg.get_int("iterations", 5000);
  tc.initial_lr = cfg.get_double("lr", tc.initial_lr);
  tc.batch_size = cfg.get_size("batch_size", 1);
  tc.seed = o.seed;
  const std::string reduction = cfg.get_string("reduction", "mean");
  if (reduction != "mean" && reduction != "sum")
    throw ConfigError("reduction must be mean or sum, got '" + reduction + "'");
  tc.reduction = reduction == "sum" ? training::Reduction::sum : training::Reduction::mean;
  tc.checkpoint_interval = cfg.get_int("checkpoint_interval", 10000);
  tc.shift_augmentation = cfg.get_bool("shift_augmentation", tc.shift_augmentation);
  tc.checkpoint_dir = o.out;
  fs::create_directories(o.out);
  tc.log_path = fs::path(o.out) / "train_log.csv";
  if (tc.total_iterations <= 0) throw ConfigError("iterations must be positive");

  std::vector<training::TrainingSample> samples;
  if (mc.mode == Mode::dense) {
    samples = dense_samples(ds);
  } else {
    const data::SparseGtConfig sc = sparse_gt_from_config(cfg);
    const auto train_idx = ds.indices(data::Split::train);
    const data::SparseGroundTruth gt = data::build_sparse_gt(ds, train_idx, sc);
    out << "sparse ground truth: " << gt.tracks.size() << " tracks, reprojection error "
        << gt.triangulated_error_px << " px before and " << gt.adjusted_error_px
        << " px after bundle adjustment\n";
    samples = sparse_samples(ds, gt);
    detector_to_config(sc.detector).save(fs::path(o.out) / "detector.cfg");
  }
  const std::int64_t every = cfg.get_int("log_every", 500);
  training::train(samples, model, tc, [&](const training::IterationRecord& r) {
    if (every > 0 && (r.iteration % every == 0 || r.iteration == tc.total_iterations))
      out << "iteration " << r.iteration << " loss " << r.loss << " lr " << r.lr << " time "
          << std::fixed << std::setprecision(1) << r.seconds << std::defaultfloat
          << std::setprecision(6) << "s\n"
          << std::flush;
  });
  out << "saved model to " << o.out << '\n';
  return kExitOk;
}

int eval_cmd(const CommonOptions& o, std::ostream& out) {
  const KeyValueConfig cfg = load_config(o);
  cfg.require_known(merge(ransac_keys(), std::set<std::string>{"scene", "model"}));
  const data::SceneDataset ds = data::load_scene(require_path(cfg, "scene"));
  const fs::path model_dir = require_path(cfg, "model");
  const auto model = Model::load(model_dir);
  LocalizeConfig lc{ransac_from_config(cfg, o.seed), model_detector(model_dir)};
  const EvalSummary s = evaluate(ds, *model, model_mode(*model), lc);
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "eval.json", s.to_json());
  for (const FrameResult& f : s.frames) {
    out << "frame " << f.id << ": ";
    if (f.error)
      out << f.error->translation_cm << " cm, " << f.error->rotation_deg << " deg, " << f.inliers
          << " inliers\n";
    else
      out << "failed\n";
  }
  out << "median " << (s.median_t_cm ? std::to_string(*s.median_t_cm) : "n/a") << " cm, "
      << (s.median_r_deg ? std::to_string(*s.median_r_deg) : "n/a") << " deg, accuracy "
      << s.accuracy << '\n';
  return kExitOk;
}

int localize_cmd(const CommonOptions& o, std::ostream& out) {
  const KeyValueConfig cfg = load_config(o);
  cfg.require_known(merge(ransac_keys(), std::set<std::string>{"model", "image", "intrinsics"}));
  require_path(cfg, "intrinsics");
  const fs::path model_dir = require_path(cfg, "model");
  const auto model = Model::load(model_dir);
  const data::Frame frame = frame_from_files(cfg);
  LocalizeConfig lc{ransac_from_config(cfg, o.seed), model_detector(model_dir)};
  const Localization loc = localize(frame.image, *model, frame.intrinsics, model_mode(*model), lc);
  fs::create_directories(o.out);
  geometry::write_pose_file(fs::path(o.out) / "pose.txt", loc.pose);
  nlohmann::json j;
  j["inliers"] = loc.inliers;
  j["correspondences"] = loc.correspondences;
  const geometry::Vec3 c = loc.pose.center();
  j["camera_center"] = {c.x(), c.y(), c.z()};
  write_text(fs::path(o.out) / "localize.json", j.dump(2) + "\n");
  out << "localized with " << loc.inliers << " of " << loc.correspondences
      << " correspondences as inliers\n"
      << geometry::format_pose(loc.pose);
  return kExitOk;
}

int render_cmd(const CommonOptions& o, std::ostream& out) {
  const KeyValueConfig cfg = load_config(o);
  cfg.require_known({"model", "image", "layer", "head"});
  const auto model = Model::load(require_path(cfg, "model"));
  const data::Frame frame = frame_from_files(cfg);
  std::optional<std::size_t> head;
  if (cfg.has("head")) head = cfg.get_size("head", 0);
  std::vector<std::size_t> layers;
  if (cfg.has("layer"))
    layers.push_back(cfg.get_size("layer", 0));
  else
    for (std::size_t l = 0; l < model->config().encoder.num_layers; ++l) layers.push_back(l);
  fs::create_directories(o.out);
  std::size_t written = 0;
  for (std::size_t layer : layers)
    for (const HeatmapImage& h : render_attention(frame.image, *model, layer, head)) {
      char name[64];
      std::snprintf(name, sizeof name, "attn_L%zu_H%zu.pgm", h.layer, h.head);
      data::write_pgm(fs::path(o.out) / name, to_gray(h));
      ++written;
    }
  out << "wrote " << written << " heatmaps to " << o.out << '\n';
  return kExitOk;
}

}  // namespace

const std::set<std::string>& scene_keys() {
  static const std::set<std::string> k = {
      "room",      "texture_seed", "cell_size", "noise_cell_size", "noise_amplitude",
      "num_frames", "arc_center",  "arc_radius", "camera_height",  "arc_start",
      "arc_span",  "look_at",      "width",     "height",          "intrinsics",
      "supersample"};
  return k;
}

const std::set<std::string>& detector_keys() {
  static const std::set<std::string> k = {"max_keypoints", "harris_k", "nms_radius",
                                          "min_response", "border", "subpixel"};
  return k;
}

const std::set<std::string>& sparse_gt_keys() {
  static const std::set<std::string> k = {"epipolar_gate_px", "support_radius_px", "min_views",
                                          "min_support_ratio", "max_error_px"};
  return k;
}

const std::set<std::string>& ransac_keys() {
  static const std::set<std::string> k = {"ransac_threshold_px", "ransac_hypotheses",
                                          "ransac_early_exit", "ransac_refine_iterations"};
  return k;
}

data::SyntheticSceneSpec scene_spec_from_config(const KeyValueConfig& cfg) {
  data::SyntheticSceneSpec s;
  s.room = vec3(cfg, "room", s.room);
  s.texture_seed = static_cast<std::uint64_t>(cfg.get_int("texture_seed", 0));
  s.cell_size = cfg.get_double("cell_size", s.cell_size);
  s.noise_cell_size = cfg.get_double("noise_cell_size", s.noise_cell_size);
  s.noise_amplitude = cfg.get_double("noise_amplitude", s.noise_amplitude);
  s.num_frames = cfg.get_size("num_frames", s.num_frames);
  const auto c = cfg.get_doubles("arc_center", {s.arc_center.x(), s.arc_center.y()});
  if (c.size() != 2) throw ConfigError("'arc_center' needs 2 numbers");
  s.arc_center = {c[0], c[1]};
  s.arc_radius = cfg.get_double("arc_radius", s.arc_radius);
  s.camera_height = cfg.get_double("camera_height", s.camera_height);
  s.arc_start = cfg.get_double("arc_start", s.arc_start);
  s.arc_span = cfg.get_double("arc_span", s.arc_span);
  s.look_at = vec3(cfg, "look_at", s.look_at);
  s.width = cfg.get_size("width", s.width);
  s.height = cfg.get_size("height", s.height);
  const auto& k = s.intrinsics;
  const auto kv = cfg.get_doubles("intrinsics", {k.fx, k.fy, k.cx, k.cy});
  if (kv.size() != 4) throw ConfigError("'intrinsics' needs fx fy cx cy");
  s.intrinsics = {kv[0], kv[1], kv[2], kv[3]};
  s.supersample = cfg.get_size("supersample", s.supersample);
  s.validate();
  return s;
}

data::DetectorConfig detector_from_config(const KeyValueConfig& cfg) {
  data::DetectorConfig d;
  d.max_count = cfg.get_size("max_keypoints", d.max_count);
  d.harris_k = cfg.get_double("harris_k", d.harris_k);
  d.nms_radius = cfg.get_size("nms_radius", d.nms_radius);
  d.min_response = cfg.get_double("min_response", d.min_response);
  d.border = cfg.get_size("border", d.border);
  d.subpixel = cfg.get_bool("subpixel", d.subpixel);
  d.validate();
  return d;
}

KeyValueConfig detector_to_config(const data::DetectorConfig& d) {
  KeyValueConfig c;
  c.set("max_keypoints", d.max_count);
  c.set("harris_k", d.harris_k);
  c.set("nms_radius", d.nms_radius);
  c.set("min_response", d.min_response);
  c.set("border", d.border);
  c.set("subpixel", d.subpixel);
  return c;
}

data::SparseGtConfig sparse_gt_from_config(const KeyValueConfig& cfg) {
  data::SparseGtConfig s;
  s.detector = detector_from_config(cfg);
  s.epipolar_gate_px = cfg.get_double("epipolar_gate_px", s.epipolar_gate_px);
  s.support_radius_px = cfg.get_double("support_radius_px", s.support_radius_px);
  s.min_views = cfg.get_size("min_views", s.min_views);
  s.min_support_ratio = cfg.get_double("min_support_ratio", s.min_support_ratio);
  s.max_error_px = cfg.get_double("max_error_px", s.max_error_px);
  s.validate();
  return s;
}

geometry::RansacConfig ransac_from_config(const KeyValueConfig& cfg, std::uint64_t seed) {
  geometry::RansacConfig r;
  r.inlier_threshold_px = cfg.get_double("ransac_threshold_px", r.inlier_threshold_px);
  r.max_hypotheses = cfg.get_size("ransac_hypotheses", r.max_hypotheses);
  r.early_exit_inlier_ratio = cfg.get_double("ransac_early_exit", r.early_exit_inlier_ratio);
  r.refine_iterations = cfg.get_size("ransac_refine_iterations", r.refine_iterations);
  r.seed = seed;
  if (!(r.inlier_threshold_px > 0.0) || r.max_hypotheses == 0)
    throw ConfigError("ransac_threshold_px and ransac_hypotheses must be positive");
  return r;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scene coordinate regression with attention features"};
  app.require_subcommand(1);
  CommonOptions opts;
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const CommonOptions&, std::ostream&);
  };
  const Command commands[] = {
      {"gen-scene", "Render a synthetic room scene directory", gen_scene},
      {"train", "Train a model on a scene directory", train_cmd},
      {"eval", "Localize the test split and write eval.json", eval_cmd},
      {"localize", "Estimate the pose of one image", localize_cmd},
      {"render-attention", "Write per-head attention heatmaps", render_cmd},
  };
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", opts.config, "Flat key=value config file");
    sub->add_option("--seed", opts.seed, "Random seed");
    sub->add_option("--out", opts.out, "Output directory")->required();
    sub->add_option("--set", opts.overrides, "Override a config key (key=value)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  const Command* chosen = nullptr;
  for (const Command& c : commands)
    if (app.got_subcommand(c.name)) chosen = &c;
  try {
    return chosen->fn(opts, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace ascore::cli
