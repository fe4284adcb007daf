#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ascore/cli/app.hpp"
#include "ascore/cli/heatmap.hpp"
#include "ascore/cli/pipeline.hpp"
#include "ascore/data/synthetic.hpp"
#include "ascore/error.hpp"
#include "ascore/geometry/pnp.hpp"
#include "support/temp_dir.hpp"

using namespace ascore;
using namespace ascore::cli;
using numerics::Tensor;

namespace {

FrameResult result(std::size_t id, double t, double r) {
  FrameResult f;
  f.id = id;
  f.error = geometry::PoseError{t, r};
  return f;
}

FrameResult failure(std::size_t id) {
  FrameResult f;
  f.id = id;
  return f;
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "ascore");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

training::ModelConfig micro_config() {
  training::ModelConfig c;
  c.encoder = encoder::EncoderConfig::tiny();
  c.encoder.stages = {{4, 4}, {4, 4}, {8, 8}, {8, 8}};
  c.encoder.descriptor_dim = 8;
  c.encoder.num_layers = 2;
  c.encoder.num_heads = 2;
  c.head_hidden = {16};
  return c;
}

}  // namespace

TEST_CASE("median uses the mean of the middle pair for even counts") {
  CHECK(median({2, 4, 6, 8}) == 5.0);
  CHECK(median({8, 2, 6, 4}) == 5.0);
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({7}) == 7.0);
  CHECK_THROWS_AS(median({}), Error);
}

TEST_CASE("summary statistics over mixed results") {
  const EvalSummary s = summarize({result(0, 2, 1), result(1, 4, 1), result(2, 6, 1),
                                   result(3, 8, 1)});
  CHECK(*s.median_t_cm == 5.0);
  CHECK(*s.median_r_deg == 1.0);
  CHECK(s.accuracy == 0.5);

  // Thresholds are strict and need both errors under 5.
  const EvalSummary edge = summarize({result(0, 5.0, 0), result(1, 0, 5.0), result(2, 4.99, 4.99),
                                      result(3, 1, 6)});
  CHECK(edge.accuracy == 0.25);
}

TEST_CASE("failed frames count as misses but not in medians") {
  const EvalSummary s = summarize({result(0, 1, 1), failure(1), result(2, 3, 2), failure(3)});
  CHECK(s.accuracy == 0.5);
  CHECK(*s.median_t_cm == 2.0);
  CHECK(*s.median_r_deg == 1.5);

  const EvalSummary none = summarize({failure(0), failure(1)});
  CHECK_FALSE(none.median_t_cm.has_value());
  CHECK(none.accuracy == 0.0);
  const auto j = nlohmann::json::parse(none.to_json());
  CHECK(j["median_t_cm"].is_null());
  CHECK(j["median_r_deg"].is_null());
  CHECK(j["frames"][1]["t_cm"].is_null());
  CHECK(j["acc_5cm_5deg"] == 0.0);
}

TEST_CASE("summary json layout") {
  FrameResult f = result(7, 1.5, 0.25);
  f.inliers = 42;
  const auto j = nlohmann::json::parse(summarize({f}).to_json());
  CHECK(j["median_t_cm"] == 1.5);
  CHECK(j["median_r_deg"] == 0.25);
  CHECK(j["acc_5cm_5deg"] == 1.0);
  REQUIRE(j["frames"].size() == 1);
  CHECK(j["frames"][0]["id"] == 7);
  CHECK(j["frames"][0]["inliers"] == 42);
  CHECK(j["frames"][0]["t_cm"] == 1.5);
  CHECK(j["frames"][0]["r_deg"] == 0.25);
}

TEST_CASE("perfect scene coordinates localize every test frame exactly") {
  data::SyntheticSceneSpec spec;
  spec.num_frames = 6;
  const auto ds = data::generate_synthetic_scene(spec, 2);
  std::vector<FrameResult> frames;
  for (std::size_t i : ds.indices(data::Split::test)) {
    const auto& frame = ds.frames[i];
    const auto gt = data::derive_dense_gt(frame);
    std::vector<geometry::Correspondence2D3D> corr;
    for (std::size_t r = 0; r < gt.height; ++r)
      for (std::size_t c = 0; c < gt.width; ++c)
        if (gt.valid[r * gt.width + c])
          corr.push_back({data::cell_center_pixel(c, r), gt.points[r * gt.width + c]});
    const auto pnp = geometry::pnp_ransac(corr, frame.intrinsics);
    FrameResult f;
    f.id = frame.id;
    f.error = geometry::pose_error(pnp.pose, frame.pose);
    frames.push_back(f);
  }
  const EvalSummary s = summarize(frames);
  CHECK(*s.median_t_cm < 1e-6);
  CHECK(*s.median_r_deg < 1e-6);
  CHECK(s.accuracy == 1.0);
}

TEST_CASE("key scores and heatmap normalization") {
  const Tensor a = Tensor::from_data({3, 3}, {0.5, 0.25, 0.25, 0.0, 1.0, 0.0, 0.2, 0.2, 0.6});
  const auto scores = key_scores(a);
  REQUIRE(scores.size() == 3);
  CHECK(scores[0] == doctest::Approx(0.7 / 3));
  CHECK(scores[1] == doctest::Approx(1.45 / 3));
  CHECK(scores[2] == doctest::Approx(0.85 / 3));
  CHECK(scores[0] + scores[1] + scores[2] == doctest::Approx(1.0));

  const std::vector<double> grid = {1, 2, 3, 4, 5, 6};
  const HeatmapImage h = scores_to_heatmap(grid, 3, 2, 4);
  CHECK(h.width == 12);
  CHECK(h.height == 8);
  CHECK(h.values[0] == 0.0);
  CHECK(h.values[7 * 12 + 11] == 1.0);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 12; ++x)
      CHECK(h.values[y * 12 + x] == doctest::Approx(((y / 4) * 3 + x / 4) / 5.0));
  const auto gray = to_gray(h);
  CHECK(gray.maxval == 255);
  CHECK(gray.pixels[0] == 0);
  CHECK(gray.pixels[7 * 12 + 11] == 255);
  CHECK(gray.pixels[4] == 51);

  const HeatmapImage flat = scores_to_heatmap({0.3, 0.3, 0.3, 0.3}, 2, 2);
  for (double v : flat.values) CHECK(v == 0.0);
  CHECK_THROWS_AS(scores_to_heatmap({1, 2, 3}, 2, 2), ShapeError);
  CHECK_THROWS_AS(key_scores(Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("render attention covers every head and rejects bad indices") {
  const training::Model model(micro_config(), 1);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> px(3 * 32 * 40);
  for (double& v : px) v = u(rng);
  const Tensor image = Tensor::from_data({3, 32, 40}, std::move(px));
  const auto maps = render_attention(image, model, 1);
  REQUIRE(maps.size() == 2);
  for (std::size_t h = 0; h < 2; ++h) {
    CHECK(maps[h].layer == 1);
    CHECK(maps[h].head == h);
    CHECK(maps[h].width == 40);
    CHECK(maps[h].height == 32);
    CHECK(*std::min_element(maps[h].values.begin(), maps[h].values.end()) == 0.0);
    CHECK(*std::max_element(maps[h].values.begin(), maps[h].values.end()) == 1.0);
  }
  const auto one = render_attention(image, model, 0, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].head == 1);
  CHECK_THROWS_AS(render_attention(image, model, 2), ShapeError);
  CHECK_THROWS_AS(render_attention(image, model, 0, 2), ShapeError);
}

TEST_CASE("cli exit codes") {
  CHECK(invoke({}).code == kExitUsage);
  CHECK(invoke({"bogus"}).code == kExitUsage);
  CHECK(invoke({"--help"}).code == kExitOk);
  CHECK(invoke({"train"}).code == kExitUsage);  // --out is required
  const auto unknown = invoke({"train", "--out", "x", "--set", "no_such_key=1"});
  CHECK(unknown.code == kExitUsage);
  CHECK(unknown.err.find("no_such_key") != std::string::npos);
  CHECK(invoke({"train", "--out", "x", "--set", "novalue"}).code == kExitUsage);
  CHECK(invoke({"gen-scene", "--out", "x", "--set", "arc_radius=9"}).code == kExitUsage);
  const auto missing = invoke({"eval", "--out", "x", "--set", "scene=/nonexistent/scene",
                            "--set", "model=/nonexistent/model"});
  CHECK(missing.code == kExitFailure);
  CHECK(missing.err.find("/nonexistent/scene") != std::string::npos);
}

TEST_CASE("cli pipeline writes its artifacts") {
  ascore::testing::TempDir dir("cli_pipeline");
  const std::string root = dir.path().string();
  {
    std::ofstream cfg(dir.path() / "scene.cfg");
    cfg << "# small scene\nnum_frames = 4\nwidth = 48\nheight = 40\nintrinsics = 42 42 23.5 19.5\n";
  }
  REQUIRE(invoke({"gen-scene", "--config", root + "/scene.cfg", "--seed", "3", "--out",
               root + "/scene"}).code == kExitOk);
  REQUIRE(invoke({"train", "--out", root + "/model", "--set", "scene=" + root + "/scene", "--set",
               "variant=tiny", "--set", "iterations=2", "--set", "head_hidden=16"})
              .code == kExitOk);
  for (const char* f : {"model.ascr", "model.cfg", "train_log.csv"})
    CHECK(std::filesystem::exists(dir.path() / "model" / f));

  REQUIRE(invoke({"eval", "--out", root + "/eval", "--set", "scene=" + root + "/scene", "--set",
               "model=" + root + "/model"})
              .code == kExitOk);
  std::ifstream ej(dir.path() / "eval" / "eval.json");
  const auto j = nlohmann::json::parse(ej);
  CHECK(j["frames"].size() == 2);
  CHECK(j.contains("acc_5cm_5deg"));

  const std::string image = root + "/scene/frames/000001.ppm";
  const auto loc = invoke({"localize", "--out", root + "/loc", "--set", "model=" + root + "/model",
                        "--set", "image=" + image, "--set",
                        "intrinsics=" + root + "/scene/intrinsics.txt"});
  if (loc.code == kExitOk) {
    CHECK(std::filesystem::exists(dir.path() / "loc" / "pose.txt"));
    CHECK(std::filesystem::exists(dir.path() / "loc" / "localize.json"));
  } else {
    CHECK(loc.code == kExitFailure);  // an untrained model may find no consensus
  }

  REQUIRE(invoke({"render-attention", "--out", root + "/attn", "--set", "model=" + root + "/model",
               "--set", "image=" + image, "--set", "layer=1"})
              .code == kExitOk);
  const auto pgm = data::read_pgm(dir.path() / "attn" / "attn_L1_H0.pgm");
  CHECK(pgm.width == 48);
  CHECK(pgm.height == 40);
  CHECK(std::filesystem::exists(dir.path() / "attn" / "attn_L1_H1.pgm"));
  CHECK_FALSE(std::filesystem::exists(dir.path() / "attn" / "attn_L0_H0.pgm"));
}
