#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Geometry>

#include "ascore/data/keypoints.hpp"
#include "ascore/data/pnm.hpp"
#include "ascore/data/scene.hpp"
#include "ascore/data/sparse_gt.hpp"
#include "ascore/data/synthetic.hpp"
#include "ascore/error.hpp"
#include "ascore/geometry/io.hpp"
#include "support/temp_dir.hpp"

using namespace ascore;
using namespace ascore::data;
using geometry::Vec2;
using geometry::Vec3;
using ascore::testing::TempDir;

namespace {

// Independent ray cast: nearest positive hit against the six face planes,
// keeping only hits inside the closed box.
double analytic_depth(const Vec3& room, const Pose& pose, const CameraIntrinsics& k,
                      const Vec2& pixel) {
  const Vec3 origin = pose.center();
  const Vec3 dir = pose.rotation.transpose() * k.ray(pixel);
  const Eigen::ParametrizedLine<double, 3> line(origin, dir);
  double best = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis)
    for (double offset : {0.0, room[axis]}) {
      const Eigen::Hyperplane<double, 3> plane(Vec3::Unit(axis), -offset);
      const double t = line.intersectionParameter(plane);
      if (!(t > 0.0) || !std::isfinite(t)) continue;
      const Vec3 p = line.pointAt(t);
      if ((p.array() >= -1e-9).all() && (p.array() <= room.array() + 1e-9).all())
        best = std::min(best, t);
    }
  return best;
}

double plane_residual(const Vec3& room, const Vec3& p) {
  double r = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis)
    r = std::min({r, std::abs(p[axis]), std::abs(p[axis] - room[axis])});
  return r;
}

RgbImage gradient_image(std::size_t w, std::size_t h) {
  RgbImage img{w, h, std::vector<std::uint8_t>(3 * w * h)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        img.pixels[3 * (y * w + x) + c] = static_cast<std::uint8_t>((x * 7 + y * 13 + c * 50) % 256);
  return img;
}

Tensor gray_tensor(std::size_t w, std::size_t h, double value) {
  return Tensor::full({3, h, w}, value);
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const SceneDataset& default_scene() {
  static const SceneDataset ds = generate_synthetic_scene(SyntheticSceneSpec{}, 7);
  return ds;
}

}  // namespace

TEST_CASE("ppm and pgm round trips") {
  TempDir dir("pnm");
  const RgbImage rgb = gradient_image(5, 3);
  write_ppm(dir.path() / "a.ppm", rgb);
  const RgbImage back = read_ppm(dir.path() / "a.ppm");
  CHECK(back.width == 5);
  CHECK(back.height == 3);
  CHECK(back.pixels == rgb.pixels);

  GrayImage g8{4, 2, 255, {0, 1, 2, 3, 250, 251, 254, 255}};
  write_pgm(dir.path() / "g8.pgm", g8);
  CHECK(read_pgm(dir.path() / "g8.pgm").pixels == g8.pixels);

  GrayImage g16{2, 1, 65535, {2000, 65535}};
  write_pgm(dir.path() / "g16.pgm", g16);
  const auto bytes = file_bytes(dir.path() / "g16.pgm");
  // Big-endian samples after the header.
  REQUIRE(bytes.size() >= 4);
  CHECK(bytes[bytes.size() - 4] == 0x07);
  CHECK(bytes[bytes.size() - 3] == 0xD0);
  const GrayImage g16b = read_pgm(dir.path() / "g16.pgm");
  CHECK(g16b.maxval == 65535);
  CHECK(g16b.pixels == g16.pixels);
}

TEST_CASE("pnm header comments and malformed files") {
  TempDir dir("pnm_bad");
  {
    std::ofstream out(dir.path() / "c.pgm", std::ios::binary);
    out << "P5\n# comment\n2 1 # trailing\n255\n";
    out.put(static_cast<char>(7));
    out.put(static_cast<char>(9));
  }
  CHECK(read_pgm(dir.path() / "c.pgm").pixels == std::vector<std::uint16_t>{7, 9});
  {
    std::ofstream out(dir.path() / "short.ppm", std::ios::binary);
    out << "P6\n4 4\n255\n" << "abc";
  }
  CHECK_THROWS_AS(read_ppm(dir.path() / "short.ppm"), IoError);
  try {
    read_pgm(dir.path() / "short.ppm");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("short.ppm") != std::string::npos);
  }
  CHECK_THROWS_AS(read_ppm(dir.path() / "missing.ppm"), IoError);
}

TEST_CASE("depth is stored in millimeters") {
  CHECK(millimeters_to_depth(2000) == 2.0);
  CHECK(depth_to_millimeters(2.0) == 2000);
  CHECK(depth_to_millimeters(1.2344) == 1234);
  CHECK(depth_to_millimeters(0.0) == 0);
  CHECK_THROWS_AS(depth_to_millimeters(70.0), IoError);
  CHECK_THROWS_AS(depth_to_millimeters(-1.0), IoError);
}

TEST_CASE("frames are reflect padded to multiples of eight") {
  const RgbImage img = gradient_image(638, 478);
  DepthMap depth{638, 478, std::vector<double>(638 * 478, 1.5)};
  const CameraIntrinsics k{500.0, 500.0, 319.0, 239.0};
  const Frame f = make_frame(3, Split::test, img, depth, Pose{}, k);
  CHECK(f.width() == 640);
  CHECK(f.height() == 480);
  CHECK(f.intrinsics.cx == 320.0);
  CHECK(f.intrinsics.cy == 240.0);
  CHECK(f.original_width == 638);
  CHECK(f.original_height == 478);
  CHECK(f.pad_left == 1);
  CHECK(f.pad_top == 1);
  const RgbImage padded = to_rgb(f.image);
  auto px = [&](const RgbImage& im, std::size_t x, std::size_t y, std::size_t c) {
    return im.pixels[3 * (y * im.width + x) + c];
  };
  // Padded (0, 0) reflects original (1, 1); the interior is shifted by one.
  CHECK(px(padded, 0, 0, 0) == px(img, 1, 1, 0));
  CHECK(px(padded, 5, 7, 2) == px(img, 4, 6, 2));
  CHECK(px(padded, 639, 479, 1) == px(img, 636, 476, 1));
  CHECK(f.depth->at(0, 0) == 0.0);
  CHECK(f.depth->at(639, 100) == 0.0);
  CHECK(f.depth->at(1, 1) == 1.5);

  const Frame even = make_frame(0, Split::train, gradient_image(16, 8), std::nullopt, Pose{}, k);
  CHECK(even.pad_left == 0);
  CHECK(even.intrinsics == k);
  CHECK(to_rgb(even.image).pixels == gradient_image(16, 8).pixels);
}

TEST_CASE("synthetic scene split and determinism") {
  const SceneDataset& ds = default_scene();
  REQUIRE(ds.frames.size() == 20);
  CHECK(ds.indices(Split::train).size() == 10);
  CHECK(ds.indices(Split::test).size() == 10);
  for (const Frame& f : ds.frames) {
    CHECK(f.depth.has_value());
    CHECK(f.pose.is_valid());
    CHECK(f.width() == 160);
    CHECK(f.height() == 160);
  }
  const SceneDataset again = generate_synthetic_scene(SyntheticSceneSpec{}, 7);
  const SceneDataset other = generate_synthetic_scene(SyntheticSceneSpec{}, 8);
  bool image_differs = false;
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    CHECK(std::equal(ds.frames[i].image.data().begin(), ds.frames[i].image.data().end(),
                     again.frames[i].image.data().begin()));
    CHECK(ds.frames[i].depth->values == again.frames[i].depth->values);
    CHECK(ds.frames[i].pose.matrix() == again.frames[i].pose.matrix());
    image_differs |= !std::equal(ds.frames[i].image.data().begin(),
                                 ds.frames[i].image.data().end(),
                                 other.frames[i].image.data().begin());
  }
  CHECK(image_differs);
}

TEST_CASE("synthetic depth matches an independent ray cast") {
  const SyntheticSceneSpec spec;
  const SceneDataset& ds = default_scene();
  for (const Frame& f : ds.frames) {
    const Vec2 center(80.0, 80.0);
    const double expected = analytic_depth(spec.room, f.pose, f.intrinsics, center);
    CHECK(std::abs(f.depth->at(80, 80) - expected) < 1e-9);
    for (const auto& [u, v] : {std::pair{0, 0}, {159, 0}, {17, 133}, {159, 159}})
      CHECK(std::abs(f.depth->at(u, v) -
                     analytic_depth(spec.room, f.pose, f.intrinsics, Vec2(u, v))) < 1e-9);
  }
}

TEST_CASE("synthetic spec validation") {
  SyntheticSceneSpec spec;
  spec.arc_radius = 3.0;
  CHECK_THROWS_AS(generate_synthetic_scene(spec, 0), ConfigError);
  spec = {};
  spec.camera_height = 2.6;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = {};
  spec.num_frames = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = {};
  spec.room = {4.0, -1.0, 2.0};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("consecutive synthetic views overlap") {
  const SyntheticSceneSpec spec;
  const SceneDataset& ds = default_scene();
  for (std::size_t i = 0; i + 1 < ds.frames.size(); ++i) {
    const Frame& a = ds.frames[i];
    const Frame& b = ds.frames[i + 1];
    const auto pts = geometry::backproject(*a.depth, a.intrinsics, a.pose);
    std::size_t inside = 0;
    for (const Vec3& p : pts.points) {
      const auto pr = geometry::project(b.pose, b.intrinsics, p);
      inside += pr.pixel.x() >= -0.5 && pr.pixel.y() >= -0.5 && pr.pixel.x() <= 159.5 &&
                pr.pixel.y() <= 159.5;
    }
    CHECK(static_cast<double>(inside) >= 0.3 * static_cast<double>(pts.size()));
  }
}

TEST_CASE("scene directory round trip") {
  TempDir dir("scene");
  const SceneDataset& ds = default_scene();
  save_scene(ds, dir.path());
  for (const char* f : {"intrinsics.txt", "split.txt", "frames/000000.ppm", "depth/000019.pgm",
                        "poses/000007.txt"})
    CHECK(std::filesystem::exists(dir.path() / f));
  const SceneDataset loaded = load_scene(dir.path());
  REQUIRE(loaded.frames.size() == ds.frames.size());
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    const Frame& a = ds.frames[i];
    const Frame& b = loaded.frames[i];
    CHECK(a.id == b.id);
    CHECK(a.split == b.split);
    CHECK(a.intrinsics == b.intrinsics);
    CHECK(a.pose.matrix() == b.pose.matrix());
    CHECK(std::equal(a.image.data().begin(), a.image.data().end(), b.image.data().begin()));
    double worst = 0.0;
    for (std::size_t p = 0; p < a.depth->values.size(); ++p)
      worst = std::max(worst, std::abs(a.depth->values[p] - b.depth->values[p]));
    CHECK(worst <= 0.0005 + 1e-12);
  }
  // A second pass through the format is exact.
  TempDir dir2("scene2");
  save_scene(loaded, dir2.path());
  const SceneDataset twice = load_scene(dir2.path());
  for (std::size_t i = 0; i < ds.frames.size(); ++i)
    CHECK(twice.frames[i].depth->values == loaded.frames[i].depth->values);
  CHECK(file_bytes(dir.path() / "depth/000004.pgm") == file_bytes(dir2.path() / "depth/000004.pgm"));
  CHECK(file_bytes(dir.path() / "split.txt") == file_bytes(dir2.path() / "split.txt"));
}

TEST_CASE("padded frames are saved at their original size") {
  TempDir dir("scene_pad");
  const CameraIntrinsics k{100.0, 100.0, 9.0, 5.0};
  DepthMap depth{19, 11, std::vector<double>(19 * 11, 2.0)};
  SceneDataset ds;
  ds.frames.push_back(make_frame(4, Split::train, gradient_image(19, 11), depth, Pose{}, k));
  save_scene(ds, dir.path());
  const RgbImage on_disk = read_ppm(dir.path() / "frames/000004.ppm");
  CHECK(on_disk.width == 19);
  CHECK(on_disk.pixels == gradient_image(19, 11).pixels);
  CHECK(geometry::read_intrinsics_file(dir.path() / "intrinsics.txt") == k);
  const SceneDataset back = load_scene(dir.path());
  CHECK(back.frames[0].width() == 24);
  CHECK(back.frames[0].height() == 16);
  CHECK(back.frames[0].intrinsics == ds.frames[0].intrinsics);
  CHECK(back.frames[0].depth->values == ds.frames[0].depth->values);
}

TEST_CASE("load_scene names the offending file") {
  TempDir dir("scene_bad");
  const SceneDataset& ds = default_scene();
  save_scene(ds, dir.path());
  std::filesystem::remove(dir.path() / "poses/000003.txt");
  try {
    load_scene(dir.path());
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("000003.txt") != std::string::npos);
  }
  {
    std::ofstream out(dir.path() / "split.txt");
    out << "train 000000\nvalidate 000001\n";
  }
  CHECK_THROWS_AS(load_scene(dir.path()), IoError);
  CHECK_THROWS_AS(load_scene(dir.path() / "nope"), IoError);
}

TEST_CASE("dense ground truth lies on the room surfaces") {
  const SyntheticSceneSpec spec;
  const SceneDataset& ds = default_scene();
  for (const Frame& f : ds.frames) {
    const auto gt = derive_dense_gt(f);
    CHECK(gt.width == 20);
    CHECK(gt.height == 20);
    CHECK(gt.valid_count() == gt.size());
    for (std::size_t i = 0; i < gt.height; ++i)
      for (std::size_t j = 0; j < gt.width; ++j) {
        const Vec3& p = gt.at(j, i);
        CHECK(plane_residual(spec.room, p) < 1e-6);
        const Vec2 px = geometry::project(f.pose, f.intrinsics, p).pixel;
        CHECK((px - cell_center_pixel(j, i)).norm() < 0.5);
      }
  }
}

TEST_CASE("dense ground truth shape and mask") {
  DepthMap depth{640, 480, std::vector<double>(640 * 480, 2.0)};
  depth.values[(8 * 3 + 4) * 640 + 8 * 5 + 4] = 0.0;  // sample of cell (row 3, col 5)
  depth.values[(8 * 7 + 1) * 640 + 8 * 2 + 1] = 0.0;  // not a sample position
  const Frame f = make_frame(0, Split::train, gradient_image(640, 480), depth, Pose{},
                             CameraIntrinsics{500.0, 500.0, 320.0, 240.0});
  const auto gt = derive_dense_gt(f);
  CHECK(gt.width == 80);
  CHECK(gt.height == 60);
  CHECK_FALSE(gt.is_valid(5, 3));
  CHECK(gt.is_valid(2, 7));
  CHECK(gt.valid_count() == 4799);
  const Frame no_depth =
      make_frame(0, Split::train, gradient_image(16, 16), std::nullopt, Pose{}, {});
  CHECK_THROWS_AS(derive_dense_gt(no_depth), Error);
}

TEST_CASE("harris detector on degenerate images") {
  CHECK(detect_keypoints(gray_tensor(32, 24, 0.4)).empty());

  // One white pixel on black: hand-evaluated response at the pixel is
  // Sxx = Syy = 1.25, Sxy = 0, so R = 1.25^2 - 0.04 * 2.5^2 = 1.3125.
  Tensor img = gray_tensor(21, 17, 0.0);
  const std::size_t n = 21 * 17;
  for (std::size_t c = 0; c < 3; ++c) img.mutable_data()[c * n + 8 * 21 + 11] = 1.0;
  const auto kps = detect_keypoints(img);
  REQUIRE(kps.size() == 1);
  CHECK(kps[0].pixel == Vec2(11.0, 8.0));
  CHECK(std::abs(kps[0].response - 1.3125) < 1e-12);

  const auto gray = grayscale(img);
  CHECK(std::abs(gray[8 * 21 + 11] - 1.0) < 1e-15);
}

TEST_CASE("harris detector ordering, suppression and determinism") {
  const Tensor& img = default_scene().frames[0].image;
  DetectorConfig cfg;
  const auto a = detect_keypoints(img, cfg);
  const auto b = detect_keypoints(img, cfg);
  REQUIRE(a.size() == cfg.max_count);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pixel == b[i].pixel);
    CHECK(a[i].response == b[i].response);
  }
  for (std::size_t i = 0; i + 1 < a.size(); ++i) CHECK(a[i].response >= a[i + 1].response);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pixel.x() >= cfg.border - 0.5);
    CHECK(a[i].pixel.x() <= 159 - cfg.border + 0.5);
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const Vec2 d = (a[i].pixel - a[j].pixel).cwiseAbs();
      // Integer positions are more than the radius apart; refinement moves
      // each by at most half a pixel.
      CHECK(d.maxCoeff() > static_cast<double>(cfg.nms_radius) - 1.0);
    }
  }
  cfg.subpixel = false;
  cfg.max_count = 10;
  const auto coarse = detect_keypoints(img, cfg);
  REQUIRE(coarse.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(coarse[i].pixel == coarse[i].pixel.array().round().matrix());
    CHECK((coarse[i].pixel - a[i].pixel).cwiseAbs().maxCoeff() <= 0.5);
  }
  cfg.harris_k = 0.0;
  CHECK_THROWS_AS(detect_keypoints(img, cfg), ConfigError);
}

TEST_CASE("harris response oracle on a random image") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t w = 9, h = 8;
  std::vector<double> gray(w * h);
  for (double& v : gray) v = u(rng);
  const auto r = harris_response(gray, w, h, 0.04);
  // Direct evaluation: Sobel at every window position, binomial weights.
  auto g = [&](int x, int y) { return gray[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)]; };
  auto ix = [&](int x, int y) {
    return (g(x + 1, y - 1) + 2 * g(x + 1, y) + g(x + 1, y + 1)) -
           (g(x - 1, y - 1) + 2 * g(x - 1, y) + g(x - 1, y + 1));
  };
  auto iy = [&](int x, int y) {
    return (g(x - 1, y + 1) + 2 * g(x, y + 1) + g(x + 1, y + 1)) -
           (g(x - 1, y - 1) + 2 * g(x, y - 1) + g(x + 1, y - 1));
  };
  const double wt[3] = {1.0, 2.0, 1.0};
  for (int y = 2; y < static_cast<int>(h) - 2; ++y)
    for (int x = 2; x < static_cast<int>(w) - 2; ++x) {
      double a = 0, b = 0, c = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const double k = wt[dy + 1] * wt[dx + 1] / 16.0;
          a += k * ix(x + dx, y + dy) * ix(x + dx, y + dy);
          b += k * iy(x + dx, y + dy) * iy(x + dx, y + dy);
          c += k * ix(x + dx, y + dy) * iy(x + dx, y + dy);
        }
      CHECK(r[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] ==
            doctest::Approx(a * b - c * c - 0.04 * (a + b) * (a + b)).epsilon(1e-12));
    }
  CHECK(r[0] == 0.0);
  CHECK(r[w + 1] == 0.0);
}

TEST_CASE("detector fingerprint tracks the configuration") {
  DetectorConfig a;
  CHECK(detector_fingerprint(a) == detector_fingerprint(DetectorConfig{}));
  DetectorConfig b;
  b.harris_k = 0.05;
  CHECK(detector_fingerprint(a) != detector_fingerprint(b));
  b = {};
  b.max_count = 99;
  CHECK(detector_fingerprint(a) != detector_fingerprint(b));
}

namespace {

// Random points on the room walls and floor.
std::vector<Vec3> surface_points(const Vec3& room, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const int face = static_cast<int>(i % 5);
    Vec3 p(u(rng) * room.x(), u(rng) * room.y(), u(rng) * room.z());
    const int axis = face / 2;
    p[axis] = face % 2 == 0 ? 0.0 : room[axis];
    if (face == 4) p.z() = 0.0;
    pts.push_back(p);
  }
  return pts;
}

// Exact projections of known points that land inside the image.
KeypointDetector oracle_detector(const std::vector<Vec3>& pts) {
  return [pts](const Frame& f) {
    std::vector<Vec2> out;
    for (const Vec3& p : pts) {
      const Vec3 cam = f.pose.transform(p);
      if (cam.z() <= 0.1) continue;
      const Vec2 px = f.intrinsics.to_pixel(cam);
      if (px.x() >= 2 && px.y() >= 2 && px.x() <= f.width() - 3.0 && px.y() <= f.height() - 3.0)
        out.push_back(px);
    }
    return out;
  };
}

}  // namespace

TEST_CASE("sparse ground truth recovers known points exactly") {
  const SyntheticSceneSpec spec;
  const SceneDataset& ds = default_scene();
  const auto train = ds.indices(Split::train);
  const auto pts = surface_points(spec.room, 400, 3);
  const KeypointDetector base = oracle_detector(pts);
  // Frame 0 also reports a keypoint with no counterpart anywhere else.
  const Vec2 lonely(7.25, 150.5);
  const KeypointDetector detector = [&](const Frame& f) {
    auto px = base(f);
    if (f.id == 0) px.push_back(lonely);
    return px;
  };
  const SparseGroundTruth gt = build_sparse_gt(ds, train, SparseGtConfig{}, detector);
  CHECK(gt.tracks.size() >= 60);
  for (const auto& t : gt.tracks) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& p : pts) best = std::min(best, (p - *t.point).norm());
    CHECK(best < 1e-4);
    CHECK(t.observations.size() >= 3);
  }
  const FrameKeypoints& f0 = gt.frames[0];
  REQUIRE(f0.pixels.back() == lonely);
  CHECK_FALSE(f0.valid.back());
  CHECK(f0.track.back() == -1);
}

TEST_CASE("sparse ground truth from detected corners") {
  const SceneDataset& ds = default_scene();
  const auto train = ds.indices(Split::train);
  const SparseGtConfig cfg;
  const SparseGroundTruth gt = build_sparse_gt(ds, train, cfg);
  CHECK(gt.tracks.size() >= 200);
  CHECK(gt.adjusted_error_px <= gt.triangulated_error_px + 1e-12);
  std::size_t valid = 0;
  for (const FrameKeypoints& fk : gt.frames) {
    const Frame& f = ds.frames[fk.frame_index];
    CHECK(f.split == Split::train);
    for (std::size_t i = 0; i < fk.pixels.size(); ++i) {
      if (!fk.valid[i]) continue;
      ++valid;
      REQUIRE(fk.track[i] >= 0);
      CHECK(*gt.tracks[static_cast<std::size_t>(fk.track[i])].point == fk.coords[i]);
      const Vec2 px = geometry::project(f.pose, f.intrinsics, fk.coords[i]).pixel;
      CHECK((px - fk.pixels[i]).norm() <= cfg.max_error_px);
    }
  }
  std::size_t observations = 0;
  for (const auto& t : gt.tracks) observations += t.observations.size();
  CHECK(valid == observations);

  const SparseGroundTruth again = build_sparse_gt(ds, train, cfg);
  REQUIRE(again.tracks.size() == gt.tracks.size());
  for (std::size_t i = 0; i < gt.tracks.size(); ++i) CHECK(*again.tracks[i].point == *gt.tracks[i].point);
}

TEST_CASE("sparse ground truth errors") {
  const SceneDataset& ds = default_scene();
  const std::vector<std::size_t> two = {0, 2};
  // Two views cannot reach three supporting views.
  CHECK_THROWS_AS(build_sparse_gt(ds, two, SparseGtConfig{}), Error);
  const std::vector<std::size_t> one = {0};
  CHECK_THROWS_AS(build_sparse_gt(ds, one, SparseGtConfig{}), Error);
  SparseGtConfig bad;
  bad.min_views = 1;
  const auto train = ds.indices(Split::train);
  CHECK_THROWS_AS(build_sparse_gt(ds, train, bad), ConfigError);
  const KeypointDetector none = [](const Frame&) { return std::vector<Vec2>{}; };
  CHECK_THROWS_AS(build_sparse_gt(ds, train, SparseGtConfig{}, none), Error);
}
