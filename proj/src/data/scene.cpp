#include "ascore/data/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "ascore/error.hpp"
#include "ascore/geometry/io.hpp"

namespace ascore::data {

namespace fs = std::filesystem;

namespace {

std::string frame_name(std::size_t id, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu%s", id, ext);
  return buf;
}

// Reflected index without edge repetition: -1 -> 1, n -> n - 2.
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - i);
}

std::size_t padding_for(std::size_t n) { return (8 - n % 8) % 8; }

}  // namespace

std::vector<std::size_t> SceneDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].split == split) out.push_back(i);
  return out;
}

Tensor image_tensor(const RgbImage& image) {
  const std::size_t n = image.width * image.height;
  if (n == 0 || image.pixels.size() != 3 * n)
    throw ShapeError("image_tensor: pixel buffer does not match image size");
  std::vector<double> v(3 * n);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t c = 0; c < 3; ++c) v[c * n + p] = image.pixels[3 * p + c] / 255.0;
  return Tensor::from_data({3, image.height, image.width}, std::move(v));
}

RgbImage to_rgb(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw ShapeError("to_rgb: expected [3, H, W], got " + numerics::shape_string(image.shape()));
  RgbImage out{image.dim(2), image.dim(1), {}};
  const std::size_t n = out.width * out.height;
  out.pixels.resize(3 * n);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      out.pixels[3 * p + c] =
          static_cast<std::uint8_t>(std::lround(std::clamp(image[c * n + p], 0.0, 1.0) * 255.0));
  return out;
}

Frame make_frame(std::size_t id, Split split, const RgbImage& image,
                 std::optional<DepthMap> depth, const Pose& pose,
                 const CameraIntrinsics& intrinsics) {
  const std::size_t w = image.width, h = image.height;
  if (w == 0 || h == 0 || image.pixels.size() != 3 * w * h)
    throw ShapeError("frame " + std::to_string(id) + ": empty or inconsistent image");
  if (depth && (depth->width != w || depth->height != h || depth->values.size() != w * h))
    throw ShapeError("frame " + std::to_string(id) + ": depth size does not match image");
  const std::size_t pw = padding_for(w), ph = padding_for(h);
  Frame f;
  f.id = id;
  f.split = split;
  f.pose = pose;
  f.original_width = w;
  f.original_height = h;
  f.pad_left = pw / 2;
  f.pad_top = ph / 2;
  f.intrinsics = intrinsics;
  f.intrinsics.cx += static_cast<double>(f.pad_left);
  f.intrinsics.cy += static_cast<double>(f.pad_top);

  const std::size_t W = w + pw, H = h + ph;
  RgbImage padded{W, H, std::vector<std::uint8_t>(3 * W * H)};
  for (std::size_t y = 0; y < H; ++y) {
    const std::size_t sy = reflect(static_cast<std::ptrdiff_t>(y) - f.pad_top, h);
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t sx = reflect(static_cast<std::ptrdiff_t>(x) - f.pad_left, w);
      std::copy_n(&image.pixels[3 * (sy * w + sx)], 3, &padded.pixels[3 * (y * W + x)]);
    }
  }
  f.image = image_tensor(padded);
  if (depth) {
    DepthMap d{W, H, std::vector<double>(W * H, 0.0)};
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(&depth->values[y * w], w, &d.values[(y + f.pad_top) * W + f.pad_left]);
    f.depth = std::move(d);
  }
  return f;
}

std::uint16_t depth_to_millimeters(double meters) {
  if (!std::isfinite(meters) || meters < 0.0)
    throw IoError("depth must be finite and nonnegative");
  const double mm = std::round(meters * 1000.0);
  if (mm > 65535.0) throw IoError("depth " + std::to_string(meters) + " m exceeds 16-bit range");
  return static_cast<std::uint16_t>(mm);
}

double millimeters_to_depth(std::uint16_t mm) { return mm / 1000.0; }

void save_scene(const SceneDataset& dataset, const fs::path& dir) {
  if (dataset.frames.empty()) throw Error("save_scene: dataset has no frames");
  const Frame& first = dataset.frames.front();
  CameraIntrinsics k = first.intrinsics;
  k.cx -= static_cast<double>(first.pad_left);
  k.cy -= static_cast<double>(first.pad_top);
  for (const char* sub : {"frames", "depth", "poses"}) fs::create_directories(dir / sub);
  geometry::write_intrinsics_file(dir / "intrinsics.txt", k);

  std::ostringstream split;
  for (const Frame& f : dataset.frames) {
    CameraIntrinsics fk = f.intrinsics;
    fk.cx -= static_cast<double>(f.pad_left);
    fk.cy -= static_cast<double>(f.pad_top);
    if (!(fk == k)) throw Error("save_scene: frames have differing intrinsics");
    const std::size_t w = f.original_width, h = f.original_height, W = f.width();
    const RgbImage padded = to_rgb(f.image);
    RgbImage crop{w, h, std::vector<std::uint8_t>(3 * w * h)};
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(&padded.pixels[3 * ((y + f.pad_top) * W + f.pad_left)], 3 * w,
                  &crop.pixels[3 * y * w]);
    write_ppm(dir / "frames" / frame_name(f.id, ".ppm"), crop);
    if (f.depth) {
      GrayImage d{w, h, 65535, std::vector<std::uint16_t>(w * h)};
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          d.pixels[y * w + x] = depth_to_millimeters(f.depth->at(x + f.pad_left, y + f.pad_top));
      write_pgm(dir / "depth" / frame_name(f.id, ".pgm"), d);
    }
    geometry::write_pose_file(dir / "poses" / frame_name(f.id, ".txt"), f.pose);
    split << (f.split == Split::train ? "train " : "test ") << frame_name(f.id, "") << '\n';
  }
  std::ofstream out(dir / "split.txt", std::ios::trunc);
  if (!out || !(out << split.str())) throw IoError("cannot write " + (dir / "split.txt").string());
}

SceneDataset load_scene(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("scene directory " + dir.string() + " does not exist");
  const CameraIntrinsics k = geometry::read_intrinsics_file(dir / "intrinsics.txt");
  const fs::path split_path = dir / "split.txt";
  std::ifstream in(split_path);
  if (!in) throw IoError("cannot open " + split_path.string());

  std::map<std::size_t, Split> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string kind, id_text, extra;
    if (!(ls >> kind)) continue;
    const auto where = split_path.string() + ":" + std::to_string(line_no);
    if (!(ls >> id_text) || (ls >> extra) || (kind != "train" && kind != "test"))
      throw IoError(where + ": expected \"train|test <id>\"");
    std::size_t pos = 0;
    std::size_t id = 0;
    try {
      id = std::stoul(id_text, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != id_text.size()) throw IoError(where + ": invalid frame id '" + id_text + "'");
    if (!entries.emplace(id, kind == "train" ? Split::train : Split::test).second)
      throw IoError(where + ": duplicate frame id " + id_text);
  }
  if (entries.empty()) throw IoError(split_path.string() + ": no frames listed");

  SceneDataset ds;
  for (const auto& [id, split] : entries) {
    const RgbImage img = read_ppm(dir / "frames" / frame_name(id, ".ppm"));
    std::optional<DepthMap> depth;
    const fs::path dpath = dir / "depth" / frame_name(id, ".pgm");
    if (fs::exists(dpath)) {
      const GrayImage g = read_pgm(dpath);
      if (g.width != img.width || g.height != img.height)
        throw IoError(dpath.string() + ": size does not match the color image");
      DepthMap d{g.width, g.height, std::vector<double>(g.pixels.size())};
      for (std::size_t i = 0; i < g.pixels.size(); ++i) d.values[i] = millimeters_to_depth(g.pixels[i]);
      depth = std::move(d);
    }
    const Pose pose = geometry::read_pose_file(dir / "poses" / frame_name(id, ".txt"));
    ds.frames.push_back(make_frame(id, split, img, std::move(depth), pose, k));
  }
  return ds;
}

geometry::SceneCoordinateMap derive_dense_gt(const Frame& frame) {
  if (!frame.depth) throw Error("frame " + std::to_string(frame.id) + " has no depth");
  const std::size_t W = frame.width(), H = frame.height();
  if (W % 8 != 0 || H % 8 != 0)
    throw ShapeError("derive_dense_gt: frame size must be a multiple of 8");
  const auto full = geometry::backproject(*frame.depth, frame.intrinsics, frame.pose);
  geometry::SceneCoordinateMap grid(W / 8, H / 8);
  for (std::size_t i = 0; i < grid.height; ++i)
    for (std::size_t j = 0; j < grid.width; ++j) {
      const std::size_t src = (8 * i + 4) * W + 8 * j + 4;
      grid.points[i * grid.width + j] = full.points[src];
      grid.valid[i * grid.width + j] = full.valid[src];
    }
  return grid;
}

}  // namespace ascore::data
