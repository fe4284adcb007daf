#include "ascore/data/keypoints.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <tuple>

#include "ascore/error.hpp"

namespace ascore::data {

namespace {

constexpr std::array<double, 3> kGray = {0.299, 0.587, 0.114};
constexpr std::array<double, 3> kSmooth = {0.25, 0.5, 0.25};
constexpr std::array<double, 3> kSobelSmooth = {1.0, 2.0, 1.0};
constexpr std::array<double, 3> kDerivative = {-1.0, 0.0, 1.0};

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Offset of the vertex of the parabola through (-1, l), (0, c), (1, r),
// limited to half a pixel.
double parabola_peak(double l, double c, double r) {
  const double curvature = l - 2.0 * c + r;
  if (!(curvature < 0.0)) return 0.0;
  return std::clamp(0.5 * (l - r) / curvature, -0.5, 0.5);
}

}  // namespace

void DetectorConfig::validate() const {
  if (max_count == 0) throw ConfigError("detector max_count must be positive");
  if (!std::isfinite(harris_k) || harris_k <= 0.0)
    throw ConfigError("detector harris_k must be positive");
  if (!std::isfinite(min_response)) throw ConfigError("detector min_response must be finite");
  if (border < 2) throw ConfigError("detector border must be at least 2");
}

std::vector<double> grayscale(const numerics::Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw ShapeError("grayscale: expected [3, H, W], got " +
                     numerics::shape_string(image.shape()));
  const std::size_t n = image.dim(1) * image.dim(2);
  std::vector<double> g(n, 0.0);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < n; ++i) g[i] += kGray[c] * image[c * n + i];
  return g;
}

std::vector<double> harris_response(const std::vector<double>& gray, std::size_t width,
                                    std::size_t height, double k) {
  if (gray.size() != width * height) throw ShapeError("harris_response: size mismatch");
  const std::size_t n = width * height;
  std::vector<double> ix(n, 0.0), iy(n, 0.0);
  auto at = [&](std::size_t x, std::size_t y) { return gray[y * width + x]; };
  for (std::size_t y = 1; y + 1 < height; ++y)
    for (std::size_t x = 1; x + 1 < width; ++x) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) {
          const double v = at(x + b - 1, y + a - 1);
          gx += kSobelSmooth[a] * kDerivative[b] * v;
          gy += kDerivative[a] * kSobelSmooth[b] * v;
        }
      ix[y * width + x] = gx;
      iy[y * width + x] = gy;
    }
  std::vector<double> r(n, 0.0);
  for (std::size_t y = 2; y + 2 < height; ++y)
    for (std::size_t x = 2; x + 2 < width; ++x) {
      double sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) {
          const std::size_t i = (y + a - 1) * width + (x + b - 1);
          const double w = kSmooth[a] * kSmooth[b];
          sxx += w * ix[i] * ix[i];
          syy += w * iy[i] * iy[i];
          sxy += w * ix[i] * iy[i];
        }
      const double trace = sxx + syy;
      r[y * width + x] = sxx * syy - sxy * sxy - k * trace * trace;
    }
  return r;
}

std::vector<DetectedKeypoint> detect_keypoints(const numerics::Tensor& image,
                                               const DetectorConfig& config) {
  config.validate();
  const std::vector<double> gray = grayscale(image);
  const std::size_t h = image.dim(1), w = image.dim(2);
  const std::vector<double> r = harris_response(gray, w, h, config.harris_k);

  struct Candidate {
    double response;
    std::size_t row, col;
  };
  std::vector<Candidate> cands;
  const std::size_t b = config.border;
  for (std::size_t y = b; y + b < h; ++y)
    for (std::size_t x = b; x + b < w; ++x)
      if (r[y * w + x] > config.min_response) cands.push_back({r[y * w + x], y, x});
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& c) {
    return std::make_tuple(-a.response, a.row, a.col) < std::make_tuple(-c.response, c.row, c.col);
  });

  std::vector<DetectedKeypoint> out;
  std::vector<std::uint8_t> blocked(w * h, 0);
  const auto rad = static_cast<std::ptrdiff_t>(config.nms_radius);
  for (const Candidate& c : cands) {
    if (out.size() == config.max_count) break;
    if (blocked[c.row * w + c.col]) continue;
    geometry::Vec2 px(static_cast<double>(c.col), static_cast<double>(c.row));
    if (config.subpixel) {
      const std::size_t i = c.row * w + c.col;
      px.x() += parabola_peak(r[i - 1], r[i], r[i + 1]);
      px.y() += parabola_peak(r[i - w], r[i], r[i + w]);
    }
    out.push_back({px, c.response});
    const auto y0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(c.row) - rad);
    const auto y1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(h) - 1,
                                             static_cast<std::ptrdiff_t>(c.row) + rad);
    const auto x0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(c.col) - rad);
    const auto x1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w) - 1,
                                             static_cast<std::ptrdiff_t>(c.col) + rad);
    for (auto y = y0; y <= y1; ++y)
      for (auto x = x0; x <= x1; ++x) blocked[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] = 1;
  }
  return out;
}

std::uint64_t detector_fingerprint(const DetectorConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto add = [&h](const auto& v) { h = fnv1a(h, &v, sizeof v); };
  add(config.max_count);
  add(config.harris_k);
  add(config.nms_radius);
  add(config.min_response);
  add(config.border);
  add(config.subpixel);
  for (double v : kGray) add(v);
  for (double v : kSmooth) add(v);
  for (double v : kSobelSmooth) add(v);
  for (double v : kDerivative) add(v);
  return h;
}

}  // namespace ascore::data
