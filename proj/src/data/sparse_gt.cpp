#include "ascore/data/sparse_gt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <optional>

#include <Eigen/LU>

#include "ascore/error.hpp"

namespace ascore::data {

using geometry::Mat3;
using geometry::Vec2;
using geometry::Vec3;

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

// Fundamental matrix with x_b^T F x_a = 0 for pixels of views a and b.
Mat3 fundamental(const Pose& a, const CameraIntrinsics& ka, const Pose& b,
                 const CameraIntrinsics& kb) {
  const Mat3 r = b.rotation * a.rotation.transpose();
  const Vec3 t = b.translation - r * a.translation;
  return kb.matrix().inverse().transpose() * skew(t) * r * ka.matrix().inverse();
}

double line_distance(const Vec3& line, const Vec2& p) {
  const double n = std::hypot(line.x(), line.y());
  if (n == 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(line.x() * p.x() + line.y() * p.y() + line.z()) / n;
}

double epipolar_distance(const Mat3& f, const Vec2& pa, const Vec2& pb) {
  const Vec3 xa(pa.x(), pa.y(), 1.0), xb(pb.x(), pb.y(), 1.0);
  return std::max(line_distance(f * xa, pb), line_distance(f.transpose() * xb, pa));
}

// Keypoints bucketed on a square grid for radius queries.
class PixelIndex {
 public:
  PixelIndex(const std::vector<Vec2>& pixels, double radius) : radius_(radius) {
    for (std::size_t i = 0; i < pixels.size(); ++i) buckets_[key(cell(pixels[i].x()), cell(pixels[i].y()))].push_back(i);
  }

  // Closest keypoint within the radius, or -1.
  std::ptrdiff_t nearest(const std::vector<Vec2>& pixels, const Vec2& p, double* dist) const {
    std::ptrdiff_t best = -1;
    double best_sq = radius_ * radius_;
    const std::int64_t cx = cell(p.x()), cy = cell(p.y());
    for (std::int64_t y = cy - 1; y <= cy + 1; ++y)
      for (std::int64_t x = cx - 1; x <= cx + 1; ++x) {
        const auto it = buckets_.find(key(x, y));
        if (it == buckets_.end()) continue;
        for (std::size_t i : it->second) {
          const double d = (pixels[i] - p).squaredNorm();
          if (d <= best_sq && (best < 0 || d < best_sq || i < static_cast<std::size_t>(best))) {
            best_sq = d;
            best = static_cast<std::ptrdiff_t>(i);
          }
        }
      }
    if (best >= 0) *dist = std::sqrt(best_sq);
    return best;
  }

 private:
  std::int64_t cell(double v) const { return static_cast<std::int64_t>(std::floor(v / radius_)); }
  static std::int64_t key(std::int64_t x, std::int64_t y) { return x * 1000003 + y; }

  double radius_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets_;
};

// A triangulated point with the (frame, keypoint) pairs that support it.
struct Hypothesis {
  std::vector<std::pair<std::size_t, std::size_t>> members;
  double error = 0.0;       // mean pixel distance to the supporting keypoints
  std::size_t visible = 0;  // views where the point projects inside the image

  bool better_than(const Hypothesis& o) const {
    if (members.size() != o.members.size()) return members.size() > o.members.size();
    return error < o.error;
  }
};

}  // namespace

void SparseGtConfig::validate() const {
  detector.validate();
  if (!(epipolar_gate_px > 0.0) || !(support_radius_px > 0.0) || !(max_error_px > 0.0))
    throw ConfigError("sparse ground truth thresholds must be positive");
  if (min_views < 2) throw ConfigError("sparse ground truth needs min_views >= 2");
  if (!(min_support_ratio >= 0.0 && min_support_ratio <= 1.0))
    throw ConfigError("min_support_ratio must lie in [0, 1]");
}

SparseGroundTruth build_sparse_gt(const SceneDataset& dataset,
                                  std::span<const std::size_t> frame_indices,
                                  const SparseGtConfig& config,
                                  const KeypointDetector& detector) {
  config.validate();
  if (frame_indices.size() < 2) throw Error("build_sparse_gt: needs at least two frames");
  const std::size_t nf = frame_indices.size();
  std::vector<Pose> poses;
  std::vector<CameraIntrinsics> intr;
  SparseGroundTruth gt;
  for (std::size_t idx : frame_indices) {
    if (idx >= dataset.frames.size()) throw Error("build_sparse_gt: frame index out of range");
    const Frame& f = dataset.frames[idx];
    poses.push_back(f.pose);
    intr.push_back(f.intrinsics);
    FrameKeypoints fk;
    fk.frame_index = idx;
    if (detector) {
      fk.pixels = detector(f);
    } else {
      for (const auto& k : detect_keypoints(f.image, config.detector)) fk.pixels.push_back(k.pixel);
    }
    const std::size_t n = fk.pixels.size();
    fk.coords.assign(n, Vec3::Zero());
    fk.valid.assign(n, 0);
    fk.track.assign(n, -1);
    gt.frames.push_back(std::move(fk));
  }

  std::vector<Vec2> extent;
  for (std::size_t idx : frame_indices)
    extent.emplace_back(static_cast<double>(dataset.frames[idx].width() - 1),
                        static_cast<double>(dataset.frames[idx].height() - 1));
  std::vector<PixelIndex> index;
  for (const auto& fk : gt.frames) index.emplace_back(fk.pixels, config.support_radius_px);

  // Views whose reprojection of x lands near a keypoint, with that keypoint.
  auto gather = [&](const Vec3& x, Hypothesis& h) {
    h.members.clear();
    h.error = 0.0;
    h.visible = 0;
    for (std::size_t c = 0; c < nf; ++c) {
      const Vec3 cam = poses[c].transform(x);
      if (cam.z() <= 1e-9) continue;
      const Vec2 px = intr[c].to_pixel(cam);
      if (px.x() < 0.0 || px.y() < 0.0 || px.x() > extent[c].x() || px.y() > extent[c].y())
        continue;
      ++h.visible;
      double dist = 0.0;
      const std::ptrdiff_t k = index[c].nearest(gt.frames[c].pixels, px, &dist);
      if (k < 0) continue;
      h.members.push_back({c, static_cast<std::size_t>(k)});
      h.error += dist;
    }
    if (!h.members.empty()) h.error /= static_cast<double>(h.members.size());
  };

  // Best hypothesis per keypoint over all gated partners in the other views.
  std::vector<Hypothesis> hypotheses;
  Hypothesis trial;
  for (std::size_t a = 0; a < nf; ++a)
    for (std::size_t i = 0; i < gt.frames[a].pixels.size(); ++i) {
      const Vec2& pa = gt.frames[a].pixels[i];
      Hypothesis best;
      for (std::size_t b = 0; b < nf; ++b) {
        if (b == a) continue;
        const Mat3 f = fundamental(poses[a], intr[a], poses[b], intr[b]);
        const auto& kb = gt.frames[b].pixels;
        for (std::size_t j = 0; j < kb.size(); ++j) {
          if (!(epipolar_distance(f, pa, kb[j]) < config.epipolar_gate_px)) continue;
          geometry::Track pair;
          pair.observations = {{a, pa, std::nullopt}, {b, kb[j], std::nullopt}};
          try {
            gather(geometry::triangulate(pair, poses, intr), trial);
          } catch (const DegenerateTriangulation&) {
            continue;
          }
          if (trial.better_than(best)) std::swap(best, trial);
        }
      }
      if (best.members.size() >= config.min_views &&
          static_cast<double>(best.members.size()) >=
              config.min_support_ratio * static_cast<double>(best.visible))
        hypotheses.push_back(std::move(best));
    }
  std::stable_sort(hypotheses.begin(), hypotheses.end(),
                   [](const Hypothesis& x, const Hypothesis& y) { return x.better_than(y); });

  // Greedy assignment: each keypoint joins at most one track.
  std::vector<std::vector<std::uint8_t>> used(nf);
  for (std::size_t f = 0; f < nf; ++f) used[f].assign(gt.frames[f].pixels.size(), 0);
  std::vector<geometry::Track> candidates;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> members;
  for (const Hypothesis& h : hypotheses) {
    std::vector<std::pair<std::size_t, std::size_t>> free;
    for (const auto& [f, i] : h.members)
      if (!used[f][i]) free.push_back({f, i});
    if (free.size() < config.min_views) continue;
    geometry::Track t;
    for (const auto& [f, i] : free) t.observations.push_back({f, gt.frames[f].pixels[i], std::nullopt});
    try {
      t.point = geometry::triangulate(t, poses, intr);
    } catch (const DegenerateTriangulation&) {
      continue;
    }
    for (const auto& [f, i] : free) used[f][i] = 1;
    candidates.push_back(std::move(t));
    members.push_back(std::move(free));
  }
  if (candidates.empty()) throw Error("build_sparse_gt: no track survived matching");

  const auto ba = geometry::bundle_adjust_points(candidates, poses, intr, config.bundle_adjust);
  double dlt_sum = 0.0, ba_sum = 0.0;
  std::size_t obs_count = 0;
  for (std::size_t t = 0; t < ba.tracks.size(); ++t) {
    const geometry::Track& track = ba.tracks[t];
    const Vec3 x = *track.point;
    double sum = 0.0, worst = 0.0, before = 0.0;
    bool in_front = true;
    for (const auto& o : track.observations) {
      const Vec3 cam = poses[o.camera_index].transform(x);
      const Vec3 cam0 = poses[o.camera_index].transform(*candidates[t].point);
      if (cam.z() <= 1e-9 || cam0.z() <= 1e-9) {
        in_front = false;
        break;
      }
      const double e = (intr[o.camera_index].to_pixel(cam) - o.pixel).norm();
      before += (intr[o.camera_index].to_pixel(cam0) - o.pixel).norm();
      sum += e;
      worst = std::max(worst, e);
    }
    const double n = static_cast<double>(track.observations.size());
    if (!in_front || sum / n > config.max_error_px || worst > config.max_error_px) continue;
    dlt_sum += before;
    ba_sum += sum;
    obs_count += track.observations.size();

    const auto id = static_cast<std::ptrdiff_t>(gt.tracks.size());
    geometry::Track out = track;
    for (auto& o : out.observations) o.camera_index = frame_indices[o.camera_index];
    gt.tracks.push_back(std::move(out));
    for (const auto& [f, i] : members[t]) {
      gt.frames[f].coords[i] = x;
      gt.frames[f].valid[i] = 1;
      gt.frames[f].track[i] = id;
    }
  }
  if (gt.tracks.empty())
    throw Error("build_sparse_gt: no track passed the reprojection check");
  gt.triangulated_error_px = dlt_sum / static_cast<double>(obs_count);
  gt.adjusted_error_px = ba_sum / static_cast<double>(obs_count);
  return gt;
}

}  // namespace ascore::data
