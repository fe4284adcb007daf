#include "ascore/cli/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ascore/error.hpp"
#include "ascore/heads/heads.hpp"

namespace ascore::cli {

using geometry::Vec2;
using geometry::Vec3;

std::vector<training::TrainingSample> dense_samples(const data::SceneDataset& dataset) {
  std::vector<training::TrainingSample> out;
  for (std::size_t i : dataset.indices(data::Split::train)) {
    const data::Frame& f = dataset.frames[i];
    training::TrainingSample s;
    s.frame_id = f.id;
    s.image = f.image;
    s.dense = data::derive_dense_gt(f);
    if (s.dense->valid_count() == 0) continue;
    s.full_resolution = geometry::backproject(*f.depth, f.intrinsics, f.pose);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw Error("no training frame has valid dense ground truth");
  return out;
}

std::vector<training::TrainingSample> sparse_samples(const data::SceneDataset& dataset,
                                                     const data::SparseGroundTruth& gt) {
  std::vector<training::TrainingSample> out;
  for (const data::FrameKeypoints& fk : gt.frames) {
    if (std::none_of(fk.valid.begin(), fk.valid.end(), [](std::uint8_t v) { return v != 0; }))
      continue;
    const data::Frame& f = dataset.frames[fk.frame_index];
    training::TrainingSample s;
    s.frame_id = f.id;
    s.image = f.image;
    for (const auto& k : heads::normalize_keypoints(fk.pixels, f.width(), f.height()))
      s.keypoints.push_back(k.normalized);
    s.pixels = fk.pixels;
    s.coords = fk.coords;
    s.valid = fk.valid;
    out.push_back(std::move(s));
  }
  if (out.empty()) throw Error("no training frame has valid sparse ground truth");
  return out;
}

std::vector<geometry::Correspondence2D3D> predict_correspondences(
    const numerics::Tensor& image, const Model& model, Mode mode,
    const data::DetectorConfig& detector) {
  numerics::NoGradGuard no_grad;
  const auto features = model.encoder()(image);
  std::vector<geometry::Correspondence2D3D> out;
  if (mode == Mode::dense) {
    const numerics::Tensor pred = heads::dense_coordinates(features.data, model.head());
    const std::size_t gw = features.grid_width(), gh = features.grid_height();
    out.reserve(gw * gh);
    for (std::size_t r = 0; r < gh; ++r)
      for (std::size_t c = 0; c < gw; ++c) {
        const std::size_t k = r * gw + c;
        out.push_back({data::cell_center_pixel(c, r), Vec3(pred[3 * k], pred[3 * k + 1], pred[3 * k + 2])});
      }
    return out;
  }
  std::vector<Vec2> pixels;
  for (const auto& k : data::detect_keypoints(image, detector)) pixels.push_back(k.pixel);
  const auto keypoints = heads::normalize_keypoints(pixels, image.dim(2), image.dim(1));
  for (const auto& p : heads::sparse_predict(features, keypoints, model.head()))
    out.push_back({p.keypoint.pixel, p.scene});
  return out;
}

Localization localize(const numerics::Tensor& image, const Model& model,
                      const geometry::CameraIntrinsics& intrinsics, Mode mode,
                      const LocalizeConfig& config) {
  const auto corr = predict_correspondences(image, model, mode, config.detector);
  const auto result = geometry::pnp_ransac(corr, intrinsics, config.ransac);
  return {result.pose, result.inlier_count, corr.size()};
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

EvalSummary summarize(std::vector<FrameResult> frames) {
  EvalSummary s;
  s.frames = std::move(frames);
  std::vector<double> t, r;
  std::size_t hits = 0;
  for (const FrameResult& f : s.frames) {
    if (!f.error) continue;
    t.push_back(f.error->translation_cm);
    r.push_back(f.error->rotation_deg);
    hits += f.error->translation_cm < 5.0 && f.error->rotation_deg < 5.0;
  }
  if (!t.empty()) {
    s.median_t_cm = median(t);
    s.median_r_deg = median(r);
  }
  s.accuracy = s.frames.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(s.frames.size());
  return s;
}

std::string EvalSummary::to_json() const {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["median_t_cm"] = opt(median_t_cm);
  j["median_r_deg"] = opt(median_r_deg);
  j["acc_5cm_5deg"] = accuracy;
  j["frames"] = json::array();
  for (const FrameResult& f : frames) {
    j["frames"].push_back({{"id", f.id},
                           {"t_cm", f.error ? json(f.error->translation_cm) : json(nullptr)},
                           {"r_deg", f.error ? json(f.error->rotation_deg) : json(nullptr)},
                           {"inliers", f.inliers}});
  }
  return j.dump(2) + "\n";
}

EvalSummary evaluate(const data::SceneDataset& dataset, const Model& model, Mode mode,
                     const LocalizeConfig& config) {
  const auto test = dataset.indices(data::Split::test);
  if (test.empty()) throw Error("evaluate: the test split is empty");
  std::vector<FrameResult> results;
  for (std::size_t i : test) {
    const data::Frame& f = dataset.frames[i];
    FrameResult r;
    r.id = f.id;
    try {
      const Localization loc = localize(f.image, model, f.intrinsics, mode, config);
      r.error = geometry::pose_error(loc.pose, f.pose);
      r.inliers = loc.inliers;
    } catch (const NoConsensus&) {
    } catch (const InsufficientPoints&) {
    }
    results.push_back(r);
  }
  return summarize(std::move(results));
}

}  // namespace ascore::cli
