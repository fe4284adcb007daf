#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ascore/data/keypoints.hpp"
#include "ascore/data/scene.hpp"
#include "ascore/data/sparse_gt.hpp"
#include "ascore/geometry/pnp.hpp"
#include "ascore/geometry/pose_error.hpp"
#include "ascore/training/training.hpp"

namespace ascore::cli {

using training::Mode;
using training::Model;

// Training samples for the train split: dense maps from depth, or the
// keypoints of frames with at least one valid sparse coordinate.
std::vector<training::TrainingSample> dense_samples(const data::SceneDataset& dataset);
std::vector<training::TrainingSample> sparse_samples(const data::SceneDataset& dataset,
                                                     const data::SparseGroundTruth& gt);

struct LocalizeConfig {
  geometry::RansacConfig ransac;
  data::DetectorConfig detector;  // sparse mode only
};

struct Localization {
  geometry::Pose pose;
  std::size_t inliers = 0;
  std::size_t correspondences = 0;
};

// 2D-3D pairs fed to RANSAC. Dense: one per descriptor cell at pixel
// (8 col + 4, 8 row + 4). Sparse: detected keypoints with sampled predictions.
std::vector<geometry::Correspondence2D3D> predict_correspondences(const numerics::Tensor& image,
                                                                  const Model& model, Mode mode,
                                                                  const data::DetectorConfig& detector);

// Throws InsufficientPoints or NoConsensus when no pose can be found.
Localization localize(const numerics::Tensor& image, const Model& model,
                      const geometry::CameraIntrinsics& intrinsics, Mode mode,
                      const LocalizeConfig& config);

struct FrameResult {
  std::size_t id = 0;
  std::optional<geometry::PoseError> error;  // empty when localization failed
  std::size_t inliers = 0;
};

struct EvalSummary {
  std::vector<FrameResult> frames;
  // Over successfully localized frames; empty when none succeeded.
  std::optional<double> median_t_cm;
  std::optional<double> median_r_deg;
  // Fraction of all frames within 5 cm and 5 degrees; failures count as misses.
  double accuracy = 0.0;

  std::string to_json() const;
};

// Middle value, or the mean of the two middle values for an even count.
// Throws Error on an empty list.
double median(std::vector<double> values);

EvalSummary summarize(std::vector<FrameResult> frames);

// Localizes every test frame. Throws Error when the test split is empty.
EvalSummary evaluate(const data::SceneDataset& dataset, const Model& model, Mode mode,
                     const LocalizeConfig& config);

}  // namespace ascore::cli
