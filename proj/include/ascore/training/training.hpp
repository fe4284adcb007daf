#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ascore/geometry/camera.hpp"
#include "ascore/numerics/tensor.hpp"
#include "ascore/training/model.hpp"

namespace ascore::training {

using numerics::Tensor;

enum class Reduction { sum, mean };

// Sum over valid rows of |pred - gt|^2 for pred, gt [M, 3]; `mean` divides by
// the number of valid rows. Invalid rows get zero loss and zero gradient.
// Throws ShapeError on mismatched shapes and Error if no row is valid.
Tensor l2_loss(const Tensor& pred, const Tensor& gt, std::span<const std::uint8_t> valid,
               Reduction reduction = Reduction::mean);

// Step decay lr0 * 0.5^k with k = floor((C + 200000 - N) / 50000) + 1,
// clamped at k >= 0. Requires 0 <= C < N.
std::int64_t lr_decay_step(std::int64_t iteration, std::int64_t total);
double lr_schedule(std::int64_t iteration, std::int64_t total, double lr0);

// One training image with ground truth for either mode.
struct TrainingSample {
  std::size_t frame_id = 0;
  Tensor image;  // [3, H, W]
  // Dense: grid-resolution coordinates, row-major over cells.
  std::optional<geometry::SceneCoordinateMap> dense;
  // Sparse: normalized keypoints with coordinates and validity.
  std::vector<geometry::Vec2> keypoints;
  std::vector<geometry::Vec3> coords;
  std::vector<std::uint8_t> valid;
  // Optional inputs for shift augmentation: full-resolution scene coordinates
  // (dense) and keypoint pixels matching `keypoints` (sparse).
  std::optional<geometry::SceneCoordinateMap> full_resolution;
  std::vector<geometry::Vec2> pixels;
};

struct TrainConfig {
  Mode mode = Mode::dense;
  std::int64_t total_iterations = 0;
  double initial_lr = 5e-4;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  Reduction reduction = Reduction::mean;
  // Crop 8 px off each image axis at a random offset in [0, 8] per draw and
  // resample the ground truth at the shifted cell centres or keypoints.
  bool shift_augmentation = false;
  std::int64_t checkpoint_interval = 10000;
  // Model directory for periodic and final checkpoints; empty disables them.
  std::filesystem::path checkpoint_dir;
  // CSV "iteration,loss,lr,seconds", appended as training runs; empty disables it.
  std::filesystem::path log_path;
};

struct IterationRecord {
  std::int64_t iteration = 0;
  double loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;  // wall time since training started
};

struct TrainReport {
  std::vector<IterationRecord> records;
  std::filesystem::path final_checkpoint;
};

using ProgressFn = std::function<void(const IterationRecord&)>;

// The sample cropped to [H-8, W-8] starting at pixel (dx, dy), dx, dy in
// [0, 8]. Keypoints outside the crop become invalid. Throws Error when the
// sample lacks the full-resolution map (dense) or pixels (sparse).
TrainingSample shift_sample(const TrainingSample& sample, Mode mode, std::size_t dx, std::size_t dy);

// Loss of one sample under the model's current parameters.
Tensor sample_loss(const Model& model, const TrainingSample& sample, Mode mode,
                   Reduction reduction);

// Seeded SGD loop: draw batch_size samples, forward, l2_loss, backward,
// Adam step at lr_schedule(C). Throws Error if a sample lacks ground truth for
// the mode or the model was built for the other mode.
TrainReport train(std::span<const TrainingSample> samples, Model& model, const TrainConfig& config,
                  const ProgressFn& progress = {});

}  // namespace ascore::training
