#include "ascore/training/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

#include "ascore/error.hpp"
#include "ascore/numerics/adam.hpp"
#include "ascore/numerics/ops.hpp"

namespace ascore::training {

namespace ops = numerics;

Tensor l2_loss(const Tensor& pred, const Tensor& gt, std::span<const std::uint8_t> valid,
               Reduction reduction) {
  if (pred.rank() != 2 || pred.dim(1) != 3 || pred.shape() != gt.shape())
    throw ShapeError("l2_loss: expected matching [M,3] tensors, got " +
                     ops::shape_string(pred.shape()) + " and " + ops::shape_string(gt.shape()));
  const std::size_t m = pred.dim(0);
  if (valid.size() != m) throw ShapeError("l2_loss: mask length does not match prediction count");
  std::size_t count = 0;
  double total = 0.0;
  const auto p = pred.data();
  const auto g = gt.data();
  for (std::size_t i = 0; i < m; ++i) {
    if (!valid[i]) continue;
    ++count;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = p[3 * i + c] - g[3 * i + c];
      total += d * d;
    }
  }
  if (count == 0) throw Error("l2_loss: no valid entries");
  const double norm = reduction == Reduction::mean ? 1.0 / static_cast<double>(count) : 1.0;
  std::vector<std::uint8_t> mask(valid.begin(), valid.end());
  return ops::make_result({1}, {total * norm}, {pred, gt},
                          [mask = std::move(mask), norm](ops::Node& self) {
                            ops::Node& pn = *self.parents[0];
                            ops::Node& gn = *self.parents[1];
                            const double scale = 2.0 * norm * self.grad[0];
                            for (std::size_t i = 0; i < mask.size(); ++i) {
                              if (!mask[i]) continue;
                              for (std::size_t c = 0; c < 3; ++c) {
                                const std::size_t k = 3 * i + c;
                                const double d = scale * (pn.data[k] - gn.data[k]);
                                if (pn.requires_grad) pn.grad_buffer()[k] += d;
                                if (gn.requires_grad) gn.grad_buffer()[k] -= d;
                              }
                            }
                          });
}

std::int64_t lr_decay_step(std::int64_t iteration, std::int64_t total) {
  if (total <= 0 || iteration < 0 || iteration >= total)
    throw Error("lr_schedule: requires 0 <= C < N, got C=" + std::to_string(iteration) +
                ", N=" + std::to_string(total));
  const std::int64_t num = iteration + 200000 - total;
  // Floor division that rounds toward negative infinity.
  std::int64_t q = num / 50000;
  if (num % 50000 != 0 && num < 0) --q;
  return std::max<std::int64_t>(q + 1, 0);
}

double lr_schedule(std::int64_t iteration, std::int64_t total, double lr0) {
  if (!(lr0 > 0.0)) throw Error("lr_schedule: lr0 must be positive");
  return std::ldexp(lr0, -static_cast<int>(lr_decay_step(iteration, total)));
}

namespace {

Tensor coords_tensor(const std::vector<geometry::Vec3>& points) {
  std::vector<double> v(points.size() * 3);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c) v[3 * i + c] = points[i][static_cast<Eigen::Index>(c)];
  return Tensor::from_data({points.size(), 3}, std::move(v));
}

void check_sample(const TrainingSample& s, Mode mode) {
  if (mode == Mode::dense) {
    if (!s.dense) throw Error("dense training sample " + std::to_string(s.frame_id) +
                              " has no dense ground truth");
  } else {
    if (s.keypoints.empty() || s.keypoints.size() != s.coords.size() ||
        s.valid.size() != s.coords.size())
      throw Error("sparse training sample " + std::to_string(s.frame_id) +
                  " has no usable keypoint ground truth");
  }
}

void write_log_line(std::ofstream& log, const IterationRecord& r) {
  log << r.iteration << ',' << std::setprecision(17) << r.loss << ',' << r.lr << ','
      << std::setprecision(6) << r.seconds << '\n';
  log.flush();
}

}  // namespace

TrainingSample shift_sample(const TrainingSample& sample, Mode mode, std::size_t dx, std::size_t dy) {
  constexpr std::size_t kCrop = 8;
  if (dx > kCrop || dy > kCrop) throw Error("shift_sample: offsets must lie in [0, 8]");
  const std::size_t c = sample.image.dim(0), h = sample.image.dim(1), w = sample.image.dim(2);
  if (h <= kCrop || w <= kCrop) throw ShapeError("shift_sample: image too small to crop");
  const std::size_t ch = h - kCrop, cw = w - kCrop;
  TrainingSample out;
  out.frame_id = sample.frame_id;
  std::vector<double> pixels(c * ch * cw);
  const auto src = sample.image.data();
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < ch; ++y)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((k * h + y + dy) * w + dx), cw,
                  pixels.begin() + static_cast<std::ptrdiff_t>((k * ch + y) * cw));
  out.image = Tensor::from_data({c, ch, cw}, std::move(pixels));

  if (mode == Mode::dense) {
    if (!sample.full_resolution) throw Error("shift_sample: dense sample has no full-resolution map");
    const auto& full = *sample.full_resolution;
    if (full.width != w || full.height != h)
      throw ShapeError("shift_sample: full-resolution map does not match the image");
    geometry::SceneCoordinateMap grid(cw / 8, ch / 8);
    for (std::size_t i = 0; i < grid.height; ++i)
      for (std::size_t j = 0; j < grid.width; ++j) {
        const std::size_t src_index = (8 * i + 4 + dy) * w + 8 * j + 4 + dx;
        grid.points[i * grid.width + j] = full.points[src_index];
        grid.valid[i * grid.width + j] = full.valid[src_index];
      }
    out.dense = std::move(grid);
    return out;
  }
  if (sample.pixels.size() != sample.coords.size())
    throw Error("shift_sample: sparse sample has no keypoint pixels");
  const double max_u = static_cast<double>(cw - 1), max_v = static_cast<double>(ch - 1);
  for (std::size_t k = 0; k < sample.pixels.size(); ++k) {
    const geometry::Vec2 p = sample.pixels[k] - geometry::Vec2(static_cast<double>(dx), static_cast<double>(dy));
    const bool inside = p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= max_u && p.y() <= max_v;
    const geometry::Vec2 q = inside ? p : geometry::Vec2(std::clamp(p.x(), 0.0, max_u), std::clamp(p.y(), 0.0, max_v));
    out.pixels.push_back(q);
    out.keypoints.emplace_back(2.0 * q.x() / max_u - 1.0, 2.0 * q.y() / max_v - 1.0);
    out.coords.push_back(sample.coords[k]);
    out.valid.push_back(inside && sample.valid[k]);
  }
  return out;
}

Tensor sample_loss(const Model& model, const TrainingSample& sample, Mode mode,
                   Reduction reduction) {
  check_sample(sample, mode);
  const auto features = model.encoder()(sample.image);
  if (mode == Mode::dense) {
    const auto& gt = *sample.dense;
    if (gt.width != features.grid_width() || gt.height != features.grid_height())
      throw ShapeError("dense ground truth grid does not match the descriptor map");
    const Tensor pred = heads::dense_coordinates(features.data, model.head());
    return l2_loss(pred, coords_tensor(gt.points), gt.valid, reduction);
  }
  const Tensor pred = heads::sparse_coordinates(features.data, sample.keypoints, model.head());
  return l2_loss(pred, coords_tensor(sample.coords), sample.valid, reduction);
}

TrainReport train(std::span<const TrainingSample> samples, Model& model, const TrainConfig& config,
                  const ProgressFn& progress) {
  if (config.total_iterations < 0) throw Error("train: total_iterations must be non-negative");
  if (!(config.initial_lr > 0.0)) throw Error("train: initial_lr must be positive");
  if (config.batch_size == 0) throw Error("train: batch_size must be positive");
  if (model.config().mode != config.mode)
    throw Error(std::string("train: model was configured for ") + mode_name(model.config().mode) +
                " mode but training runs in " + mode_name(config.mode) + " mode");
  TrainReport report;
  if (config.total_iterations == 0) return report;
  if (samples.empty()) throw Error("train: no training samples");
  for (const auto& s : samples) check_sample(s, config.mode);

  std::ofstream log;
  if (!config.log_path.empty()) {
    log.open(config.log_path);
    if (!log) throw IoError("cannot write training log " + config.log_path.string());
    log << "iteration,loss,lr,seconds\n";
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  std::uniform_int_distribution<std::size_t> shift(0, 8);
  numerics::Adam adam;
  auto& params = model.parameters();
  const auto start = std::chrono::steady_clock::now();
  report.records.reserve(static_cast<std::size_t>(config.total_iterations));

  for (std::int64_t it = 0; it < config.total_iterations; ++it) {
    params.zero_grad();
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const TrainingSample& drawn = samples[pick(rng)];
      Tensor loss;
      if (config.shift_augmentation) {
        const std::size_t dx = shift(rng), dy = shift(rng);
        TrainingSample s = shift_sample(drawn, config.mode, dx, dy);
        // A crop that loses every valid keypoint falls back to the full frame.
        const bool usable = config.mode == Mode::dense ||
                            std::any_of(s.valid.begin(), s.valid.end(), [](auto v) { return v != 0; });
        loss = sample_loss(model, usable ? s : drawn, config.mode, config.reduction);
      } else {
        loss = sample_loss(model, drawn, config.mode, config.reduction);
      }
      if (config.batch_size > 1) loss = ops::scale(loss, 1.0 / static_cast<double>(config.batch_size));
      batch_loss += loss.item();
      loss.backward();
    }
    const double lr = lr_schedule(it, config.total_iterations, config.initial_lr);
    adam.step(params, lr);

    IterationRecord rec;
    rec.iteration = it + 1;
    rec.loss = batch_loss;
    rec.lr = lr;
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.records.push_back(rec);
    if (log.is_open()) write_log_line(log, rec);
    if (progress) progress(rec);

    const bool last = it + 1 == config.total_iterations;
    const bool periodic =
        config.checkpoint_interval > 0 && (it + 1) % config.checkpoint_interval == 0;
    if (!config.checkpoint_dir.empty() && (last || periodic)) {
      model.save(config.checkpoint_dir);
      report.final_checkpoint = config.checkpoint_dir / "model.ascr";
    }
  }
  return report;
}

}  // namespace ascore::training
