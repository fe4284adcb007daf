#include "ascore/geometry/pnp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "ascore/error.hpp"

namespace ascore::geometry {

namespace {

// Polynomials as ascending coefficient vectors.
using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

Poly poly_add(Poly a, const Poly& b, double scale = 1.0) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += scale * b[i];
  return a;
}

double poly_eval(const Poly& p, double x) {
  double v = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) v = v * x + *it;
  return v;
}

std::vector<double> real_roots(Poly p) {
  double scale = 0.0;
  for (double c : p) scale = std::max(scale, std::abs(c));
  if (scale == 0.0) return {};
  while (p.size() > 1 && std::abs(p.back()) <= 1e-14 * scale) p.pop_back();
  const std::size_t degree = p.size() - 1;
  if (degree == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (std::size_t i = 0; i < degree; ++i) companion(0, i) = -p[degree - 1 - i] / p[degree];
  for (std::size_t i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  Poly dp(degree);
  for (std::size_t i = 1; i <= degree; ++i) dp[i - 1] = static_cast<double>(i) * p[i];
  std::vector<double> roots;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const auto z = solver.eigenvalues()(i);
    if (std::abs(z.imag()) > 1e-6 * (1.0 + std::abs(z.real()))) continue;
    double x = z.real();
    for (int it = 0; it < 3; ++it) {
      const double d = poly_eval(dp, x);
      if (d == 0.0) break;
      x -= poly_eval(p, x) / d;
    }
    roots.push_back(x);
  }
  return roots;
}

// Rigid transform with R * p_i + t = q_i in the least-squares sense.
Pose align_points(std::span<const Vec3> world, std::span<const Vec3> camera) {
  Vec3 pw = Vec3::Zero(), pc = Vec3::Zero();
  for (std::size_t i = 0; i < world.size(); ++i) {
    pw += world[i];
    pc += camera[i];
  }
  pw /= static_cast<double>(world.size());
  pc /= static_cast<double>(camera.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < world.size(); ++i) h += (world[i] - pw) * (camera[i] - pc).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Pose pose;
  pose.rotation = svd.matrixV() * fix * svd.matrixU().transpose();
  pose.translation = pc - pose.rotation * pw;
  return pose;
}

double reprojection_error(const Pose& pose, const CameraIntrinsics& k,
                          const Correspondence2D3D& c) {
  const Vec3 p = pose.transform(c.scene);
  if (p.z() <= 1e-9) return std::numeric_limits<double>::infinity();
  return (k.to_pixel(p) - c.pixel).norm();
}

std::size_t score(const Pose& pose, const CameraIntrinsics& k,
                  std::span<const Correspondence2D3D> cs, double threshold,
                  std::vector<std::uint8_t>* mask) {
  std::size_t count = 0;
  if (mask) mask->assign(cs.size(), 0);
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (reprojection_error(pose, k, cs[i]) < threshold) {
      ++count;
      if (mask) (*mask)[i] = 1;
    }
  }
  return count;
}

double pose_cost(const Pose& pose, std::span<const Correspondence2D3D> cs,
                 const CameraIntrinsics& k) {
  double cost = 0.0;
  for (const auto& c : cs) {
    const Vec3 p = pose.transform(c.scene);
    if (p.z() <= 1e-9) return std::numeric_limits<double>::infinity();
    cost += (k.to_pixel(p) - c.pixel).squaredNorm();
  }
  return cost;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace

std::vector<Pose> solve_p3p(std::span<const Vec3, 3> bearings, std::span<const Vec3, 3> points) {
  const double a2 = (points[1] - points[2]).squaredNorm();
  const double b2 = (points[0] - points[2]).squaredNorm();
  const double c2 = (points[0] - points[1]).squaredNorm();
  if (a2 <= 1e-18 || b2 <= 1e-18 || c2 <= 1e-18) return {};
  const double ca = bearings[1].dot(bearings[2]);
  const double cb = bearings[0].dot(bearings[2]);
  const double cg = bearings[0].dot(bearings[1]);

  // With s2 = u*s1, s3 = v*s1 the law of cosines gives u = N(v) / D(v) and
  // b^2 u^2 - 2 b^2 cos(g) u + b^2 - c^2 (1 + v^2 - 2 v cos(b)) = 0.
  const Poly q = {1.0, -2.0 * cb, 1.0};  // 1 + v^2 - 2 v cos(b)
  const Poly numer = poly_add(Poly{-b2, 0.0, b2}, q, c2 - a2);
  const Poly denom = {-2.0 * b2 * cg, 2.0 * b2 * ca};
  Poly quartic = poly_mul(numer, numer);
  for (double& x : quartic) x *= b2;
  quartic = poly_add(quartic, poly_mul(numer, denom), -2.0 * b2 * cg);
  quartic = poly_add(quartic, poly_mul(poly_add(Poly{b2}, q, -c2), poly_mul(denom, denom)));

  std::vector<Pose> solutions;
  for (double v : real_roots(quartic)) {
    if (!(v > 0.0)) continue;
    const double d = poly_eval(denom, v);
    if (std::abs(d) < 1e-14) continue;
    const double u = poly_eval(numer, v) / d;
    if (!(u > 0.0)) continue;
    const double qv = poly_eval(q, v);
    if (!(qv > 0.0)) continue;
    const double s1 = std::sqrt(b2 / qv);
    const std::array<Vec3, 3> cam = {s1 * bearings[0], u * s1 * bearings[1], v * s1 * bearings[2]};
    Pose pose = align_points(points, cam);
    if (pose.rotation.allFinite() && pose.translation.allFinite()) solutions.push_back(pose);
  }
  return solutions;
}

Pose refine_pose(const Pose& initial, std::span<const Correspondence2D3D> cs,
                 const CameraIntrinsics& k, std::size_t iterations) {
  Pose pose = initial;
  double cost = pose_cost(pose, cs, k);
  double lambda = 1e-3;
  for (std::size_t iter = 0; iter < iterations && cost > 1e-24; ++iter) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (const auto& c : cs) {
      const Vec3 rx = pose.rotation * c.scene;
      const Vec3 p = rx + pose.translation;
      if (p.z() <= 1e-9) continue;
      const double iz = 1.0 / p.z();
      const Vec2 r = k.to_pixel(p) - c.pixel;
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * p.x() * iz * iz, 0.0, k.fy * iz, -k.fy * p.y() * iz * iz;
      Eigen::Matrix<double, 2, 6> j;
      j.leftCols<3>() = -dproj * skew(rx);
      j.rightCols<3>() = dproj;
      jtj += j.transpose() * j;
      jtr += j.transpose() * r;
    }
    bool accepted = false;
    while (!accepted) {
      Eigen::Matrix<double, 6, 6> damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Matrix<double, 6, 1> step = damped.ldlt().solve(-jtr);
      Pose candidate;
      const Vec3 omega = step.head<3>();
      const double angle = omega.norm();
      const Mat3 dr = angle > 0.0 ? Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix()
                                  : Mat3::Identity();
      candidate.rotation = dr * pose.rotation;
      candidate.translation = dr * pose.translation + step.tail<3>();
      const double candidate_cost = pose_cost(candidate, cs, k);
      if (std::isfinite(candidate_cost) && candidate_cost <= cost) {
        const bool tiny = step.norm() < 1e-15 || cost - candidate_cost <= 1e-16 * cost;
        pose = candidate;
        cost = candidate_cost;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (tiny) return pose;
      } else {
        lambda *= 10.0;
        if (lambda > 1e12) return pose;
      }
    }
  }
  return pose;
}

PnpResult pnp_ransac(std::span<const Correspondence2D3D> cs, const CameraIntrinsics& k,
                     const RansacConfig& config) {
  if (cs.size() < 4)
    throw InsufficientPoints("PnP needs at least 4 correspondences, got " +
                             std::to_string(cs.size()));
  k.validate();

  std::vector<Vec3> bearings(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) bearings[i] = k.ray(cs[i].pixel).normalized();

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, cs.size() - 1);
  const std::size_t early_exit = static_cast<std::size_t>(
      std::ceil(config.early_exit_inlier_ratio * static_cast<double>(cs.size())));

  PnpResult result;
  std::size_t best = 0;
  bool found = false;
  for (std::size_t h = 0; h < config.max_hypotheses; ++h) {
    std::array<std::size_t, 4> idx{};
    for (std::size_t s = 0; s < 4; ++s) {
      std::size_t candidate = pick(rng);
      while (std::find(idx.begin(), idx.begin() + s, candidate) != idx.begin() + s)
        candidate = pick(rng);
      idx[s] = candidate;
    }
    ++result.hypotheses;
    const std::array<Vec3, 3> rays = {bearings[idx[0]], bearings[idx[1]], bearings[idx[2]]};
    const std::array<Vec3, 3> pts = {cs[idx[0]].scene, cs[idx[1]].scene, cs[idx[2]].scene};
    const auto solutions = solve_p3p(rays, pts);
    if (solutions.empty()) continue;

    const Pose* chosen = nullptr;
    double chosen_err = std::numeric_limits<double>::infinity();
    for (const auto& s : solutions) {
      const double err = reprojection_error(s, k, cs[idx[3]]);
      if (err < chosen_err) {
        chosen_err = err;
        chosen = &s;
      }
    }
    if (chosen == nullptr || !std::isfinite(chosen_err)) continue;

    const std::size_t count = score(*chosen, k, cs, config.inlier_threshold_px, nullptr);
    if (count > best) {
      best = count;
      result.pose = *chosen;
      found = true;
      if (best >= early_exit) break;
    }
  }
  if (!found || best < 4) throw NoConsensus("no hypothesis reached 4 inliers");

  result.inlier_count = score(result.pose, k, cs, config.inlier_threshold_px, &result.inliers);
  for (int round = 0; round < 2; ++round) {
    std::vector<Correspondence2D3D> inliers;
    for (std::size_t i = 0; i < cs.size(); ++i)
      if (result.inliers[i]) inliers.push_back(cs[i]);
    const Pose refined = refine_pose(result.pose, inliers, k, config.refine_iterations);
    std::vector<std::uint8_t> mask;
    const std::size_t count = score(refined, k, cs, config.inlier_threshold_px, &mask);
    if (count < result.inlier_count) break;
    const bool same = mask == result.inliers;
    result.pose = refined;
    result.inliers = std::move(mask);
    result.inlier_count = count;
    if (same) break;
  }
  if (result.inlier_count < 4) throw NoConsensus("refined pose has fewer than 4 inliers");
  return result;
}

}  // namespace ascore::geometry
