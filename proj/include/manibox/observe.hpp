#pragma once

#include <array>
#include <span>

#include <Eigen/Core>

#include "manibox/geometry.hpp"
#include "manibox/gripworld.hpp"
#include "manibox/random.hpp"

namespace manibox::observe {

using geometry::NormalizedBBox;
using geometry::Vec3;

inline constexpr int kNumCameras = 3;
inline constexpr int kNumObjects = 1;
inline constexpr int kVisDim = 4 * kNumCameras * kNumObjects;
inline constexpr int kInputDim = kVisDim + gripworld::kProprioDim;

enum CameraSlot : int { kCamHigh = 0, kCamLeftWrist = 1, kCamRightWrist = 2 };

/// One fixed overhead camera plus two cameras riding on the end effector.
/// Wrist poses are the eef position plus a fixed offset, looking along the
/// approach axis (world -z).
struct CameraRig {
  geometry::CameraIntrinsics high_intrinsics{420.0, 420.0, 320.0, 240.0, 640.0, 480.0};
  geometry::CameraExtrinsics high_extrinsics =
      geometry::look_at(Vec3(0.0, -0.30, 1.30), Vec3(-0.07, 0.605, 0.76));
  geometry::CameraIntrinsics wrist_intrinsics{300.0, 300.0, 320.0, 240.0, 640.0, 480.0};
  Vec3 left_wrist_offset{0.0, 0.03, 0.05};
  Vec3 right_wrist_offset{0.0, -0.03, 0.05};

  /// Resolved cameras for the current eef position, in slot order.
  std::array<geometry::Camera, kNumCameras> cameras(const Vec3& p_ee) const;
};

struct FailureModel {
  double mask_ratio = 0.0;
  double noise_ratio = 0.0;

  void validate() const;
};

using BBoxes = std::array<NormalizedBBox, kNumCameras>;

struct ObservationVec {
  Eigen::VectorXd vis;      // 4 * n_cam * n_obj, camera order [high, left, right]
  Eigen::VectorXd proprio;  // eef xyz + aperture

  /// vis followed by proprio, the policy input.
  Eigen::VectorXd flat() const;
};

BBoxes render_bboxes(const CameraRig& rig, const gripworld::EnvState& state);

/// Zeroes each camera's four coordinates independently with probability `ratio`.
void apply_mask(std::span<double> vis, double ratio, Rng& rng);

/// Adds U(-ratio, ratio) to every coordinate of each non-sentinel bbox and
/// clamps to [0, 1]. Sentinels pass through untouched.
void apply_noise(std::span<double> vis, double ratio, Rng& rng);

/// Mask, then noise.
void apply_failures(std::span<double> vis, const FailureModel& failure, Rng& rng);

ObservationVec assemble_observation(const gripworld::EnvState& state, const BBoxes& bboxes);

}  // namespace manibox::observe
