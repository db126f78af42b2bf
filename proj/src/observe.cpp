#include "manibox/observe.hpp"

#include <algorithm>
#include <cmath>

#include "manibox/error.hpp"

namespace manibox::observe {
namespace {

geometry::CameraExtrinsics looking_down(const Vec3& position) {
  geometry::CameraExtrinsics ext;
  ext.rotation << 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0;
  ext.position = position;
  return ext;
}

bool all_zero(std::span<const double> box) {
  return std::all_of(box.begin(), box.end(), [](double v) { return v == 0.0; });
}

}  // namespace

std::array<geometry::Camera, kNumCameras> CameraRig::cameras(const Vec3& p_ee) const {
  return {{
      {"cam_high", high_intrinsics, high_extrinsics},
      {"cam_left_wrist", wrist_intrinsics, looking_down(p_ee + left_wrist_offset)},
      {"cam_right_wrist", wrist_intrinsics, looking_down(p_ee + right_wrist_offset)},
  }};
}

void FailureModel::validate() const {
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "mask ratio must lie in [0, 1]");
  if (!(noise_ratio >= 0.0 && std::isfinite(noise_ratio)))
    throw Error(ErrorKind::InvalidArgument, "noise ratio must be finite and non-negative");
}

Eigen::VectorXd ObservationVec::flat() const {
  Eigen::VectorXd out(vis.size() + proprio.size());
  out << vis, proprio;
  return out;
}

BBoxes render_bboxes(const CameraRig& rig, const gripworld::EnvState& state) {
  const auto cams = rig.cameras(state.p_ee);
  BBoxes out;
  for (int i = 0; i < kNumCameras; ++i)
    out[i] = geometry::sphere_to_bbox(cams[i].intrinsics, cams[i].extrinsics, state.p_obj, state.obj_radius);
  return out;
}

void apply_mask(std::span<double> vis, double ratio, Rng& rng) {
  if (vis.size() % 4 != 0) throw Error(ErrorKind::ShapeMismatch, "vis length must be a multiple of 4");
  for (std::size_t cam = 0; cam < vis.size() / 4; ++cam) {
    // Draw unconditionally so the stream position does not depend on ratio edge cases.
    const bool masked = bernoulli(rng, ratio);
    if (masked) std::fill_n(vis.begin() + 4 * cam, 4, 0.0);
  }
}

void apply_noise(std::span<double> vis, double ratio, Rng& rng) {
  if (vis.size() % 4 != 0) throw Error(ErrorKind::ShapeMismatch, "vis length must be a multiple of 4");
  if (ratio == 0.0) return;
  for (std::size_t cam = 0; cam < vis.size() / 4; ++cam) {
    auto box = vis.subspan(4 * cam, 4);
    if (all_zero(box)) continue;
    for (double& v : box) v = std::clamp(v + uniform(rng, -ratio, ratio), 0.0, 1.0);
  }
}

void apply_failures(std::span<double> vis, const FailureModel& failure, Rng& rng) {
  apply_mask(vis, failure.mask_ratio, rng);
  apply_noise(vis, failure.noise_ratio, rng);
}

ObservationVec assemble_observation(const gripworld::EnvState& state, const BBoxes& bboxes) {
  ObservationVec obs;
  obs.vis.resize(kVisDim);
  for (int i = 0; i < kNumCameras; ++i) {
    const auto a = bboxes[i].as_array();
    for (int j = 0; j < 4; ++j) obs.vis(4 * i + j) = a[j];
  }
  obs.proprio.resize(gripworld::kProprioDim);
  obs.proprio << state.p_ee, state.aperture;
  return obs;
}

}  // namespace manibox::observe
