#pragma once

#include <array>
#include <string>

#include <Eigen/Core>

namespace manibox::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics in pixels. The single focal length of the sphere model is
/// the mean of fx and fy (see `mean_focal`).
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double width = 1.0;
  double height = 1.0;

  double mean_focal() const { return 0.5 * (fx + fy); }
  Mat3 matrix() const;
  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// `rotation` maps world axes into camera axes and `position` is the camera
/// center in world coordinates: cam = R (P - t), P = R^T cam + t.
struct CameraExtrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();

  void validate() const;
};

struct Camera {
  std::string name;
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
};

/// Normalized (u_min, v_min, u_max, v_max). All-zero is the "no detection"
/// sentinel.
struct NormalizedBBox {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;

  static constexpr NormalizedBBox sentinel() { return {}; }
  bool is_sentinel() const {
    return u_min == 0.0 && v_min == 0.0 && u_max == 0.0 && v_max == 0.0;
  }
  /// Sentinel, or a proper box inside [0,1]^2.
  bool is_valid() const;
  std::array<double, 4> as_array() const { return {u_min, v_min, u_max, v_max}; }
  bool operator==(const NormalizedBBox&) const = default;
};

struct SphereEstimate {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double residual = 0.0;
  // Per-camera center and radius before averaging.
  Vec3 center_cam1 = Vec3::Zero();
  Vec3 center_cam2 = Vec3::Zero();
  double radius_cam1 = 0.0;
  double radius_cam2 = 0.0;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // R^T K^-1 [u, v, 1], not normalized
};

Vec3 world_to_camera(const CameraExtrinsics& extrinsics, const Vec3& point);
Vec3 camera_to_world(const CameraExtrinsics& extrinsics, const Vec3& cam_point);

/// Circle-model projection of a sphere: projected center +/- s pixels with
/// s = r * mean_focal / z. Returns the sentinel when the sphere is not fully
/// inside the image or z <= radius.
NormalizedBBox sphere_to_bbox(const CameraIntrinsics& intrinsics,
                              const CameraExtrinsics& extrinsics,
                              const Vec3& center, double radius);

Ray bbox_center_ray(const CameraIntrinsics& intrinsics,
                    const CameraExtrinsics& extrinsics,
                    const NormalizedBBox& bbox);

/// Two-view recovery of a sphere's center and radius from its bounding boxes.
///
/// Both viewing rays through the box centers are intersected in the least
/// squares sense (2x2 normal equations); the center is the average of the two
/// per-ray points and the radius follows from s / f = r / Z in each view.
///
/// Throws MaskedBBox, DegenerateConfiguration (rays colinear to 1e-8) or
/// BehindCamera (a depth lambda <= 0).
SphereEstimate triangulate_sphere(const Camera& cam1, const NormalizedBBox& bbox1,
                                  const Camera& cam2, const NormalizedBBox& bbox2);

inline constexpr double kDegeneracyTolerance = 1e-8;

/// Extrinsics for a camera at `eye` looking at `target`. Camera y points
/// "down" in the image, so `up` maps to -y.
CameraExtrinsics look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

}  // namespace manibox::geometry
