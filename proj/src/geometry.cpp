#include "manibox/geometry.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "manibox/error.hpp"

namespace manibox::geometry {
namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

void require_finite(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::NonFinite, what);
}

Vec3 pixel_center(const CameraIntrinsics& k, const NormalizedBBox& box) {
  return {k.width * 0.5 * (box.u_min + box.u_max), k.height * 0.5 * (box.v_min + box.v_max), 1.0};
}

// K^-1 [u, v, 1] without forming the inverse.
Vec3 back_project(const CameraIntrinsics& k, const Vec3& pixel) {
  return {(pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, 1.0};
}

}  // namespace

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  require_finite(std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) && std::isfinite(cy) &&
                     std::isfinite(width) && std::isfinite(height),
                 "camera intrinsics");
  if (!(fx > 0.0 && fy > 0.0 && width > 0.0 && height > 0.0))
    throw Error(ErrorKind::InvalidArgument, "focal lengths and image size must be positive");
  if (!(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height))
    throw Error(ErrorKind::InvalidArgument, "principal point outside the image");
}

void CameraExtrinsics::validate() const {
  require_finite(rotation.allFinite() && position.allFinite(), "camera extrinsics");
  const Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw Error(ErrorKind::InvalidArgument, "rotation is not a proper orthonormal matrix");
}

bool NormalizedBBox::is_valid() const {
  if (is_sentinel()) return true;
  for (double c : as_array())
    if (!(c >= 0.0 && c <= 1.0)) return false;
  return u_min < u_max && v_min < v_max;
}

Vec3 world_to_camera(const CameraExtrinsics& extrinsics, const Vec3& point) {
  return extrinsics.rotation * (point - extrinsics.position);
}

Vec3 camera_to_world(const CameraExtrinsics& extrinsics, const Vec3& cam_point) {
  return extrinsics.rotation.transpose() * cam_point + extrinsics.position;
}

NormalizedBBox sphere_to_bbox(const CameraIntrinsics& intrinsics, const CameraExtrinsics& extrinsics,
                              const Vec3& center, double radius) {
  require_finite(finite(center) && std::isfinite(radius) && intrinsics.matrix().allFinite() &&
                     extrinsics.rotation.allFinite() && finite(extrinsics.position),
                 "sphere_to_bbox input");
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "sphere radius must be positive");

  const Vec3 cam = world_to_camera(extrinsics, center);
  if (cam.z() <= radius) return NormalizedBBox::sentinel();

  // The projected radius uses the distance along the viewing ray, the same Z
  // the two-view inversion recovers as lambda * |d|.
  const double s = radius * intrinsics.mean_focal() / cam.norm();
  const double uc = intrinsics.fx * cam.x() / cam.z() + intrinsics.cx;
  const double vc = intrinsics.fy * cam.y() / cam.z() + intrinsics.cy;

  if (uc - s < 0.0 || vc - s < 0.0 || uc + s > intrinsics.width || vc + s > intrinsics.height)
    return NormalizedBBox::sentinel();

  return {(uc - s) / intrinsics.width, (vc - s) / intrinsics.height, (uc + s) / intrinsics.width,
          (vc + s) / intrinsics.height};
}

Ray bbox_center_ray(const CameraIntrinsics& intrinsics, const CameraExtrinsics& extrinsics,
                    const NormalizedBBox& bbox) {
  if (bbox.is_sentinel()) throw Error(ErrorKind::MaskedBBox, "cannot back-project a masked bbox");
  const Vec3 d = back_project(intrinsics, pixel_center(intrinsics, bbox));
  return {extrinsics.position, extrinsics.rotation.transpose() * d};
}

SphereEstimate triangulate_sphere(const Camera& cam1, const NormalizedBBox& bbox1, const Camera& cam2,
                                  const NormalizedBBox& bbox2) {
  if (bbox1.is_sentinel() || bbox2.is_sentinel())
    throw Error(ErrorKind::MaskedBBox, "triangulation needs a detection in both views");
  for (const auto* box : {&bbox1, &bbox2})
    require_finite(std::isfinite(box->u_min) && std::isfinite(box->v_min) && std::isfinite(box->u_max) &&
                       std::isfinite(box->v_max),
                   "bbox");

  const Vec3 d1 = back_project(cam1.intrinsics, pixel_center(cam1.intrinsics, bbox1));
  const Vec3 d2 = back_project(cam2.intrinsics, pixel_center(cam2.intrinsics, bbox2));
  const Vec3 a1 = cam1.extrinsics.rotation.transpose() * d1;
  const Vec3 a2 = cam2.extrinsics.rotation.transpose() * d2;
  const Vec3 b = cam2.extrinsics.position - cam1.extrinsics.position;

  if (a1.cross(a2).norm() / (a1.norm() * a2.norm()) < kDegeneracyTolerance)
    throw Error(ErrorKind::DegenerateConfiguration, "viewing rays are colinear");

  Eigen::Matrix<double, 3, 2> a;
  a.col(0) = a1;
  a.col(1) = -a2;
  const Eigen::Matrix2d normal = a.transpose() * a;
  const Eigen::Vector2d rhs = a.transpose() * b;
  // Explicit 2x2 inverse; the degeneracy test above bounds its conditioning.
  const double det = normal(0, 0) * normal(1, 1) - normal(0, 1) * normal(1, 0);
  const Eigen::Vector2d lambda{(normal(1, 1) * rhs(0) - normal(0, 1) * rhs(1)) / det,
                               (normal(0, 0) * rhs(1) - normal(1, 0) * rhs(0)) / det};

  if (!(lambda(0) > 0.0) || !(lambda(1) > 0.0))
    throw Error(ErrorKind::BehindCamera, "sphere center lies behind a camera");

  SphereEstimate est;
  est.lambda1 = lambda(0);
  est.lambda2 = lambda(1);
  est.residual = (a * lambda - b).norm();
  est.center_cam1 = a1 * lambda(0) + cam1.extrinsics.position;
  est.center_cam2 = a2 * lambda(1) + cam2.extrinsics.position;
  est.center = 0.5 * (est.center_cam1 + est.center_cam2);

  auto radius_from = [](const CameraIntrinsics& k, const NormalizedBBox& box, double lam, const Vec3& d) {
    const double w = (box.u_max - box.u_min) * k.width;
    const double h = (box.v_max - box.v_min) * k.height;
    const double s = 0.25 * (w + h);
    return s * lam * d.norm() / k.mean_focal();
  };
  est.radius_cam1 = radius_from(cam1.intrinsics, bbox1, lambda(0), d1);
  est.radius_cam2 = radius_from(cam2.intrinsics, bbox2, lambda(1), d2);
  est.radius = 0.5 * (est.radius_cam1 + est.radius_cam2);
  return est;
}

CameraExtrinsics look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) right = forward.cross(Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right);
  CameraExtrinsics ext;
  ext.rotation.row(0) = right.transpose();
  ext.rotation.row(1) = down.transpose();
  ext.rotation.row(2) = forward.transpose();
  ext.position = eye;
  return ext;
}

}  // namespace manibox::geometry
