#include <doctest.h>

#include <cmath>

#include <Eigen/Geometry>

#include "manibox/error.hpp"
#include "manibox/geometry.hpp"
#include "manibox/random.hpp"

using namespace manibox;
using namespace manibox::geometry;

namespace {

CameraIntrinsics toy_k() { return {100.0, 100.0, 320.0, 240.0, 640.0, 480.0}; }

Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  return q.normalized().toRotationMatrix();
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("world_to_camera basics") {
  CameraExtrinsics e;
  CHECK(world_to_camera(e, Vec3(1, 2, 3)) == Vec3(1, 2, 3));
  e.position = Vec3(0, 0, -5);
  CHECK(world_to_camera(e, Vec3::Zero()) == Vec3(0, 0, 5));

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    e.rotation = random_rotation(rng);
    e.position = Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2));
    const Vec3 p(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2));
    CHECK((e.rotation.transpose() * world_to_camera(e, p) + e.position - p).norm() < 1e-12);
    CHECK((camera_to_world(e, world_to_camera(e, p)) - p).norm() < 1e-12);
  }
}

TEST_CASE("sphere_to_bbox hand values") {
  const auto b = sphere_to_bbox(toy_k(), {}, Vec3(0, 0, 5), 1.0);
  CHECK(b.u_min == doctest::Approx(300.0 / 640).epsilon(1e-15));
  CHECK(b.v_min == doctest::Approx(220.0 / 480).epsilon(1e-15));
  CHECK(b.u_max == doctest::Approx(340.0 / 640).epsilon(1e-15));
  CHECK(b.v_max == doctest::Approx(260.0 / 480).epsilon(1e-15));
  CHECK(sphere_to_bbox(toy_k(), {}, Vec3(0, 0, -5), 1.0).is_sentinel());
  // on axis but wider than the frame: s = 1000 * 2 / 5 = 400 px > 240
  CHECK(sphere_to_bbox({1000, 1000, 320, 240, 640, 480}, {}, Vec3(0, 0, 5), 2.0).is_sentinel());
}

TEST_CASE("bbox_center_ray directions") {
  const NormalizedBBox centered{310.0 / 640, 230.0 / 480, 330.0 / 640, 250.0 / 480};
  const Ray r0 = bbox_center_ray(toy_k(), {}, centered);
  CHECK((r0.direction - Vec3(0, 0, 1)).norm() < 1e-12);
  const NormalizedBBox right{410.0 / 640, 230.0 / 480, 430.0 / 640, 250.0 / 480};
  CHECK((bbox_center_ray(toy_k(), {}, right).direction - Vec3(1, 0, 1)).norm() < 1e-12);

  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    CameraIntrinsics k{uniform(rng, 200, 600), uniform(rng, 200, 600), uniform(rng, 300, 340), uniform(rng, 220, 260),
                       640, 480};
    CameraExtrinsics e{random_rotation(rng), Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1))};
    NormalizedBBox b{uniform(rng, 0.1, 0.4), uniform(rng, 0.1, 0.4), uniform(rng, 0.5, 0.9), uniform(rng, 0.5, 0.9)};
    const Vec3 pix(0.5 * (b.u_min + b.u_max) * 640, 0.5 * (b.v_min + b.v_max) * 480, 1.0);
    const Vec3 want = e.rotation.transpose() * (k.matrix().inverse() * pix);
    const Ray r = bbox_center_ray(k, e, b);
    CHECK((r.direction - want).norm() < 1e-12 * (1 + want.norm()));
    CHECK(r.origin == e.position);
  }
}

TEST_CASE("triangulation round trip and rigid invariance") {
  Rng rng(11);
  int done = 0;
  while (done < 500) {
    const Vec3 c(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
    const double r = uniform(rng, 0.02, 0.1);
    Camera a{"a", {400, 410, 320, 240, 640, 480}, {}}, b{"b", {380, 390, 320, 240, 640, 480}, {}};
    a.extrinsics = look_at(Vec3(1.5, 0.2, 0.3), c + Vec3(0.01, 0, 0));
    b.extrinsics = look_at(Vec3(-0.3, 1.4, 0.5), c - Vec3(0, 0.01, 0));
    const auto ba = sphere_to_bbox(a.intrinsics, a.extrinsics, c, r);
    const auto bb = sphere_to_bbox(b.intrinsics, b.extrinsics, c, r);
    if (ba.is_sentinel() || bb.is_sentinel()) continue;
    const auto est = triangulate_sphere(a, ba, b, bb);
    CHECK((est.center - c).norm() < 1e-9);
    CHECK(std::abs(est.radius - r) < 1e-9);

    // Same scene under one rigid motion.
    const Mat3 q = random_rotation(rng);
    const Vec3 s(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    Camera a2 = a, b2 = b;
    a2.extrinsics = {a.extrinsics.rotation * q.transpose(), q * a.extrinsics.position + s};
    b2.extrinsics = {b.extrinsics.rotation * q.transpose(), q * b.extrinsics.position + s};
    const auto est2 = triangulate_sphere(a2, ba, b2, bb);
    CHECK((est2.center - (q * est.center + s)).norm() < 1e-9);
    CHECK(std::abs(est2.radius - est.radius) < 1e-9);
    ++done;
  }
}

TEST_CASE("single-view radius identity") {
  // s = 20 px at f = 100, Z = 5 -> r = 1
  Camera a{"a", toy_k(), {}};
  Camera b{"b", toy_k(), look_at(Vec3(5, 0, 5), Vec3(0, 0, 5))};
  const auto ba = sphere_to_bbox(a.intrinsics, a.extrinsics, Vec3(0, 0, 5), 1.0);
  const auto bb = sphere_to_bbox(b.intrinsics, b.extrinsics, Vec3(0, 0, 5), 1.0);
  const auto est = triangulate_sphere(a, ba, b, bb);
  CHECK(est.radius_cam1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.lambda1 == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("triangulation errors") {
  Camera a{"a", toy_k(), look_at(Vec3(0, -2, 0), Vec3::Zero())};
  const auto box = sphere_to_bbox(a.intrinsics, a.extrinsics, Vec3::Zero(), 0.1);
  REQUIRE_FALSE(box.is_sentinel());

  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidArgument;
  };
  CHECK(kind_of([&] { triangulate_sphere(a, box, a, box); }) == ErrorKind::DegenerateConfiguration);
  CHECK(kind_of([&] { triangulate_sphere(a, NormalizedBBox::sentinel(), a, box); }) == ErrorKind::MaskedBBox);
  CHECK(kind_of([&] { triangulate_sphere(a, box, a, NormalizedBBox::sentinel()); }) == ErrorKind::MaskedBBox);
}

}  // TEST_SUITE
