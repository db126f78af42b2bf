#include "manibox/reward.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "manibox/error.hpp"

namespace manibox::reward {
namespace {

double indicator(bool b) { return b ? 1.0 : 0.0; }

void check_finite(const RewardContext& c) {
  const bool ok = c.p_obj.allFinite() && std::isfinite(c.z_init) && c.p_ee.allFinite() && c.p_goal.allFinite() &&
                  std::isfinite(c.finger_pos[0]) && std::isfinite(c.finger_pos[1]) && c.p_top.allFinite() &&
                  c.p_bottom.allFinite() && c.p_left.allFinite() && c.p_right.allFinite() &&
                  std::isfinite(c.grasp_force) && c.action_t.allFinite() && c.action_prev.allFinite() &&
                  c.joint_vel.allFinite() && c.org_vec.allFinite();
  if (!ok) throw Error(ErrorKind::NonFinite, "reward context");
}

}  // namespace

RewardVector reward_terms(const RewardContext& c, const RewardConstants& k) {
  check_finite(c);
  if (c.action_t.size() != c.action_prev.size())
    throw Error(ErrorKind::ShapeMismatch, "action_t and action_prev differ in length");

  RewardVector r{};
  const double reach = (c.p_obj - c.p_ee).norm();
  const double finger_sum = c.finger_pos[0] + c.finger_pos[1];
  const double lift = c.p_obj.z() - c.z_init - k.h_min;
  const double lifted = indicator(c.p_obj.z() > c.z_init + k.h_min);
  const double goal_dist = (c.p_goal - c.p_obj).norm();
  const double grasping = indicator(c.grasp_force > 0.5);

  r[kFingersOpen] = std::tanh(reach / k.sigma_fingers_open) * finger_sum;
  r[kReachingObject] =
      (1.0 - std::tanh(reach / k.sigma_reaching)) + (1.0 - std::tanh(reach / (k.sigma_reaching / 4.0)));
  r[kGoalTracking] = lifted * (1.0 - std::tanh(goal_dist / k.sigma_goal));
  r[kGoalTrackingFine] = lifted * (1.0 - std::tanh(goal_dist / k.sigma_goal_fine));
  r[kActionRate] = -(c.action_t - c.action_prev).squaredNorm();
  r[kJointVel] = -c.joint_vel.squaredNorm();

  // Contact term: object between the fingers, close to the finger axis, near
  // the top finger, and the finger pair aligned with the object y axis.
  const Vec3 across = c.p_right - c.p_left;
  const double finger_dist = across.norm();
  double contact = 0.0;
  if (finger_dist > 0.0) {
    const double proj_len = (c.p_obj - c.p_left).dot(across) / finger_dist;
    const double between = indicator(finger_dist / 4.0 < proj_len && proj_len < finger_dist / 1.25 + 0.2);
    const double object_dist =
        (c.p_obj - c.p_bottom).cross(c.p_top - c.p_bottom).norm() / k.object_dist_scale;
    const double near_top = indicator((c.p_obj - c.p_top).norm() < k.top_proximity);
    const double aligned = 1.0 - std::tanh((c.org_vec - Vec3::UnitY()).norm() / k.alignment_sigma);
    contact = between * (1.2 - std::tanh(object_dist / 0.2)) * near_top * aligned;
  }
  r[kContactForces] = contact;

  r[kCloseFingers] = grasping * (1.0 - std::tanh(finger_sum / 0.1));
  r[kLiftEe] = std::clamp(c.p_ee.z() - k.lift_ee_base, 0.0, k.lift_ee_span) / k.lift_ee_span * grasping;
  r[kLiftObject] = lifted * std::clamp(lift, 0.0, k.lift_object_span) / k.lift_object_span;
  return r;
}

double total_reward(const RewardVector& terms, const RewardWeights& weights) {
  double total = 0.0;
  for (std::size_t i = 0; i < kNumTerms; ++i) total += terms[i] * weights.w[i];
  return total;
}

}  // namespace manibox::reward
