#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include <Eigen/Core>

namespace manibox::reward {

using Vec3 = Eigen::Vector3d;

inline constexpr std::size_t kNumTerms = 10;

enum Term : std::size_t {
  kFingersOpen = 0,
  kReachingObject,
  kGoalTracking,
  kGoalTrackingFine,
  kActionRate,
  kJointVel,
  kContactForces,
  kCloseFingers,
  kLiftEe,
  kLiftObject,
};

inline constexpr std::array<std::string_view, kNumTerms> kTermNames = {
    "fingers_open", "reaching_object", "goal_tracking", "goal_tracking_fine", "action_rate",
    "joint_vel",    "contact_forces",  "close_fingers", "lift_ee",            "lift_object"};

/// One scalar per term, in `Term` order.
using RewardVector = std::array<double, kNumTerms>;

struct RewardWeights {
  RewardVector w = {5.0, 15.0, 80.0, 70.0, -1e-4, -1e-4, 10.0, 100.0, 20.0, 100.0};
};

/// Shaping constants. Distances in meters.
struct RewardConstants {
  double sigma_fingers_open = 0.1;
  double sigma_reaching = 0.2;  // the second reaching term uses sigma / 4
  double sigma_goal = 0.3;
  double sigma_goal_fine = 0.05;
  double h_min = 0.02;
  double lift_ee_base = 0.6;  // absolute world height
  double lift_ee_span = 0.3;
  double lift_object_span = 0.2;
  double object_dist_scale = 0.11;
  double top_proximity = 0.1;
  double alignment_sigma = 0.3;
};

struct RewardContext {
  Vec3 p_obj = Vec3::Zero();
  double z_init = 0.0;
  Vec3 p_ee = Vec3::Zero();
  Vec3 p_goal = Vec3::Zero();
  std::array<double, 2> finger_pos = {0.0, 0.0};
  Vec3 p_top = Vec3::Zero();
  Vec3 p_bottom = Vec3::Zero();
  Vec3 p_left = Vec3::Zero();
  Vec3 p_right = Vec3::Zero();
  double grasp_force = 0.0;
  Eigen::VectorXd action_t;
  Eigen::VectorXd action_prev;
  Eigen::VectorXd joint_vel;
  Vec3 org_vec = Vec3::Zero();  // left - right, in the object frame
};

/// Evaluates all ten shaping terms. Throws NonFinite on NaN/Inf inputs.
RewardVector reward_terms(const RewardContext& ctx, const RewardConstants& k = {});

double total_reward(const RewardVector& terms, const RewardWeights& weights = {});

}  // namespace manibox::reward
