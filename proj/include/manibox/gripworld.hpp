#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "manibox/reward.hpp"

namespace manibox::gripworld {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

using Interval = std::pair<double, double>;

/// Per-episode randomization ranges (offsets from the nominal anchors, meters).
struct RangeConfig {
  std::string name;
  Interval table_z_offset{0.0, 0.0};
  Interval obj_x_offset{0.0, 0.0};
  Interval obj_y_offset{0.0, 0.0};
  Interval radius_range{0.0345, 0.037};

  void validate() const;
};

/// Built-in presets in increasing spatial extent.
std::vector<RangeConfig> preset_ranges();
/// Looks up a preset by name ("FixPoint", "5cm", "10cm", "20cm", "FullSpace").
RangeConfig preset_range(const std::string& name);
/// Nominal spatial volume of a preset in cm^3 (0 for FixPoint).
double preset_volume_cm3(const std::string& name);

/// Frozen scene constants. Anchors, goal and home pose are arbitrary but fixed.
struct WorldConfig {
  double z0 = 0.75;
  double x0 = 0.0;
  double y0 = 0.45;
  Vec3 goal{0.0, 0.25, 1.0};
  Vec3 home_ee{-0.07, 0.55, 1.0};
  double home_aperture = 0.0;
  double max_step = 0.02;       // per-component eef displacement per step
  double aperture_rate = 0.02;  // per step
  double aperture_max = 0.08;
  double grasp_distance = 0.03;
  Vec3 grasp_offset = Vec3::Zero();
  double finger_length = 0.11;
  double dt = 1.0 / 30.0;
  int horizon = 70;
  // Scripted expert.
  double pregrasp_clearance = 0.08;
  double lift_height = 0.15;
  double waypoint_tolerance = 1e-3;
  // Success proxy.
  double success_lift = 0.02;
  double success_goal_distance = 0.05;
};

struct EnvState {
  Vec3 p_obj = Vec3::Zero();
  double obj_radius = 0.0;
  double z_init = 0.0;
  double table_z = 0.0;
  Vec3 p_ee = Vec3::Zero();
  double aperture = 0.0;
  bool grasped = false;
  int step_index = 0;
  Vec4 last_action = Vec4::Zero();
  Vec3 p_goal = Vec3::Zero();

  bool operator==(const EnvState&) const = default;
};

struct EnvAction {
  Vec3 delta_ee = Vec3::Zero();
  double aperture_cmd = 0.0;

  Vec4 to_vector() const { return {delta_ee.x(), delta_ee.y(), delta_ee.z(), aperture_cmd}; }
  static EnvAction from_vector(const Eigen::Ref<const Eigen::VectorXd>& v);
};

inline constexpr int kActionDim = 4;
inline constexpr int kProprioDim = 4;

EnvState reset(const RangeConfig& cfg, std::uint64_t seed, const WorldConfig& world = {});
EnvState step(const EnvState& state, const EnvAction& action, const WorldConfig& world = {});
EnvAction scripted_teacher(const EnvState& state, const WorldConfig& world = {});

/// Reward context for the transition prev --action--> next.
reward::RewardContext reward_context(const EnvState& prev, const EnvState& next, const WorldConfig& world = {});

struct StepRecord {
  Eigen::VectorXd obs;
  Eigen::VectorXd proprio;
  Eigen::VectorXd action;
  reward::RewardVector reward{};
};

/// Simulator-side facts about the state after each step; not persisted.
struct StepTrace {
  Vec3 p_obj = Vec3::Zero();
  bool grasped = false;
};

struct EpisodeMeta {
  std::string range;
  std::uint64_t seed = 0;
  bool success = false;
  int horizon = 0;
  int obs_dim = 0;
  int proprio_dim = kProprioDim;
  int action_dim = kActionDim;
};

struct Episode {
  EpisodeMeta meta;
  std::vector<StepRecord> steps;
  std::vector<StepTrace> trace;  // empty for episodes read back from disk
  double z_init = 0.0;
  Vec3 p_goal = Vec3::Zero();
};

/// Lifted while grasped at some step, and within the goal radius at the end.
/// Episodes without a simulator trace fall back to the stored flag.
bool is_success(const Episode& episode, const WorldConfig& world = {});

}  // namespace manibox::gripworld
