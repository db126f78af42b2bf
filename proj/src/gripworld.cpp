#include "manibox/gripworld.hpp"

#include <algorithm>
#include <cmath>

#include "manibox/error.hpp"
#include "manibox/random.hpp"

namespace manibox::gripworld {

void RangeConfig::validate() const {
  for (const auto& [lo, hi] : {table_z_offset, obj_x_offset, obj_y_offset, radius_range})
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo <= hi))
      throw Error(ErrorKind::InvalidArgument, "range '" + name + "' has an interval with lo > hi");
  if (!(radius_range.first > 0.0)) throw Error(ErrorKind::InvalidArgument, "object radius must be positive");
}

std::vector<RangeConfig> preset_ranges() {
  return {
      {"FixPoint", {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}},
      {"5cm", {-0.025, 0.025}, {-0.025, 0.025}, {-0.025, 0.025}},
      {"10cm", {-0.07, 0.03}, {-0.05, 0.05}, {-0.05, 0.05}},
      {"20cm", {-0.1, 0.1}, {-0.1, 0.1}, {-0.05, 0.15}},
      {"FullSpace", {-0.13, 0.15}, {-0.22, 0.08}, {-0.05, 0.36}},
  };
}

RangeConfig preset_range(const std::string& name) {
  for (auto& r : preset_ranges())
    if (r.name == name) return r;
  throw Error(ErrorKind::InvalidArgument, "unknown range preset '" + name + "'");
}

double preset_volume_cm3(const std::string& name) {
  if (name == "FixPoint") return 0.0;
  if (name == "5cm") return 125.0;
  if (name == "10cm") return 1000.0;
  if (name == "20cm") return 8000.0;
  if (name == "FullSpace") return 41.0 * 30.0 * 28.0;
  throw Error(ErrorKind::InvalidArgument, "unknown range preset '" + name + "'");
}

EnvAction EnvAction::from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != kActionDim) throw Error(ErrorKind::ShapeMismatch, "action vector must have 4 entries");
  return {Vec3(v(0), v(1), v(2)), v(3)};
}

EnvState reset(const RangeConfig& cfg, std::uint64_t seed, const WorldConfig& world) {
  cfg.validate();
  Rng rng(seed);
  EnvState s;
  s.table_z = world.z0 + uniform(rng, cfg.table_z_offset.first, cfg.table_z_offset.second);
  const double x = world.x0 + uniform(rng, cfg.obj_x_offset.first, cfg.obj_x_offset.second);
  const double y = world.y0 + uniform(rng, cfg.obj_y_offset.first, cfg.obj_y_offset.second);
  s.obj_radius = uniform(rng, cfg.radius_range.first, cfg.radius_range.second);
  s.p_obj = Vec3(x, y, s.table_z + s.obj_radius);
  s.z_init = s.p_obj.z();
  s.p_ee = world.home_ee;
  s.aperture = world.home_aperture;
  s.p_goal = world.goal;
  return s;
}

EnvState step(const EnvState& state, const EnvAction& action, const WorldConfig& world) {
  if (!action.delta_ee.allFinite() || !std::isfinite(action.aperture_cmd))
    throw Error(ErrorKind::NonFinite, "action");

  EnvState next = state;
  const Vec3 delta = action.delta_ee.cwiseMax(-world.max_step).cwiseMin(world.max_step);
  next.p_ee += delta;

  const double target = std::clamp(action.aperture_cmd, 0.0, world.aperture_max);
  next.aperture += std::clamp(target - state.aperture, -world.aperture_rate, world.aperture_rate);
  next.aperture = std::clamp(next.aperture, 0.0, world.aperture_max);

  const double grip_width = 2.0 * state.obj_radius;
  if (next.grasped && next.aperture >= grip_width) {
    next.grasped = false;
    next.p_obj = next.p_ee + world.grasp_offset;
    next.p_obj.z() = next.table_z + next.obj_radius;
  }
  if (!next.grasped && (next.p_ee - next.p_obj).norm() < world.grasp_distance && next.aperture < grip_width)
    next.grasped = true;
  if (next.grasped) next.p_obj = next.p_ee + world.grasp_offset;

  next.step_index += 1;
  next.last_action = action.to_vector();
  return next;
}

EnvAction scripted_teacher(const EnvState& s, const WorldConfig& world) {
  Vec3 target_ee;
  double aperture_cmd = 0.0;
  if (s.grasped) {
    // Lift first; the cap at goal height keeps lift and transport from fighting.
    const double lift_z = std::min(s.z_init + world.lift_height, s.p_goal.z());
    if (s.p_obj.z() < lift_z - 1e-9)
      target_ee = Vec3(s.p_ee.x(), s.p_ee.y(), lift_z - world.grasp_offset.z());
    else
      target_ee = s.p_goal - world.grasp_offset;
  } else {
    const Vec3 grasp_ee = s.p_obj - world.grasp_offset;
    const double xy_err = (s.p_ee - grasp_ee).head<2>().norm();
    if (xy_err > world.waypoint_tolerance) {
      target_ee = grasp_ee + Vec3(0.0, 0.0, world.pregrasp_clearance);
      aperture_cmd = world.aperture_max;
    } else if ((s.p_ee - grasp_ee).norm() > world.waypoint_tolerance) {
      target_ee = grasp_ee;
      aperture_cmd = world.aperture_max;
    } else {
      target_ee = s.p_ee;
      aperture_cmd = 0.0;
    }
  }
  const Vec3 delta = (target_ee - s.p_ee).cwiseMax(-world.max_step).cwiseMin(world.max_step);
  return {delta, aperture_cmd};
}

reward::RewardContext reward_context(const EnvState& prev, const EnvState& next, const WorldConfig& world) {
  reward::RewardContext c;
  c.p_obj = next.p_obj;
  c.z_init = next.z_init;
  c.p_ee = next.p_ee;
  c.p_goal = next.p_goal;
  c.finger_pos = {0.5 * next.aperture, 0.5 * next.aperture};
  // Fingers open along world y; the approach axis is world -z.
  const Vec3 half_open(0.0, 0.5 * next.aperture, 0.0);
  const Vec3 half_length(0.0, 0.0, 0.5 * world.finger_length);
  c.p_left = next.p_ee + half_open;
  c.p_right = next.p_ee - half_open;
  c.p_top = next.p_ee + half_length;
  c.p_bottom = next.p_ee - half_length;
  c.grasp_force = next.grasped ? 1.0 : 0.0;
  c.action_t = next.last_action;
  c.action_prev = prev.last_action;
  Vec4 vel;
  vel.head<3>() = (next.p_ee - prev.p_ee) / world.dt;
  vel(3) = (next.aperture - prev.aperture) / world.dt;
  c.joint_vel = vel;
  c.org_vec = c.p_left - c.p_right;  // object frame is the world frame for a sphere
  return c;
}

bool is_success(const Episode& episode, const WorldConfig& world) {
  if (episode.trace.empty()) return episode.meta.success;
  const bool lifted = std::any_of(episode.trace.begin(), episode.trace.end(), [&](const StepTrace& t) {
    return t.grasped && t.p_obj.z() > episode.z_init + world.success_lift;
  });
  return lifted && (episode.trace.back().p_obj - episode.p_goal).norm() < world.success_goal_distance;
}

}  // namespace manibox::gripworld
