#include "manibox/rollout.hpp"

#include "manibox/error.hpp"
#include "manibox/random.hpp"

namespace manibox {

Controller teacher_controller(const gripworld::WorldConfig& world) {
  return [world](const gripworld::EnvState& s, const Eigen::VectorXd&) { return gripworld::scripted_teacher(s, world); };
}

gripworld::Episode rollout(const gripworld::RangeConfig& cfg, const Controller& controller, std::uint64_t seed,
                           const RolloutOptions& options) {
  if (options.horizon < 1) throw Error(ErrorKind::InvalidArgument, "horizon must be at least 1");
  options.failure.validate();

  Rng failure_rng(derive_seed(seed, {1}));
  gripworld::EnvState state = gripworld::reset(cfg, derive_seed(seed, {0}), options.world);

  gripworld::Episode ep;
  ep.meta.range = cfg.name;
  ep.meta.seed = seed;
  ep.meta.horizon = options.horizon;
  ep.meta.obs_dim = observe::kVisDim;
  ep.z_init = state.z_init;
  ep.p_goal = state.p_goal;
  ep.steps.reserve(options.horizon);
  ep.trace.reserve(options.horizon);

  for (int t = 0; t < options.horizon; ++t) {
    auto obs = observe::assemble_observation(state, observe::render_bboxes(options.rig, state));
    observe::apply_failures({obs.vis.data(), static_cast<std::size_t>(obs.vis.size())}, options.failure,
                            failure_rng);
    const gripworld::EnvAction action = controller(state, obs.flat());
    const gripworld::EnvState next = gripworld::step(state, action, options.world);

    gripworld::StepRecord rec;
    rec.obs = std::move(obs.vis);
    rec.proprio = std::move(obs.proprio);
    rec.action = action.to_vector();
    rec.reward = reward::reward_terms(gripworld::reward_context(state, next, options.world));
    ep.steps.push_back(std::move(rec));
    ep.trace.push_back({next.p_obj, next.grasped});
    state = next;
  }
  ep.meta.success = gripworld::is_success(ep, options.world);
  return ep;
}

}  // namespace manibox
