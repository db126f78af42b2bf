#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Core>

#include "manibox/gripworld.hpp"
#include "manibox/observe.hpp"

namespace manibox {

/// Maps (true state, observed policy input) to an action. Student policies
/// only look at the input; the scripted expert only at the state. A
/// controller is stateful across one episode and must not be shared between
/// concurrent rollouts.
using Controller =
    std::function<gripworld::EnvAction(const gripworld::EnvState&, const Eigen::VectorXd& input)>;

Controller teacher_controller(const gripworld::WorldConfig& world = {});

struct RolloutOptions {
  int horizon = 70;
  observe::FailureModel failure{};
  observe::CameraRig rig{};
  gripworld::WorldConfig world{};
};

/// Resets with `seed`, then runs `horizon` steps recording the (failure
/// applied) observation, proprio, action and reward terms of every step.
gripworld::Episode rollout(const gripworld::RangeConfig& cfg, const Controller& controller, std::uint64_t seed,
                           const RolloutOptions& options = {});

}  // namespace manibox
