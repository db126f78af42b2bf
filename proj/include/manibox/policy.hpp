#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "manibox/gripworld.hpp"
#include "manibox/observe.hpp"
#include "manibox/random.hpp"
#include "manibox/rollout.hpp"

namespace manibox::policy {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PolicyConfig {
  int input_dim = observe::kInputDim;
  int action_dim = gripworld::kActionDim;
  int vis_dim = observe::kVisDim;  // leading input entries subject to random masking
  int rnn_layers = 2;
  int rnn_hidden = 64;
  int actor_hidden = 64;
  double dropout_p = 0.1;
  double lr = 0.002;
  double weight_decay = 1e-4;
  int epochs = 50;
  double warmup_ratio = 0.1;
  double random_mask_ratio = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Where one weight tensor lives in the flat parameter vector (column-major).
struct TensorSlot {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Index offset = 0;
  Index size() const { return rows * cols; }
};

/// All weights in one flat vector so the optimizer, gradient checks and the
/// on-disk format can treat them uniformly.
///
/// Per LSTM layer l: w_ih (4H x in_l), w_hh (4H x H), bias (4H), gate order
/// [input, forget, cell, output]. Then fc1 (A x H, A) and fc2 (act x A, act).
class PolicyParams {
 public:
  PolicyParams() = default;
  explicit PolicyParams(const PolicyConfig& cfg);  // zero-initialized

  static PolicyParams random_init(const PolicyConfig& cfg, Rng& rng);

  const PolicyConfig& config() const { return cfg_; }
  const std::vector<TensorSlot>& slots() const { return slots_; }
  const TensorSlot& slot(const std::string& name) const;

  VectorXd& flat() { return flat_; }
  const VectorXd& flat() const { return flat_; }

  Eigen::Map<const MatrixXd> tensor(const TensorSlot& s) const { return {flat_.data() + s.offset, s.rows, s.cols}; }
  Eigen::Map<MatrixXd> tensor(const TensorSlot& s) { return {flat_.data() + s.offset, s.rows, s.cols}; }

  const TensorSlot& w_ih(int layer) const { return slots_[3 * layer]; }
  const TensorSlot& w_hh(int layer) const { return slots_[3 * layer + 1]; }
  const TensorSlot& bias(int layer) const { return slots_[3 * layer + 2]; }
  const TensorSlot& fc1_w() const { return slots_[slots_.size() - 4]; }
  const TensorSlot& fc1_b() const { return slots_[slots_.size() - 3]; }
  const TensorSlot& fc2_w() const { return slots_[slots_.size() - 2]; }
  const TensorSlot& fc2_b() const { return slots_[slots_.size() - 1]; }

 private:
  PolicyConfig cfg_;
  std::vector<TensorSlot> slots_;
  VectorXd flat_;
};

struct LstmState {
  std::vector<VectorXd> h;
  std::vector<VectorXd> c;

  static LstmState zeros(const PolicyConfig& cfg);
};

enum class Mode { Train, Eval };

double gelu(double x);
double gelu_grad(double x);

/// One recurrent step. Dropout only in Train mode (inverted, scale 1/(1-p)).
VectorXd policy_step(const PolicyParams& params, const VectorXd& input, LstmState& state, Mode mode, Rng& rng);

/// Folds policy_step over the sequence from a zero state.
std::vector<VectorXd> policy_forward(const PolicyParams& params, const std::vector<VectorXd>& inputs, Mode mode,
                                     Rng& rng);

/// One training sequence: inputs (input_dim x T) and target actions (action_dim x T).
struct Sequence {
  MatrixXd inputs;
  MatrixXd targets;
};

Sequence episode_sequence(const gripworld::Episode& episode);

/// Whole-sequence forward pass (same math as policy_step, batched over time
/// with matrix products). Returns outputs as action_dim x T.
MatrixXd sequence_forward(const PolicyParams& params, const MatrixXd& inputs, const MatrixXd* dropout_scale = nullptr);

/// Mean L1 loss of one sequence and, if `grad` is non-null, its gradient
/// (backpropagation through time; L1 subgradient is 0 at ties). `dropout_scale`
/// holds per-unit multipliers for the actor hidden layer (actor_hidden x T).
double sequence_loss(const PolicyParams& params, const Sequence& seq, VectorXd* grad = nullptr,
                     const MatrixXd* dropout_scale = nullptr);

struct TrainResult {
  PolicyParams params;
  std::vector<double> loss_history;  // mean per-episode training loss per epoch
};

/// Behavior cloning: per episode (shuffled each epoch) mask the vis inputs,
/// forward in train mode, L1 loss, BPTT, AdamW step with a warmup + cosine
/// learning-rate schedule. Deterministic for a given rng state.
TrainResult bc_train(const PolicyParams& init, const std::vector<gripworld::Episode>& dataset, const PolicyConfig& cfg,
                     Rng& rng);

/// Learning rate for update `u` of `total`.
double scheduled_lr(const PolicyConfig& cfg, std::int64_t u, std::int64_t total);

/// Mean eval-mode L1 loss over a dataset (no masking).
double dataset_loss(const PolicyParams& params, const std::vector<gripworld::Episode>& dataset);

struct GradCheckOptions {
  double epsilon = 1e-5;
  int min_params = 200;
  std::uint64_t seed = 0;
  // Multiplies the analytic fc2 gradient; anything but 1 is a fault injection.
  double fc2_grad_scale = 1.0;
};

/// Max relative error |g_a - g_n| / (|g_a| + |g_n| + 1e-12) between the
/// analytic gradient and central differences over a parameter subset (all
/// parameters when there are few).
double grad_check(const PolicyParams& params, const std::vector<Sequence>& batch, const GradCheckOptions& opts = {});

/// Episode controller driving the network in eval mode.
Controller student_controller(const PolicyParams& params);

/// Success fraction over `n_episodes` rollouts with derived per-episode seeds.
double evaluate(const PolicyParams& params, const gripworld::RangeConfig& range, const observe::FailureModel& failure,
                int n_episodes, std::uint64_t seed, const RolloutOptions& base = {});

/// Same protocol for an arbitrary controller factory (e.g. the scripted expert).
double evaluate_controller(const std::function<Controller()>& factory, const gripworld::RangeConfig& range,
                           const observe::FailureModel& failure, int n_episodes, std::uint64_t seed,
                           const RolloutOptions& base = {});

}  // namespace manibox::policy
