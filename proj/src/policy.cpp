#include "manibox/policy.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "manibox/error.hpp"

namespace manibox::policy {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require(bool ok, ErrorKind kind, const char* what) {
  if (!ok) throw Error(kind, what);
}

// Applies the gate nonlinearities in place to a 4H pre-activation block.
template <typename Block>
void activate_gates(Block&& g, Index hidden) {
  for (Index j = 0; j < hidden; ++j) g(j) = sigmoid(g(j));
  for (Index j = hidden; j < 2 * hidden; ++j) g(j) = sigmoid(g(j));
  for (Index j = 2 * hidden; j < 3 * hidden; ++j) g(j) = std::tanh(g(j));
  for (Index j = 3 * hidden; j < 4 * hidden; ++j) g(j) = sigmoid(g(j));
}

// Activations kept for the backward pass of one layer.
struct LayerCache {
  MatrixXd gates;  // activated, 4H x T
  MatrixXd cell;   // H x T
  MatrixXd tanh_cell;
  MatrixXd hidden;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  MatrixXd fc1_pre;  // A x T
  MatrixXd actor;    // after gelu and dropout
  MatrixXd outputs;  // act x T
};

void forward_cached(const PolicyParams& p, const MatrixXd& inputs, const MatrixXd* dropout, ForwardCache& fc) {
  const auto& cfg = p.config();
  const Index T = inputs.cols();
  const Index H = cfg.rnn_hidden;
  fc.layers.resize(cfg.rnn_layers);

  const MatrixXd* layer_in = &inputs;
  for (int l = 0; l < cfg.rnn_layers; ++l) {
    LayerCache& lc = fc.layers[l];
    const auto w_ih = p.tensor(p.w_ih(l));
    const auto w_hh = p.tensor(p.w_hh(l));
    const auto b = p.tensor(p.bias(l));
    lc.gates.noalias() = w_ih * (*layer_in);
    lc.gates.colwise() += b.col(0);
    lc.cell.resize(H, T);
    lc.tanh_cell.resize(H, T);
    lc.hidden.resize(H, T);
    for (Index t = 0; t < T; ++t) {
      auto g = lc.gates.col(t);
      if (t > 0) g.noalias() += w_hh * lc.hidden.col(t - 1);
      activate_gates(g, H);
      if (t > 0)
        lc.cell.col(t) = g.segment(H, H).cwiseProduct(lc.cell.col(t - 1)) + g.head(H).cwiseProduct(g.segment(2 * H, H));
      else
        lc.cell.col(t) = g.head(H).cwiseProduct(g.segment(2 * H, H));
      lc.tanh_cell.col(t) = lc.cell.col(t).array().tanh();
      lc.hidden.col(t) = g.segment(3 * H, H).cwiseProduct(lc.tanh_cell.col(t));
    }
    layer_in = &lc.hidden;
  }

  const auto w1 = p.tensor(p.fc1_w());
  const auto b1 = p.tensor(p.fc1_b());
  const auto w2 = p.tensor(p.fc2_w());
  const auto b2 = p.tensor(p.fc2_b());
  fc.fc1_pre.noalias() = w1 * (*layer_in);
  fc.fc1_pre.colwise() += b1.col(0);
  fc.actor = fc.fc1_pre.unaryExpr([](double x) { return gelu(x); });
  if (dropout) fc.actor.array() *= dropout->array();
  fc.outputs.noalias() = w2 * fc.actor;
  fc.outputs.colwise() += b2.col(0);
}

void check_sequence(const PolicyConfig& cfg, const Sequence& seq) {
  require(seq.inputs.rows() == cfg.input_dim, ErrorKind::ShapeMismatch, "input rows differ from input_dim");
  require(seq.targets.rows() == cfg.action_dim, ErrorKind::ShapeMismatch, "target rows differ from action_dim");
  require(seq.inputs.cols() == seq.targets.cols(), ErrorKind::ShapeMismatch, "inputs and targets differ in length");
}

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void PolicyConfig::validate() const {
  require(input_dim >= 1 && action_dim >= 1 && rnn_layers >= 1 && rnn_hidden >= 1 && actor_hidden >= 1,
          ErrorKind::InvalidArgument, "policy dimensions must be >= 1");
  require(vis_dim >= 0 && vis_dim <= input_dim && vis_dim % 4 == 0, ErrorKind::InvalidArgument,
          "vis_dim must be a multiple of 4 within input_dim");
  require(dropout_p >= 0.0 && dropout_p < 1.0, ErrorKind::InvalidArgument, "dropout must lie in [0, 1)");
  require(random_mask_ratio >= 0.0 && random_mask_ratio <= 1.0, ErrorKind::InvalidArgument,
          "random_mask_ratio must lie in [0, 1]");
  require(epochs >= 0 && lr >= 0.0 && weight_decay >= 0.0 && warmup_ratio >= 0.0 && warmup_ratio <= 1.0,
          ErrorKind::InvalidArgument, "invalid optimizer settings");
}

PolicyParams::PolicyParams(const PolicyConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  Index offset = 0;
  auto add = [&](std::string name, Index rows, Index cols) {
    slots_.push_back({std::move(name), rows, cols, offset});
    offset += rows * cols;
  };
  const Index H = cfg.rnn_hidden;
  for (int l = 0; l < cfg.rnn_layers; ++l) {
    const std::string prefix = "lstm" + std::to_string(l) + ".";
    add(prefix + "w_ih", 4 * H, l == 0 ? cfg.input_dim : H);
    add(prefix + "w_hh", 4 * H, H);
    add(prefix + "bias", 4 * H, 1);
  }
  add("fc1.w", cfg.actor_hidden, H);
  add("fc1.b", cfg.actor_hidden, 1);
  add("fc2.w", cfg.action_dim, cfg.actor_hidden);
  add("fc2.b", cfg.action_dim, 1);
  flat_ = VectorXd::Zero(offset);
}

PolicyParams PolicyParams::random_init(const PolicyConfig& cfg, Rng& rng) {
  PolicyParams p(cfg);
  // U(-1/sqrt(fan), 1/sqrt(fan)): hidden size for recurrent tensors, fan-in for the actor head.
  for (const auto& s : p.slots_) {
    const bool recurrent = s.name.rfind("lstm", 0) == 0;
    const double fan = recurrent ? cfg.rnn_hidden : (s.name == "fc1.w" || s.name == "fc1.b" ? cfg.rnn_hidden : cfg.actor_hidden);
    const double bound = 1.0 / std::sqrt(fan);
    for (Index i = 0; i < s.size(); ++i) p.flat_(s.offset + i) = uniform(rng, -bound, bound);
  }
  return p;
}

const TensorSlot& PolicyParams::slot(const std::string& name) const {
  for (const auto& s : slots_)
    if (s.name == name) return s;
  throw Error(ErrorKind::InvalidArgument, "no tensor named '" + name + "'");
}

LstmState LstmState::zeros(const PolicyConfig& cfg) {
  LstmState s;
  s.h.assign(cfg.rnn_layers, VectorXd::Zero(cfg.rnn_hidden));
  s.c.assign(cfg.rnn_layers, VectorXd::Zero(cfg.rnn_hidden));
  return s;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * M_2_SQRTPI * M_SQRT1_2;
  return cdf + x * pdf;
}

VectorXd policy_step(const PolicyParams& params, const VectorXd& input, LstmState& state, Mode mode, Rng& rng) {
  const auto& cfg = params.config();
  require(input.size() == cfg.input_dim, ErrorKind::ShapeMismatch, "input length differs from input_dim");
  require(input.allFinite(), ErrorKind::NonFinite, "policy input");
  require(static_cast<int>(state.h.size()) == cfg.rnn_layers && static_cast<int>(state.c.size()) == cfg.rnn_layers,
          ErrorKind::ShapeMismatch, "LSTM state has the wrong number of layers");

  const Index H = cfg.rnn_hidden;
  VectorXd x = input;
  VectorXd g(4 * H);
  for (int l = 0; l < cfg.rnn_layers; ++l) {
    g.noalias() = params.tensor(params.w_ih(l)) * x;
    g.noalias() += params.tensor(params.w_hh(l)) * state.h[l];
    g += params.tensor(params.bias(l)).col(0);
    activate_gates(g, H);
    state.c[l] = g.segment(H, H).cwiseProduct(state.c[l]) + g.head(H).cwiseProduct(g.segment(2 * H, H));
    state.h[l] = g.segment(3 * H, H).cwiseProduct(state.c[l].array().tanh().matrix());
    x = state.h[l];
  }
  VectorXd a = params.tensor(params.fc1_w()) * x + params.tensor(params.fc1_b()).col(0);
  a = a.unaryExpr([](double v) { return gelu(v); });
  if (mode == Mode::Train && cfg.dropout_p > 0.0) {
    const double keep_scale = 1.0 / (1.0 - cfg.dropout_p);
    for (Index j = 0; j < a.size(); ++j) a(j) *= bernoulli(rng, cfg.dropout_p) ? 0.0 : keep_scale;
  }
  VectorXd out = params.tensor(params.fc2_w()) * a + params.tensor(params.fc2_b()).col(0);
  require(out.allFinite(), ErrorKind::NonFinite, "policy output");
  return out;
}

std::vector<VectorXd> policy_forward(const PolicyParams& params, const std::vector<VectorXd>& inputs, Mode mode,
                                     Rng& rng) {
  LstmState state = LstmState::zeros(params.config());
  std::vector<VectorXd> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(policy_step(params, x, state, mode, rng));
  return out;
}

Sequence episode_sequence(const gripworld::Episode& episode) {
  const Index T = static_cast<Index>(episode.steps.size());
  if (T == 0) return {};
  const Index obs = episode.steps.front().obs.size();
  const Index pro = episode.steps.front().proprio.size();
  const Index act = episode.steps.front().action.size();
  Sequence seq{MatrixXd(obs + pro, T), MatrixXd(act, T)};
  for (Index t = 0; t < T; ++t) {
    const auto& s = episode.steps[t];
    require(s.obs.size() == obs && s.proprio.size() == pro && s.action.size() == act, ErrorKind::ShapeMismatch,
            "episode steps differ in dimension");
    seq.inputs.col(t) << s.obs, s.proprio;
    seq.targets.col(t) = s.action;
  }
  return seq;
}

MatrixXd sequence_forward(const PolicyParams& params, const MatrixXd& inputs, const MatrixXd* dropout_scale) {
  require(inputs.rows() == params.config().input_dim, ErrorKind::ShapeMismatch, "input rows differ from input_dim");
  ForwardCache fc;
  forward_cached(params, inputs, dropout_scale, fc);
  return std::move(fc.outputs);
}

double sequence_loss(const PolicyParams& params, const Sequence& seq, VectorXd* grad, const MatrixXd* dropout_scale) {
  const auto& cfg = params.config();
  check_sequence(cfg, seq);
  const Index T = seq.inputs.cols();
  if (grad) grad->setZero(params.flat().size());
  if (T == 0) return 0.0;

  ForwardCache fc;
  forward_cached(params, seq.inputs, dropout_scale, fc);
  const MatrixXd diff = fc.outputs - seq.targets;
  const double norm = 1.0 / static_cast<double>(T * cfg.action_dim);
  const double loss = diff.cwiseAbs().sum() * norm;
  if (!grad) return loss;

  auto& g = *grad;
  auto gview = [&](const TensorSlot& s) { return Eigen::Map<MatrixXd>(g.data() + s.offset, s.rows, s.cols); };
  const Index H = cfg.rnn_hidden;

  const MatrixXd d_out = diff.unaryExpr([&](double v) { return sign0(v) * norm; });
  gview(params.fc2_w()).noalias() = d_out * fc.actor.transpose();
  gview(params.fc2_b()) = d_out.rowwise().sum();

  MatrixXd d_pre = params.tensor(params.fc2_w()).transpose() * d_out;
  if (dropout_scale) d_pre.array() *= dropout_scale->array();
  d_pre.array() *= fc.fc1_pre.unaryExpr([](double x) { return gelu_grad(x); }).array();

  const MatrixXd& top = fc.layers.back().hidden;
  gview(params.fc1_w()).noalias() = d_pre * top.transpose();
  gview(params.fc1_b()) = d_pre.rowwise().sum();
  MatrixXd d_hidden = params.tensor(params.fc1_w()).transpose() * d_pre;

  MatrixXd d_gates(4 * H, T);
  VectorXd dh(H), dc(H), dh_next(H), dc_next(H);
  for (int l = cfg.rnn_layers - 1; l >= 0; --l) {
    const LayerCache& lc = fc.layers[l];
    const auto w_hh = params.tensor(params.w_hh(l));
    dh_next.setZero();
    dc_next.setZero();
    for (Index t = T - 1; t >= 0; --t) {
      const auto gate = lc.gates.col(t);
      const auto i = gate.head(H).array();
      const auto f = gate.segment(H, H).array();
      const auto cc = gate.segment(2 * H, H).array();
      const auto o = gate.segment(3 * H, H).array();
      const auto tc = lc.tanh_cell.col(t).array();

      dh = d_hidden.col(t) + dh_next;
      dc = (dh.array() * o * (1.0 - tc * tc)).matrix() + dc_next;
      auto dg = d_gates.col(t);
      dg.segment(3 * H, H) = (dh.array() * tc * o * (1.0 - o)).matrix();
      dg.head(H) = (dc.array() * cc * i * (1.0 - i)).matrix();
      if (t > 0)
        dg.segment(H, H) = (dc.array() * lc.cell.col(t - 1).array() * f * (1.0 - f)).matrix();
      else
        dg.segment(H, H).setZero();
      dg.segment(2 * H, H) = (dc.array() * i * (1.0 - cc * cc)).matrix();
      dc_next = (dc.array() * f).matrix();
      dh_next.noalias() = w_hh.transpose() * dg;
    }
    const MatrixXd& layer_in = l == 0 ? seq.inputs : fc.layers[l - 1].hidden;
    gview(params.w_ih(l)).noalias() = d_gates * layer_in.transpose();
    if (T > 1) gview(params.w_hh(l)).noalias() = d_gates.rightCols(T - 1) * lc.hidden.leftCols(T - 1).transpose();
    gview(params.bias(l)) = d_gates.rowwise().sum();
    if (l > 0) d_hidden.noalias() = params.tensor(params.w_ih(l)).transpose() * d_gates;
  }
  return loss;
}

double scheduled_lr(const PolicyConfig& cfg, std::int64_t u, std::int64_t total) {
  if (total <= 0) return cfg.lr;
  const auto warmup = static_cast<std::int64_t>(std::ceil(cfg.warmup_ratio * static_cast<double>(total)));
  if (u < warmup) return cfg.lr * static_cast<double>(u + 1) / static_cast<double>(warmup);
  const double progress =
      static_cast<double>(u - warmup) / static_cast<double>(std::max<std::int64_t>(1, total - warmup));
  return cfg.lr * 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, progress)));
}

TrainResult bc_train(const PolicyParams& init, const std::vector<gripworld::Episode>& dataset, const PolicyConfig& cfg,
                     Rng& rng) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "behavior cloning needs at least one episode");
  const auto& pc = init.config();
  require(pc.input_dim == cfg.input_dim && pc.action_dim == cfg.action_dim && pc.rnn_layers == cfg.rnn_layers &&
              pc.rnn_hidden == cfg.rnn_hidden && pc.actor_hidden == cfg.actor_hidden,
          ErrorKind::ShapeMismatch, "initial parameters do not match the training config");

  std::vector<Sequence> seqs;
  seqs.reserve(dataset.size());
  for (const auto& ep : dataset) {
    seqs.push_back(episode_sequence(ep));
    check_sequence(cfg, seqs.back());
  }

  TrainResult result{init, {}};
  // The training config (dropout, lr, ...) governs; dims were checked above.
  PolicyParams params(cfg);
  params.flat() = init.flat();

  const Index n = params.flat().size();
  VectorXd m = VectorXd::Zero(n), v = VectorXd::Zero(n), grad(n);
  const auto total = static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>(seqs.size());
  std::int64_t u = 0;
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  MatrixXd dropout;
  Sequence work;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      work = seqs[idx];
      const Index T = work.inputs.cols();
      if (cfg.vis_dim > 0)
        for (Index t = 0; t < T; ++t)
          observe::apply_mask({work.inputs.col(t).data(), static_cast<std::size_t>(cfg.vis_dim)}, cfg.random_mask_ratio,
                              rng);
      const MatrixXd* drop = nullptr;
      if (cfg.dropout_p > 0.0) {
        dropout.resize(cfg.actor_hidden, T);
        const double keep_scale = 1.0 / (1.0 - cfg.dropout_p);
        for (Index k = 0; k < dropout.size(); ++k)
          dropout.data()[k] = bernoulli(rng, cfg.dropout_p) ? 0.0 : keep_scale;
        drop = &dropout;
      }
      epoch_loss += sequence_loss(params, work, &grad, drop);

      const double lr = scheduled_lr(cfg, u, total);
      ++u;
      m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
      v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(u));
      const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(u));
      auto& p = params.flat();
      p.array() -= lr * ((m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEps) + cfg.weight_decay * p.array());
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(seqs.size()));
  }
  require(params.flat().allFinite(), ErrorKind::NonFinite, "training diverged");
  result.params = std::move(params);
  return result;
}

double dataset_loss(const PolicyParams& params, const std::vector<gripworld::Episode>& dataset) {
  if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "empty dataset");
  double total = 0.0;
  for (const auto& ep : dataset) total += sequence_loss(params, episode_sequence(ep));
  return total / static_cast<double>(dataset.size());
}

double grad_check(const PolicyParams& params, const std::vector<Sequence>& batch, const GradCheckOptions& opts) {
  if (batch.empty()) throw Error(ErrorKind::EmptyDataset, "gradient check needs at least one sequence");
  const Index n = params.flat().size();

  VectorXd analytic = VectorXd::Zero(n), g(n);
  std::vector<MatrixXd> signs;
  for (const auto& seq : batch) {
    sequence_loss(params, seq, &g);
    analytic += g;
    signs.push_back((sequence_forward(params, seq.inputs) - seq.targets).unaryExpr([](double d) { return sign0(d); }));
  }
  analytic /= static_cast<double>(batch.size());
  const auto& fc2 = params.fc2_w();
  analytic.segment(fc2.offset, fc2.size()) *= opts.fc2_grad_scale;
  const auto& fc2b = params.fc2_b();
  analytic.segment(fc2b.offset, fc2b.size()) *= opts.fc2_grad_scale;

  // The L1 loss with residual signs frozen at the base point: identical to
  // the loss wherever no residual changes sign, and it encodes the 0-at-ties
  // subgradient convention exactly. Being linear in the outputs, its central
  // difference is taken on the outputs directly so the targets cancel exactly.
  auto frozen_difference = [&](const PolicyParams& up, const PolicyParams& down) {
    double total = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const MatrixXd delta = sequence_forward(up, batch[b].inputs) - sequence_forward(down, batch[b].inputs);
      total += (signs[b].array() * delta.array()).sum() / static_cast<double>(delta.size());
    }
    return total / static_cast<double>(batch.size());
  };

  std::vector<Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const Index all_threshold = std::max<Index>(5000, opts.min_params);
  if (n > all_threshold) {
    Rng rng(opts.seed);
    for (Index i = n - 1; i > 0; --i)
      std::swap(idx[i], idx[static_cast<Index>(uniform01(rng) * static_cast<double>(i + 1))]);
    idx.resize(static_cast<std::size_t>(std::max<Index>(opts.min_params, 1)));
    // Always cover the output layer.
    for (Index k = 0; k < fc2.size(); ++k) idx.push_back(fc2.offset + k);
  }

  PolicyParams up = params, down = params;
  double worst = 0.0;
  for (Index i : idx) {
    const double saved = params.flat()(i);
    up.flat()(i) = saved + opts.epsilon;
    down.flat()(i) = saved - opts.epsilon;
    const double numeric = frozen_difference(up, down) / (2.0 * opts.epsilon);
    up.flat()(i) = saved;
    down.flat()(i) = saved;
    const double err = std::abs(analytic(i) - numeric) / (std::abs(analytic(i)) + std::abs(numeric) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

Controller student_controller(const PolicyParams& params) {
  auto shared = std::make_shared<const PolicyParams>(params);
  auto state = std::make_shared<LstmState>(LstmState::zeros(params.config()));
  auto rng = std::make_shared<Rng>(0);
  return [shared, state, rng](const gripworld::EnvState&, const Eigen::VectorXd& input) {
    const VectorXd a = policy_step(*shared, input, *state, Mode::Eval, *rng);
    return gripworld::EnvAction::from_vector(a);
  };
}

double evaluate_controller(const std::function<Controller()>& factory, const gripworld::RangeConfig& range,
                           const observe::FailureModel& failure, int n_episodes, std::uint64_t seed,
                           const RolloutOptions& base) {
  if (n_episodes < 1) throw Error(ErrorKind::InvalidArgument, "n_episodes must be >= 1");
  RolloutOptions opts = base;
  opts.failure = failure;
  int successes = 0;
  for (int i = 0; i < n_episodes; ++i) {
    const auto ep = rollout(range, factory(), derive_seed(seed, {static_cast<std::uint64_t>(i)}), opts);
    successes += ep.meta.success ? 1 : 0;
  }
  return static_cast<double>(successes) / static_cast<double>(n_episodes);
}

double evaluate(const PolicyParams& params, const gripworld::RangeConfig& range, const observe::FailureModel& failure,
                int n_episodes, std::uint64_t seed, const RolloutOptions& base) {
  return evaluate_controller([&params] { return student_controller(params); }, range, failure, n_episodes, seed, base);
}

}  // namespace manibox::policy
