#include "manibox/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "manibox/error.hpp"
#include "manibox/io.hpp"

namespace manibox::harness {
namespace {

using nlohmann::json;
using io::fmt_double;

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

geometry::Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::ParseError, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to(const geometry::Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json intrinsics_to(const geometry::CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

void intrinsics_from(const json& j, geometry::CameraIntrinsics& k) {
  read_field(j, "fx", k.fx);
  read_field(j, "fy", k.fy);
  read_field(j, "cx", k.cx);
  read_field(j, "cy", k.cy);
  read_field(j, "width", k.width);
  read_field(j, "height", k.height);
}

void log_line(const ExperimentConfig& cfg, const std::string& msg) {
  static std::mutex mu;
  if (!cfg.progress) return;
  std::lock_guard lock(mu);
  std::cerr << msg << std::endl;
}

std::uint64_t eval_seed(std::uint64_t seed, const std::string& range) {
  return derive_seed(seed, {name_hash(range), 2});
}

std::string join_path(const std::string& dir, const std::string& file) {
  return dir.empty() ? file : dir + "/" + file;
}

std::optional<scaling::FitResult> try_fit(scaling::Family family, const std::vector<scaling::Point>& pts,
                                          std::string& error) {
  try {
    return scaling::lm_fit(family, pts);
  } catch (const Error& e) {
    error = e.what();
    return std::nullopt;
  }
}

std::vector<scaling::Point> to_points(const std::vector<SweepRow>& rows) {
  std::vector<scaling::Point> pts;
  for (const auto& r : rows) pts.push_back({r.x, r.mean});
  return pts;
}

std::string status_name(scaling::FitStatus s) {
  switch (s) {
    case scaling::FitStatus::Converged: return "converged";
    case scaling::FitStatus::NonConvergence: return "non_convergence";
    case scaling::FitStatus::AtBound: return "at_bound";
  }
  return "unknown";
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidArgument, m); };
  if (ranges.empty() || volumes.empty() || seeds.empty() || mask_grid.empty() || noise_grid.empty())
    fail("experiment grids must be non-empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) fail("seeds must be distinct");
  for (const auto& r : ranges) gripworld::preset_range(r);
  gripworld::preset_range(robustness_range);
  gripworld::preset_range(keysteps_range);
  for (int v : volumes)
    if (v < 1) fail("data volumes must be >= 1");
  for (double m : mask_grid)
    if (!(m >= 0.0 && m <= 1.0)) fail("mask ratios must lie in [0, 1]");
  for (double n : noise_grid)
    if (!(n >= 0.0 && n <= 1.0)) fail("noise ratios must lie in [0, 1]");
  if (eval_episodes < 1) fail("eval_episodes must be >= 1");
  if (ablation_n_traj < 1) fail("ablation_n_traj must be >= 1");
  if (key_steps.empty()) fail("key_steps must be non-empty");
  for (int k : key_steps)
    if (k < 0) fail("key steps must be non-negative");
  if (threads < 0) fail("threads must be >= 0");
  policy.validate();
  rollout.failure.validate();
}

ExperimentConfig config_from_json_text(const std::string& text) {
  ExperimentConfig cfg;
  try {
    const json j = json::parse(text);
    read_field(j, "ranges", cfg.ranges);
    read_field(j, "volumes", cfg.volumes);
    read_field(j, "seeds", cfg.seeds);
    read_field(j, "mask_grid", cfg.mask_grid);
    read_field(j, "noise_grid", cfg.noise_grid);
    read_field(j, "eval_episodes", cfg.eval_episodes);
    read_field(j, "out_dir", cfg.out_dir);
    read_field(j, "ablation_n_traj", cfg.ablation_n_traj);
    read_field(j, "robustness_range", cfg.robustness_range);
    read_field(j, "keysteps_range", cfg.keysteps_range);
    read_field(j, "key_steps", cfg.key_steps);
    read_field(j, "include_zero_volume", cfg.include_zero_volume);
    read_field(j, "threads", cfg.threads);
    read_field(j, "progress", cfg.progress);
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      auto& pc = cfg.policy;
      read_field(p, "rnn_layers", pc.rnn_layers);
      read_field(p, "rnn_hidden", pc.rnn_hidden);
      read_field(p, "actor_hidden", pc.actor_hidden);
      read_field(p, "dropout_p", pc.dropout_p);
      read_field(p, "lr", pc.lr);
      read_field(p, "weight_decay", pc.weight_decay);
      read_field(p, "epochs", pc.epochs);
      read_field(p, "warmup_ratio", pc.warmup_ratio);
      read_field(p, "random_mask_ratio", pc.random_mask_ratio);
      read_field(p, "seed", pc.seed);
    }
    if (j.contains("rollout")) {
      const auto& r = j.at("rollout");
      read_field(r, "horizon", cfg.rollout.horizon);
      if (r.contains("rig")) {
        const auto& rig = r.at("rig");
        auto& out = cfg.rollout.rig;
        if (rig.contains("high_intrinsics")) intrinsics_from(rig.at("high_intrinsics"), out.high_intrinsics);
        if (rig.contains("wrist_intrinsics")) intrinsics_from(rig.at("wrist_intrinsics"), out.wrist_intrinsics);
        if (rig.contains("high_eye") || rig.contains("high_target"))
          out.high_extrinsics = geometry::look_at(vec3_from(rig.at("high_eye")), vec3_from(rig.at("high_target")));
        if (rig.contains("left_wrist_offset")) out.left_wrist_offset = vec3_from(rig.at("left_wrist_offset"));
        if (rig.contains("right_wrist_offset")) out.right_wrist_offset = vec3_from(rig.at("right_wrist_offset"));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) { return config_from_json_text(io::read_text(path)); }

std::string config_to_json_text(const ExperimentConfig& cfg) {
  json j;
  j["ranges"] = cfg.ranges;
  j["volumes"] = cfg.volumes;
  j["seeds"] = cfg.seeds;
  j["mask_grid"] = cfg.mask_grid;
  j["noise_grid"] = cfg.noise_grid;
  j["eval_episodes"] = cfg.eval_episodes;
  j["out_dir"] = cfg.out_dir;
  j["ablation_n_traj"] = cfg.ablation_n_traj;
  j["robustness_range"] = cfg.robustness_range;
  j["keysteps_range"] = cfg.keysteps_range;
  j["key_steps"] = cfg.key_steps;
  j["include_zero_volume"] = cfg.include_zero_volume;
  j["threads"] = cfg.threads;
  j["progress"] = cfg.progress;
  const auto& pc = cfg.policy;
  j["policy"] = {{"rnn_layers", pc.rnn_layers}, {"rnn_hidden", pc.rnn_hidden},   {"actor_hidden", pc.actor_hidden},
                 {"dropout_p", pc.dropout_p},   {"lr", pc.lr},                   {"weight_decay", pc.weight_decay},
                 {"epochs", pc.epochs},         {"warmup_ratio", pc.warmup_ratio}, {"random_mask_ratio", pc.random_mask_ratio},
                 {"seed", pc.seed}};
  const auto& rig = cfg.rollout.rig;
  // look_at rows are (right, down, forward); recover a target one meter ahead.
  const geometry::Vec3 eye = rig.high_extrinsics.position;
  const geometry::Vec3 target = eye + rig.high_extrinsics.rotation.row(2).transpose();
  j["rollout"] = {{"horizon", cfg.rollout.horizon},
                  {"rig",
                   {{"high_intrinsics", intrinsics_to(rig.high_intrinsics)},
                    {"high_eye", vec3_to(eye)},
                    {"high_target", vec3_to(target)},
                    {"wrist_intrinsics", intrinsics_to(rig.wrist_intrinsics)},
                    {"left_wrist_offset", vec3_to(rig.left_wrist_offset)},
                    {"right_wrist_offset", vec3_to(rig.right_wrist_offset)}}}};
  return j.dump(2) + "\n";
}

SweepRow aggregate(double x, const std::vector<double>& per_seed) {
  SweepRow row;
  row.x = x;
  row.per_seed = per_seed;
  if (per_seed.empty()) return row;
  const double n = static_cast<double>(per_seed.size());
  row.mean = std::accumulate(per_seed.begin(), per_seed.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : per_seed) ss += (v - row.mean) * (v - row.mean);
  row.std = std::sqrt(ss / n);
  return row;
}

namespace {
std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error(ErrorKind::ShapeMismatch, "spearman needs equal-length inputs");
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

Dataset gen_dataset(const gripworld::RangeConfig& range, int n_traj, std::uint64_t seed,
                    const observe::FailureModel& failure, const RolloutOptions& options) {
  if (n_traj < 1) throw Error(ErrorKind::InvalidArgument, "n_traj must be >= 1");
  RolloutOptions opts = options;
  opts.failure = failure;
  const auto controller_world = opts.world;
  Dataset ds;
  const int max_attempts = 3 * n_traj;
  while (ds.kept < n_traj && ds.attempted < max_attempts) {
    auto ep = rollout(range, teacher_controller(controller_world), derive_seed(seed, {static_cast<std::uint64_t>(ds.attempted)}),
                      opts);
    ++ds.attempted;
    if (!ep.meta.success) continue;
    ++ds.kept;
    ds.episodes.push_back(std::move(ep));
  }
  if (ds.kept < n_traj || 2 * ds.kept < ds.attempted)
    throw Error(ErrorKind::TeacherFailure, "expert kept " + std::to_string(ds.kept) + " of " +
                                               std::to_string(ds.attempted) + " attempts on " + range.name);
  return ds;
}

gripworld::Episode select_steps(const gripworld::Episode& episode, const std::vector<int>& steps) {
  if (episode.steps.empty()) throw Error(ErrorKind::EmptyDataset, "episode has no steps");
  gripworld::Episode out;
  out.meta = episode.meta;
  out.z_init = episode.z_init;
  out.p_goal = episode.p_goal;
  const int last = static_cast<int>(episode.steps.size()) - 1;
  for (int s : steps) {
    const int k = std::clamp(s, 0, last);
    out.steps.push_back(episode.steps[static_cast<std::size_t>(k)]);
    if (!episode.trace.empty()) out.trace.push_back(episode.trace[static_cast<std::size_t>(k)]);
  }
  out.meta.horizon = static_cast<int>(out.steps.size());
  return out;
}

std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

policy::TrainResult train_policy(const ExperimentConfig& cfg, const std::string& range, int n_traj,
                                 std::uint64_t seed, const policy::PolicyConfig& pcfg) {
  const auto rc = gripworld::preset_range(range);
  const auto h = name_hash(range);
  const auto v = static_cast<std::uint64_t>(n_traj);
  const auto ds = gen_dataset(rc, n_traj, derive_seed(seed, {h, v, 0}), {}, cfg.rollout);
  Rng init_rng(derive_seed(seed, {h, v, 3}));
  const auto init = policy::PolicyParams::random_init(pcfg, init_rng);
  Rng train_rng(derive_seed(seed, {h, v, 1}));
  return policy::bc_train(init, ds.episodes, pcfg, train_rng);
}

void parallel_for(int n, int threads, const std::function<void(int)>& f) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

DataVolumeReport sweep_data_volume(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.volumes.size() < 4) throw Error(ErrorKind::InvalidArgument, "the data-volume sweep needs >= 4 volumes");
  if (cfg.seeds.size() < 2) throw Error(ErrorKind::InvalidArgument, "the data-volume sweep needs >= 2 seeds");

  std::vector<int> volumes = cfg.volumes;
  std::sort(volumes.begin(), volumes.end());
  volumes.erase(std::unique(volumes.begin(), volumes.end()), volumes.end());
  if (cfg.include_zero_volume) volumes.insert(volumes.begin(), 0);

  DataVolumeReport report;
  for (const auto& r : cfg.ranges)
    for (int v : volumes)
      for (auto s : cfg.seeds) report.cells.push_back({r, v, s, 0.0});

  // Largest cells first so the pool drains evenly.
  std::vector<int> order(report.cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return report.cells[a].volume > report.cells[b].volume; });
  std::atomic<int> done{0};
  parallel_for(static_cast<int>(order.size()), cfg.threads, [&](int k) {
    auto& cell = report.cells[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    const auto rc = gripworld::preset_range(cell.range);
    policy::PolicyParams params;
    if (cell.volume == 0) {
      Rng init_rng(derive_seed(cell.seed, {name_hash(cell.range), 0, 3}));
      params = policy::PolicyParams::random_init(cfg.policy, init_rng);
    } else {
      params = train_policy(cfg, cell.range, cell.volume, cell.seed, cfg.policy).params;
    }
    cell.success = 100.0 * policy::evaluate(params, rc, {}, cfg.eval_episodes, eval_seed(cell.seed, cell.range),
                                            cfg.rollout);
    log_line(cfg, "cell " + std::to_string(++done) + "/" + std::to_string(order.size()) + " " + cell.range +
                      " n=" + std::to_string(cell.volume) + " seed=" + std::to_string(cell.seed) +
                      " success=" + fmt_double(cell.success));
  });

  const std::string dir = join_path(cfg.out_dir, "data_volume");
  std::string cells_csv = "range,volume,seed,success\n";
  for (const auto& c : report.cells)
    cells_csv += c.range + "," + std::to_string(c.volume) + "," + std::to_string(c.seed) + "," + fmt_double(c.success) + "\n";
  io::write_text(join_path(dir, "cells.csv"), cells_csv);

  std::string mm_csv = "range," + fit_csv_header(scaling::Family::MichaelisMenten) + "\n";
  std::string thr_csv = "range,spatial_volume_cm3,threshold80\n";
  std::vector<scaling::Point> power_pts;
  std::size_t idx = 0;
  for (const auto& r : cfg.ranges) {
    RangeReport rr;
    rr.range = r;
    for (int v : volumes) {
      std::vector<double> per_seed;
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) per_seed.push_back(report.cells[idx++].success);
      rr.rows.push_back(aggregate(v, per_seed));
    }
    io::write_text(join_path(dir, r + ".csv"), sweep_csv("volume", rr.rows));
    rr.mm = try_fit(scaling::Family::MichaelisMenten, to_points(rr.rows), rr.fit_error);
    if (rr.mm) {
      mm_csv += r + "," + fit_csv_row(*rr.mm) + "\n";
      io::write_text(join_path(dir, "mm_curve_" + r + ".csv"), curve_csv(rr.mm->model, 0.0, volumes.back()));
      try {
        rr.threshold80 = scaling::data_for_success(rr.mm->model, 80.0);
        thr_csv += r + "," + fmt_double(gripworld::preset_volume_cm3(r)) + "," + fmt_double(*rr.threshold80) + "\n";
        if (gripworld::preset_volume_cm3(r) > 0.0) power_pts.push_back({gripworld::preset_volume_cm3(r), *rr.threshold80});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Unreachable) throw;
      }
    }
    report.ranges.push_back(std::move(rr));
  }
  io::write_text(join_path(dir, "mm_fits.csv"), mm_csv);
  io::write_text(join_path(dir, "thresholds.csv"), thr_csv);

  std::string power_csv = fit_csv_header(scaling::Family::PowerLaw) + "\n";
  if (power_pts.size() >= 3) {
    report.power = try_fit(scaling::Family::PowerLaw, power_pts, report.power_error);
    if (report.power) {
      power_csv += fit_csv_row(*report.power) + "\n";
      io::write_text(join_path(dir, "power_curve.csv"), curve_csv(report.power->model, 1.0, 40000.0));
    }
  } else {
    report.power_error = "fewer than 3 reachable thresholds outside FixPoint";
  }
  io::write_text(join_path(dir, "power_fit.csv"), power_csv);
  return report;
}

namespace {
RobustnessReport robustness_sweep(const ExperimentConfig& cfg, const policy::PolicyParams& params,
                                  const std::string& range, const std::vector<double>& grid, bool noise) {
  cfg.validate();
  const auto rc = gripworld::preset_range(range);
  const std::size_t ns = cfg.seeds.size();
  std::vector<double> success(grid.size() * ns);
  parallel_for(static_cast<int>(success.size()), cfg.threads, [&](int k) {
    const std::size_t g = static_cast<std::size_t>(k) / ns, s = static_cast<std::size_t>(k) % ns;
    observe::FailureModel fm;
    (noise ? fm.noise_ratio : fm.mask_ratio) = grid[g];
    success[static_cast<std::size_t>(k)] =
        100.0 * policy::evaluate(params, rc, fm, cfg.eval_episodes, eval_seed(cfg.seeds[s], range), cfg.rollout);
  });
  RobustnessReport rep;
  for (std::size_t g = 0; g < grid.size(); ++g)
    rep.rows.push_back(aggregate(grid[g], std::vector<double>(success.begin() + static_cast<long>(g * ns),
                                                             success.begin() + static_cast<long>((g + 1) * ns))));
  return rep;
}
}  // namespace

RobustnessReport sweep_mask(const ExperimentConfig& cfg, const policy::PolicyParams& params, const std::string& range) {
  auto rep = robustness_sweep(cfg, params, range, cfg.mask_grid, false);
  rep.fit = try_fit(scaling::Family::Gaussian, to_points(rep.rows), rep.fit_error);
  io::write_text(join_path(cfg.out_dir, "mask_sweep.csv"), sweep_csv("mask_ratio", rep.rows));
  std::string fit = fit_csv_header(scaling::Family::Gaussian) + "\n";
  if (rep.fit) {
    fit += fit_csv_row(*rep.fit) + "\n";
    io::write_text(join_path(cfg.out_dir, "mask_curve.csv"), curve_csv(rep.fit->model, 0.0, 1.0));
  }
  io::write_text(join_path(cfg.out_dir, "mask_fit.csv"), fit);
  return rep;
}

RobustnessReport sweep_noise(const ExperimentConfig& cfg, const policy::PolicyParams& params, const std::string& range) {
  std::vector<double> grid{0.0};
  grid.insert(grid.end(), cfg.noise_grid.begin(), cfg.noise_grid.end());
  auto rep = robustness_sweep(cfg, params, range, grid, true);
  const std::vector<SweepRow> fitted(rep.rows.begin() + 1, rep.rows.end());
  rep.fit = try_fit(scaling::Family::ExpOffset, to_points(fitted), rep.fit_error);
  io::write_text(join_path(cfg.out_dir, "noise_sweep.csv"), sweep_csv("noise_ratio", rep.rows));
  std::string fit = fit_csv_header(scaling::Family::ExpOffset) + "\n";
  if (rep.fit) {
    fit += fit_csv_row(*rep.fit) + "\n";
    io::write_text(join_path(cfg.out_dir, "noise_curve.csv"),
                   curve_csv(rep.fit->model, 0.0, *std::max_element(grid.begin(), grid.end())));
  }
  io::write_text(join_path(cfg.out_dir, "noise_fit.csv"), fit);
  return rep;
}

KeyStepsReport keysteps_ablation(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& range = cfg.keysteps_range;
  const auto rc = gripworld::preset_range(range);
  const std::size_t ns = cfg.seeds.size();
  std::vector<double> full(ns), keys(ns);
  parallel_for(static_cast<int>(2 * ns), cfg.threads, [&](int k) {
    const std::size_t s = static_cast<std::size_t>(k) % ns;
    const bool key_only = static_cast<std::size_t>(k) >= ns;
    const auto seed = cfg.seeds[s];
    const auto h = name_hash(range);
    const auto v = static_cast<std::uint64_t>(cfg.ablation_n_traj);
    auto ds = gen_dataset(rc, cfg.ablation_n_traj, derive_seed(seed, {h, v, 0}), {}, cfg.rollout).episodes;
    if (key_only)
      for (auto& ep : ds) ep = select_steps(ep, cfg.key_steps);
    Rng init_rng(derive_seed(seed, {h, v, 3}));
    const auto init = policy::PolicyParams::random_init(cfg.policy, init_rng);
    Rng train_rng(derive_seed(seed, {h, v, 1}));
    const auto params = policy::bc_train(init, ds, cfg.policy, train_rng).params;
    (key_only ? keys : full)[s] =
        100.0 * policy::evaluate(params, rc, {}, cfg.eval_episodes, eval_seed(seed, range), cfg.rollout);
    log_line(cfg, std::string(key_only ? "key-steps" : "full") + " seed=" + std::to_string(seed) + " done");
  });
  KeyStepsReport rep{aggregate(0, full), aggregate(1, keys)};
  std::string csv = "training,mean_success,std_success";
  for (std::size_t s = 0; s < ns; ++s) csv += ",seed_" + std::to_string(cfg.seeds[s]);
  csv += "\n";
  auto line = [&](const std::string& name, const SweepRow& r) {
    csv += name + "," + fmt_double(r.mean) + "," + fmt_double(r.std);
    for (double v : r.per_seed) csv += "," + fmt_double(v);
    csv += "\n";
  };
  line("full_trajectory", rep.full);
  line("key_steps", rep.key_steps);
  io::write_text(join_path(cfg.out_dir, "keysteps.csv"), csv);
  return rep;
}

std::vector<MaskTrainRow> mask_train_ablation(const ExperimentConfig& cfg, const std::vector<std::string>& ranges) {
  cfg.validate();
  const std::size_t ns = cfg.seeds.size();
  std::vector<double> success(ranges.size() * 2 * ns);
  parallel_for(static_cast<int>(success.size()), cfg.threads, [&](int k) {
    const std::size_t r = static_cast<std::size_t>(k) / (2 * ns);
    const bool masked = (static_cast<std::size_t>(k) / ns) % 2 == 0;
    const std::size_t s = static_cast<std::size_t>(k) % ns;
    auto pcfg = cfg.policy;
    pcfg.random_mask_ratio = masked ? 0.3 : 0.0;
    const auto params = train_policy(cfg, ranges[r], cfg.ablation_n_traj, cfg.seeds[s], pcfg).params;
    observe::FailureModel fm;
    fm.mask_ratio = 0.3;
    success[static_cast<std::size_t>(k)] = 100.0 * policy::evaluate(params, gripworld::preset_range(ranges[r]), fm,
                                                                    cfg.eval_episodes, eval_seed(cfg.seeds[s], ranges[r]),
                                                                    cfg.rollout);
    log_line(cfg, "mask-train " + ranges[r] + (masked ? " masked" : " unmasked") + " seed=" +
                      std::to_string(cfg.seeds[s]) + " success=" + fmt_double(success[static_cast<std::size_t>(k)]));
  });
  std::vector<MaskTrainRow> rows;
  std::string csv = "range,variant,mean_success,std_success";
  for (auto s : cfg.seeds) csv += ",seed_" + std::to_string(s);
  csv += "\n";
  for (std::size_t r = 0; r < ranges.size(); ++r) {
    auto slice = [&](std::size_t off) {
      auto b = success.begin() + static_cast<long>(r * 2 * ns + off);
      return std::vector<double>(b, b + static_cast<long>(ns));
    };
    MaskTrainRow row{ranges[r], aggregate(0.3, slice(0)), aggregate(0.0, slice(ns))};
    for (const auto* part : {&row.masked, &row.unmasked}) {
      csv += ranges[r] + (part == &row.masked ? ",mask_0.3" : ",mask_0") + "," + fmt_double(part->mean) + "," +
             fmt_double(part->std);
      for (double v : part->per_seed) csv += "," + fmt_double(v);
      csv += "\n";
    }
    rows.push_back(std::move(row));
  }
  io::write_text(join_path(cfg.out_dir, "mask_train.csv"), csv);
  return rows;
}

std::vector<TriangulationRow> triangulate_cmd(const std::vector<geometry::Camera>& cameras,
                                              const std::string& bbox_csv_text) {
  auto find = [&](const std::string& name) -> const geometry::Camera& {
    for (const auto& c : cameras)
      if (c.name == name) return c;
    throw Error(ErrorKind::ParseError, "unknown camera '" + name + "'");
  };
  std::vector<TriangulationRow> rows;
  std::istringstream in(bbox_csv_text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw Error(ErrorKind::ParseError, "bbox row needs 11 columns: " + line);
    double v[8];
    for (int i = 0; i < 8; ++i) {
      try {
        std::size_t used = 0;
        v[i] = std::stod(f[3 + i], &used);
        if (used != f[3 + i].size()) throw std::invalid_argument(f[3 + i]);
      } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError, "bad number '" + f[3 + i] + "'");
      }
    }
    TriangulationRow row;
    row.id = f[0];
    const auto& ca = find(f[1]);
    const auto& cb = find(f[2]);
    try {
      row.estimate = geometry::triangulate_sphere(ca, {v[0], v[1], v[2], v[3]}, cb, {v[4], v[5], v[6], v[7]});
      row.status = "ok";
    } catch (const Error& e) {
      row.status = std::string(to_string(e.kind()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string triangulation_csv(const std::vector<TriangulationRow>& rows) {
  std::string csv = "id,status,center_x,center_y,center_z,radius,lambda1,lambda2,residual\n";
  for (const auto& r : rows) {
    csv += r.id + "," + r.status;
    if (r.estimate) {
      const auto& e = *r.estimate;
      for (double v : {e.center.x(), e.center.y(), e.center.z(), e.radius, e.lambda1, e.lambda2, e.residual})
        csv += "," + fmt_double(v);
    } else {
      csv += ",,,,,,,";
    }
    csv += "\n";
  }
  return csv;
}

std::string sweep_csv(const std::string& x_name, const std::vector<SweepRow>& rows) {
  std::size_t ns = 0;
  for (const auto& r : rows) ns = std::max(ns, r.per_seed.size());
  std::string csv = x_name + ",mean_success,std_success";
  for (std::size_t s = 0; s < ns; ++s) csv += ",seed_" + std::to_string(s);
  csv += "\n";
  for (const auto& r : rows) {
    csv += fmt_double(r.x) + "," + fmt_double(r.mean) + "," + fmt_double(r.std);
    for (std::size_t s = 0; s < ns; ++s) csv += "," + (s < r.per_seed.size() ? fmt_double(r.per_seed[s]) : "");
    csv += "\n";
  }
  return csv;
}

std::string fit_csv_header(scaling::Family family) {
  std::string h = "family";
  for (const auto& n : scaling::parameter_names(family)) h += "," + n;
  return h + ",sse,r2,iterations,converged,status";
}

std::string fit_csv_row(const scaling::FitResult& fit) {
  std::string row = scaling::to_string(fit.model.family);
  for (Eigen::Index i = 0; i < fit.model.params.size(); ++i) row += "," + fmt_double(fit.model.params(i));
  row += "," + fmt_double(fit.sse) + "," + fmt_double(fit.r2) + "," + std::to_string(fit.iterations) + "," +
         (fit.converged ? "true" : "false") + "," + status_name(fit.status);
  return row;
}

std::string curve_csv(const scaling::CurveModel& model, double lo, double hi, int n) {
  std::string csv = "x,y\n";
  for (int i = 0; i < n; ++i) {
    const double x = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    try {
      csv += fmt_double(x) + "," + fmt_double(scaling::eval_curve(model, x)) + "\n";
    } catch (const Error&) {
      // outside the family's domain (x <= 0 for power and log)
    }
  }
  return csv;
}

}  // namespace manibox::harness
