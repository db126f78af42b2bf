#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "manibox/geometry.hpp"
#include "manibox/gripworld.hpp"
#include "manibox/observe.hpp"
#include "manibox/policy.hpp"
#include "manibox/rollout.hpp"
#include "manibox/scalinglaw.hpp"

namespace manibox::harness {

struct ExperimentConfig {
  std::vector<std::string> ranges{"FixPoint", "5cm", "10cm", "20cm", "FullSpace"};
  std::vector<int> volumes{25, 50, 100, 200, 400, 800, 1600, 3200};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<double> mask_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> noise_grid{0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
  policy::PolicyConfig policy{};
  int eval_episodes = 48;
  std::string out_dir = "out";

  // Single-policy experiments (mask/noise sweeps and both ablations).
  int ablation_n_traj = 800;
  std::string robustness_range = "10cm";
  std::string keysteps_range = "FullSpace";
  std::vector<int> key_steps{0, 18, 20, 22, 70};

  // Also evaluate the untrained initial policy as the zero-data point.
  bool include_zero_volume = true;
  // Worker threads for independent cells; 0 picks the hardware concurrency.
  int threads = 0;
  // Per-cell progress lines on stderr.
  bool progress = false;

  RolloutOptions rollout{};

  void validate() const;
};

/// JSON schema documented in the README. Missing keys keep their defaults.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json_text(const ExperimentConfig& cfg);

/// Aggregate over seeds. Success in percent, std with ddof 0.
struct SweepRow {
  double x = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> per_seed;
};

SweepRow aggregate(double x, const std::vector<double>& per_seed);

/// Rank correlation with average ranks for ties; NaN if either side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct Dataset {
  std::vector<gripworld::Episode> episodes;
  int kept = 0;
  int attempted = 0;
};

/// Successful scripted-expert episodes only. Attempt i resets with
/// derive_seed(seed, {i}); gives up after 3 n_traj attempts.
Dataset gen_dataset(const gripworld::RangeConfig& range, int n_traj, std::uint64_t seed,
                    const observe::FailureModel& failure = {}, const RolloutOptions& options = {});

/// Keeps only the listed step indices, in order. Indices past the end map to
/// the last step.
gripworld::Episode select_steps(const gripworld::Episode& episode, const std::vector<int>& steps);

/// Stable per-name stream id used in seed derivation.
std::uint64_t name_hash(const std::string& name);

/// gen_dataset + bc_train with seeds derived from (seed, range, n_traj).
policy::TrainResult train_policy(const ExperimentConfig& cfg, const std::string& range, int n_traj,
                                 std::uint64_t seed, const policy::PolicyConfig& pcfg);

struct CellRow {
  std::string range;
  int volume = 0;
  std::uint64_t seed = 0;
  double success = 0.0;  // percent
};

struct RangeReport {
  std::string range;
  std::vector<SweepRow> rows;  // ascending volume
  std::optional<scaling::FitResult> mm;
  std::optional<double> threshold80;
  std::string fit_error;
};

struct DataVolumeReport {
  std::vector<CellRow> cells;
  std::vector<RangeReport> ranges;  // config order
  std::optional<scaling::FitResult> power;
  std::string power_error;
};

/// Every (range, volume, seed) cell: gen_dataset, bc_train, evaluate; then
/// MM fit, 80% threshold per range and a power law over (cm^3, threshold).
/// Writes CSVs under cfg.out_dir/data_volume.
DataVolumeReport sweep_data_volume(const ExperimentConfig& cfg);

struct RobustnessReport {
  std::vector<SweepRow> rows;  // one per grid ratio
  std::optional<scaling::FitResult> fit;
  std::string fit_error;
};

/// Evaluates `params` over the mask grid (noise 0), one eval stream per seed,
/// and fits a Gaussian. Writes cfg.out_dir/mask_sweep.csv.
RobustnessReport sweep_mask(const ExperimentConfig& cfg, const policy::PolicyParams& params,
                            const std::string& range);

/// Noise 0 control row then the noise grid (mask 0); ExpOffset fit over the
/// grid rows. Writes cfg.out_dir/noise_sweep.csv.
RobustnessReport sweep_noise(const ExperimentConfig& cfg, const policy::PolicyParams& params,
                             const std::string& range);

struct KeyStepsReport {
  SweepRow full;
  SweepRow key_steps;
};

/// Full-trajectory vs key-steps-only training on cfg.keysteps_range, both
/// evaluated on the same episodes. Writes cfg.out_dir/keysteps.csv.
KeyStepsReport keysteps_ablation(const ExperimentConfig& cfg);

struct MaskTrainRow {
  std::string range;
  SweepRow masked;    // trained with random_mask_ratio 0.3
  SweepRow unmasked;  // trained with 0
};

/// Both variants evaluated at inference mask 0.3. Writes cfg.out_dir/mask_train.csv.
std::vector<MaskTrainRow> mask_train_ablation(const ExperimentConfig& cfg, const std::vector<std::string>& ranges);

struct TriangulationRow {
  std::string id;
  std::string status;  // "ok" or the error kind
  std::optional<geometry::SphereEstimate> estimate;
};

/// Bbox CSV columns: id,cam_a,cam_b,a_u_min,a_v_min,a_u_max,a_v_max,b_u_min,b_v_min,b_u_max,b_v_max.
std::vector<TriangulationRow> triangulate_cmd(const std::vector<geometry::Camera>& cameras,
                                              const std::string& bbox_csv_text);
std::string triangulation_csv(const std::vector<TriangulationRow>& rows);

std::string sweep_csv(const std::string& x_name, const std::vector<SweepRow>& rows);
std::string fit_csv_header(scaling::Family family);
std::string fit_csv_row(const scaling::FitResult& fit);
/// `n` evenly spaced samples of the fitted curve over [lo, hi].
std::string curve_csv(const scaling::CurveModel& model, double lo, double hi, int n = 200);

/// Runs f(0..n-1) on up to `threads` workers; results land by index.
void parallel_for(int n, int threads, const std::function<void(int)>& f);

}  // namespace manibox::harness
