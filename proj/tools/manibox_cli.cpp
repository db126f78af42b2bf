#include <charconv>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "manibox/error.hpp"
#include "manibox/harness.hpp"
#include "manibox/io.hpp"
#include "manibox/scalinglaw.hpp"

using namespace manibox;
using io::fmt_double;

namespace {

struct Common {
  std::string config;
  std::string ranges;
  std::string seeds;
  int n_traj = 0;
  double mask_ratio = -1.0;
  double noise_ratio = -1.0;
  int episodes = 0;
  std::string out;
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

harness::ExperimentConfig resolve(const Common& c) {
  harness::ExperimentConfig cfg = c.config.empty() ? harness::ExperimentConfig{} : harness::load_config(c.config);
  if (!c.ranges.empty()) cfg.ranges = split(c.ranges);
  if (!c.seeds.empty()) {
    cfg.seeds.clear();
    for (const auto& s : split(c.seeds)) {
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error(ErrorKind::InvalidArgument, "bad seed '" + s + "'");
      cfg.seeds.push_back(v);
    }
  }
  if (c.n_traj > 0) cfg.ablation_n_traj = c.n_traj;
  if (c.episodes > 0) cfg.eval_episodes = c.episodes;
  if (!c.out.empty()) cfg.out_dir = c.out;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* app, Common& c, bool with_out = true) {
  app->add_option("--config", c.config, "Experiment config (JSON)");
  app->add_option("--range", c.ranges, "Range preset name(s), comma separated");
  app->add_option("--seeds", c.seeds, "Seeds, comma separated");
  app->add_option("--n-traj", c.n_traj, "Trajectory count");
  app->add_option("--mask-ratio", c.mask_ratio, "Bbox mask ratio");
  app->add_option("--noise-ratio", c.noise_ratio, "Bbox noise ratio");
  app->add_option("--episodes", c.episodes, "Evaluation episodes per seed");
  if (with_out) app->add_option("--out", c.out, "Output path");
}

void emit(const std::string& csv, const std::string& path) {
  if (path.empty())
    std::cout << csv;
  else
    io::write_text(path, csv);
}

std::string row_line(const std::string& label, const harness::SweepRow& r) {
  std::string s = label + "," + fmt_double(r.mean) + "," + fmt_double(r.std);
  for (double v : r.per_seed) s += "," + fmt_double(v);
  return s + "\n";
}

policy::PolicyParams params_or_train(const harness::ExperimentConfig& cfg, const std::string& params_path,
                                     const std::string& range) {
  if (!params_path.empty()) return io::load_params(params_path);
  std::cerr << "training on " << range << " with " << cfg.ablation_n_traj << " trajectories\n";
  return harness::train_policy(cfg, range, cfg.ablation_n_traj, cfg.seeds.front(), cfg.policy).params;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ManiBox desk-scale toolkit"};
  app.require_subcommand(1);

  Common gen_c;
  auto* gen = app.add_subcommand("gen-data", "Scripted-expert episodes (successful ones only) as JSON lines");
  add_common(gen, gen_c);

  Common train_c;
  std::string train_data, loss_out;
  auto* train = app.add_subcommand("train", "Behavior cloning on an episode file");
  add_common(train, train_c);
  train->add_option("--data", train_data, "Episode file")->required();
  train->add_option("--loss", loss_out, "Loss history CSV");

  Common eval_c;
  std::string eval_params;
  auto* eval = app.add_subcommand("eval", "Success rate of a saved policy");
  add_common(eval, eval_c);
  eval->add_option("--params", eval_params, "Parameter file")->required();

  Common dv_c;
  bool dv_progress = false;
  auto* dv = app.add_subcommand("sweep-data-volume", "Success vs data volume per range, MM and power fits");
  add_common(dv, dv_c);
  dv->add_flag("--progress", dv_progress, "Print one line per finished cell");

  Common sm_c;
  std::string sm_params;
  auto* sm = app.add_subcommand("sweep-mask", "Success vs inference mask ratio with a Gaussian fit");
  add_common(sm, sm_c);
  sm->add_option("--params", sm_params, "Parameter file (trains one when omitted)");

  Common sn_c;
  std::string sn_params;
  auto* sn = app.add_subcommand("sweep-noise", "Success vs bbox noise ratio with an exponential fit");
  add_common(sn, sn_c);
  sn->add_option("--params", sn_params, "Parameter file (trains one when omitted)");

  Common ks_c;
  auto* ks = app.add_subcommand("ablate-keysteps", "Full-trajectory vs key-steps-only training");
  add_common(ks, ks_c);

  Common mt_c;
  auto* mt = app.add_subcommand("ablate-mask-train", "Training with and without random masking, evaluated at mask 0.3");
  add_common(mt, mt_c);

  std::string fit_input, fit_family = "mm", fit_curve;
  auto* fit = app.add_subcommand("fit-curve", "Levenberg-Marquardt fit of an x,y CSV");
  fit->add_option("--input", fit_input, "CSV with x,y columns and a header row")->required();
  fit->add_option("--family", fit_family, "mm | power | gaussian | exp | log");
  fit->add_option("--out", fit_curve, "Dense curve CSV");

  std::string tri_cams, tri_boxes, tri_out;
  auto* tri = app.add_subcommand("triangulate", "Sphere center and radius from bbox pairs");
  tri->add_option("--cameras", tri_cams, "Camera JSON")->required();
  tri->add_option("--bboxes", tri_boxes, "Bbox pair CSV")->required();
  tri->add_option("--out", tri_out, "Output CSV");

  scaling::VcBoundQuery vc_q;
  auto* vc = app.add_subcommand("vc-bound", "k d ln(3 b^3 k d / (4 pi eps^3))");
  vc->add_option("--k", vc_q.k);
  vc->add_option("--d", vc_q.d);
  vc->add_option("--b", vc_q.b);
  vc->add_option("--eps", vc_q.eps);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      auto cfg = resolve(gen_c);
      observe::FailureModel fm{std::max(0.0, gen_c.mask_ratio), std::max(0.0, gen_c.noise_ratio)};
      const int n = gen_c.n_traj > 0 ? gen_c.n_traj : 10;
      const auto range = gripworld::preset_range(cfg.ranges.front());
      const auto ds = harness::gen_dataset(range, n, cfg.seeds.front(), fm, cfg.rollout);
      io::write_episodes(gen_c.out.empty() ? "episodes.jsonl" : gen_c.out, ds.episodes);
      std::cout << "range,n_traj,seed,kept,attempted\n"
                << range.name << "," << n << "," << cfg.seeds.front() << "," << ds.kept << "," << ds.attempted << "\n";
    } else if (*train) {
      auto cfg = resolve(train_c);
      auto pcfg = cfg.policy;
      if (train_c.mask_ratio >= 0.0) pcfg.random_mask_ratio = train_c.mask_ratio;
      const auto episodes = io::read_episodes(train_data);
      Rng init_rng(derive_seed(cfg.seeds.front(), {3}));
      const auto init = policy::PolicyParams::random_init(pcfg, init_rng);
      Rng rng(derive_seed(cfg.seeds.front(), {1}));
      const auto res = policy::bc_train(init, episodes, pcfg, rng);
      io::save_params(train_c.out.empty() ? "params.bin" : train_c.out, res.params);
      if (!loss_out.empty()) io::write_loss_history(loss_out, res.loss_history);
      std::cout << "episodes,epochs,final_loss\n"
                << episodes.size() << "," << pcfg.epochs << ","
                << fmt_double(res.loss_history.empty() ? 0.0 : res.loss_history.back()) << "\n";
    } else if (*eval) {
      auto cfg = resolve(eval_c);
      const auto params = io::load_params(eval_params);
      observe::FailureModel fm{std::max(0.0, eval_c.mask_ratio), std::max(0.0, eval_c.noise_ratio)};
      std::string csv = "range,seed,success\n";
      for (const auto& r : cfg.ranges) {
        std::vector<double> per_seed;
        for (auto s : cfg.seeds) {
          per_seed.push_back(100.0 * policy::evaluate(params, gripworld::preset_range(r), fm, cfg.eval_episodes,
                                                      derive_seed(s, {harness::name_hash(r), 2}), cfg.rollout));
          csv += r + "," + std::to_string(s) + "," + fmt_double(per_seed.back()) + "\n";
        }
        csv += r + ",mean," + fmt_double(harness::aggregate(0, per_seed).mean) + "\n";
      }
      emit(csv, eval_c.out);
    } else if (*dv) {
      auto cfg = resolve(dv_c);
      cfg.progress = cfg.progress || dv_progress;
      const auto rep = harness::sweep_data_volume(cfg);
      std::cout << "range,n_points,spearman,mm_r2,threshold80\n";
      for (const auto& rr : rep.ranges) {
        std::vector<double> x, y;
        for (const auto& row : rr.rows) {
          x.push_back(row.x);
          y.push_back(row.mean);
        }
        std::cout << rr.range << "," << rr.rows.size() << "," << fmt_double(harness::spearman(x, y)) << ","
                  << (rr.mm ? fmt_double(rr.mm->r2) : "") << ","
                  << (rr.threshold80 ? fmt_double(*rr.threshold80) : "") << "\n";
      }
      std::cerr << "wrote " << cfg.out_dir << "/data_volume\n";
    } else if (*sm || *sn) {
      const bool mask = sm->parsed();
      auto cfg = resolve(mask ? sm_c : sn_c);
      const auto range = (mask ? sm_c : sn_c).ranges.empty() ? cfg.robustness_range : cfg.ranges.front();
      const auto params = params_or_train(cfg, mask ? sm_params : sn_params, range);
      const auto rep = mask ? harness::sweep_mask(cfg, params, range) : harness::sweep_noise(cfg, params, range);
      std::cout << harness::sweep_csv(mask ? "mask_ratio" : "noise_ratio", rep.rows);
      if (rep.fit)
        std::cout << harness::fit_csv_header(rep.fit->model.family) << "\n" << harness::fit_csv_row(*rep.fit) << "\n";
      else
        std::cerr << "fit failed: " << rep.fit_error << "\n";
    } else if (*ks) {
      auto cfg = resolve(ks_c);
      if (!ks_c.ranges.empty()) cfg.keysteps_range = cfg.ranges.front();
      const auto rep = harness::keysteps_ablation(cfg);
      std::cout << "training,mean_success,std_success,per_seed...\n"
                << row_line("full_trajectory", rep.full) << row_line("key_steps", rep.key_steps);
    } else if (*mt) {
      auto cfg = resolve(mt_c);
      const auto rows = harness::mask_train_ablation(cfg, cfg.ranges);
      std::cout << "range,variant,mean_success,std_success,per_seed...\n";
      for (const auto& r : rows)
        std::cout << row_line(r.range + ",mask_0.3", r.masked) << row_line(r.range + ",mask_0", r.unmasked);
    } else if (*fit) {
      std::vector<scaling::Point> pts;
      std::istringstream in(io::read_text(fit_input));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        double x = 0.0, y = 0.0;
        if (std::sscanf(line.c_str(), "%lf,%lf", &x, &y) != 2)
          throw Error(ErrorKind::ParseError, "bad x,y row: " + line);
        pts.push_back({x, y});
      }
      const auto family = scaling::family_from_string(fit_family);
      const auto res = scaling::lm_fit(family, pts);
      std::cout << harness::fit_csv_header(family) << "\n" << harness::fit_csv_row(res) << "\n";
      if (!fit_curve.empty()) {
        double lo = pts.front().x, hi = pts.front().x;
        for (const auto& p : pts) lo = std::min(lo, p.x), hi = std::max(hi, p.x);
        io::write_text(fit_curve, harness::curve_csv(res.model, lo, hi));
      }
    } else if (*tri) {
      const auto rows = harness::triangulate_cmd(io::read_cameras(tri_cams), io::read_text(tri_boxes));
      emit(harness::triangulation_csv(rows), tri_out);
    } else if (*vc) {
      std::cout << "k,d,b,eps,bound\n"
                << fmt_double(vc_q.k) << "," << fmt_double(vc_q.d) << "," << fmt_double(vc_q.b) << ","
                << fmt_double(vc_q.eps) << "," << fmt_double(scaling::vc_bound(vc_q)) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
