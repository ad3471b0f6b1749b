#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "evhand/evhand.hpp"

using namespace evhand;

namespace {

struct SimulateArgs {
  std::string traj, camera, out, gt_out;
  std::string lighting = "flat";
  SimConfig cfg;
  std::int64_t frame_dt_us = 500;
};

struct FitArgs {
  std::string events, gt, camera, report;
  std::string mode = "iwe2v";
  double sigma = 0.24;
  int trials = 1;
  bool use_cm = false;
  int iters = 1000;
  double lr = 0.005;
  std::uint64_t seed = 0;
  bool trace = false;
};

struct EvalArgs {
  std::string pred, gt, camera, report, plot;
};

CameraModel load_camera(const std::string& path) { return path.empty() ? CameraModel{} : read_camera(path); }

int run_simulate(const SimulateArgs& a) {
  const CameraModel model = load_camera(a.camera);
  const std::vector<HandParams> traj = read_poses(a.traj);
  SimConfig cfg = a.cfg;
  cfg.frame_dt = a.frame_dt_us;
  const Lighting lighting = a.lighting == "lambertian" ? Lighting::kLambertian : Lighting::kFlat;
  const EventStream stream = simulate(traj, cfg, model, lighting);
  if (a.out.size() >= 4 && a.out.substr(a.out.size() - 4) == ".csv") {
    write_events_csv(a.out, stream);
  } else {
    write_events_evh1(a.out, stream);
  }
  if (!a.gt_out.empty()) write_poses(a.gt_out, traj);
  std::cerr << stream.events.size() << " events\n";
  return 0;
}

// Each trial perturbs every gt pose after the first and refits it against the
// events between it and its (exact) predecessor. MPJPE is averaged over poses.
int run_fit(const FitArgs& a) {
  const CameraModel model = load_camera(a.camera);
  const EventStream stream = read_events(a.events, model.width, model.height);
  const std::vector<HandParams> gt = read_poses(a.gt);
  if (gt.size() < 2) throw InvalidArgument("fit needs at least two gt poses");
  if (a.trials < 1) throw InvalidArgument("trials must be at least 1");

  FitConfig cfg;
  cfg.edge_mode = parse_edge_mode(a.mode);
  cfg.use_cm = a.use_cm;
  cfg.max_iters = a.iters;
  cfg.learning_rate = a.lr;
  if (a.trace) {
    cfg.on_iteration = [](int it, const HandParams&, double loss) {
      std::printf("iteration %d\nloss %.9g\n", it, loss);
    };
  }

  std::ofstream report;
  if (!a.report.empty()) {
    report.open(a.report);
    if (!report) throw Error("cannot write report: " + a.report);
    report << "trial,sigma,mode,initial_mpjpe,final_mpjpe,delta\n";
  }
  for (int trial = 0; trial < a.trials; ++trial) {
    double initial = 0.0;
    double final = 0.0;
    for (std::size_t i = 1; i < gt.size(); ++i) {
      const SubSegment seg = slice(stream, s_to_us(gt[i - 1].timestamp), s_to_us(gt[i].timestamp));
      const std::uint64_t seed = a.seed + 1000003ull * static_cast<std::uint64_t>(trial) + i;
      const HandParams init = perturb(gt[i], a.sigma, seed);
      const FitResult r = fit(seg, init, gt[i - 1], cfg, model);
      const Joints3D jg = regress_joints(gt[i]);
      initial += mpjpe(regress_joints(init), jg);
      final += mpjpe(regress_joints(r.params), jg);
      if (a.trace) {
        const WeaklyTerms t = evaluate_weakly(seg, gt[i - 1], r.params, cfg.K, model);
        std::printf("cm %.9g\nedge %.9g\nsmooth %.9g\nweakly %.9g\nbest_iteration %d\n", t.cm, t.edge, t.smooth,
                    t.total, r.best_iteration);
      }
    }
    const double n = static_cast<double>(gt.size() - 1);
    initial /= n;
    final /= n;
    if (a.trace) std::printf("initial_mpjpe %.9g\nfinal_mpjpe %.9g\n", initial, final);
    if (report.is_open()) {
      char line[256];
      std::snprintf(line, sizeof(line), "%d,%g,%s,%.6f,%.6f,%.6f\n", trial, a.sigma, a.mode.c_str(), initial, final,
                    final - initial);
      report << line;
    }
  }
  return 0;
}

int run_eval(const EvalArgs& a) {
  const CameraModel model = load_camera(a.camera);
  const std::vector<HandParams> pred = read_poses(a.pred);
  const std::vector<HandParams> gt = read_poses(a.gt);
  const SequenceMetrics m = evaluate_sequence(pred, gt, model);
  nlohmann::json j;
  j["mpjpe_mm"] = m.mpjpe_mm;
  j["pa_mpjpe_mm"] = m.pa_mpjpe_mm;
  j["mpjpe2d"] = m.mpjpe2d;
  j["mpjpe2d_px"] = m.mpjpe2d_px;
  j["auc"] = m.pck.auc;
  j["frames"] = m.frames;
  if (a.report.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream out(a.report);
    if (!out) throw Error("cannot write report: " + a.report);
    out << j.dump(2) << '\n';
  }
  if (!a.plot.empty()) write_pck_svg(a.plot, m.pck);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-based hand pose toolkit"};
  app.require_subcommand(1);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Render a pose trajectory into events");
  sim->add_option("--traj", sa.traj, "pose trajectory file")->required()->check(CLI::ExistingFile);
  sim->add_option("--camera", sa.camera, "camera file (default DAVIS346-like)")->check(CLI::ExistingFile);
  sim->add_option("--C", sa.cfg.contrast_threshold, "contrast threshold")->capture_default_str();
  sim->add_option("--frame-dt-us", sa.frame_dt_us, "render step in microseconds")->capture_default_str();
  sim->add_option("--noise-rate", sa.cfg.noise_rate, "noise events per pixel per second")->capture_default_str();
  sim->add_option("--seed", sa.cfg.seed, "noise seed")->capture_default_str();
  sim->add_option("--lighting", sa.lighting, "flat or lambertian")
      ->check(CLI::IsMember({"flat", "lambertian"}))
      ->capture_default_str();
  sim->add_option("--out", sa.out, "output events (.evh1 or .csv)")->required();
  sim->add_option("--gt-out", sa.gt_out, "copy of the trajectory poses");

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Refit perturbed poses against events");
  fit_cmd->add_option("--events", fa.events, "events (.evh1 or .csv)")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--gt", fa.gt, "ground-truth poses")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--camera", fa.camera, "camera file")->check(CLI::ExistingFile);
  fit_cmd->add_option("--sigma", fa.sigma, "perturbation std")->capture_default_str();
  fit_cmd->add_option("--trials", fa.trials, "number of seeded trials")->capture_default_str();
  fit_cmd->add_option("--mode", fa.mode, "edge term")->check(CLI::IsMember({"iwe2v", "v2e"}))->capture_default_str();
  fit_cmd->add_flag("--use-cm", fa.use_cm, "add the contrast term");
  fit_cmd->add_option("--iters", fa.iters, "Adam iterations")->capture_default_str();
  fit_cmd->add_option("--lr", fa.lr, "Adam learning rate")->capture_default_str();
  fit_cmd->add_option("--seed", fa.seed, "base seed")->capture_default_str();
  fit_cmd->add_option("--report", fa.report, "CSV report path");
  fit_cmd->add_flag("--trace", fa.trace, "print name value loss records");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Pose metrics against ground truth");
  eval->add_option("--pred", ea.pred, "predicted poses")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", ea.gt, "ground-truth poses")->required()->check(CLI::ExistingFile);
  eval->add_option("--camera", ea.camera, "camera file")->check(CLI::ExistingFile);
  eval->add_option("--report", ea.report, "metrics JSON path (stdout if omitted)");
  eval->add_option("--plot", ea.plot, "PCK curve SVG path");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return run_simulate(sa);
    if (*fit_cmd) return run_fit(fa);
    if (*eval) return run_eval(ea);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
