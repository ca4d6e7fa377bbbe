#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "eotrack/config.hpp"
#include "eotrack/error.hpp"
#include "eotrack/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "JSON pipeline config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "Random seed (overrides the config)");
  cmd->add_option("--out", opts.out, "Output directory (overrides the config)");
  cmd->add_option("--set", opts.overrides, "Config override key=value, repeatable")->take_all();
}

eotrack::PipelineConfig resolve(const CommonOptions& opts) {
  auto cfg = opts.config_path.empty() ? eotrack::parse_config("", opts.overrides)
                                      : eotrack::load_config(opts.config_path, opts.overrides);
  if (opts.seed) cfg.seed = *opts.seed;
  if (!opts.out.empty()) cfg.output_dir = opts.out;
  return cfg;
}

int cmd_init_ground(const CommonOptions& opts) {
  const auto cfg = resolve(opts);
  const auto input = eotrack::load_input(cfg);
  const auto ground = eotrack::init_ground(cfg.ground, input.frames);
  std::filesystem::create_directories(cfg.output_dir);
  const auto path = cfg.output_dir / "plane.json";
  std::ofstream(path, std::ios::binary) << eotrack::plane_json(ground);
  const auto c = ground.plane.coefficients();
  std::cout << "plane " << c[0] << " " << c[1] << " " << c[2] << " " << c[3] << " (" << ground.inliers
            << " inliers of " << ground.downsampled << ") -> " << path.string() << "\n";
  return kExitOk;
}

int cmd_run(const CommonOptions& opts) {
  const auto cfg = resolve(opts);
  const auto input = eotrack::load_input(cfg);
  if (input.non_finite_dropped > 0) {
    std::cerr << "warning: dropped " << input.non_finite_dropped << " non-finite points\n";
  }
  const auto result = eotrack::run_pipeline(cfg, input);
  eotrack::write_artifacts(cfg, input, result, cfg.output_dir);
  std::size_t detected = 0;
  for (const auto& d : result.detections) detected += d.detection ? 1 : 0;
  std::cout << result.detections.size() << " frames, " << detected << " detections";
  if (result.detection_metrics) std::cout << ", detection rate " << result.detection_metrics->detection_rate;
  if (result.tracking_metrics) {
    std::cout << ", centroid rmse " << result.tracking_metrics->centroid_rmse << " m, mean iou "
              << result.tracking_metrics->mean_iou;
  }
  std::cout << "\nartifacts in " << cfg.output_dir.string() << "\n";
  if (result.health.violations() > 0) {
    std::cerr << "warning: " << result.health.violations() << " filter health violations\n";
  }
  return kExitOk;
}

int cmd_simulate(const CommonOptions& opts, const std::string& format) {
  auto cfg = resolve(opts);
  if (cfg.input.kind != eotrack::InputKind::kSimulate) {
    throw eotrack::Error(eotrack::ErrorKind::kConfig, "input: simulate needs a simulate:<trajectory> input");
  }
  auto scenario = cfg.scenario;
  scenario.trajectory = cfg.input.trajectory;
  scenario.seed = cfg.seed;
  const auto sim = eotrack::generate_scenario(scenario, cfg.profile);
  const auto fmt = format == "ply" ? eotrack::CloudFormat::kPlyAscii
                   : format == "csv" ? eotrack::CloudFormat::kCsv
                                     : eotrack::CloudFormat::kPcdAscii;
  eotrack::write_simulation(sim, cfg.output_dir, fmt);
  std::cout << sim.frames.size() << " frames -> " << cfg.output_dir.string() << "\n";
  return kExitOk;
}

int cmd_evaluate(const CommonOptions& opts, const std::string& run_dir, const std::string& gt_path) {
  const auto cfg = resolve(opts);
  const std::filesystem::path dir = run_dir.empty() ? cfg.output_dir : std::filesystem::path(run_dir);
  std::filesystem::path gt = gt_path;
  if (gt.empty()) {
    if (cfg.input.kind != eotrack::InputKind::kDirectory) {
      throw eotrack::Error(eotrack::ErrorKind::kConfig,
                           "evaluate needs --gt or a directory input with ground_truth.jsonl");
    }
    gt = cfg.input.directory / "ground_truth.jsonl";
  }
  const auto run = eotrack::read_run_artifacts(dir);
  const auto truth = eotrack::read_ground_truth(gt);
  const auto result = eotrack::evaluate_run(run, truth, cfg.tracker, cfg.burn_in, cfg.purity);
  const auto text = eotrack::metrics_json(result);
  std::ofstream(dir / "metrics.json", std::ios::binary) << text;
  std::cout << text;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground-plane detection and extended-object tracking of a mobile robot in point clouds"};
  app.require_subcommand(1);

  CommonOptions opts;
  auto* init = app.add_subcommand("init-ground", "Estimate the ground plane and write plane.json");
  auto* run = app.add_subcommand("run", "Detect and track over all frames, write artifacts");
  auto* sim = app.add_subcommand("simulate", "Render a scenario to frame files and ground truth");
  auto* eval = app.add_subcommand("evaluate", "Recompute metrics for a finished run");
  for (auto* cmd : {init, run, sim, eval}) add_common(cmd, opts);

  std::string format = "pcd";
  sim->add_option("--format", format, "Frame file format")->check(CLI::IsMember({"pcd", "ply", "csv"}));
  std::string run_dir;
  std::string gt_path;
  eval->add_option("--run", run_dir, "Run directory (default: output_dir)");
  eval->add_option("--gt", gt_path, "ground_truth.jsonl");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (init->parsed()) return cmd_init_ground(opts);
    if (run->parsed()) return cmd_run(opts);
    if (sim->parsed()) return cmd_simulate(opts, format);
    return cmd_evaluate(opts, run_dir, gt_path);
  } catch (const eotrack::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == eotrack::ErrorKind::kConfig ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
