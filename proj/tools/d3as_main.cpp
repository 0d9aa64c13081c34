// Command line front end: dataset generation, two-stage training, evaluation
// and standalone scoring, all driven by one JSON run configuration.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "d3as/dda.hpp"
#include "d3as/metrics.hpp"
#include "d3as/pipeline.hpp"
#include "d3as/scene_io.hpp"

namespace {

namespace pl = d3as::pipeline;

struct CommonOpts {
  std::string config_path;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool out_required) {
  cmd->add_option("--config", opts.config_path,
                  "JSON run configuration (unknown keys are errors)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--task", opts.preset,
                  "preset name when no --config is given (desk, task1..task10)");
  cmd->add_option("--seed", opts.seed, "override the configured seed");
  auto* out = cmd->add_option("--out", opts.out_dir, "output directory");
  if (out_required) out->required();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

pl::RunConfig load_config(const CommonOpts& opts) {
  pl::RunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = pl::parse_run_config(read_text_file(opts.config_path));
  } else {
    cfg = pl::parse_run_config("{\"preset\":\"" + opts.preset + "\"}");
  }
  if (opts.seed) cfg.seed = *opts.seed;
  return cfg;
}

std::filesystem::path prepare_out(const std::string& dir) {
  std::filesystem::path path(dir);
  std::filesystem::create_directories(path);
  return path;
}

void dump_config(const std::filesystem::path& out_dir,
                 const pl::RunConfig& cfg) {
  write_text_file((out_dir / "config.json").string(),
                  pl::run_config_to_json(cfg) + "\n");
}

void write_log(const std::filesystem::path& path,
               const std::vector<pl::TrainLogRow>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  pl::write_train_log_csv(out, log);
}

int cmd_simulate(const CommonOpts& opts, int scenes) {
  const pl::RunConfig cfg = load_config(opts);
  const auto out_dir = prepare_out(opts.out_dir);
  const int count = scenes >= 0 ? scenes : cfg.eval.scenes;
  const auto path = out_dir / "scenes.jsonl";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  pl::generate_dataset(cfg, cfg.seed, count, out);
  out.close();
  dump_config(out_dir, cfg);
  std::cout << "wrote " << count << " scenes to " << path.string() << "\n";
  return 0;
}

int cmd_train_dda(const CommonOpts& opts) {
  const pl::RunConfig cfg = load_config(opts);
  const auto out_dir = prepare_out(opts.out_dir);
  dump_config(out_dir, cfg);
  pl::DdaBundle bundle = pl::make_dda(cfg);
  const pl::TrainResult result = pl::train_dda(cfg, bundle);
  pl::save_dda((out_dir / "dda.ckpt").string(), cfg, bundle);
  write_log(out_dir / "dda_train_log.csv", result.log);
  std::cout << "dda: " << cfg.train.dda_steps
            << " steps, final moving-average loss "
            << d3as::sim::format_double(result.final_moving_average)
            << ", skipped " << result.skipped_scenes << " scenes\n";
  return 0;
}

int cmd_train_ds(const CommonOpts& opts, const std::string& dda_path) {
  const pl::RunConfig cfg = load_config(opts);
  const auto out_dir = prepare_out(opts.out_dir);
  dump_config(out_dir, cfg);
  const pl::DdaBundle frozen = pl::load_dda(dda_path, cfg);
  pl::DsBundle bundle = pl::make_ds(cfg);
  const pl::TrainResult result = pl::train_ds(cfg, frozen, bundle);
  pl::save_ds((out_dir / "ds.ckpt").string(), cfg, bundle);
  write_log(out_dir / "ds_train_log.csv", result.log);
  std::cout << "ds: " << cfg.train.ds_steps
            << " steps, final moving-average loss "
            << d3as::sim::format_double(result.final_moving_average)
            << ", skipped " << result.skipped_scenes << " scenes\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& dda_path,
                 const std::string& ds_path, const std::string& mode_name,
                 int scenes) {
  const pl::RunConfig cfg = load_config(opts);
  const pl::EvalMode mode = mode_name == "gt-assoc" ? pl::EvalMode::kGtAssoc
                                                    : pl::EvalMode::kPredicted;
  std::optional<pl::DdaBundle> dda;
  if (mode == pl::EvalMode::kPredicted) {
    if (dda_path.empty()) {
      throw std::runtime_error("predicted mode needs --dda <checkpoint>");
    }
    dda = pl::load_dda(dda_path, cfg);
  }
  const pl::DsBundle ds = pl::load_ds(ds_path, cfg);
  const int count = scenes >= 0 ? scenes : cfg.eval.scenes;
  const pl::Report report = pl::evaluate(cfg, dda ? &*dda : nullptr, &ds,
                                         count, mode, cfg.seed);
  const std::string json = pl::report_to_json(report);
  if (!opts.out_dir.empty()) {
    const auto out_dir = prepare_out(opts.out_dir);
    dump_config(out_dir, cfg);
    write_text_file((out_dir / "report.json").string(), json + "\n");
    write_text_file((out_dir / "report.csv").string(),
                    pl::report_to_csv(report));
  }
  std::cout << json << "\n";
  return 0;
}

int cmd_tgospa(const std::string& truth_path, const std::string& estimate_path,
               const d3as::metrics::TgospaParams& params,
               const std::string& out_path) {
  const d3as::metrics::TrajectorySet truth =
      d3as::metrics::trajectory_set_from_json(read_text_file(truth_path));
  const d3as::metrics::TrajectorySet estimate =
      d3as::metrics::trajectory_set_from_json(read_text_file(estimate_path));
  if (truth.window != estimate.window) {
    throw std::runtime_error("trajectory files disagree on the window length");
  }
  const d3as::metrics::TgospaResult res = d3as::metrics::tgospa(
      truth.trajectories, estimate.trajectories, truth.window, params);
  using d3as::sim::format_double;
  std::string json = "{";
  json += "\"p\":" + format_double(params.p);
  json += ",\"c\":" + format_double(params.c);
  json += ",\"gamma\":" + format_double(params.gamma);
  json += ",\"window\":" + std::to_string(truth.window);
  json += ",\"total\":" + format_double(res.total);
  json += ",\"localization\":" + format_double(res.localization);
  json += ",\"missed\":" + format_double(res.missed);
  json += ",\"false_detection\":" + format_double(res.false_detection);
  json += ",\"track_switch\":" + format_double(res.track_switch);
  json += "}";
  if (!out_path.empty()) write_text_file(out_path, json + "\n");
  std::cout << json << "\n";
  return 0;
}

int cmd_taa(const CommonOpts& opts, const std::string& input_path,
            const std::string& dda_path) {
  const pl::RunConfig cfg = load_config(opts);
  const pl::DdaBundle dda = pl::load_dda(dda_path, cfg);
  std::ifstream in(input_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + input_path);
  const auto parsed = d3as::sim::read_scene_file(in);
  const int usable =
      cfg.model.clutter_target == d3as::dda::ClutterTarget::kSingleColumn
          ? cfg.model.tracks - 1
          : cfg.model.tracks;

  int defined = 0;
  std::vector<double> values;
  for (const auto& item : parsed) {
    const d3as::sim::Scene& scene = item.scene;
    if (scene.measurements.empty()) continue;
    if (static_cast<int>(scene.truths.size()) > usable) continue;
    std::vector<Eigen::Vector3d> z;
    std::vector<int> times, labels;
    for (const auto& m : scene.measurements) {
      z.push_back(m.z);
      times.push_back(m.t);
      labels.push_back(m.b);
    }
    std::vector<int> ids;
    for (const auto& truth : scene.truths) ids.push_back(truth.object_id);
    const d3as::dda::AssociationMatrix a = dda.model->run(z, times);
    const d3as::dda::MatchResult match = d3as::dda::match_tracks_to_objects(
        a, labels, ids, cfg.model.clutter_target);
    const std::optional<double> value = d3as::metrics::taa(a, labels, match);
    if (!value) continue;
    ++defined;
    values.push_back(*value);
  }

  double mean = 0.0, ci = 0.0;
  if (!values.empty()) {
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
      ci = 1.96 * sd / std::sqrt(static_cast<double>(values.size()));
    }
  }
  using d3as::sim::format_double;
  std::string json = "{";
  json += "\"scenes\":" + std::to_string(parsed.size());
  json += ",\"defined_scenes\":" + std::to_string(defined);
  json += ",\"mean\":";
  json += defined > 0 ? format_double(mean) : "null";
  json += ",\"ci95\":";
  json += defined > 0 ? format_double(ci) : "null";
  json += "}";
  if (!opts.out_dir.empty()) {
    const auto out_dir = prepare_out(opts.out_dir);
    write_text_file((out_dir / "taa.json").string(), json + "\n");
  }
  std::cout << json << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-object smoothing workbench"};
  app.require_subcommand(1);

  CommonOpts sim_opts;
  int sim_scenes = -1;
  auto* simulate = app.add_subcommand("simulate", "generate a scene dataset");
  add_common(simulate, sim_opts, true);
  simulate->add_option("--scenes", sim_scenes, "number of scenes to draw");

  CommonOpts dda_opts;
  auto* train_dda =
      app.add_subcommand("train-dda", "train the association model");
  add_common(train_dda, dda_opts, true);

  CommonOpts ds_opts;
  std::string ds_dda_path;
  auto* train_ds = app.add_subcommand(
      "train-ds", "train the smoother against a frozen association model");
  add_common(train_ds, ds_opts, true);
  train_ds->add_option("--dda", ds_dda_path, "association checkpoint")
      ->required()
      ->check(CLI::ExistingFile);

  CommonOpts eval_opts;
  std::string eval_dda_path, eval_ds_path, eval_mode = "predicted";
  int eval_scenes = -1;
  auto* evaluate = app.add_subcommand("evaluate", "score a trained pipeline");
  add_common(evaluate, eval_opts, false);
  evaluate->add_option("--dda", eval_dda_path, "association checkpoint")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--ds", eval_ds_path, "smoother checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--mode", eval_mode, "predicted or gt-assoc")
      ->check(CLI::IsMember({"predicted", "gt-assoc"}));
  evaluate->add_option("--scenes", eval_scenes, "number of evaluation scenes");

  std::string tg_truth, tg_estimate, tg_out;
  d3as::metrics::TgospaParams tg_params;
  auto* tgospa =
      app.add_subcommand("tgospa", "score two trajectory-set JSON files");
  tgospa->add_option("--truth", tg_truth, "truth trajectory-set JSON")
      ->required()
      ->check(CLI::ExistingFile);
  tgospa->add_option("--estimate", tg_estimate, "estimate trajectory-set JSON")
      ->required()
      ->check(CLI::ExistingFile);
  tgospa->add_option("--p", tg_params.p, "metric order");
  tgospa->add_option("--c", tg_params.c, "cutoff");
  tgospa->add_option("--gamma", tg_params.gamma, "switch penalty");
  tgospa->add_option("--out", tg_out, "also write the result JSON here");

  CommonOpts taa_opts;
  std::string taa_input, taa_dda_path;
  auto* taa = app.add_subcommand(
      "taa", "association accuracy of a checkpoint over a scene file");
  add_common(taa, taa_opts, false);
  taa->add_option("--input", taa_input, "scene dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  taa->add_option("--dda", taa_dda_path, "association checkpoint")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(sim_opts, sim_scenes);
    if (train_dda->parsed()) return cmd_train_dda(dda_opts);
    if (train_ds->parsed()) return cmd_train_ds(ds_opts, ds_dda_path);
    if (evaluate->parsed()) {
      return cmd_evaluate(eval_opts, eval_dda_path, eval_ds_path, eval_mode,
                          eval_scenes);
    }
    if (tgospa->parsed()) {
      tg_params.validate();
      return cmd_tgospa(tg_truth, tg_estimate, tg_params, tg_out);
    }
    if (taa->parsed()) return cmd_taa(taa_opts, taa_input, taa_dda_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
