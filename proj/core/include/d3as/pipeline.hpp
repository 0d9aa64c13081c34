#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "d3as/dda.hpp"
#include "d3as/metrics.hpp"
#include "d3as/optim.hpp"
#include "d3as/simkit.hpp"
#include "d3as/smoother.hpp"

namespace d3as::pipeline {

struct ModelConfig {
  int width = 32;
  int blocks = 2;
  int heads = 2;
  int ffn_hidden = 64;
  double dropout = 0.1;
  int tracks = 8;
  dda::ClutterTarget clutter_target = dda::ClutterTarget::kSingleColumn;
  nn::MlpSpec dda_head{2, 64};
  nn::MlpSpec ds_pos_head{2, 64};
  nn::MlpSpec ds_vel_head{2, 64};
  nn::MlpSpec ds_pt_head{2, 32};
  nn::MlpSpec ds_pbar_head{2, 64};
};

struct TrainConfig {
  int dda_steps = 20000;
  int ds_steps = 10000;
  int dda_batch = 8;
  int ds_batch = 8;
  double lr = 1e-3;
  double weight_decay = 0.01;
  // -1 derives window = max(10, steps/1000), patience = max(100, steps/20).
  int plateau_window = -1;
  int plateau_patience = -1;
  double plateau_factor = 0.5;
  int log_every = 100;
};

struct EvalConfig {
  int scenes = 400;
  metrics::TgospaParams tgospa;
};

struct RunConfig {
  std::string task_id = "desk";
  std::uint64_t seed = 1;
  sim::TaskConfig task;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  void validate() const;
};

// Small configuration that trains on one CPU core in minutes.
RunConfig desk_preset();
// Full-scale reference configuration for one of the ten canonical tasks.
// Provided for completeness; training it is far outside desk budgets.
RunConfig paper_preset(int task_number);

// Strict JSON parser: starts from the preset named by the optional "preset"
// key (default "desk"), overrides any provided field, and throws
// std::runtime_error on unknown keys anywhere in the document.
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_to_json(const RunConfig& cfg);

// Model bundles tie a parameter store to the model reading it. The store
// owns tensors behind stable pointers, so bundles are movable.
struct DdaBundle {
  nn::ParamStore store;
  std::unique_ptr<dda::DdaModel> model;
};
struct DsBundle {
  nn::ParamStore store;
  std::unique_ptr<ds::DsModel> model;
};

DdaBundle make_dda(const RunConfig& cfg);
DsBundle make_ds(const RunConfig& cfg);

void save_dda(const std::string& path, const RunConfig& cfg,
              const DdaBundle& bundle);
void save_ds(const std::string& path, const RunConfig& cfg,
             const DsBundle& bundle);
// Rebuild from cfg and overwrite parameters from the checkpoint. Throws
// std::runtime_error when the checkpoint kind, window, or tensor shapes do
// not match the configuration.
DdaBundle load_dda(const std::string& path, const RunConfig& cfg);
DsBundle load_ds(const std::string& path, const RunConfig& cfg);

struct TrainLogRow {
  int step = 0;
  double loss = 0.0;
  double moving_average = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  double final_moving_average = 0.0;
  int skipped_scenes = 0;  // resampled draws that violated capacity or were empty
};

// Association training: simulate a fresh batch per step, match tracks to
// objects on the current association matrix, descend the cross entropy.
// Throws std::runtime_error when the loss stops being finite.
TrainResult train_dda(const RunConfig& cfg, DdaBundle& bundle);

// Smoother training against the frozen association model: scenes are
// partitioned with the trained associations, and only smoother parameters
// receive gradient.
TrainResult train_ds(const RunConfig& cfg, const DdaBundle& frozen_dda,
                     DsBundle& bundle);

void write_train_log_csv(std::ostream& out,
                         const std::vector<TrainLogRow>& log);

enum class EvalMode { kPredicted, kGtAssoc };

struct Report {
  std::string task_id;
  EvalMode mode = EvalMode::kPredicted;
  std::uint64_t seed = 0;
  int scenes = 0;
  metrics::TgospaParams tgospa_params;
  double tgospa_mean = 0.0;
  double tgospa_ci95 = 0.0;
  double localization_mean = 0.0;
  double missed_mean = 0.0;
  double false_mean = 0.0;
  double switch_mean = 0.0;
  // Association accuracy over the scenes where it is defined (at least one
  // non-clutter measurement and a feasible matching).
  std::optional<double> taa_mean;
  std::optional<double> taa_ci95;
  int taa_defined_scenes = 0;
};

// kPredicted runs measurements through association, partitioning, smoothing
// and extraction; ground truth is read only by the metrics. kGtAssoc builds
// one track per object from the true labels (confidence 1) and smooths
// those, so it needs no association model.
Report evaluate(const RunConfig& cfg, const DdaBundle* dda_bundle,
                const DsBundle* ds_bundle, int scenes, EvalMode mode,
                std::uint64_t seed);

std::string report_to_json(const Report& report);
std::string report_to_csv(const Report& report);

// Scenes drawn from substreams of `seed`, written in the scene-file format.
void generate_dataset(const RunConfig& cfg, std::uint64_t seed, int count,
                      std::ostream& out);

}  // namespace d3as::pipeline
