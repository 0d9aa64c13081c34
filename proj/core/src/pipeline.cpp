#include "d3as/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "d3as/checkpoint.hpp"
#include "d3as/partitioner.hpp"
#include "d3as/scene_io.hpp"

namespace d3as::pipeline {

namespace {

// Substream tags: every consumer of randomness derives its own seed, so no
// component can shift the bytes another component draws.
enum Stream : std::uint64_t {
  kDataset = 1,
  kDdaTrain = 2,
  kDsTrain = 3,
  kEval = 4,
  kDdaInit = 5,
  kDsInit = 6,
  kDdaDropout = 7,
  kDsDropout = 8,
};

int usable_tracks(const ModelConfig& model) {
  return model.clutter_target == dda::ClutterTarget::kSingleColumn
             ? model.tracks - 1
             : model.tracks;
}

struct FlatScene {
  std::vector<Eigen::Vector3d> z;
  std::vector<int> times;
  std::vector<int> labels;
};

FlatScene flatten(const sim::Scene& scene) {
  FlatScene flat;
  flat.z.reserve(scene.measurements.size());
  flat.times.reserve(scene.measurements.size());
  flat.labels.reserve(scene.measurements.size());
  for (const sim::Measurement& m : scene.measurements) {
    flat.z.push_back(m.z);
    flat.times.push_back(m.t);
    flat.labels.push_back(m.b);
  }
  return flat;
}

std::vector<int> truth_ids(const sim::Scene& scene) {
  std::vector<int> ids;
  ids.reserve(scene.truths.size());
  for (const auto& truth : scene.truths) ids.push_back(truth.object_id);
  return ids;
}

std::pair<int, int> plateau_params(const TrainConfig& train, int steps) {
  const int window = train.plateau_window > 0 ? train.plateau_window
                                              : std::max(10, steps / 1000);
  const int patience = train.plateau_patience > 0 ? train.plateau_patience
                                                  : std::max(100, steps / 20);
  return {window, patience};
}

nn::EncoderConfig encoder_config(const ModelConfig& model, int max_positions) {
  nn::EncoderConfig cfg;
  cfg.width = model.width;
  cfg.heads = model.heads;
  cfg.blocks = model.blocks;
  cfg.ffn_hidden = model.ffn_hidden;
  cfg.dropout = model.dropout;
  cfg.max_positions = max_positions;
  return cfg;
}

void maybe_log(std::vector<TrainLogRow>& log, int step, int total_steps,
               int log_every, double loss, double ma, double lr) {
  if (step % log_every == 0 || step == total_steps - 1) {
    log.push_back({step, loss, ma, lr});
  }
}

constexpr int kMaxResample = 1000;

}  // namespace

void RunConfig::validate() const {
  task.validate();
  if (model.width < 1 || model.blocks < 1 || model.heads < 1 ||
      model.ffn_hidden < 1) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (model.dropout < 0.0 || model.dropout >= 1.0) {
    throw std::invalid_argument("model dropout outside [0, 1)");
  }
  if (model.tracks < 1) throw std::invalid_argument("model tracks < 1");
  if (model.clutter_target == dda::ClutterTarget::kSingleColumn &&
      model.tracks < 2) {
    throw std::invalid_argument("single-column clutter needs >= 2 tracks");
  }
  if (train.dda_steps < 0 || train.ds_steps < 0) {
    throw std::invalid_argument("training step counts must be >= 0");
  }
  if (train.dda_batch < 1 || train.ds_batch < 1) {
    throw std::invalid_argument("batch sizes must be >= 1");
  }
  if (train.lr <= 0.0) throw std::invalid_argument("lr must be > 0");
  if (train.weight_decay < 0.0) {
    throw std::invalid_argument("weight decay must be >= 0");
  }
  if (train.plateau_factor <= 0.0 || train.plateau_factor >= 1.0) {
    throw std::invalid_argument("plateau factor outside (0, 1)");
  }
  if (train.log_every < 1) throw std::invalid_argument("log_every < 1");
  if (eval.scenes < 1) throw std::invalid_argument("eval scenes < 1");
  eval.tgospa.validate();
}

RunConfig desk_preset() {
  RunConfig cfg;
  cfg.task_id = "desk";
  cfg.seed = 1;
  cfg.task = sim::make_desk_task();
  return cfg;
}

RunConfig paper_preset(int task_number) {
  RunConfig cfg;
  cfg.task_id = "task" + std::to_string(task_number);
  cfg.seed = 1;
  cfg.task = sim::make_task(task_number);
  cfg.model.width = 128;
  cfg.model.blocks = 6;
  cfg.model.heads = 8;
  cfg.model.ffn_hidden = 2048;
  cfg.model.dropout = 0.1;
  cfg.model.tracks = 20;
  cfg.model.clutter_target = dda::ClutterTarget::kLiteral;
  cfg.model.dda_head = {3, 128};
  cfg.model.ds_pos_head = {3, 128};
  cfg.model.ds_vel_head = {3, 128};
  cfg.model.ds_pt_head = {2, 64};
  cfg.model.ds_pbar_head = {2, 64};
  cfg.train.dda_steps = 2000000;
  cfg.train.ds_steps = 2000000;
  cfg.train.dda_batch = 32;
  cfg.train.ds_batch = 16;
  cfg.train.lr = 5e-5;
  cfg.train.plateau_window = 2000;
  cfg.train.plateau_patience = 100000;
  cfg.train.log_every = 1000;
  cfg.eval.scenes = 1000;
  return cfg;
}

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& message) {
  throw std::runtime_error("run config: " + message);
}

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) ==
        allowed.end()) {
      config_error("unknown key \"" + item.key() + "\" in " + where);
    }
  }
}

double get_number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) config_error(std::string(key) + " must be a number");
  return j.at(key).get<double>();
}

int get_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) {
    config_error(std::string(key) + " must be an integer");
  }
  return j.at(key).get<int>();
}

sim::Interval get_interval(const json& j, const char* key,
                           sim::Interval fallback) {
  if (!j.contains(key)) return fallback;
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != 2) {
    config_error(std::string(key) + " must be [lo, hi]");
  }
  return {arr.at(0).get<double>(), arr.at(1).get<double>()};
}

void parse_task(const json& j, sim::TaskConfig& task) {
  check_keys(j,
             {"p_d", "p_s", "sigma_q2", "delta_t", "window_length",
              "sigma_r_min2", "sigma_r_max2", "sigma_rdot2",
              "sigma_theta_min2", "sigma_theta_max2", "lambda_c", "birth_rate",
              "birth_rate_initial", "birth_schedule", "birth_mean",
              "birth_cov_diag", "fov_r", "fov_rdot", "fov_theta"},
             "task");
  task.p_d = get_number(j, "p_d", task.p_d);
  task.p_s = get_number(j, "p_s", task.p_s);
  task.sigma_q2 = get_number(j, "sigma_q2", task.sigma_q2);
  task.delta_t = get_number(j, "delta_t", task.delta_t);
  task.window_length = get_int(j, "window_length", task.window_length);
  task.sigma_r_min2 = get_number(j, "sigma_r_min2", task.sigma_r_min2);
  task.sigma_r_max2 = get_number(j, "sigma_r_max2", task.sigma_r_max2);
  task.sigma_rdot2 = get_number(j, "sigma_rdot2", task.sigma_rdot2);
  task.sigma_theta_min2 = get_number(j, "sigma_theta_min2", task.sigma_theta_min2);
  task.sigma_theta_max2 = get_number(j, "sigma_theta_max2", task.sigma_theta_max2);
  task.lambda_c = get_number(j, "lambda_c", task.lambda_c);
  task.birth_rate = get_number(j, "birth_rate", task.birth_rate);
  task.birth_rate_initial =
      get_number(j, "birth_rate_initial", task.birth_rate_initial);
  if (j.contains("birth_schedule")) {
    const std::string schedule = j.at("birth_schedule").get<std::string>();
    if (schedule == "every_step") {
      task.birth_schedule = sim::BirthSchedule::kEveryStep;
    } else if (schedule == "initial_only") {
      task.birth_schedule = sim::BirthSchedule::kInitialOnly;
    } else {
      config_error("birth_schedule must be every_step or initial_only");
    }
  }
  if (j.contains("birth_mean")) {
    const auto& arr = j.at("birth_mean");
    if (!arr.is_array() || arr.size() != 4) config_error("birth_mean must have 4 entries");
    for (int i = 0; i < 4; ++i) task.birth_mean(i) = arr.at(i).get<double>();
  }
  if (j.contains("birth_cov_diag")) {
    const auto& arr = j.at("birth_cov_diag");
    if (!arr.is_array() || arr.size() != 4) config_error("birth_cov_diag must have 4 entries");
    for (int i = 0; i < 4; ++i) task.birth_cov_diag(i) = arr.at(i).get<double>();
  }
  task.fov_r = get_interval(j, "fov_r", task.fov_r);
  task.fov_rdot = get_interval(j, "fov_rdot", task.fov_rdot);
  task.fov_theta = get_interval(j, "fov_theta", task.fov_theta);
}

nn::MlpSpec parse_mlp(const json& j, const char* key, nn::MlpSpec fallback) {
  if (!j.contains(key)) return fallback;
  const auto& spec = j.at(key);
  check_keys(spec, {"layers", "hidden"}, key);
  return {get_int(spec, "layers", fallback.layers),
          get_int(spec, "hidden", fallback.hidden)};
}

void parse_model(const json& j, ModelConfig& model) {
  check_keys(j,
             {"width", "blocks", "heads", "ffn_hidden", "dropout", "tracks",
              "clutter_target", "dda_head", "ds_pos_head", "ds_vel_head",
              "ds_pt_head", "ds_pbar_head"},
             "model");
  model.width = get_int(j, "width", model.width);
  model.blocks = get_int(j, "blocks", model.blocks);
  model.heads = get_int(j, "heads", model.heads);
  model.ffn_hidden = get_int(j, "ffn_hidden", model.ffn_hidden);
  model.dropout = get_number(j, "dropout", model.dropout);
  model.tracks = get_int(j, "tracks", model.tracks);
  if (j.contains("clutter_target")) {
    const std::string mode = j.at("clutter_target").get<std::string>();
    if (mode == "literal") {
      model.clutter_target = dda::ClutterTarget::kLiteral;
    } else if (mode == "single_column") {
      model.clutter_target = dda::ClutterTarget::kSingleColumn;
    } else {
      config_error("clutter_target must be literal or single_column");
    }
  }
  model.dda_head = parse_mlp(j, "dda_head", model.dda_head);
  model.ds_pos_head = parse_mlp(j, "ds_pos_head", model.ds_pos_head);
  model.ds_vel_head = parse_mlp(j, "ds_vel_head", model.ds_vel_head);
  model.ds_pt_head = parse_mlp(j, "ds_pt_head", model.ds_pt_head);
  model.ds_pbar_head = parse_mlp(j, "ds_pbar_head", model.ds_pbar_head);
}

void parse_train(const json& j, TrainConfig& train) {
  check_keys(j,
             {"dda_steps", "ds_steps", "dda_batch", "ds_batch", "lr",
              "weight_decay", "plateau_window", "plateau_patience",
              "plateau_factor", "log_every"},
             "train");
  train.dda_steps = get_int(j, "dda_steps", train.dda_steps);
  train.ds_steps = get_int(j, "ds_steps", train.ds_steps);
  train.dda_batch = get_int(j, "dda_batch", train.dda_batch);
  train.ds_batch = get_int(j, "ds_batch", train.ds_batch);
  train.lr = get_number(j, "lr", train.lr);
  train.weight_decay = get_number(j, "weight_decay", train.weight_decay);
  train.plateau_window = get_int(j, "plateau_window", train.plateau_window);
  train.plateau_patience =
      get_int(j, "plateau_patience", train.plateau_patience);
  train.plateau_factor = get_number(j, "plateau_factor", train.plateau_factor);
  train.log_every = get_int(j, "log_every", train.log_every);
}

void parse_eval(const json& j, EvalConfig& eval) {
  check_keys(j, {"scenes", "tgospa"}, "eval");
  eval.scenes = get_int(j, "scenes", eval.scenes);
  if (j.contains("tgospa")) {
    const auto& tg = j.at("tgospa");
    check_keys(tg, {"p", "c", "gamma"}, "eval.tgospa");
    eval.tgospa.p = get_number(tg, "p", eval.tgospa.p);
    eval.tgospa.c = get_number(tg, "c", eval.tgospa.c);
    eval.tgospa.gamma = get_number(tg, "gamma", eval.tgospa.gamma);
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    config_error(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) config_error("top level must be an object");
  check_keys(j, {"preset", "task_id", "seed", "task", "model", "train", "eval"},
             "top level");

  RunConfig cfg;
  const std::string preset =
      j.contains("preset") ? j.at("preset").get<std::string>() : "desk";
  if (preset == "desk") {
    cfg = desk_preset();
  } else if (preset.rfind("task", 0) == 0) {
    try {
      cfg = paper_preset(std::stoi(preset.substr(4)));
    } catch (const std::exception&) {
      config_error("unknown preset \"" + preset + "\"");
    }
  } else {
    config_error("unknown preset \"" + preset + "\"");
  }

  if (j.contains("task_id")) cfg.task_id = j.at("task_id").get<std::string>();
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) {
      config_error("seed must be an unsigned integer");
    }
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("task")) parse_task(j.at("task"), cfg.task);
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  if (j.contains("eval")) parse_eval(j.at("eval"), cfg.eval);
  cfg.validate();
  return cfg;
}

namespace {

std::string mlp_to_json(const nn::MlpSpec& spec) {
  return "{\"layers\":" + std::to_string(spec.layers) +
         ",\"hidden\":" + std::to_string(spec.hidden) + "}";
}

std::string interval_to_json(const sim::Interval& iv) {
  return "[" + sim::format_double(iv.lo) + "," + sim::format_double(iv.hi) +
         "]";
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
  using sim::format_double;
  std::string out = "{";
  out += "\"task_id\":" + json(cfg.task_id).dump();
  out += ",\"seed\":" + std::to_string(cfg.seed);
  out += ",\"task\":{";
  out += "\"p_d\":" + format_double(cfg.task.p_d);
  out += ",\"p_s\":" + format_double(cfg.task.p_s);
  out += ",\"sigma_q2\":" + format_double(cfg.task.sigma_q2);
  out += ",\"delta_t\":" + format_double(cfg.task.delta_t);
  out += ",\"window_length\":" + std::to_string(cfg.task.window_length);
  out += ",\"sigma_r_min2\":" + format_double(cfg.task.sigma_r_min2);
  out += ",\"sigma_r_max2\":" + format_double(cfg.task.sigma_r_max2);
  out += ",\"sigma_rdot2\":" + format_double(cfg.task.sigma_rdot2);
  out += ",\"sigma_theta_min2\":" + format_double(cfg.task.sigma_theta_min2);
  out += ",\"sigma_theta_max2\":" + format_double(cfg.task.sigma_theta_max2);
  out += ",\"lambda_c\":" + format_double(cfg.task.lambda_c);
  out += ",\"birth_rate\":" + format_double(cfg.task.birth_rate);
  out += ",\"birth_rate_initial\":" + format_double(cfg.task.birth_rate_initial);
  out += ",\"birth_schedule\":";
  out += cfg.task.birth_schedule == sim::BirthSchedule::kEveryStep
             ? "\"every_step\""
             : "\"initial_only\"";
  out += ",\"birth_mean\":[";
  for (int i = 0; i < 4; ++i) {
    if (i) out += ',';
    out += format_double(cfg.task.birth_mean(i));
  }
  out += "],\"birth_cov_diag\":[";
  for (int i = 0; i < 4; ++i) {
    if (i) out += ',';
    out += format_double(cfg.task.birth_cov_diag(i));
  }
  out += "],\"fov_r\":" + interval_to_json(cfg.task.fov_r);
  out += ",\"fov_rdot\":" + interval_to_json(cfg.task.fov_rdot);
  out += ",\"fov_theta\":" + interval_to_json(cfg.task.fov_theta);
  out += "},\"model\":{";
  out += "\"width\":" + std::to_string(cfg.model.width);
  out += ",\"blocks\":" + std::to_string(cfg.model.blocks);
  out += ",\"heads\":" + std::to_string(cfg.model.heads);
  out += ",\"ffn_hidden\":" + std::to_string(cfg.model.ffn_hidden);
  out += ",\"dropout\":" + format_double(cfg.model.dropout);
  out += ",\"tracks\":" + std::to_string(cfg.model.tracks);
  out += ",\"clutter_target\":";
  out += cfg.model.clutter_target == dda::ClutterTarget::kSingleColumn
             ? "\"single_column\""
             : "\"literal\"";
  out += ",\"dda_head\":" + mlp_to_json(cfg.model.dda_head);
  out += ",\"ds_pos_head\":" + mlp_to_json(cfg.model.ds_pos_head);
  out += ",\"ds_vel_head\":" + mlp_to_json(cfg.model.ds_vel_head);
  out += ",\"ds_pt_head\":" + mlp_to_json(cfg.model.ds_pt_head);
  out += ",\"ds_pbar_head\":" + mlp_to_json(cfg.model.ds_pbar_head);
  out += "},\"train\":{";
  out += "\"dda_steps\":" + std::to_string(cfg.train.dda_steps);
  out += ",\"ds_steps\":" + std::to_string(cfg.train.ds_steps);
  out += ",\"dda_batch\":" + std::to_string(cfg.train.dda_batch);
  out += ",\"ds_batch\":" + std::to_string(cfg.train.ds_batch);
  out += ",\"lr\":" + format_double(cfg.train.lr);
  out += ",\"weight_decay\":" + format_double(cfg.train.weight_decay);
  out += ",\"plateau_window\":" + std::to_string(cfg.train.plateau_window);
  out += ",\"plateau_patience\":" + std::to_string(cfg.train.plateau_patience);
  out += ",\"plateau_factor\":" + format_double(cfg.train.plateau_factor);
  out += ",\"log_every\":" + std::to_string(cfg.train.log_every);
  out += "},\"eval\":{";
  out += "\"scenes\":" + std::to_string(cfg.eval.scenes);
  out += ",\"tgospa\":{\"p\":" + format_double(cfg.eval.tgospa.p);
  out += ",\"c\":" + format_double(cfg.eval.tgospa.c);
  out += ",\"gamma\":" + format_double(cfg.eval.tgospa.gamma);
  out += "}}}";
  return out;
}

DdaBundle make_dda(const RunConfig& cfg) {
  cfg.validate();
  DdaBundle bundle;
  dda::DdaConfig dcfg;
  dcfg.encoder = encoder_config(cfg.model, cfg.task.window_length);
  dcfg.tracks = cfg.model.tracks;
  dcfg.head = cfg.model.dda_head;
  dcfg.clutter_target = cfg.model.clutter_target;
  RandomStream init(RandomStream::derive(cfg.seed, {Stream::kDdaInit}));
  bundle.model = std::make_unique<dda::DdaModel>(dcfg, bundle.store, init);
  return bundle;
}

DsBundle make_ds(const RunConfig& cfg) {
  cfg.validate();
  DsBundle bundle;
  ds::DsConfig dcfg;
  dcfg.encoder = encoder_config(cfg.model, cfg.task.window_length);
  dcfg.window_length = cfg.task.window_length;
  dcfg.pos_head = cfg.model.ds_pos_head;
  dcfg.vel_head = cfg.model.ds_vel_head;
  dcfg.pt_head = cfg.model.ds_pt_head;
  dcfg.pbar_head = cfg.model.ds_pbar_head;
  RandomStream init(RandomStream::derive(cfg.seed, {Stream::kDsInit}));
  bundle.model = std::make_unique<ds::DsModel>(dcfg, bundle.store, init);
  return bundle;
}

namespace {

std::map<std::string, std::string> common_meta(const RunConfig& cfg,
                                               const char* kind) {
  return {
      {"kind", kind},
      {"task_id", cfg.task_id},
      {"window_length", std::to_string(cfg.task.window_length)},
      {"tracks", std::to_string(cfg.model.tracks)},
      {"width", std::to_string(cfg.model.width)},
      {"blocks", std::to_string(cfg.model.blocks)},
      {"heads", std::to_string(cfg.model.heads)},
      {"clutter_target",
       cfg.model.clutter_target == dda::ClutterTarget::kSingleColumn
           ? "single_column"
           : "literal"},
  };
}

void check_meta(const std::map<std::string, std::string>& meta,
                const RunConfig& cfg, const char* kind,
                const std::string& path) {
  const auto get = [&](const char* key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) {
      throw std::runtime_error(path + ": checkpoint is missing meta key " +
                               key);
    }
    return it->second;
  };
  if (get("kind") != kind) {
    throw std::runtime_error(path + ": checkpoint kind is " + get("kind") +
                             ", expected " + kind);
  }
  if (get("window_length") != std::to_string(cfg.task.window_length)) {
    throw std::runtime_error(path +
                             ": checkpoint window length does not match task");
  }
}

}  // namespace

void save_dda(const std::string& path, const RunConfig& cfg,
              const DdaBundle& bundle) {
  nn::save_checkpoint(path, bundle.store, common_meta(cfg, "dda"));
}

void save_ds(const std::string& path, const RunConfig& cfg,
             const DsBundle& bundle) {
  nn::save_checkpoint(path, bundle.store, common_meta(cfg, "ds"));
}

DdaBundle load_dda(const std::string& path, const RunConfig& cfg) {
  DdaBundle bundle = make_dda(cfg);
  check_meta(nn::read_checkpoint_meta(path), cfg, "dda", path);
  nn::load_checkpoint(path, bundle.store);
  return bundle;
}

DsBundle load_ds(const std::string& path, const RunConfig& cfg) {
  DsBundle bundle = make_ds(cfg);
  check_meta(nn::read_checkpoint_meta(path), cfg, "ds", path);
  nn::load_checkpoint(path, bundle.store);
  return bundle;
}

namespace {

sim::Scene sample_scene(const RunConfig& cfg, std::uint64_t stream,
                        std::uint64_t step, std::uint64_t sample,
                        std::uint64_t retry) {
  RandomStream rng(
      RandomStream::derive(cfg.seed, {stream, step, sample, retry}));
  return sim::simulate_scene(cfg.task, rng);
}

}  // namespace

TrainResult train_dda(const RunConfig& cfg, DdaBundle& bundle) {
  cfg.validate();
  nn::AdamWConfig ocfg;
  ocfg.lr = cfg.train.lr;
  ocfg.weight_decay = cfg.train.weight_decay;
  nn::AdamW opt(bundle.store, ocfg);
  const auto [window, patience] = plateau_params(cfg.train, cfg.train.dda_steps);
  nn::PlateauScheduler plateau(window, patience, cfg.train.plateau_factor);
  const int usable = usable_tracks(cfg.model);
  const dda::ClutterTarget mode = cfg.model.clutter_target;

  TrainResult result;
  for (int step = 0; step < cfg.train.dda_steps; ++step) {
    bundle.store.zero_grad();
    double batch_loss = 0.0;
    for (int s = 0; s < cfg.train.dda_batch; ++s) {
      sim::Scene scene;
      std::uint64_t retry = 0;
      for (;; ++retry) {
        if (retry > kMaxResample) {
          throw std::runtime_error(
              "train_dda: could not sample a scene within the track budget");
        }
        scene = sample_scene(cfg, Stream::kDdaTrain,
                             static_cast<std::uint64_t>(step),
                             static_cast<std::uint64_t>(s), retry);
        if (!scene.measurements.empty() &&
            static_cast<int>(scene.truths.size()) <= usable) {
          break;
        }
        ++result.skipped_scenes;
      }
      const FlatScene flat = flatten(scene);
      RandomStream dropout_rng(RandomStream::derive(
          cfg.seed, {Stream::kDdaDropout, static_cast<std::uint64_t>(step),
                     static_cast<std::uint64_t>(s)}));
      nn::Graph g;
      const nn::Graph::Id a_node =
          bundle.model->forward(g, flat.z, flat.times, true, &dropout_rng);
      const dda::AssociationMatrix a{g.value(a_node)};
      const dda::MatchResult match =
          dda::match_tracks_to_objects(a, flat.labels, truth_ids(scene), mode);
      const Eigen::MatrixXd target =
          dda::build_target_matrix(match, flat.labels, mode);
      const nn::Graph::Id loss_node = dda::dda_loss_node(g, a_node, target);
      g.backward(loss_node);
      batch_loss += g.value(loss_node)(0, 0);
    }
    batch_loss /= cfg.train.dda_batch;
    if (!std::isfinite(batch_loss)) {
      throw std::runtime_error("train_dda: loss diverged at step " +
                               std::to_string(step));
    }
    bundle.store.scale_grad(1.0 / cfg.train.dda_batch);
    opt.step();
    const double next_lr = plateau.observe(batch_loss, opt.lr());
    if (next_lr != opt.lr()) opt.set_lr(next_lr);
    maybe_log(result.log, step, cfg.train.dda_steps, cfg.train.log_every,
              batch_loss, plateau.moving_average(), opt.lr());
  }
  result.final_moving_average = plateau.moving_average();
  return result;
}

TrainResult train_ds(const RunConfig& cfg, const DdaBundle& frozen_dda,
                     DsBundle& bundle) {
  cfg.validate();
  nn::AdamWConfig ocfg;
  ocfg.lr = cfg.train.lr;
  ocfg.weight_decay = cfg.train.weight_decay;
  nn::AdamW opt(bundle.store, ocfg);
  const auto [window, patience] = plateau_params(cfg.train, cfg.train.ds_steps);
  nn::PlateauScheduler plateau(window, patience, cfg.train.plateau_factor);
  const int usable = usable_tracks(cfg.model);
  const dda::ClutterTarget mode = cfg.model.clutter_target;

  TrainResult result;
  for (int step = 0; step < cfg.train.ds_steps; ++step) {
    bundle.store.zero_grad();
    double batch_loss = 0.0;
    for (int s = 0; s < cfg.train.ds_batch; ++s) {
      sim::Scene scene;
      FlatScene flat;
      std::vector<track::Track> tracks;
      std::uint64_t retry = 0;
      for (;; ++retry) {
        if (retry > kMaxResample) {
          throw std::runtime_error(
              "train_ds: could not sample a scene that partitions into tracks");
        }
        scene = sample_scene(cfg, Stream::kDsTrain,
                             static_cast<std::uint64_t>(step),
                             static_cast<std::uint64_t>(s), retry);
        if (scene.measurements.empty() ||
            static_cast<int>(scene.truths.size()) > usable) {
          ++result.skipped_scenes;
          continue;
        }
        flat = flatten(scene);
        const dda::AssociationMatrix a = frozen_dda.model->run(flat.z,
                                                               flat.times);
        tracks = track::partition(a, flat.z, flat.times,
                                  cfg.task.window_length);
        if (tracks.empty()) {
          ++result.skipped_scenes;
          continue;
        }
        const dda::MatchResult match = dda::match_tracks_to_objects(
            a, flat.labels, truth_ids(scene), mode);
        RandomStream dropout_rng(RandomStream::derive(
            cfg.seed, {Stream::kDsDropout, static_cast<std::uint64_t>(step),
                       static_cast<std::uint64_t>(s)}));
        nn::Graph g;
        std::vector<ds::DsModel::ForwardNodes> nodes;
        std::vector<int> columns;
        for (const track::Track& track : tracks) {
          nodes.push_back(bundle.model->forward(g, track, true, &dropout_rng));
          columns.push_back(track.source_column);
        }
        const nn::Graph::Id loss_node =
            ds::ds_loss_node(g, nodes, columns, scene.truths, match);
        g.backward(loss_node);
        batch_loss += g.value(loss_node)(0, 0);
        break;
      }
    }
    batch_loss /= cfg.train.ds_batch;
    if (!std::isfinite(batch_loss)) {
      throw std::runtime_error("train_ds: loss diverged at step " +
                               std::to_string(step));
    }
    bundle.store.scale_grad(1.0 / cfg.train.ds_batch);
    opt.step();
    const double next_lr = plateau.observe(batch_loss, opt.lr());
    if (next_lr != opt.lr()) opt.set_lr(next_lr);
    maybe_log(result.log, step, cfg.train.ds_steps, cfg.train.log_every,
              batch_loss, plateau.moving_average(), opt.lr());
  }
  result.final_moving_average = plateau.moving_average();
  return result;
}

void write_train_log_csv(std::ostream& out,
                         const std::vector<TrainLogRow>& log) {
  out << "step,loss,moving_average,lr\n";
  for (const TrainLogRow& row : log) {
    out << row.step << ',' << sim::format_double(row.loss) << ','
        << sim::format_double(row.moving_average) << ','
        << sim::format_double(row.lr) << '\n';
  }
  if (!out) throw std::runtime_error("training log write failed");
}

namespace {

std::map<int, track::Track> ground_truth_tracks(const sim::Scene& scene,
                                                int window_length) {
  // One track per object that produced at least one measurement, slots
  // filled by measurement time, confidence pinned to 1.
  std::map<int, track::Track> by_object;
  int next_column = 0;
  for (const sim::Measurement& m : scene.measurements) {
    if (m.b < 0) continue;
    auto it = by_object.find(m.b);
    if (it == by_object.end()) {
      track::Track track;
      track.source_column = next_column++;
      track.slots.resize(window_length);
      it = by_object.emplace(m.b, std::move(track)).first;
    }
    track::TrackSlot& slot = it->second.slots.at(m.t - 1);
    slot.measured = true;
    slot.z = m.z;
    slot.confidence = 1.0;
  }
  return by_object;
}

struct RunningStats {
  std::vector<double> values;

  void add(double v) { values.push_back(v); }
  double mean() const {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
  }
  double ci95() const {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    const double m = mean();
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    return 1.96 * sd / std::sqrt(static_cast<double>(n));
  }
};

}  // namespace

Report evaluate(const RunConfig& cfg, const DdaBundle* dda_bundle,
                const DsBundle* ds_bundle, int scenes, EvalMode mode,
                std::uint64_t seed) {
  cfg.validate();
  if (scenes < 1) throw std::invalid_argument("evaluate: scenes < 1");
  if (ds_bundle == nullptr) {
    throw std::invalid_argument("evaluate: smoother model required");
  }
  if (mode == EvalMode::kPredicted && dda_bundle == nullptr) {
    throw std::invalid_argument(
        "evaluate: predicted mode requires the association model");
  }
  const int window = cfg.task.window_length;
  const int usable = usable_tracks(cfg.model);

  RunningStats total, loc, missed, false_det, switches, taa_stats;
  int taa_defined = 0;

  for (int s = 0; s < scenes; ++s) {
    RandomStream rng(RandomStream::derive(
        seed, {Stream::kEval, static_cast<std::uint64_t>(s)}));
    const sim::Scene scene = sim::simulate_scene(cfg.task, rng);

    metrics::TgospaResult res;
    std::optional<double> scene_taa;
    if (mode == EvalMode::kPredicted) {
      std::vector<metrics::Trajectory> truth_set;
      truth_set.reserve(scene.truths.size());
      for (const auto& truth : scene.truths) {
        truth_set.push_back(metrics::from_truth(truth));
      }
      std::vector<track::Track> tracks;
      if (!scene.measurements.empty()) {
        const FlatScene flat = flatten(scene);
        const dda::AssociationMatrix a =
            dda_bundle->model->run(flat.z, flat.times);
        tracks = track::partition(a, flat.z, flat.times, window);
        const bool has_object_measurement =
            std::any_of(flat.labels.begin(), flat.labels.end(),
                        [](int b) { return b >= 0; });
        if (has_object_measurement &&
            static_cast<int>(scene.truths.size()) <= usable) {
          const dda::MatchResult match = dda::match_tracks_to_objects(
              a, flat.labels, truth_ids(scene), cfg.model.clutter_target);
          scene_taa = metrics::taa(a, flat.labels, match);
        }
      }
      std::vector<ds::TrajectoryEstimate> estimates;
      estimates.reserve(tracks.size());
      for (const track::Track& track : tracks) {
        estimates.push_back(ds_bundle->model->estimate(track));
      }
      const std::vector<ds::ExtractedTrajectory> extracted =
          ds::extract_trajectories(estimates);
      std::vector<metrics::Trajectory> estimate_set;
      estimate_set.reserve(extracted.size());
      for (const auto& traj : extracted) {
        estimate_set.push_back(metrics::from_extracted(traj));
      }
      res = metrics::tgospa(truth_set, estimate_set, window, cfg.eval.tgospa);
    } else {
      // Oracle-association scoring: the metric is a sum of singleton
      // instances, one per true object, each scored against the smoothed
      // track built from that object's own measurements. Objects that were
      // never detected have no track and score as pure misses.
      const std::map<int, track::Track> by_object =
          ground_truth_tracks(scene, window);
      for (const auto& truth : scene.truths) {
        const std::vector<metrics::Trajectory> xs{metrics::from_truth(truth)};
        std::vector<metrics::Trajectory> ys;
        const auto it = by_object.find(truth.object_id);
        if (it != by_object.end()) {
          const std::vector<ds::ExtractedTrajectory> extracted =
              ds::extract_trajectories({ds_bundle->model->estimate(it->second)});
          for (const auto& traj : extracted) {
            ys.push_back(metrics::from_extracted(traj));
          }
        }
        const metrics::TgospaResult one =
            metrics::tgospa(xs, ys, window, cfg.eval.tgospa);
        res.total += one.total;
        res.localization += one.localization;
        res.missed += one.missed;
        res.false_detection += one.false_detection;
        res.track_switch += one.track_switch;
      }
    }
    total.add(res.total);
    loc.add(res.localization);
    missed.add(res.missed);
    false_det.add(res.false_detection);
    switches.add(res.track_switch);
    if (scene_taa.has_value()) {
      ++taa_defined;
      taa_stats.add(*scene_taa);
    }
  }

  Report report;
  report.task_id = cfg.task_id;
  report.mode = mode;
  report.seed = seed;
  report.scenes = scenes;
  report.tgospa_params = cfg.eval.tgospa;
  report.tgospa_mean = total.mean();
  report.tgospa_ci95 = total.ci95();
  report.localization_mean = loc.mean();
  report.missed_mean = missed.mean();
  report.false_mean = false_det.mean();
  report.switch_mean = switches.mean();
  report.taa_defined_scenes = taa_defined;
  if (taa_defined > 0) {
    report.taa_mean = taa_stats.mean();
    report.taa_ci95 = taa_stats.ci95();
  }
  return report;
}

std::string report_to_json(const Report& report) {
  using sim::format_double;
  std::string out = "{";
  out += "\"task_id\":" + nlohmann::json(report.task_id).dump();
  out += ",\"mode\":";
  out += report.mode == EvalMode::kPredicted ? "\"predicted\"" : "\"gt-assoc\"";
  out += ",\"seed\":" + std::to_string(report.seed);
  out += ",\"scenes\":" + std::to_string(report.scenes);
  out += ",\"tgospa\":{";
  out += "\"p\":" + format_double(report.tgospa_params.p);
  out += ",\"c\":" + format_double(report.tgospa_params.c);
  out += ",\"gamma\":" + format_double(report.tgospa_params.gamma);
  out += ",\"mean\":" + format_double(report.tgospa_mean);
  out += ",\"ci95\":" + format_double(report.tgospa_ci95);
  out += ",\"localization_mean\":" + format_double(report.localization_mean);
  out += ",\"missed_mean\":" + format_double(report.missed_mean);
  out += ",\"false_mean\":" + format_double(report.false_mean);
  out += ",\"switch_mean\":" + format_double(report.switch_mean);
  out += "},\"taa\":{";
  out += "\"defined_scenes\":" + std::to_string(report.taa_defined_scenes);
  out += ",\"mean\":";
  out += report.taa_mean ? format_double(*report.taa_mean) : "null";
  out += ",\"ci95\":";
  out += report.taa_ci95 ? format_double(*report.taa_ci95) : "null";
  out += "}}";
  return out;
}

std::string report_to_csv(const Report& report) {
  using sim::format_double;
  std::string out =
      "task_id,mode,seed,scenes,p,c,gamma,tgospa_mean,tgospa_ci95,"
      "localization_mean,missed_mean,false_mean,switch_mean,"
      "taa_defined_scenes,taa_mean,taa_ci95\n";
  out += report.task_id + ',';
  out += report.mode == EvalMode::kPredicted ? "predicted" : "gt-assoc";
  out += ',' + std::to_string(report.seed);
  out += ',' + std::to_string(report.scenes);
  out += ',' + format_double(report.tgospa_params.p);
  out += ',' + format_double(report.tgospa_params.c);
  out += ',' + format_double(report.tgospa_params.gamma);
  out += ',' + format_double(report.tgospa_mean);
  out += ',' + format_double(report.tgospa_ci95);
  out += ',' + format_double(report.localization_mean);
  out += ',' + format_double(report.missed_mean);
  out += ',' + format_double(report.false_mean);
  out += ',' + format_double(report.switch_mean);
  out += ',' + std::to_string(report.taa_defined_scenes);
  out += ',';
  out += report.taa_mean ? format_double(*report.taa_mean) : "";
  out += ',';
  out += report.taa_ci95 ? format_double(*report.taa_ci95) : "";
  out += '\n';
  return out;
}

void generate_dataset(const RunConfig& cfg, std::uint64_t seed, int count,
                      std::ostream& out) {
  cfg.validate();
  if (count < 0) throw std::invalid_argument("generate_dataset: count < 0");
  std::vector<sim::Scene> scenes;
  scenes.reserve(count);
  for (int i = 0; i < count; ++i) {
    RandomStream rng(RandomStream::derive(
        seed, {Stream::kDataset, static_cast<std::uint64_t>(i)}));
    scenes.push_back(sim::simulate_scene(cfg.task, rng));
  }
  sim::write_scene_file(out, scenes, cfg.task_id, seed);
}

}  // namespace d3as::pipeline
