#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdpcn/distillation.hpp"
#include "vdpcn/network.hpp"
#include "vdpcn/training.hpp"

namespace vdpcn::config {

struct DataSection
{
  std::string root = "data"; ///< relative paths resolve against the output root
  Index shapes = 40;
  Index gt_points = 8192;
  Index input_points = 2048;
  std::string difficulty = "mixed"; ///< mixed (cycling S, M, H) or one of S, M, H
  double split_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct TrainSection
{
  double lr = 2e-4;
  int epochs = 10;
  int batch_size = 4;
  std::uint64_t seed = 0;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Index max_steps = 0;
  Index teacher_points = 2048;
  bool cosine_decay = false;
  int checkpoint_every = 0; ///< epochs between intermediate checkpoints; 0 keeps only the final one
};

struct DistillSection
{
  distillation::DistillConfig kd;
  int epochs = 5;
  Index max_steps = 0;
  bool use_cache = true;
};

struct EvalSection
{
  double f_threshold = 0.01;
  std::string report_path = "report.json";
  bool merge_input = false;
};

struct AblateSection
{
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<std::string> variants{"A", "B", "C", "D"};
  std::string csv_path = "ablation.csv";
};

struct RunConfig
{
  network::NetworkConfig model;
  TrainSection train;
  DistillSection distill;
  DataSection data;
  EvalSection eval;
  AblateSection ablate;

  static RunConfig desk();
  static RunConfig paper();

  training::TrainConfig teacher_train_config() const;
  training::TrainConfig student_train_config() const;
  training::EvalConfig eval_config(int workers) const;
};

class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

nlohmann::json to_json(RunConfig const &c);

/// Overlays `j` onto `base`. Every key is checked; the first unknown or
/// ill-typed one is named in the thrown ConfigError.
RunConfig apply_json(RunConfig base, nlohmann::json const &j);

/// VDPCN_<SECTION>_<KEY>=value, e.g. VDPCN_TRAIN_WEIGHT_DECAY=0.001. Values
/// are parsed as JSON, falling back to a plain string.
nlohmann::json env_overrides(std::map<std::string, std::string> const &environment);
std::map<std::string, std::string> process_environment();

/// Preset, then the config file (if any), then environment overrides.
RunConfig load_run_config(
  std::string const &preset, std::optional<std::filesystem::path> const &file, std::map<std::string, std::string> const &environment);

} // namespace vdpcn::config
