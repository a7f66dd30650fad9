#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdpcn/dataset.hpp"
#include "vdpcn/distillation.hpp"
#include "vdpcn/metrics.hpp"
#include "vdpcn/network.hpp"

namespace vdpcn::training {

/// Models are trained in single precision.
using Real = float;
using Weights = network::ModelWeights<Real>;

struct AdamWConfig
{
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

/// Decoupled weight decay Adam. Only names in the trainable set are touched.
template <typename Scalar> class AdamW
{
public:
  explicit AdamW(AdamWConfig config) : config_(config) {}

  void step(
    network::ModelWeights<Scalar> &weights, std::map<std::string, Matrix<Scalar>> const &grads, std::set<std::string> const &trainable,
    double lr);
  long steps() const { return t_; }

private:
  AdamWConfig config_;
  std::map<std::string, Matrix<Scalar>> m_, v_;
  long t_ = 0;
};

struct TrainConfig
{
  AdamWConfig optimizer;
  int epochs = 1;
  int batch_size = 4;
  std::uint64_t seed = 0;
  Index max_steps = 0;        ///< stop after this many optimizer steps; 0 means run all epochs
  Index teacher_points = 2048; ///< ground-truth points kept for the complete-view renders
  bool cosine_decay = false;
  std::optional<distillation::DistillConfig> distill;
};

struct EpochRecord
{
  int epoch = 0;
  Index steps = 0;
  double loss = 0.0;
  std::vector<double> cd; ///< mean CD_L1 of P_c, P_1, ..., P_n
  double kd = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  double wall_time_s = 0.0;
};

struct TrainLog
{
  std::vector<EpochRecord> records;

  /// One JSON object per line. Wall-clock time sits under "timing" so logs
  /// can be compared with that field removed.
  std::string to_jsonl(bool with_timing = true) const;
  void write_jsonl(std::filesystem::path const &path) const;
};

class TrainingError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// CD_L1(P_c, gt) + sum_i CD_L1(P_i, gt) + tau0 * kd.
template <typename Scalar>
ad::Var<Scalar> total_loss(
  network::ForwardOutputs<Scalar> const &outputs, PointCloudT<Scalar> const &gt, metrics::KdTree<Scalar> const &gt_tree,
  std::optional<ad::Var<Scalar>> kd, double tau0, std::vector<double> *cd_terms = nullptr);

struct TrainResult
{
  Weights weights;
  TrainLog log;
};

/// Called after each epoch with the current weights.
using EpochCallback = std::function<void(EpochRecord const &, Weights const &)>;

/// Complete-view images from downsampled ground truth plus the partial cloud;
/// every parameter group trains.
TrainResult train_teacher(
  std::vector<dataset::Sample> const &samples, network::NetworkConfig const &net, TrainConfig const &config, EpochCallback on_epoch = {});

/// Student initialised from the teacher, partial-view images, teacher targets
/// from complete views; only config.distill->trainable_groups move.
TrainResult distill_student(
  std::vector<dataset::Sample> const &samples, Weights const &teacher, TrainConfig const &config,
  distillation::TargetCache const *cache = nullptr, EpochCallback on_epoch = {});

struct EvalConfig
{
  double f_threshold = 0.01;
  bool merge_input = false; ///< FPS-merge the input cloud into the final output before scoring
  int workers = 1;
};

struct SampleScore
{
  std::string id;
  std::string category;
  metrics::MetricTriple metrics;
};

struct Evaluation
{
  metrics::MetricReport report;
  std::vector<SampleScore> per_sample;
};

using Predictor = std::function<PointCloud(dataset::Sample const &)>;

/// Scores an arbitrary predictor; overall and per-category means.
Evaluation evaluate_predictor(std::vector<dataset::Sample> const &samples, Predictor const &predict, EvalConfig const &config);

/// Student-view images from each partial cloud, forward, score the final stage.
Evaluation evaluate(Weights const &weights, std::vector<dataset::Sample> const &samples, EvalConfig const &config);

/// Per-sample prediction used by evaluate().
PointCloud complete(Weights const &weights, dataset::Sample const &sample, bool merge_input);

struct AblationRow
{
  distillation::Variant variant = distillation::Variant::A;
  double cd_l1 = 0.0;
  double f_score = 0.0;
  std::uint64_t seed = 0;
};

/// Distils one student per (variant, seed) from the same teacher and scores it on `test`.
std::vector<AblationRow> ablation_run(
  std::vector<dataset::Sample> const &train, std::vector<dataset::Sample> const &test, Weights const &teacher,
  TrainConfig const &base, std::vector<distillation::Variant> const &variants, std::vector<std::uint64_t> const &seeds,
  EvalConfig const &eval = {});

/// Header variant,cd_l1,f_score,seed.
std::string ablation_csv(std::vector<AblationRow> const &rows);

} // namespace vdpcn::training
