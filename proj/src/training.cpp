#include "vdpcn/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

#include "vdpcn/geometry.hpp"
#include "vdpcn/losses.hpp"
#include "vdpcn/projection.hpp"
#include "vdpcn/rng.hpp"

namespace vdpcn::training {

template <typename Scalar>
void AdamW<Scalar>::step(
  network::ModelWeights<Scalar> &weights, std::map<std::string, Matrix<Scalar>> const &grads, std::set<std::string> const &trainable,
  double lr)
{
  ++t_;
  double const c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  double const c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  auto const b1 = static_cast<Scalar>(config_.beta1), b2 = static_cast<Scalar>(config_.beta2);
  for (auto const &name : trainable) {
    Matrix<Scalar> &p = weights.at(name);
    auto [mit, fresh] = m_.try_emplace(name, Matrix<Scalar>::Zero(p.rows(), p.cols()));
    auto vit = v_.try_emplace(name, Matrix<Scalar>::Zero(p.rows(), p.cols())).first;
    Matrix<Scalar> &m = mit->second;
    Matrix<Scalar> &v = vit->second;
    auto g = grads.find(name);
    if (g != grads.end()) {
      m = b1 * m + (Scalar(1) - b1) * g->second;
      v = b2 * v + (Scalar(1) - b2) * g->second.cwiseAbs2();
    } else {
      m *= b1;
      v *= b2;
    }
    p *= static_cast<Scalar>(1.0 - lr * config_.weight_decay);
    auto const step = static_cast<Scalar>(lr / c1);
    auto const denom_scale = static_cast<Scalar>(1.0 / std::sqrt(c2));
    auto const eps = static_cast<Scalar>(config_.eps);
    p.array() -= step * m.array() / ((v.array().sqrt() * denom_scale) + eps);
  }
}

template class AdamW<float>;
template class AdamW<double>;

std::string TrainLog::to_jsonl(bool with_timing) const
{
  std::ostringstream os;
  for (auto const &r : records) {
    nlohmann::json j = {
      {"epoch", r.epoch}, {"steps", r.steps}, {"loss", r.loss}, {"cd", r.cd}, {"kd", r.kd}, {"grad_norm", r.grad_norm}, {"lr", r.lr}};
    if (with_timing) { j["timing"] = {{"wall_time_s", r.wall_time_s}}; }
    os << j.dump() << '\n';
  }
  return os.str();
}

void TrainLog::write_jsonl(std::filesystem::path const &path) const
{
  if (path.has_parent_path()) { std::filesystem::create_directories(path.parent_path()); }
  std::ofstream out(path, std::ios::trunc);
  if (!out) { throw std::runtime_error("cannot write " + path.string()); }
  out << to_jsonl();
}

template <typename Scalar>
ad::Var<Scalar> total_loss(
  network::ForwardOutputs<Scalar> const &outputs, PointCloudT<Scalar> const &gt, metrics::KdTree<Scalar> const &gt_tree,
  std::optional<ad::Var<Scalar>> kd, double tau0, std::vector<double> *cd_terms)
{
  if (gt.rows() == 0) { throw std::invalid_argument("total_loss: empty ground truth"); }
  std::optional<ad::Var<Scalar>> total;
  for (auto const &p : outputs.supervised()) {
    ad::Var<Scalar> const cd = ad::chamfer_l1(p, gt, gt_tree);
    if (cd_terms) { cd_terms->push_back(static_cast<double>(cd.value()(0, 0))); }
    total = total ? *total + cd : cd;
  }
  if (kd) { total = *total + ad::scale(*kd, static_cast<Scalar>(tau0)); }
  return *total;
}

template ad::Var<float> total_loss<float>(
  network::ForwardOutputs<float> const &, PointCloudT<float> const &, metrics::KdTree<float> const &, std::optional<ad::Var<float>>, double,
  std::vector<double> *);
template ad::Var<double> total_loss<double>(
  network::ForwardOutputs<double> const &, PointCloudT<double> const &, metrics::KdTree<double> const &, std::optional<ad::Var<double>>,
  double, std::vector<double> *);

namespace {

using Clock = std::chrono::steady_clock;

// Everything about a sample that stays fixed across steps.
struct Prepared
{
  dataset::Sample const *sample = nullptr;
  projection::DepthImageGroup images;
  PointCloudT<Real> gt;
  std::unique_ptr<metrics::KdTree<Real>> gt_tree;
  std::optional<distillation::DistillTargets<Real>> targets;
};

Prepared prepare(dataset::Sample const &s, projection::DepthImageGroup images)
{
  Prepared p;
  p.sample = &s;
  p.images = std::move(images);
  p.gt = s.gt.cast<Real>();
  p.gt_tree = std::make_unique<metrics::KdTree<Real>>(p.gt);
  return p;
}

double cosine_lr(double base, bool cosine, Index step, Index total)
{
  if (!cosine || total <= 1) { return base; }
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

struct Phase
{
  Weights weights;
  std::set<std::string> trainable;
  double lr = 0.0;
  std::optional<distillation::DistillConfig> distill;
};

TrainResult run(std::vector<Prepared> &data, Phase phase, TrainConfig const &config, EpochCallback const &on_epoch)
{
  if (data.empty()) { throw std::invalid_argument("training needs at least one sample"); }
  if (config.epochs < 1 || config.batch_size < 1) { throw std::invalid_argument("epochs and batch_size must be at least 1"); }
  if (!(phase.lr > 0.0)) { throw std::invalid_argument("learning rate must be positive"); }

  AdamW<Real> optimizer(config.optimizer);
  TrainLog log;
  Weights &weights = phase.weights;
  auto const trainable = [&phase](std::string const &name) { return phase.trainable.count(name) > 0; };
  auto const n = static_cast<Index>(data.size());
  Index const steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  Index const planned = config.max_steps > 0 ? std::min<Index>(config.max_steps, steps_per_epoch * config.epochs) : steps_per_epoch * config.epochs;
  bool const with_kd = phase.distill && phase.distill->has_kd_term();

  Index step = 0;
  std::vector<Index> order(static_cast<size_t>(n));
  for (int epoch = 1; epoch <= config.epochs && step < planned; ++epoch) {
    auto const start = Clock::now();
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(config.seed * 7919u + static_cast<std::uint64_t>(epoch));
    rng.shuffle(order.begin(), order.end());

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0, kd_sum = 0.0, norm_sum = 0.0;
    Index sample_count = 0, epoch_steps = 0;
    for (Index b = 0; b < n && step < planned; b += config.batch_size, ++step, ++epoch_steps) {
      Index const end = std::min(n, b + config.batch_size);
      std::map<std::string, Matrix<Real>> grads;
      for (Index i = b; i < end; ++i) {
        Prepared &p = data[static_cast<size_t>(order[static_cast<size_t>(i)])];
        ad::Tape<Real> tape;
        network::BoundWeights<Real> bound(tape, weights, trainable);
        auto const out = network::forward(bound, p.images, p.sample->partial);
        std::optional<ad::Var<Real>> kd;
        if (with_kd) {
          kd = distillation::kd_loss(out.view_features, out.global_feature, *p.targets, phase.distill->feature_weight(), phase.distill->global_weight());
        }
        std::vector<double> cd;
        ad::Var<Real> const loss = total_loss(out, p.gt, *p.gt_tree, kd, phase.distill ? phase.distill->tau0 : 1.0, &cd);
        double const value = loss.value()(0, 0);
        if (!std::isfinite(value)) {
          throw TrainingError(
            "non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ", sample '" + p.sample->id + "'");
        }
        tape.backward(loss);
        for (auto &[name, g] : bound.gradients()) {
          auto [it, fresh] = grads.try_emplace(name, g);
          if (!fresh) { it->second += g; }
        }
        loss_sum += value;
        kd_sum += kd ? static_cast<double>(kd->value()(0, 0)) : 0.0;
        if (rec.cd.empty()) { rec.cd.assign(cd.size(), 0.0); }
        for (size_t k = 0; k < cd.size(); ++k) { rec.cd[k] += cd[k]; }
        ++sample_count;
      }
      auto const inv = static_cast<Real>(1.0 / static_cast<double>(end - b));
      double sq = 0.0;
      for (auto &[name, g] : grads) {
        g *= inv;
        sq += static_cast<double>(g.squaredNorm());
      }
      if (!std::isfinite(sq)) { throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch) + ", step " + std::to_string(step)); }
      norm_sum += std::sqrt(sq);
      rec.lr = cosine_lr(phase.lr, config.cosine_decay, step, planned);
      optimizer.step(weights, grads, phase.trainable, rec.lr);
      for (auto const &name : phase.trainable) {
        if (!weights.at(name).allFinite()) {
          throw TrainingError("parameter '" + name + "' became non-finite at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
        }
      }
    }
    rec.steps = step;
    rec.loss = loss_sum / static_cast<double>(sample_count);
    rec.kd = kd_sum / static_cast<double>(sample_count);
    for (auto &c : rec.cd) { c /= static_cast<double>(sample_count); }
    rec.grad_norm = norm_sum / static_cast<double>(epoch_steps);
    rec.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
    log.records.push_back(rec);
    if (on_epoch) { on_epoch(rec, weights); }
  }
  return {std::move(weights), std::move(log)};
}

} // namespace

TrainResult train_teacher(
  std::vector<dataset::Sample> const &samples, network::NetworkConfig const &net, TrainConfig const &config, EpochCallback on_epoch)
{
  net.validate();
  auto const rig = network::make_rig(net);
  std::vector<Prepared> data;
  data.reserve(samples.size());
  for (auto const &s : samples) {
    data.push_back(prepare(s, projection::render_teacher_views(s.gt, rig, std::min<Index>(config.teacher_points, s.gt.rows()), net.splat_radius)));
  }
  Phase phase;
  phase.weights = network::init_weights<Real>(net, config.seed);
  for (auto const &[name, _] : phase.weights.params) { phase.trainable.insert(name); }
  phase.lr = config.optimizer.lr;
  return run(data, std::move(phase), config, on_epoch);
}

TrainResult distill_student(
  std::vector<dataset::Sample> const &samples, Weights const &teacher, TrainConfig const &config, distillation::TargetCache const *cache,
  EpochCallback on_epoch)
{
  if (!config.distill) { throw std::invalid_argument("distill_student: TrainConfig.distill is not set"); }
  auto const &dc = *config.distill;
  Phase phase;
  phase.weights = distillation::init_student_from_teacher(teacher);
  phase.trainable = distillation::trainable_parameter_set(phase.weights, dc.trainable_groups);
  phase.lr = dc.student_lr;
  phase.distill = dc;

  auto const &net = teacher.config;
  auto const rig = network::make_rig(net);
  std::vector<Prepared> data;
  data.reserve(samples.size());
  for (auto const &s : samples) {
    Prepared p = prepare(s, projection::render_depth(s.partial, rig, net.splat_radius));
    if (dc.has_kd_term()) {
      std::optional<distillation::DistillTargets<double>> cached = cache ? cache->load(s.id) : std::nullopt;
      if (cached) {
        p.targets = distillation::DistillTargets<Real>{
          network::as_view_features<Real>(cached->view_features.tokens.cast<Real>(), net), cached->global_feature.cast<Real>()};
      } else {
        p.targets = distillation::teacher_targets(teacher, s, rig, config.teacher_points);
        if (cache) {
          cache->store(
            s.id, {network::as_view_features<double>(p.targets->view_features.tokens.cast<double>(), net),
                   p.targets->global_feature.cast<double>()});
        }
      }
    }
    data.push_back(std::move(p));
  }
  return run(data, std::move(phase), config, on_epoch);
}

// ---------------------------------------------------------------------------

PointCloud complete(Weights const &weights, dataset::Sample const &sample, bool merge_input)
{
  auto const &net = weights.config;
  auto const images = projection::render_depth(sample.partial, network::make_rig(net), net.splat_radius);
  auto const pred = network::predict(weights, images, sample.partial);
  PointCloud out = pred.stages.back().cast<double>();
  if (merge_input) { out = geometry::merge_and_resample<double>(out, sample.partial, out.rows()); }
  return out;
}

Evaluation evaluate_predictor(std::vector<dataset::Sample> const &samples, Predictor const &predict, EvalConfig const &config)
{
  if (samples.empty()) { throw std::invalid_argument("evaluate: empty dataset"); }
  Evaluation ev;
  ev.per_sample.resize(samples.size());
  auto score = [&](size_t i) {
    auto const &s = samples[i];
    ev.per_sample[i] = {s.id, s.category, metrics::evaluate_pair(predict(s), s.gt, config.f_threshold)};
  };
  int const workers = std::max(1, config.workers);
  if (workers == 1) {
    for (size_t i = 0; i < samples.size(); ++i) { score(i); }
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (size_t i = static_cast<size_t>(w); i < samples.size(); i += static_cast<size_t>(workers)) { score(i); }
        } catch (...) {
          errors[static_cast<size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto &t : pool) { t.join(); }
    for (auto &e : errors) {
      if (e) { std::rethrow_exception(e); }
    }
  }

  std::map<std::string, std::pair<metrics::MetricTriple, Index>> by_cat;
  auto &r = ev.report;
  for (auto const &s : ev.per_sample) {
    r.cd_l1 += s.metrics.cd_l1;
    r.cd_l2 += s.metrics.cd_l2;
    r.f_score += s.metrics.f_score;
    auto &[sum, count] = by_cat[s.category];
    sum.cd_l1 += s.metrics.cd_l1;
    sum.cd_l2 += s.metrics.cd_l2;
    sum.f_score += s.metrics.f_score;
    ++count;
  }
  r.samples = static_cast<Index>(ev.per_sample.size());
  double const n = static_cast<double>(r.samples);
  r.cd_l1 /= n;
  r.cd_l2 /= n;
  r.f_score /= n;
  for (auto const &[cat, entry] : by_cat) {
    auto const &[sum, count] = entry;
    double const c = static_cast<double>(count);
    r.per_category[cat] = {sum.cd_l1 / c, sum.cd_l2 / c, sum.f_score / c};
  }
  return ev;
}

Evaluation evaluate(Weights const &weights, std::vector<dataset::Sample> const &samples, EvalConfig const &config)
{
  return evaluate_predictor(samples, [&](dataset::Sample const &s) { return complete(weights, s, config.merge_input); }, config);
}

std::vector<AblationRow> ablation_run(
  std::vector<dataset::Sample> const &train, std::vector<dataset::Sample> const &test, Weights const &teacher, TrainConfig const &base,
  std::vector<distillation::Variant> const &variants, std::vector<std::uint64_t> const &seeds, EvalConfig const &eval)
{
  std::vector<AblationRow> rows;
  for (auto const seed : seeds) {
    for (auto const variant : variants) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      cfg.distill = base.distill.value_or(distillation::DistillConfig{});
      cfg.distill->variant = variant;
      auto const result = distill_student(train, teacher, cfg);
      auto const ev = evaluate(result.weights, test, eval);
      rows.push_back({variant, ev.report.cd_l1, ev.report.f_score, seed});
    }
  }
  return rows;
}

std::string ablation_csv(std::vector<AblationRow> const &rows)
{
  std::ostringstream os;
  os.precision(10);
  os << "variant,cd_l1,f_score,seed\n";
  for (auto const &r : rows) { os << distillation::to_char(r.variant) << ',' << r.cd_l1 << ',' << r.f_score << ',' << r.seed << '\n'; }
  return os.str();
}

} // namespace vdpcn::training
