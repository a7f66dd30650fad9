#include "vdpcn/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "vdpcn/checkpoint.hpp"
#include "vdpcn/dataset.hpp"
#include "vdpcn/geometry.hpp"
#include "vdpcn/projection.hpp"
#include "vdpcn/training.hpp"

namespace vdpcn::cli {

namespace fs = std::filesystem;

fs::path Context::data_root() const
{
  fs::path const root(config.data.root);
  return root.is_absolute() ? root : out / root;
}

namespace {

std::ostream &log_of(Context const &ctx) { return ctx.log ? *ctx.log : std::cout; }

void write_text(fs::path const &path, std::string const &text)
{
  if (path.has_parent_path()) { fs::create_directories(path.parent_path()); }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) { throw std::runtime_error("cannot write " + path.string()); }
  out << text;
}

fs::path under_out(Context const &ctx, std::string const &p)
{
  fs::path const path(p);
  return path.is_absolute() ? path : ctx.out / path;
}

void write_resolved_config(Context const &ctx) { write_text(ctx.out / artifacts::resolved_config, config::to_json(ctx.config).dump(2) + "\n"); }

std::vector<dataset::Sample> load_split(Context const &ctx, std::string const &split)
{
  fs::path const manifest = ctx.data_root() / artifacts::manifest;
  if (!fs::exists(manifest)) { throw std::runtime_error("dataset manifest not found: " + manifest.string() + " (run gen-data first)"); }
  auto const m = dataset::read_manifest(manifest);
  auto samples = dataset::load_split(m, split, ctx.config.data.input_points);
  if (samples.empty()) { throw std::runtime_error("split '" + split + "' of " + manifest.string() + " is empty"); }
  return samples;
}

struct MissingCheckpoint : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

checkpoint::Checkpoint load_checkpoint(fs::path const &path)
{
  if (!fs::exists(path)) { throw MissingCheckpoint("checkpoint not found: " + path.string()); }
  return checkpoint::load(path);
}

training::Weights network_weights(checkpoint::Checkpoint const &ckpt, fs::path const &path)
{
  if (ckpt.kind != "network") { throw std::runtime_error(path.string() + " is a '" + ckpt.kind + "' checkpoint, expected network weights"); }
  return ckpt.weights.cast<training::Real>();
}

void print_epoch(std::ostream &os, std::string const &phase, training::EpochRecord const &r)
{
  os << phase << " epoch " << r.epoch << "  steps " << r.steps << "  loss " << std::setprecision(6) << r.loss;
  if (r.kd != 0.0) { os << "  kd " << r.kd; }
  os << "  grad " << r.grad_norm << '\n';
}

std::string format_report(metrics::MetricReport const &r)
{
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %8s %12s %12s %8s\n", "category", "samples", "CD-L1 x1e3", "CD-L2 x1e4", "F-score");
  os << line;
  for (auto const &[cat, m] : r.per_category) {
    std::snprintf(line, sizeof line, "%-16s %8s %12.3f %12.3f %8.3f\n", cat.c_str(), "", m.cd_l1 * 1e3, m.cd_l2 * 1e4, m.f_score);
    os << line;
  }
  std::snprintf(
    line, sizeof line, "%-16s %8lld %12.3f %12.3f %8.3f\n", "overall", static_cast<long long>(r.samples), r.cd_l1 * 1e3, r.cd_l2 * 1e4,
    r.f_score);
  os << line;
  return os.str();
}

} // namespace

int cmd_gen_data(Context const &ctx)
{
  auto const &d = ctx.config.data;
  fs::path const root = ctx.data_root();
  fs::create_directories(root / "gt");
  auto const shapes = dataset::generate_synthetic(d.shapes, d.seed, d.gt_points);
  std::vector<dataset::ManifestEntry> entries;
  for (size_t i = 0; i < shapes.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "shape_%05zu", i);
    std::string const file = std::string("gt/") + id + ".ply";
    dataset::save_ply(shapes[i].points, root / file);
    dataset::Difficulty const diff =
      d.difficulty == "mixed" ? static_cast<dataset::Difficulty>(i % 3) : dataset::difficulty_from_string(d.difficulty);
    entries.push_back({id, shapes[i].category, file, diff, d.seed * 1000003u + i});
  }
  auto const manifest = dataset::build_manifest(root, std::move(entries), d.split_fraction, d.seed);
  dataset::write_manifest(manifest, root / artifacts::manifest);
  write_resolved_config(ctx);
  log_of(ctx) << "wrote " << shapes.size() << " shapes (" << manifest.train.size() << " train, " << manifest.test.size() << " test) to "
              << root.string() << '\n';
  return ok;
}

int cmd_train_teacher(Context const &ctx)
{
  auto const samples = load_split(ctx, "train");
  auto const cfg = ctx.config.teacher_train_config();
  int const every = ctx.config.train.checkpoint_every;
  auto const result = training::train_teacher(samples, ctx.config.model, cfg, [&](training::EpochRecord const &r, training::Weights const &w) {
    print_epoch(log_of(ctx), "teacher", r);
    if (every > 0 && r.epoch % every == 0) { checkpoint::save(w, ctx.out / ("teacher_epoch" + std::to_string(r.epoch) + ".ckpt")); }
  });
  checkpoint::save(result.weights, ctx.out / artifacts::teacher_checkpoint);
  result.log.write_jsonl(ctx.out / artifacts::teacher_log);
  write_resolved_config(ctx);
  log_of(ctx) << "teacher checkpoint: " << (ctx.out / artifacts::teacher_checkpoint).string() << '\n';
  return ok;
}

int cmd_distill(Context const &ctx, fs::path const &teacher_path)
{
  auto const teacher = network_weights(load_checkpoint(teacher_path), teacher_path);
  auto const samples = load_split(ctx, "train");
  auto const cfg = ctx.config.student_train_config();
  std::optional<distillation::TargetCache> cache;
  if (ctx.config.distill.use_cache) {
    cache.emplace(ctx.out / artifacts::target_cache, checkpoint::fnv1a(checkpoint::read_file(teacher_path)));
  }
  auto const result = training::distill_student(samples, teacher, cfg, cache ? &*cache : nullptr, [&](training::EpochRecord const &r, auto const &) {
    print_epoch(log_of(ctx), "student", r);
  });
  checkpoint::save(result.weights, ctx.out / artifacts::student_checkpoint);
  result.log.write_jsonl(ctx.out / artifacts::student_log);
  write_resolved_config(ctx);
  log_of(ctx) << "student checkpoint: " << (ctx.out / artifacts::student_checkpoint).string() << '\n';
  return ok;
}

int cmd_eval(Context const &ctx, fs::path const &checkpoint_path)
{
  auto const ckpt = load_checkpoint(checkpoint_path);
  auto const samples = load_split(ctx, "test");
  auto const ecfg = ctx.config.eval_config(ctx.workers);
  training::Evaluation ev;
  if (ckpt.kind == "oracle") {
    ev = training::evaluate_predictor(samples, [](dataset::Sample const &s) { return s.gt; }, ecfg);
  } else {
    ev = training::evaluate(network_weights(ckpt, checkpoint_path), samples, ecfg);
  }
  auto j = metrics::to_json(ev.report);
  j["f_threshold"] = ecfg.f_threshold;
  nlohmann::json per_sample = nlohmann::json::array();
  for (auto const &s : ev.per_sample) {
    per_sample.push_back({{"id", s.id}, {"category", s.category}, {"cd_l1", s.metrics.cd_l1}, {"cd_l2", s.metrics.cd_l2}, {"f_score", s.metrics.f_score}});
  }
  j["per_sample"] = per_sample;
  write_text(under_out(ctx, ctx.config.eval.report_path), j.dump(2) + "\n");
  log_of(ctx) << format_report(ev.report);
  return ok;
}

int cmd_ablate(Context const &ctx, fs::path const &teacher_path)
{
  auto const teacher = network_weights(load_checkpoint(teacher_path), teacher_path);
  auto const train = load_split(ctx, "train");
  auto const test = load_split(ctx, "test");
  std::vector<distillation::Variant> variants;
  for (auto const &v : ctx.config.ablate.variants) { variants.push_back(distillation::variant_from_string(v)); }
  auto const rows = training::ablation_run(
    train, test, teacher, ctx.config.student_train_config(), variants, ctx.config.ablate.seeds, ctx.config.eval_config(ctx.workers));
  std::string const csv = training::ablation_csv(rows);
  write_text(under_out(ctx, ctx.config.ablate.csv_path), csv);
  log_of(ctx) << csv;
  return ok;
}

int cmd_render(Context const &ctx, fs::path const &input, std::optional<fs::path> const &checkpoint_path)
{
  if (!fs::exists(input)) { throw std::runtime_error("input not found: " + input.string()); }
  std::optional<training::Weights> weights;
  if (checkpoint_path) { weights = network_weights(load_checkpoint(*checkpoint_path), *checkpoint_path); }
  network::NetworkConfig const net = weights ? weights->config : ctx.config.model;

  auto const normalized = geometry::normalize_to_unit(dataset::load_ply(input));
  auto const rig = network::make_rig(net);
  auto const images = projection::render_depth(normalized.cloud, rig, net.splat_radius);
  fs::create_directories(ctx.out);
  for (size_t v = 0; v < images.images.size(); ++v) {
    projection::write_png(images.images[v], ctx.out / ("view_" + std::to_string(v) + ".png"));
  }
  log_of(ctx) << "wrote " << images.images.size() << " depth images to " << ctx.out.string() << '\n';
  if (weights) {
    PointCloud partial = normalized.cloud;
    if (partial.rows() > ctx.config.data.input_points) { partial = geometry::farthest_point_sample<double>(partial, ctx.config.data.input_points); }
    auto const pred = network::predict(*weights, projection::render_depth(partial, rig, net.splat_radius), partial);
    PointCloud completed = normalized.transform.invert(pred.stages.back().cast<double>());
    dataset::save_ply(completed, ctx.out / "completed.ply");
    log_of(ctx) << "wrote " << completed.rows() << " completed points to " << (ctx.out / "completed.ply").string() << '\n';
  }
  return ok;
}

int run(std::vector<std::string> const &args, std::ostream &out, std::ostream &err, std::map<std::string, std::string> const &environment)
{
  CLI::App app{"Multi-view depth distillation for point cloud completion", "vdpcn"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::string out_dir = "runs";
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string preset = "desk";
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "output root");
  app.add_option("--seed", seed, "overrides train.seed and data.seed");
  app.add_option("--workers", workers, "evaluation threads")->check(CLI::PositiveNumber);
  app.add_option("--preset", preset, "base configuration")->check(CLI::IsMember({"desk", "paper"}));

  auto *gen = app.add_subcommand("gen-data", "generate synthetic shapes and a manifest");
  auto *teach = app.add_subcommand("train-teacher", "train the complete-view teacher");
  std::string teacher_path, checkpoint_path, input_path;
  std::optional<std::string> render_checkpoint;
  auto *dist = app.add_subcommand("distill", "distil a partial-view student from a teacher");
  dist->add_option("--teacher", teacher_path, "teacher checkpoint")->required();
  auto *eval = app.add_subcommand("eval", "score a checkpoint on the test split");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate")->required();
  auto *abl = app.add_subcommand("ablate", "distillation variants A-D over several seeds");
  abl->add_option("--teacher", teacher_path, "teacher checkpoint")->required();
  auto *rend = app.add_subcommand("render", "render depth views of a PLY and optionally complete it");
  rend->add_option("--input", input_path, "input PLY")->required();
  rend->add_option("--checkpoint", render_checkpoint, "network checkpoint for completion");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (CLI::ParseError const &e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return ok;
    }
    err << "error: " << e.what() << '\n';
    return usage;
  }

  Context ctx;
  ctx.out = out_dir;
  ctx.workers = workers;
  ctx.log = &out;
  ctx.err = &err;
  try {
    ctx.config = config::load_run_config(preset, config_path ? std::optional<fs::path>(*config_path) : std::nullopt, environment);
    if (seed) {
      ctx.config.train.seed = *seed;
      ctx.config.data.seed = *seed;
    }
    ctx.config.model.validate();
    if (*gen) return cmd_gen_data(ctx);
    if (*teach) return cmd_train_teacher(ctx);
    if (*dist) return cmd_distill(ctx, teacher_path);
    if (*eval) return cmd_eval(ctx, checkpoint_path);
    if (*abl) return cmd_ablate(ctx, teacher_path);
    if (*rend) return cmd_render(ctx, input_path, render_checkpoint ? std::optional<fs::path>(*render_checkpoint) : std::nullopt);
  } catch (MissingCheckpoint const &e) {
    err << "error: " << e.what() << '\n';
    return missing_input;
  } catch (config::ConfigError const &e) {
    err << "config error: " << e.what() << '\n';
    return failure;
  } catch (std::exception const &e) {
    err << "error: " << e.what() << '\n';
    return failure;
  }
  return usage;
}

} // namespace vdpcn::cli
