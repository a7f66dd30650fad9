// Acceptance run: one pass/fail line per criterion. Exit status is the number of failures.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "vdpcn/checkpoint.hpp"
#include "vdpcn/cli.hpp"
#include "vdpcn/config.hpp"
#include "vdpcn/dataset.hpp"
#include "vdpcn/distillation.hpp"
#include "vdpcn/geometry.hpp"
#include "vdpcn/losses.hpp"
#include "vdpcn/metrics.hpp"
#include "vdpcn/projection.hpp"
#include "vdpcn/training.hpp"

using namespace vdpcn;
namespace fs = std::filesystem;
using nlohmann::json;
using Mat = Matrix<double>;

namespace {

struct Outcome
{
  bool pass = true;
  std::string detail;

  void require(bool ok, std::string const &what)
  {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

struct Criterion
{
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

fs::path g_scratch;

fs::path fresh(std::string const &name)
{
  fs::path const p = g_scratch / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string fmt(char const *f, double a, double b = 0, double c = 0)
{
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::string slurp(fs::path const &p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string without_timing(fs::path const &p)
{
  std::istringstream lines(slurp(p));
  std::string line, out;
  while (std::getline(lines, line)) {
    auto j = json::parse(line);
    j.erase("timing");
    out += j.dump() + "\n";
  }
  return out;
}

int run_cli(std::vector<std::string> const &args)
{
  std::ostringstream out, err;
  int const code = cli::run(args, out, err, {});
  if (code != 0) { std::cerr << "  cli " << args.front() << " exited " << code << ": " << err.str(); }
  return code;
}

// 1 ------------------------------------------------------------------------
Outcome metric_oracles()
{
  Outcome o;
  Rng rng(101);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Index const n = 1 + static_cast<Index>(rng.below(512)), m = 1 + static_cast<Index>(rng.below(512));
    PointCloud const p = oracle::random_cloud(rng, n), q = oracle::random_cloud(rng, m);
    worst = std::max(worst, std::abs(metrics::chamfer_l1(p, q) - oracle::naive_chamfer(p, q, false)));
    worst = std::max(worst, std::abs(metrics::chamfer_l2(p, q) - oracle::naive_chamfer(p, q, true)));
  }
  o.require(worst <= 1e-9, fmt("max deviation %.3g", worst));
  o.detail = o.pass ? fmt("max |kd-tree - naive| = %.2g over 100 pairs", worst) : o.detail;
  return o;
}

// 2 ------------------------------------------------------------------------
Outcome metric_closed_forms()
{
  Outcome o;
  Rng rng(7);
  PointCloud const p = oracle::random_cloud(rng, 300);
  o.require(metrics::chamfer_l1(p, p) == 0.0 && metrics::chamfer_l2(p, p) == 0.0, "identity chamfer not zero");
  PointCloud a(1, 3), b(1, 3), c(1, 3);
  a << 0, 0, 0;
  b << 1, 0, 0;
  c << 0, 2, 0;
  double const l1 = metrics::chamfer_l1(a, b), l2 = metrics::chamfer_l2(a, c);
  o.require(l1 == 1.0, fmt("CD_L1 at distance 1 = %.17g", l1));
  o.require(l2 == 8.0, fmt("CD_L2 at distance 2 = %.17g", l2));
  o.require(metrics::f_score(p, p, 0.01) == 1.0, "F-score on identity != 1");
  PointCloud shifted = p;
  shifted.col(0).array() += 10.0 * 0.01 + 2.0 * p.col(0).cwiseAbs().maxCoeff() + 2.0;
  o.require(metrics::f_score(shifted, p, 0.01) == 0.0, "F-score on separated clouds != 0");
  PointCloud near = a, far = a;
  far(0, 0) = 0.1;
  o.require(metrics::f_score(far, near, 0.01) == 0.0, "F-score at 10x threshold != 0");
  if (o.pass) { o.detail = "identity 0, CD_L1 1.0, CD_L2 8.0, F 1 / 0"; }
  return o;
}

// 3 ------------------------------------------------------------------------
PointCloud rotate_z90(PointCloud const &c)
{
  PointCloud r(c.rows(), 3);
  r.col(0) = -c.col(1);
  r.col(1) = c.col(0);
  r.col(2) = c.col(2);
  return r;
}

Outcome projection_invariants()
{
  Outcome o;
  Rng rng(31);
  Index checked = 0;
  for (int size : {32, 64, 224}) {
    auto const rig = projection::build_axis_rig(size, size, 1.05);
    for (int trial = 0; trial < 4; ++trial) {
      Index const n = 50 + static_cast<Index>(rng.below(3000));
      PointCloud const c = geometry::normalize_to_unit(oracle::random_cloud(rng, n)).cloud;
      auto const g = projection::render_depth(c, rig);
      auto const again = projection::render_depth(c, rig);
      auto const rot = projection::render_depth(rotate_z90(c), rig);
      for (size_t v = 0; v < 6; ++v) {
        auto const &img = g.images[v];
        o.require(projection::occupied_pixels(img) <= n, "occupancy exceeds N");
        o.require(((img.array() == 0.0) || ((img.array() >= 0.05) && (img.array() <= 1.0))).all(), "depth value out of range");
        o.require(img == again.images[v], "render not bit-deterministic");
      }
      bool const sides = rot.images[2] == g.images[0] && rot.images[1] == g.images[2] && rot.images[3] == g.images[1] && rot.images[0] == g.images[3];
      o.require(sides, "side views not permuted by the rotation");
      Index const h = size;
      for (Index r = 0; r < h; ++r) {
        for (Index col = 0; col < h; ++col) {
          bool const ok = rot.images[4](r, col) == g.images[4](h - 1 - col, r) && rot.images[5](r, col) == g.images[5](col, h - 1 - r);
          if (!ok) {
            o.require(false, "top/bottom views not rotated in-plane");
            r = h;
            break;
          }
        }
      }
      ++checked;
    }
  }
  if (o.pass) { o.detail = std::to_string(checked) + " clouds at 32/64/224 px"; }
  return o;
}

// 4 ------------------------------------------------------------------------
Outcome encoder_contracts()
{
  Outcome o;
  Rng rng(404);
  std::string configs;
  for (int trial = 0; trial < 5; ++trial) {
    network::NetworkConfig c;
    c.views = 2 + static_cast<int>(rng.below(5));
    c.image_height = c.image_width = 16 * (2 + static_cast<int>(rng.below(3)));
    int const heads = 1 << rng.below(3);
    c.heads = heads;
    c.channels = heads * (2 + static_cast<int>(rng.below(4)));
    c.point_dim = 8;
    c.coarse_points = 8;
    c.stage_ratios = {2};
    c.encoder_iters = 1 + static_cast<int>(rng.below(2));
    configs += (configs.empty() ? "" : " ") + std::to_string(c.views) + "v" + std::to_string(c.image_height) + "px" +
               std::to_string(c.channels) + "c" + std::to_string(c.heads) + "h";
    auto w = network::init_weights<double>(c, 50 + trial);
    Index const k = c.views, t = static_cast<Index>(c.feature_height()) * c.feature_width();
    o.require(c.feature_height() == c.image_height / 16, "feature height is not H/16");

    ad::Tape<double> tape;
    network::BoundWeights<double> bw(tape, w, network::BoundWeights<double>::none());
    Mat const pixels = oracle::random_matrix(rng, k * c.image_height * c.image_width, 1);
    auto const fmap = network::backbone_encode(bw, tape.constant(pixels));
    o.require(fmap.rows() == k * t && fmap.cols() == c.channels, "backbone output shape");
    bool threw = false;
    try {
      network::backbone_encode(bw, tape.constant(Mat(pixels.topRows(pixels.rows() - 1))));
    } catch (std::invalid_argument const &) {
      threw = true;
    }
    o.require(threw, "backbone accepted a wrong-sized input");

    Mat const f = oracle::random_matrix(rng, k * t, c.channels);
    auto const ivf = network::ivf_layer(bw, "mv_encoder.iter0.ivf", tape.constant(f));
    auto const ive = network::ive_layer(bw, "mv_encoder.iter0.ive", tape.constant(f));
    o.require(ivf.rows() == f.rows() && ivf.cols() == f.cols(), "IVF shape");
    o.require(ive.rows() == f.rows() && ive.cols() == f.cols(), "IVE shape");
    o.require(ivf.value().bottomRows((k - 1) * t) == f.bottomRows((k - 1) * t), "IVF changed a non-fusion view");
    for (auto const &layer : {std::string("ivf"), std::string("ive")}) {
      bool bad = false;
      try {
        Mat const wrong = f.topRows(f.rows() - t);
        if (layer == "ivf") network::ivf_layer(bw, "mv_encoder.iter0.ivf", tape.constant(wrong));
        else network::ive_layer(bw, "mv_encoder.iter0.ive", tape.constant(wrong));
      } catch (std::invalid_argument const &) {
        bad = true;
      }
      o.require(bad, layer + " accepted a wrong-sized feature map");
    }

    auto const enc = network::multiview_encode(bw, tape.constant(f), c.encoder_iters);
    auto const fv = network::as_view_features<double>(enc.view_features.value(), c);
    o.require(enc.global_feature.value() == oracle::exhaustive_spatial_max(fv), "F_g differs from the exhaustive spatial max");
    o.require(enc.global_feature.rows() == k && enc.global_feature.cols() == c.channels, "F_g shape");

    auto z = w;
    network::zero_encoder_residuals(z);
    ad::Tape<double> t2;
    network::BoundWeights<double> bz(t2, z, network::BoundWeights<double>::none());
    auto const id = network::multiview_encode(bz, t2.constant(f), c.encoder_iters);
    o.require(id.view_features.value() == f, "zero-residual encoder is not the identity");
    o.require(id.global_feature.value() == oracle::exhaustive_spatial_max(network::as_view_features<double>(f, c)), "zero-residual F_g");
  }
  if (o.pass) { o.detail = "configs " + configs; }
  return o;
}

// 5 ------------------------------------------------------------------------
Outcome gradient_fidelity()
{
  Outcome o;
  network::NetworkConfig c;
  c.views = 2;
  c.image_height = c.image_width = 32;
  c.channels = 8;
  c.point_dim = 8;
  c.heads = 2;
  c.coarse_points = 8;
  c.stage_ratios = {2};
  c.encoder_iters = 1;
  auto w = network::init_weights<double>(c, 21);
  for (auto &[name, m] : w.params) {
    if (name.find(".bias") != std::string::npos || name.find(".shift") != std::string::npos) {
      Rng r(std::hash<std::string>{}(name));
      m = oracle::random_matrix(r, m.rows(), m.cols(), 0.1);
    }
  }
  Rng rng(4);
  Mat const f = oracle::random_matrix(rng, 2 * c.feature_height() * c.feature_width(), c.channels);
  Mat const pts = oracle::random_cloud(rng, 4), prev = oracle::random_cloud(rng, 3);
  Mat const fg = oracle::random_matrix(rng, 2, c.channels), fp = oracle::random_matrix(rng, 4, c.point_dim);
  auto objective = [](ad::Var<double> y) {
    Rng r(77);
    return ad::weighted_sum(y, oracle::random_matrix(r, y.rows(), y.cols()));
  };
  using B = network::BoundWeights<double>;
  std::vector<std::tuple<std::string, oracle::Objective, std::vector<std::string>>> const blocks{
    {"IVF", [&](B &b) { return objective(network::ivf_layer(b, "mv_encoder.iter0.ivf", b.tape().constant(f))); },
     {"mv_encoder.iter0.ivf.attn.q.weight", "mv_encoder.iter0.ivf.attn.k.weight", "mv_encoder.iter0.ivf.attn.v.weight",
      "mv_encoder.iter0.ivf.attn.o.weight", "mv_encoder.iter0.ivf.ffn.fc1.weight", "mv_encoder.iter0.ivf.ffn.fc2.weight"}},
    {"IVE", [&](B &b) { return objective(network::ive_layer(b, "mv_encoder.iter0.ive", b.tape().constant(f))); },
     {"mv_encoder.iter0.ive.attn.q.weight", "mv_encoder.iter0.ive.attn.k.weight", "mv_encoder.iter0.ive.attn.o.weight",
      "mv_encoder.iter0.ive.ffn.fc2.weight"}},
    {"point features", [&](B &b) { return objective(network::point_feature_extract(b, b.tape().constant(pts))); },
     {"point_branch.fc1.weight", "point_branch.fc2.weight", "point_branch.fc3.weight", "point_branch.fc4.weight"}},
    {"displacement head",
     [&](B &b) {
       auto &t = b.tape();
       return objective(network::upsample_stage(b, 1, t.constant(prev), t.constant(fg), t.constant(f), t.constant(fp), 2));
     },
     {"stage1.head.fc1.weight", "stage1.head.out.weight", "stage1.head.out.bias"}},
  };
  double worst = 0;
  for (auto const &[block, obj, params] : blocks) {
    for (auto const &p : params) {
      auto const r = oracle::check_parameter_gradient(w, p, obj, 1e-5);
      worst = std::max(worst, r.relative_error);
      o.require(r.analytic_norm > 0.0, p + " has a zero gradient");
      o.require(r.relative_error < 1e-3, block + " " + p + fmt(" rel err %.3g", r.relative_error));
    }
  }
  double const input_err = oracle::check_input_gradient(pts, [&](ad::Tape<double> &t, ad::Var<double> x) {
    B b(t, w, B::none());
    return objective(network::point_feature_extract(b, x));
  }, 1e-5);
  worst = std::max(worst, input_err);
  o.require(input_err < 1e-3, fmt("point input gradient rel err %.3g", input_err));
  if (o.pass) { o.detail = fmt("max relative error %.2g", worst); }
  return o;
}

// 6 ------------------------------------------------------------------------
network::NetworkConfig small_net()
{
  network::NetworkConfig c;
  c.image_height = c.image_width = 32;
  c.channels = 16;
  c.point_dim = 16;
  c.heads = 2;
  c.coarse_points = 32;
  c.stage_ratios = {2, 4};
  c.encoder_iters = 1;
  return c;
}

Outcome distillation_identity()
{
  Outcome o;
  auto const samples = dataset::make_samples(dataset::generate_synthetic(4, 6, 1024), 6, 256);
  auto const net = small_net();
  training::TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 2;
  tc.teacher_points = 512;
  auto const teacher = training::train_teacher(samples, net, tc).weights;

  auto const rig = network::make_rig(net);
  for (auto const &s : samples) {
    auto const targets = distillation::teacher_targets(teacher.cast<double>(), s, rig, 512);
    auto const student = distillation::init_student_from_teacher(teacher.cast<double>());
    auto const p = network::predict(student, projection::render_teacher_views(s.gt, rig, 512, net.splat_radius), s.partial);
    double const kd = distillation::kd_loss_value<double>(p.view_features.tokens, p.global_feature, targets, 1.0, 1.0);
    o.require(kd == 0.0, fmt("kd_loss %.3g on student = teacher", kd));
  }

  auto const teacher_bytes = checkpoint::serialize(teacher);
  training::TrainConfig dc = tc;
  dc.epochs = 2;
  dc.distill = distillation::DistillConfig{};
  auto const student = training::distill_student(samples, teacher, dc).weights;
  o.require(checkpoint::serialize(teacher) == teacher_bytes, "teacher bytes changed during distillation");
  int frozen = 0, moved = 0;
  for (auto const &[name, m] : teacher.params) {
    auto const g = network::group_of(name);
    bool const same = std::memcmp(m.data(), student.at(name).data(), sizeof(float) * static_cast<size_t>(m.size())) == 0;
    if (dc.distill->trainable_groups.count(g)) {
      moved += same ? 0 : 1;
    } else {
      ++frozen;
      o.require(same, "frozen parameter " + name + " changed");
    }
  }
  o.require(moved > 0, "no trainable parameter moved");
  if (o.pass) { o.detail = "kd 0 on all samples; teacher bytes unchanged; " + std::to_string(frozen) + " frozen tensors identical"; }
  return o;
}

// 7 ------------------------------------------------------------------------
double mean_total_loss(training::Weights const &w, std::vector<dataset::Sample> const &samples, Index teacher_points)
{
  auto const rig = network::make_rig(w.config);
  double total = 0;
  for (auto const &s : samples) {
    ad::Tape<training::Real> tape;
    network::BoundWeights<training::Real> bw(tape, w, network::BoundWeights<training::Real>::none());
    auto const images = projection::render_teacher_views(s.gt, rig, std::min(teacher_points, s.gt.rows()), w.config.splat_radius);
    auto const out = network::forward(bw, images, s.partial);
    PointCloudT<training::Real> const gt = s.gt.cast<training::Real>();
    metrics::KdTree<training::Real> const tree(gt);
    total += static_cast<double>(training::total_loss<training::Real>(out, gt, tree, std::nullopt, 1.0).value()(0, 0));
  }
  return total / static_cast<double>(samples.size());
}

struct OverfitSettings
{
  double lr = 2e-4;
  int batch_size = 1;
  bool cosine = false;
};
OverfitSettings g_overfit;

Outcome overfit()
{
  Outcome o;
  auto const cfg = config::RunConfig::desk();
  auto const samples = dataset::make_samples(dataset::generate_synthetic(8, 0, cfg.data.gt_points), 0, cfg.data.input_points);
  auto tc = cfg.teacher_train_config();
  tc.optimizer.lr = static_cast<float>(g_overfit.lr);
  tc.batch_size = g_overfit.batch_size;
  tc.cosine_decay = g_overfit.cosine;
  tc.max_steps = 500;
  tc.epochs = static_cast<int>((500 * tc.batch_size + 7) / 8);
  auto const init = network::init_weights<training::Real>(cfg.model, tc.seed);
  double const before = mean_total_loss(init, samples, tc.teacher_points);
  training::TrainResult r;
  try {
    r = training::train_teacher(samples, cfg.model, tc);
  } catch (training::TrainingError const &e) {
    o.require(false, std::string("training diverged: ") + e.what());
    return o;
  }
  double const after = mean_total_loss(r.weights, samples, tc.teacher_points);
  o.require(r.log.records.back().steps == 500, "did not reach 500 steps");
  o.require(std::isfinite(after), "final loss not finite");
  double const ratio = after / before;
  o.require(ratio < 0.30, fmt("final/initial = %.3f (%.4f / %.4f)", ratio, after, before));
  if (o.pass) { o.detail = fmt("final/initial = %.3f (%.4f / %.4f)", ratio, after, before); }
  return o;
}

// 8 ------------------------------------------------------------------------
struct TrendSettings
{
  int shapes = 200;
  int teacher_epochs = 60;
  int student_epochs = 40;
  double lr = 1e-3;
};
TrendSettings g_trend;

Outcome variant_trend()
{
  Outcome o;
  auto const net = small_net();
  auto const all = dataset::make_samples(dataset::generate_synthetic(g_trend.shapes, 8, 2048), 8, 512);
  auto const split = all.begin() + g_trend.shapes * 4 / 5;
  std::vector<dataset::Sample> train(all.begin(), split), test(split, all.end());

  training::TrainConfig tc;
  tc.epochs = g_trend.teacher_epochs;
  tc.batch_size = 4;
  tc.teacher_points = 1024;
  tc.optimizer.lr = static_cast<float>(g_trend.lr);
  auto const teacher = training::train_teacher(train, net, tc).weights;

  training::TrainConfig sc = tc;
  sc.epochs = g_trend.student_epochs;
  sc.distill = distillation::DistillConfig{};
  using distillation::Variant;
  auto const rows = training::ablation_run(train, test, teacher, sc, {Variant::A, Variant::D}, {0, 1, 2});
  double a = 0, d = 0;
  for (auto const &r : rows) { (r.variant == Variant::A ? a : d) += r.cd_l1 / 3.0; }
  // Reference points: the untouched teacher on partial views (every student's start) and on complete views.
  double const start = training::evaluate(teacher, test, {}).report.cd_l1;
  auto const rig = network::make_rig(net);
  double const oracle_views = training::evaluate_predictor(test, [&](dataset::Sample const &s) {
    auto const p = network::predict(teacher, projection::render_teacher_views(s.gt, rig, tc.teacher_points, net.splat_radius), s.partial);
    return PointCloud(p.stages.back().cast<double>());
  }, {}).report.cd_l1;
  o.require(d <= a, "D > A");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + fmt("mean CD_L1 x1e3: D %.3f, A %.3f", d * 1e3, a * 1e3) +
              fmt(", teacher on partial / complete views %.3f / %.3f", start * 1e3, oracle_views * 1e3);
  return o;
}

// 9 ------------------------------------------------------------------------
json tiny_cli_config()
{
  network::NetworkConfig c = small_net();
  c.stage_ratios = {2};
  c.coarse_points = 16;
  c.channels = 8;
  c.point_dim = 8;
  return json{
    {"model", network::to_json(c)},
    {"data", {{"shapes", 6}, {"gt_points", 512}, {"input_points", 128}}},
    {"train", {{"epochs", 2}, {"batch_size", 2}, {"teacher_points", 256}}},
    {"distill", {{"epochs", 1}}},
    {"ablate", {{"seeds", {0, 1}}, {"variants", {"A", "D"}}}},
  };
}

std::map<std::string, std::string> cli_artifacts(fs::path const &dir)
{
  std::map<std::string, std::string> files;
  for (auto const &e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto const rel = fs::relative(e.path(), dir).string();
    files[rel] = e.path().extension() == ".jsonl" ? without_timing(e.path()) : slurp(e.path());
  }
  return files;
}

Outcome determinism()
{
  Outcome o;
  fs::path const dir = fresh("determinism");
  fs::path const cfg = g_scratch / "determinism.json";
  std::ofstream(cfg) << tiny_cli_config().dump();
  fs::path const ply = g_scratch / "determinism_input.ply";
  Rng rng(3);
  dataset::save_ply(dataset::sample_torus(rng, 3000, 0.6, 0.2), ply);

  std::vector<std::vector<std::string>> const commands{
    {"gen-data"},
    {"train-teacher"},
    {"distill", "--teacher", (dir / "teacher.ckpt").string()},
    {"eval", "--checkpoint", (dir / "student.ckpt").string()},
    {"ablate", "--teacher", (dir / "teacher.ckpt").string()},
    {"render", "--input", ply.string(), "--checkpoint", (dir / "student.ckpt").string()},
  };
  auto run_all = [&] {
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (auto c : commands) {
      c.insert(c.end(), {"--out", dir.string(), "--config", cfg.string(), "--seed", "5"});
      if (run_cli(c) != 0) { return std::map<std::string, std::string>{}; }
    }
    return cli_artifacts(dir);
  };
  auto const first = run_all();
  auto const second = run_all();
  o.require(!first.empty(), "a command failed");
  o.require(first.size() == second.size(), "different artifact sets");
  for (auto const &[name, bytes] : first) {
    auto const it = second.find(name);
    o.require(it != second.end() && it->second == bytes, name + " differs");
  }
  if (o.pass) { o.detail = std::to_string(first.size()) + " artifacts identical across 6 commands"; }
  return o;
}

// 10 -----------------------------------------------------------------------
Outcome end_to_end()
{
  Outcome o;
  fs::path const dir = fresh("pipeline");
  fs::path const cfg = g_scratch / "pipeline.json", ablate_cfg = g_scratch / "pipeline_ablate.json";
  std::ofstream(cfg) << json{{"train", {{"max_steps", 50}}}, {"distill", {{"max_steps", 50}}}}.dump();
  // The ablation trains twelve students; each gets a few steps only.
  std::ofstream(ablate_cfg) << json{{"distill", {{"max_steps", 4}}}, {"ablate", {{"seeds", {0, 1, 2}}}}}.dump();
  auto step = [&](std::vector<std::string> args, fs::path const &config) {
    args.insert(args.end(), {"--out", dir.string(), "--config", config.string(), "--preset", "desk"});
    int const code = run_cli(args);
    o.require(code == 0, args.front() + " exited " + std::to_string(code));
    return code == 0;
  };
  bool const ok = step({"gen-data"}, cfg) && step({"train-teacher"}, cfg) && step({"distill", "--teacher", (dir / "teacher.ckpt").string()}, cfg) &&
                  step({"eval", "--checkpoint", (dir / "student.ckpt").string()}, cfg) &&
                  step({"ablate", "--teacher", (dir / "teacher.ckpt").string()}, ablate_cfg);
  if (!ok) return o;
  for (std::string const f : {"data/manifest.json", "teacher.ckpt", "teacher_log.jsonl", "student.ckpt", "student_log.jsonl", "report.json",
                              "ablation.csv", "config.json"}) {
    o.require(fs::exists(dir / f) && fs::file_size(dir / f) > 0, "missing artifact " + f);
  }
  if (!o.pass) return o;
  auto const report = json::parse(slurp(dir / "report.json"));
  std::ifstream csv(dir / "ablation.csv");
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  o.require(rows == 12, "ablation.csv has " + std::to_string(rows) + " rows");
  o.require(report.contains("cd_l1") && report.contains("f_score"), "report lacks metrics");
  o.detail = "all artifacts present; student CD_L1 x1e3 " + fmt("%.3f", report["cd_l1"].get<double>() * 1e3);
  return o;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string scratch = (fs::temp_directory_path() / "vdpcn_acceptance").string();
  app.add_option("--only", only, "criterion ids to run");
  app.add_option("--scratch", scratch, "working directory");
  app.add_option("--overfit-lr", g_overfit.lr, "learning rate of the overfit run");
  app.add_option("--overfit-batch", g_overfit.batch_size, "batch size of the overfit run");
  app.add_flag("--overfit-cosine", g_overfit.cosine, "cosine decay in the overfit run");
  app.add_option("--trend-shapes", g_trend.shapes, "synthetic shapes of the variant comparison");
  app.add_option("--trend-teacher-epochs", g_trend.teacher_epochs, "teacher epochs of the variant comparison");
  app.add_option("--trend-student-epochs", g_trend.student_epochs, "student epochs of the variant comparison");
  app.add_option("--trend-lr", g_trend.lr, "learning rate of the variant comparison");
  CLI11_PARSE(app, argc, argv);
  g_scratch = scratch;
  fs::create_directories(g_scratch);

  std::vector<Criterion> const criteria{
    {1, "metric oracle equivalence", 30, metric_oracles},
    {2, "metric closed forms", 30, metric_closed_forms},
    {3, "projection invariants", 10, projection_invariants},
    {4, "encoder contracts", 60, encoder_contracts},
    {5, "gradient fidelity", 120, gradient_fidelity},
    {6, "distillation identity", 300, distillation_identity},
    {7, "overfit smoke test", 300, overfit},
    {8, "variant D <= variant A", 1200, variant_trend},
    {9, "CLI determinism", 600, determinism},
    {10, "end-to-end pipeline", 600, end_to_end},
  };

  int failures = 0;
  for (auto const &c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    auto const start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (std::exception const &e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.require(secs < c.budget_s, fmt("runtime %.1f s over the %.0f s budget", secs, c.budget_s));
    failures += out.pass ? 0 : 1;
    std::printf("[%s] %2d %-28s %7.1f s  %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), secs, out.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
