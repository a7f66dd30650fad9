#include <doctest.h>

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "vdpcn/checkpoint.hpp"
#include "vdpcn/geometry.hpp"
#include "vdpcn/network.hpp"

using namespace vdpcn;
using network::BoundWeights;
using network::ModelWeights;
using network::NetworkConfig;
using Mat = Matrix<double>;
using V = ad::Var<double>;

namespace {

NetworkConfig toy(int views = 2)
{
  NetworkConfig c;
  c.views = views;
  c.image_height = 32;
  c.image_width = 32;
  c.channels = 8;
  c.point_dim = 8;
  c.heads = 2;
  c.coarse_points = 8;
  c.stage_ratios = {2};
  c.encoder_iters = 1;
  return c;
}

Mat tokens_for(NetworkConfig const &c, std::uint64_t seed)
{
  Rng rng(seed);
  return oracle::random_matrix(rng, static_cast<Index>(c.views) * c.feature_height() * c.feature_width(), c.channels);
}

V objective(V y, std::uint64_t seed = 77)
{
  Rng rng(seed);
  return ad::weighted_sum(y, oracle::random_matrix(rng, y.rows(), y.cols()));
}

} // namespace

TEST_SUITE("network")
{
  TEST_CASE("parameter groups")
  {
    auto const names = network::group_names(NetworkConfig::desk());
    CHECK(names == std::vector<std::string>{"backbone", "mv_encoder", "point_branch", "seed_gen", "stage1", "stage2"});
    auto const w = network::init_weights<float>(NetworkConfig::desk(), 1);
    std::set<std::string> seen;
    for (auto const &[name, m] : w.params) { seen.insert(network::group_of(name)); }
    CHECK(seen == std::set<std::string>(names.begin(), names.end()));
    CHECK_NOTHROW(w.validate());
  }

  TEST_CASE("init is deterministic in the seed")
  {
    auto const a = network::init_weights<double>(toy(), 4);
    auto const b = network::init_weights<double>(toy(), 4);
    auto const c = network::init_weights<double>(toy(), 5);
    CHECK(a.params == b.params);
    CHECK(a.params != c.params);
  }

  TEST_CASE("backbone downsamples 16x")
  {
    for (auto [size, channels] : {std::pair{64, 64}, std::pair{224, 512}, std::pair{32, 16}}) {
      NetworkConfig c = toy(6);
      c.image_height = c.image_width = size;
      c.channels = channels;
      auto w = network::init_weights<float>(c, 2);
      ad::Tape<float> tape;
      BoundWeights<float> bw(tape, w, BoundWeights<float>::none());
      auto const out = network::backbone_encode(bw, tape.constant(Matrix<float>::Zero(6 * size * size, 1)));
      CHECK(out.rows() == 6 * (size / 16) * (size / 16));
      CHECK(out.cols() == channels);
      // Zero input with zero biases gives a zero map.
      CHECK(out.value().isZero(0));
    }
    NetworkConfig c = NetworkConfig::desk();
    CHECK(c.feature_height() == 4);
    CHECK(NetworkConfig::paper().feature_height() == 14);
  }

  TEST_CASE("IVF leaves non-fusion views untouched and is shape-preserving")
  {
    NetworkConfig const c = toy(3);
    auto w = network::init_weights<double>(c, 3);
    Mat const f = tokens_for(c, 1);
    ad::Tape<double> tape;
    BoundWeights<double> bw(tape, w, BoundWeights<double>::none());
    Mat const out = network::ivf_layer(bw, "mv_encoder.iter0.ivf", tape.constant(f)).value();
    REQUIRE(out.rows() == f.rows());
    REQUIRE(out.cols() == f.cols());
    Index const t = f.rows() / 3;
    CHECK(out.bottomRows(2 * t) == f.bottomRows(2 * t));
    CHECK(out.topRows(t) != f.topRows(t));

    Mat const rotated = network::ivf_layer(bw, "mv_encoder.iter0.ivf", tape.constant(f), 2).value();
    CHECK(rotated.topRows(2 * t) == f.topRows(2 * t));

    NetworkConfig one = toy(1);
    auto w1 = network::init_weights<double>(one, 3);
    ad::Tape<double> t1;
    BoundWeights<double> b1(t1, w1, BoundWeights<double>::none());
    CHECK_THROWS_AS(network::ivf_layer(b1, "mv_encoder.iter0.ivf", t1.constant(tokens_for(one, 1))), std::invalid_argument);
  }

  TEST_CASE("zero residual projections make the encoder the identity")
  {
    for (int views : {1, 2, 6}) {
      NetworkConfig c = toy(views);
      c.encoder_iters = 2;
      auto w = network::init_weights<double>(c, 8);
      network::zero_encoder_residuals(w);
      Mat const f = tokens_for(c, 2);
      ad::Tape<double> tape;
      BoundWeights<double> bw(tape, w, BoundWeights<double>::none());
      auto const enc = network::multiview_encode(bw, tape.constant(f), 2);
      CHECK(enc.view_features.value() == f);
      auto const fv = network::as_view_features<double>(f, c);
      CHECK(enc.global_feature.value() == oracle::exhaustive_spatial_max(fv));
      CHECK_THROWS_AS(network::multiview_encode(bw, tape.constant(f), 0), std::invalid_argument);
    }
  }

  TEST_CASE("global feature picks the single nonzero entry of each channel")
  {
    NetworkConfig c = toy(2);
    auto w = network::init_weights<double>(c, 8);
    network::zero_encoder_residuals(w);
    Index const t = c.feature_height() * c.feature_width();
    Mat f = Mat::Constant(2 * t, c.channels, -1.0);
    for (Index ch = 0; ch < c.channels; ++ch) {
      f((ch * 3) % t, ch) = 2.0 + static_cast<double>(ch);
      f(t + (ch * 5) % t, ch) = 10.0 + static_cast<double>(ch);
    }
    ad::Tape<double> tape;
    BoundWeights<double> bw(tape, w, BoundWeights<double>::none());
    Mat const g = network::multiview_encode(bw, tape.constant(f), 1).global_feature.value();
    for (Index ch = 0; ch < c.channels; ++ch) {
      CHECK(g(0, ch) == 2.0 + static_cast<double>(ch));
      CHECK(g(1, ch) == 10.0 + static_cast<double>(ch));
    }
  }

  TEST_CASE("IVE with one view is per-view self-attention")
  {
    NetworkConfig const c = toy(1);
    auto w = network::init_weights<double>(c, 3);
    Mat const f = tokens_for(c, 4);
    ad::Tape<double> tape;
    BoundWeights<double> bw(tape, w, BoundWeights<double>::none());
    Mat const out = network::ive_layer(bw, "mv_encoder.iter0.ive", tape.constant(f)).value();
    CHECK(out.rows() == f.rows());
    CHECK(out.cols() == f.cols());
    CHECK(out.allFinite());
  }

  TEST_CASE("point features are permutation-equivariant")
  {
    NetworkConfig const c = toy();
    auto w = network::init_weights<double>(c, 5);
    Rng rng(6);
    PointCloud const p = oracle::random_cloud(rng, 20);
    std::vector<Index> perm(20);
    std::iota(perm.begin(), perm.end(), Index{0});
    rng.shuffle(perm.begin(), perm.end());
    PointCloud const q = geometry::gather<double>(p, perm);
    ad::Tape<double> tape;
    BoundWeights<double> bw(tape, w, BoundWeights<double>::none());
    Mat const fp = network::point_feature_extract(bw, tape.constant(Mat(p))).value();
    Mat const fq = network::point_feature_extract(bw, tape.constant(Mat(q))).value();
    REQUIRE(fp.rows() == 20);
    REQUIRE(fp.cols() == c.point_dim);
    for (Index i = 0; i < 20; ++i) { CHECK((fq.row(i) - fp.row(perm[static_cast<size_t>(i)])).cwiseAbs().maxCoeff() < 1e-12); }
    Mat const single = network::point_feature_extract(bw, tape.constant(Mat(p.topRows(1)))).value();
    CHECK(single.rows() == 1);
    CHECK_THROWS_AS(network::point_feature_extract(bw, tape.constant(Mat(0, 3))), std::invalid_argument);
  }

  TEST_CASE("seed generator count and zero-weight behaviour")
  {
    for (int coarse : {128, 256}) {
      NetworkConfig c = NetworkConfig::desk();
      c.coarse_points = coarse;
      c.stage_ratios = {1};
      c.point_dim = 16;
      c.channels = 16;
      auto w = network::init_weights<double>(c, 1);
      Rng rng(2);
      PointCloud const in = oracle::random_cloud(rng, 300, -0.8, 0.8);
      ad::Tape<double> tape;
      BoundWeights<double> bw(tape, w, BoundWeights<double>::none());
      Mat const g = oracle::random_matrix(rng, c.views, c.channels);
      CHECK(network::generate_seed(bw, tape.constant(g), in).rows() == coarse);

      for (auto &[name, m] : w.params) {
        if (network::group_of(name) == "seed_gen") { m.setZero(); }
      }
      ad::Tape<double> t2;
      BoundWeights<double> b2(t2, w, BoundWeights<double>::none());
      Mat const seeds = network::generate_seed(b2, t2.constant(g), in).value();
      REQUIRE(seeds.rows() == coarse);
      // FPS starts at candidate 0, the origin; every other seed is the origin or an input point.
      for (Index i = 0; i < seeds.rows(); ++i) {
        bool found = seeds.row(i).isZero(0);
        for (Index j = 0; j < in.rows() && !found; ++j) { found = seeds.row(i) == in.row(j); }
        CHECK(found);
      }
      CHECK_THROWS_AS(network::generate_seed(b2, t2.constant(Mat::Zero(2, c.channels)), in), std::invalid_argument);
    }
  }

  TEST_CASE("upsampling with zero displacement repeats the previous points")
  {
    for (int ratio : {1, 4}) {
      NetworkConfig c = toy(2);
      c.stage_ratios = {ratio};
      auto w = network::init_weights<double>(c, 9);
      w.at("stage1.head.out.weight").setZero();
      w.at("stage1.head.out.bias").setZero();
      Rng rng(3);
      Mat const prev = oracle::random_cloud(rng, 6);
      ad::Tape<double> tape;
      BoundWeights<double> bw(tape, w, BoundWeights<double>::none());
      auto fv = tape.constant(tokens_for(c, 1));
      auto fg = tape.constant(oracle::random_matrix(rng, 2, c.channels));
      auto fp = tape.constant(oracle::random_matrix(rng, 10, c.point_dim));
      Mat const out = network::upsample_stage(bw, 1, tape.constant(prev), fg, fv, fp, ratio).value();
      REQUIRE(out.rows() == 6 * ratio);
      for (Index i = 0; i < out.rows(); ++i) { CHECK(out.row(i) == prev.row(i / ratio)); }
      CHECK_THROWS_AS(network::upsample_stage(bw, 1, tape.constant(prev), fg, fv, fp, ratio + 1), std::invalid_argument);
    }
  }

  TEST_CASE("3D aggregation source can be the global feature")
  {
    NetworkConfig c = toy(2);
    c.point_source = "global_feature";
    auto w = network::init_weights<double>(c, 9);
    Rng rng(3);
    ad::Tape<double> tape;
    BoundWeights<double> bw(tape, w, BoundWeights<double>::none());
    Mat const out = network::upsample_stage(
                      bw, 1, tape.constant(Mat(oracle::random_cloud(rng, 5))), tape.constant(oracle::random_matrix(rng, 2, c.channels)),
                      tape.constant(tokens_for(c, 1)), tape.constant(oracle::random_matrix(rng, 7, c.point_dim)), 2)
                      .value();
    CHECK(out.rows() == 10);
  }

  TEST_CASE("desk forward: sizes and determinism")
  {
    NetworkConfig const c = NetworkConfig::desk();
    auto const w = network::init_weights<float>(c, 11);
    Rng rng(1);
    PointCloud const in = geometry::normalize_to_unit(oracle::random_cloud(rng, 2048)).cloud;
    auto const images = projection::render_depth(in, network::make_rig(c));
    auto const a = network::predict(w, images, in);
    auto const b = network::predict(w, images, in);
    CHECK(a.coarse.rows() == 128);
    REQUIRE(a.stages.size() == 2);
    CHECK(a.stages[0].rows() == 512);
    CHECK(a.stages[1].rows() == 4096);
    CHECK(a.view_features.tokens.rows() == 6 * 4 * 4);
    CHECK(a.global_feature.rows() == 6);
    CHECK(a.global_feature.cols() == 64);
    CHECK(a.stages[1] == b.stages[1]);
    CHECK(a.view_features.tokens == b.view_features.tokens);
  }

  TEST_CASE("gradient fidelity of the learnable blocks")
  {
    NetworkConfig const c = toy(2);
    auto w = network::init_weights<double>(c, 21);
    // Give the residual projections real magnitude so their gradients are informative.
    for (auto &[name, m] : w.params) {
      if (name.find(".bias") != std::string::npos || name.find(".shift") != std::string::npos) {
        Rng r(std::hash<std::string>{}(name));
        m = oracle::random_matrix(r, m.rows(), m.cols(), 0.1);
      }
    }
    Mat const f = tokens_for(c, 3);
    Rng rng(4);
    Mat const pts = oracle::random_cloud(rng, 4);
    Mat const prev = oracle::random_cloud(rng, 3);
    Mat const fg = oracle::random_matrix(rng, 2, c.channels);
    Mat const fp = oracle::random_matrix(rng, 4, c.point_dim);

    auto ivf = [&](BoundWeights<double> &b) { return objective(network::ivf_layer(b, "mv_encoder.iter0.ivf", b.tape().constant(f))); };
    auto ive = [&](BoundWeights<double> &b) { return objective(network::ive_layer(b, "mv_encoder.iter0.ive", b.tape().constant(f))); };
    auto pfe = [&](BoundWeights<double> &b) { return objective(network::point_feature_extract(b, b.tape().constant(pts))); };
    auto head = [&](BoundWeights<double> &b) {
      auto &t = b.tape();
      return objective(network::upsample_stage(b, 1, t.constant(prev), t.constant(fg), t.constant(f), t.constant(fp), 2));
    };

    for (auto const &[obj, params] : std::vector<std::pair<oracle::Objective, std::vector<std::string>>>{
           {ivf, {"mv_encoder.iter0.ivf.attn.q.weight", "mv_encoder.iter0.ivf.attn.k.weight", "mv_encoder.iter0.ivf.attn.v.weight",
                  "mv_encoder.iter0.ivf.ffn.fc1.weight", "mv_encoder.iter0.ivf.norm_q.gain"}},
           {ive, {"mv_encoder.iter0.ive.attn.q.weight", "mv_encoder.iter0.ive.attn.o.weight", "mv_encoder.iter0.ive.ffn.fc2.weight"}},
           {pfe, {"point_branch.fc1.weight", "point_branch.fc2.weight", "point_branch.fc3.weight", "point_branch.fc4.bias"}},
           {head, {"stage1.head.out.weight", "stage1.head.fc1.weight", "stage1.agg2d.attn.k.weight", "stage1.pointnet.fc1.weight"}},
         }) {
      for (auto const &p : params) {
        auto const r = oracle::check_parameter_gradient(w, p, obj, 1e-5);
        INFO(p);
        CHECK(r.analytic_norm > 0.0);
        CHECK(r.relative_error < 1e-3);
      }
    }
    CHECK(oracle::check_input_gradient(f, [&](ad::Tape<double> &t, V x) {
            BoundWeights<double> b(t, w, BoundWeights<double>::none());
            return objective(network::ivf_layer(b, "mv_encoder.iter0.ivf", x));
          }, 1e-5) < 1e-3);
  }

  TEST_CASE("checkpoint round trip and validation")
  {
    NetworkConfig const c = toy(6);
    auto const w = network::init_weights<double>(c, 3);
    auto const bytes = checkpoint::serialize(w);
    auto const back = checkpoint::deserialize(bytes);
    CHECK(back.kind == "network");
    CHECK(back.weights.params == w.params);
    CHECK(network::to_json(back.weights.config) == network::to_json(c));
    CHECK(checkpoint::serialize(back.weights) == bytes);

    auto truncated = bytes;
    truncated.resize(bytes.size() - 8);
    CHECK_THROWS(checkpoint::deserialize(truncated));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS(checkpoint::deserialize(bad_magic));

    auto wrong = w;
    wrong.at("point_branch.fc1.weight") = Mat::Zero(2, 2);
    CHECK_THROWS(wrong.validate());
    CHECK_THROWS(checkpoint::load("/nonexistent/x.ckpt"));
  }

  TEST_CASE("config JSON round trip and unknown keys")
  {
    NetworkConfig c = NetworkConfig::paper();
    CHECK(network::to_json(network::network_config_from_json(network::to_json(c))) == network::to_json(c));
    CHECK_THROWS_WITH(network::network_config_from_json({{"colour", 1}}), doctest::Contains("colour"));
    auto const short_names = network::network_config_from_json({{"k", 6}, {"H", 96}, {"W", 96}, {"C", 32}, {"N_coarse", 64}, {"n_iters", 3}});
    CHECK(short_names.image_height == 96);
    CHECK(short_names.channels == 32);
    CHECK(short_names.coarse_points == 64);
    CHECK(short_names.encoder_iters == 3);
    CHECK_THROWS(network::network_config_from_json({{"heads", 5}}));
  }
}
