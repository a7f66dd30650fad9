#include "vdpcn/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vdpcn/geometry.hpp"
#include "vdpcn/rng.hpp"

namespace vdpcn::network {

using ad::Var;

int NetworkConfig::feature_height() const
{
  Index h = image_height;
  for (int l = 0; l < backbone_levels; ++l) { h = ad::conv_out_size(h, 2); }
  return static_cast<int>(h);
}

int NetworkConfig::feature_width() const
{
  Index w = image_width;
  for (int l = 0; l < backbone_levels; ++l) { w = ad::conv_out_size(w, 2); }
  return static_cast<int>(w);
}

std::vector<int> NetworkConfig::backbone_channels() const
{
  // Doubling schedule ending at C: C/8, C/4, C/2, C for four levels.
  std::vector<int> out(static_cast<size_t>(backbone_levels));
  for (int l = 0; l < backbone_levels; ++l) { out[static_cast<size_t>(l)] = std::max(1, channels >> (backbone_levels - 1 - l)); }
  return out;
}

Index NetworkConfig::output_points() const
{
  Index n = coarse_points;
  for (int r : stage_ratios) { n *= r; }
  return n;
}

void NetworkConfig::validate() const
{
  auto fail = [](std::string const &m) { throw std::invalid_argument("network config: " + m); };
  if (views < 1) { fail("views must be at least 1"); }
  if (image_height < 8 || image_width < 8) { fail("image size must be at least 8x8"); }
  if (!(ortho_extent > 0)) { fail("ortho_extent must be positive"); }
  if (splat_radius < 1) { fail("splat_radius must be at least 1"); }
  if (channels < 1 || point_dim < 2) { fail("channels and point_dim must be positive"); }
  if (heads < 1 || channels % heads != 0 || point_dim % heads != 0) { fail("heads must divide channels and point_dim"); }
  if (coarse_points < 1 || raw_seed_points < 0) { fail("seed point counts must be positive"); }
  if (stage_ratios.empty()) { fail("at least one upsampling stage is required"); }
  for (int r : stage_ratios) {
    if (r < 1) { fail("stage ratios must be at least 1"); }
  }
  if (encoder_iters < 1) { fail("encoder_iters must be at least 1"); }
  if (ffn_mult < 1 || backbone_levels < 1 || backbone_convs_per_level < 1) { fail("widths and depths must be positive"); }
  if (point_source != "point_features" && point_source != "global_feature") {
    fail("point_source must be point_features or global_feature");
  }
}

NetworkConfig NetworkConfig::desk() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::paper()
{
  NetworkConfig c;
  c.image_height = 224;
  c.image_width = 224;
  c.channels = 512;
  c.point_dim = 512;
  c.coarse_points = 128;
  c.stage_ratios = {4, 32};
  c.heads = 8;
  return c;
}

nlohmann::json to_json(NetworkConfig const &c)
{
  return {
    {"views", c.views},
    {"image_height", c.image_height},
    {"image_width", c.image_width},
    {"ortho_extent", c.ortho_extent},
    {"splat_radius", c.splat_radius},
    {"channels", c.channels},
    {"point_dim", c.point_dim},
    {"coarse_points", c.coarse_points},
    {"raw_seed_points", c.raw_seed_points},
    {"stage_ratios", c.stage_ratios},
    {"encoder_iters", c.encoder_iters},
    {"heads", c.heads},
    {"ffn_mult", c.ffn_mult},
    {"backbone_levels", c.backbone_levels},
    {"backbone_convs_per_level", c.backbone_convs_per_level},
    {"rotate_fusion_view", c.rotate_fusion_view},
    {"point_source", c.point_source}};
}

NetworkConfig network_config_from_json(nlohmann::json const &j, NetworkConfig base)
{
  if (!j.is_object()) { throw std::invalid_argument("network config must be a JSON object"); }
  NetworkConfig c = std::move(base);
  for (auto const &[key, value] : j.items()) {
    try {
      if (key == "views" || key == "k") c.views = value.get<int>();
      else if (key == "image_height" || key == "H") c.image_height = value.get<int>();
      else if (key == "image_width" || key == "W") c.image_width = value.get<int>();
      else if (key == "image_size") c.image_height = c.image_width = value.get<int>();
      else if (key == "ortho_extent") c.ortho_extent = value.get<double>();
      else if (key == "splat_radius") c.splat_radius = value.get<int>();
      else if (key == "channels" || key == "C") c.channels = value.get<int>();
      else if (key == "point_dim") c.point_dim = value.get<int>();
      else if (key == "coarse_points" || key == "N_coarse") c.coarse_points = value.get<int>();
      else if (key == "raw_seed_points") c.raw_seed_points = value.get<int>();
      else if (key == "stage_ratios") c.stage_ratios = value.get<std::vector<int>>();
      else if (key == "encoder_iters" || key == "n_iters") c.encoder_iters = value.get<int>();
      else if (key == "heads") c.heads = value.get<int>();
      else if (key == "ffn_mult") c.ffn_mult = value.get<int>();
      else if (key == "backbone_levels") c.backbone_levels = value.get<int>();
      else if (key == "backbone_convs_per_level") c.backbone_convs_per_level = value.get<int>();
      else if (key == "rotate_fusion_view") c.rotate_fusion_view = value.get<bool>();
      else if (key == "point_source") c.point_source = value.get<std::string>();
      else throw std::invalid_argument("unknown key '" + key + "'");
    } catch (nlohmann::json::exception const &e) {
      throw std::invalid_argument("bad value for key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

namespace {

void add_linear(std::vector<ParameterSpec> &out, std::string const &name, Index in, Index outd, Init init = Init::xavier)
{
  out.push_back({name + ".weight", in, outd, init});
  out.push_back({name + ".bias", 1, outd, Init::zeros});
}

void add_norm(std::vector<ParameterSpec> &out, std::string const &name, Index dim)
{
  out.push_back({name + ".gain", 1, dim, Init::ones});
  out.push_back({name + ".shift", 1, dim, Init::zeros});
}

void add_attention(std::vector<ParameterSpec> &out, std::string const &name, Index q_dim, Index kv_dim, Index model_dim)
{
  add_linear(out, name + ".q", q_dim, model_dim);
  add_linear(out, name + ".k", kv_dim, model_dim);
  add_linear(out, name + ".v", kv_dim, model_dim);
  add_linear(out, name + ".o", model_dim, q_dim, Init::xavier_small);
}

void add_ffn(std::vector<ParameterSpec> &out, std::string const &name, Index dim, Index mult)
{
  add_linear(out, name + ".fc1", dim, dim * mult);
  add_linear(out, name + ".fc2", dim * mult, dim, Init::xavier_small);
}

void add_mini_pointnet(std::vector<ParameterSpec> &out, std::string const &name, Index d)
{
  add_linear(out, name + ".fc1", 3, d / 2);
  add_linear(out, name + ".fc2", d / 2, d);
  add_linear(out, name + ".fc3", 2 * d, d);
}

void add_residual_mlp(std::vector<ParameterSpec> &out, std::string const &name, Index in, Index d)
{
  add_linear(out, name + ".fc1", in, d);
  add_linear(out, name + ".fc2", d, d);
  add_linear(out, name + ".shortcut", in, d);
}

} // namespace

std::vector<ParameterSpec> parameter_specs(NetworkConfig const &c)
{
  c.validate();
  std::vector<ParameterSpec> out;
  Index const C = c.channels, D = c.point_dim;

  Index cin = 1;
  auto const chans = c.backbone_channels();
  for (int l = 0; l < c.backbone_levels; ++l) {
    for (int j = 0; j < c.backbone_convs_per_level; ++j) {
      Index const cout = chans[static_cast<size_t>(l)];
      add_linear(out, "backbone.level" + std::to_string(l) + ".conv" + std::to_string(j), 9 * cin, cout);
      cin = cout;
    }
  }

  for (int i = 0; i < c.encoder_iters; ++i) {
    std::string const ivf = "mv_encoder.iter" + std::to_string(i) + ".ivf";
    add_norm(out, ivf + ".norm_q", C);
    add_norm(out, ivf + ".norm_kv", C);
    add_attention(out, ivf + ".attn", C, C, C);
    add_norm(out, ivf + ".norm_ffn", C);
    add_ffn(out, ivf + ".ffn", C, c.ffn_mult);
    std::string const ive = "mv_encoder.iter" + std::to_string(i) + ".ive";
    add_norm(out, ive + ".norm_attn", C);
    add_attention(out, ive + ".attn", C, C, C);
    add_norm(out, ive + ".norm_ffn", C);
    add_ffn(out, ive + ".ffn", C, c.ffn_mult);
  }

  add_linear(out, "point_branch.fc1", 3, D / 2);
  add_linear(out, "point_branch.fc2", D / 2, D);
  add_linear(out, "point_branch.fc3", 2 * D, D);
  add_linear(out, "point_branch.fc4", D, D);

  out.push_back({"seed_gen.deconv.weight", C, static_cast<Index>(c.seed_candidates()) * D, Init::xavier});
  out.push_back({"seed_gen.deconv.bias", 1, D, Init::zeros});
  add_residual_mlp(out, "seed_gen.res1", D + C, D);
  add_residual_mlp(out, "seed_gen.res2", D + C, D);
  add_linear(out, "seed_gen.out1", D, D / 2);
  add_linear(out, "seed_gen.out2", D / 2, 3);

  Index const kv3d = c.point_source == "point_features" ? D : C;
  for (size_t s = 0; s < c.stage_ratios.size(); ++s) {
    std::string const st = "stage" + std::to_string(s + 1);
    add_mini_pointnet(out, st + ".pointnet", D);
    add_linear(out, st + ".fuse", D + C, D);
    add_norm(out, st + ".sa.norm_attn", D);
    add_attention(out, st + ".sa.attn", D, D, D);
    add_norm(out, st + ".sa.norm_ffn", D);
    add_ffn(out, st + ".sa.ffn", D, c.ffn_mult);
    add_norm(out, st + ".agg2d.norm_q", D);
    add_norm(out, st + ".agg2d.norm_kv", C);
    add_attention(out, st + ".agg2d.attn", D, C, D);
    add_norm(out, st + ".agg3d.norm_q", D);
    add_norm(out, st + ".agg3d.norm_kv", kv3d);
    add_attention(out, st + ".agg3d.attn", D, kv3d, D);
    add_linear(out, st + ".head.fc1", 2 * D, D);
    add_linear(out, st + ".head.fc2", D, D / 2);
    add_linear(out, st + ".head.out", D / 2, 3 * static_cast<Index>(c.stage_ratios[s]), Init::xavier_small);
  }
  return out;
}

std::string group_of(std::string_view name)
{
  auto const dot = name.find('.');
  return std::string(name.substr(0, dot));
}

std::vector<std::string> group_names(NetworkConfig const &config)
{
  std::vector<std::string> out{"backbone", "mv_encoder", "point_branch", "seed_gen"};
  for (size_t s = 0; s < config.stage_ratios.size(); ++s) { out.push_back("stage" + std::to_string(s + 1)); }
  return out;
}

template <typename Scalar> Matrix<Scalar> const &ModelWeights<Scalar>::at(std::string const &name) const
{
  auto it = params.find(name);
  if (it == params.end()) { throw std::out_of_range("unknown parameter '" + name + "'"); }
  return it->second;
}

template <typename Scalar> Matrix<Scalar> &ModelWeights<Scalar>::at(std::string const &name)
{
  auto it = params.find(name);
  if (it == params.end()) { throw std::out_of_range("unknown parameter '" + name + "'"); }
  return it->second;
}

template <typename Scalar> void ModelWeights<Scalar>::validate() const
{
  auto const specs = parameter_specs(config);
  if (specs.size() != params.size()) {
    throw std::invalid_argument(
      "weights hold " + std::to_string(params.size()) + " arrays, config implies " + std::to_string(specs.size()));
  }
  for (auto const &s : specs) {
    auto it = params.find(s.name);
    if (it == params.end()) { throw std::invalid_argument("missing parameter '" + s.name + "'"); }
    if (it->second.rows() != s.rows || it->second.cols() != s.cols) {
      throw std::invalid_argument(
        "parameter '" + s.name + "' has shape " + std::to_string(it->second.rows()) + "x" + std::to_string(it->second.cols()) +
        ", expected " + std::to_string(s.rows) + "x" + std::to_string(s.cols));
    }
    if (!it->second.allFinite()) { throw std::invalid_argument("parameter '" + s.name + "' has non-finite values"); }
  }
}

template <typename Scalar> Index ModelWeights<Scalar>::parameter_count() const
{
  Index n = 0;
  for (auto const &[_, m] : params) { n += m.size(); }
  return n;
}

template <typename Scalar> ModelWeights<Scalar> init_weights(NetworkConfig const &config, std::uint64_t seed)
{
  ModelWeights<Scalar> w;
  w.config = config;
  Rng rng(seed);
  for (auto const &s : parameter_specs(config)) {
    Matrix<Scalar> m(s.rows, s.cols);
    switch (s.init) {
    case Init::zeros: m.setZero(); break;
    case Init::ones: m.setOnes(); break;
    case Init::xavier:
    case Init::xavier_small: {
      double bound = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
      if (s.init == Init::xavier_small) { bound *= 0.1; }
      for (Index i = 0; i < m.size(); ++i) { m.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound)); }
      break;
    }
    }
    w.params.emplace(s.name, std::move(m));
  }
  return w;
}

template <typename Scalar> void zero_encoder_residuals(ModelWeights<Scalar> &weights)
{
  for (auto &[name, m] : weights.params) {
    if (group_of(name) != "mv_encoder") { continue; }
    bool const out_proj = name.find(".attn.o.") != std::string::npos;
    bool const ffn_out = name.find(".ffn.fc2.") != std::string::npos;
    if (out_proj || ffn_out) { m.setZero(); }
  }
}

template <typename Scalar>
BoundWeights<Scalar>::BoundWeights(ad::Tape<Scalar> &tape, ModelWeights<Scalar> const &weights, Predicate trainable)
  : tape_(tape), weights_(weights), trainable_(std::move(trainable))
{
}

template <typename Scalar> Var<Scalar> BoundWeights<Scalar>::operator()(std::string const &name)
{
  auto it = bound_.find(name);
  if (it != bound_.end()) { return it->second; }
  Var<Scalar> v = tape_.leaf(weights_.at(name), trainable_(name));
  bound_.emplace(name, v);
  return v;
}

template <typename Scalar> std::map<std::string, Matrix<Scalar>> BoundWeights<Scalar>::gradients() const
{
  std::map<std::string, Matrix<Scalar>> out;
  for (auto const &[name, v] : bound_) {
    if (v.requires_grad() && tape_.grad(v).size() > 0) { out.emplace(name, tape_.grad(v)); }
  }
  return out;
}

template <typename Scalar> std::vector<Var<Scalar>> ForwardOutputs<Scalar>::supervised() const
{
  std::vector<Var<Scalar>> out{coarse};
  out.insert(out.end(), stages.begin(), stages.end());
  return out;
}

namespace {

template <typename Scalar> Var<Scalar> dense(BoundWeights<Scalar> &w, std::string const &name, Var<Scalar> x)
{
  return ad::linear(x, w(name + ".weight"), w(name + ".bias"));
}

template <typename Scalar> Var<Scalar> norm(BoundWeights<Scalar> &w, std::string const &name, Var<Scalar> x)
{
  return ad::layer_norm(x, w(name + ".gain"), w(name + ".shift"));
}

template <typename Scalar> Var<Scalar> ffn(BoundWeights<Scalar> &w, std::string const &name, Var<Scalar> x)
{
  return dense(w, name + ".fc2", ad::relu(dense(w, name + ".fc1", x)));
}

// Pre-norm residual self-attention followed by a residual feed-forward block.
template <typename Scalar> Var<Scalar> transformer_block(BoundWeights<Scalar> &w, std::string const &prefix, Var<Scalar> x)
{
  Var<Scalar> const h = norm(w, prefix + ".norm_attn", x);
  Var<Scalar> const y = x + attention(w, prefix + ".attn", h, h);
  return y + ffn(w, prefix + ".ffn", norm(w, prefix + ".norm_ffn", y));
}

// Per-point MLP, max-pool, concatenate the pooled row back on every point, MLP again.
template <typename Scalar> Var<Scalar> mini_pointnet(BoundWeights<Scalar> &w, std::string const &prefix, Var<Scalar> points)
{
  Var<Scalar> const h1 = ad::relu(dense(w, prefix + ".fc1", points));
  Var<Scalar> const h2 = dense(w, prefix + ".fc2", h1);
  Var<Scalar> const pooled = ad::broadcast_rows(ad::max_rows(h2), h2.rows());
  return dense(w, prefix + ".fc3", ad::relu(ad::concat_cols({h2, pooled})));
}

template <typename Scalar> Var<Scalar> pooled_global(Var<Scalar> global_feature) { return ad::max_rows(global_feature); }

} // namespace

template <typename Scalar> Var<Scalar> backbone_encode(BoundWeights<Scalar> &w, Var<Scalar> images)
{
  auto const &c = w.config();
  Index const k = c.views;
  Index h = c.image_height, wd = c.image_width;
  if (images.rows() != k * h * wd || images.cols() != 1) {
    throw std::invalid_argument(
      "backbone_encode: expected " + std::to_string(k * h * wd) + "x1 pixels, got " + std::to_string(images.rows()) + "x" +
      std::to_string(images.cols()));
  }
  Var<Scalar> x = images;
  int const total = c.backbone_levels * c.backbone_convs_per_level;
  int layer = 0;
  for (int l = 0; l < c.backbone_levels; ++l) {
    for (int j = 0; j < c.backbone_convs_per_level; ++j, ++layer) {
      Index const stride = j == 0 ? 2 : 1;
      Var<Scalar> const cols = ad::im2col3x3(x, k, h, wd, stride);
      h = ad::conv_out_size(h, stride);
      wd = ad::conv_out_size(wd, stride);
      x = dense(w, "backbone.level" + std::to_string(l) + ".conv" + std::to_string(j), cols);
      if (layer + 1 < total) { x = ad::relu(x); }
    }
  }
  return x;
}

template <typename Scalar>
Var<Scalar> attention(BoundWeights<Scalar> &w, std::string const &prefix, Var<Scalar> queries, Var<Scalar> keys_values)
{
  Var<Scalar> const q = dense(w, prefix + ".q", queries);
  Var<Scalar> const k = dense(w, prefix + ".k", keys_values);
  Var<Scalar> const v = dense(w, prefix + ".v", keys_values);
  int const heads = w.config().heads;
  Index const dh = q.cols() / heads;
  Scalar const temperature = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  std::vector<Var<Scalar>> outs;
  outs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var<Scalar> const qh = heads == 1 ? q : ad::slice_cols(q, h * dh, dh);
    Var<Scalar> const kh = heads == 1 ? k : ad::slice_cols(k, h * dh, dh);
    Var<Scalar> const vh = heads == 1 ? v : ad::slice_cols(v, h * dh, dh);
    Var<Scalar> const a = ad::softmax_rows(ad::matmul_nt(qh, kh), temperature);
    outs.push_back(ad::matmul(a, vh));
  }
  Var<Scalar> const merged = heads == 1 ? outs[0] : ad::concat_cols(std::span<Var<Scalar> const>(outs));
  return dense(w, prefix + ".o", merged);
}

template <typename Scalar> bool matches_feature_map(NetworkConfig const &c, Var<Scalar> const &f)
{
  return f.rows() == static_cast<Index>(c.views) * c.feature_height() * c.feature_width() && f.cols() == c.channels;
}

template <typename Scalar> Var<Scalar> ivf_layer(BoundWeights<Scalar> &w, std::string const &prefix, Var<Scalar> view_features, int fusion_view)
{
  int const k = w.config().views;
  if (k < 2) { throw std::invalid_argument("ivf_layer: needs at least two views"); }
  if (!matches_feature_map(w.config(), view_features)) {
    throw std::invalid_argument("ivf_layer: feature map shape does not match config");
  }
  if (fusion_view < 0 || fusion_view >= k) { throw std::invalid_argument("ivf_layer: fusion view out of range"); }
  Index const t = view_features.rows() / k;

  std::vector<Var<Scalar>> views;
  views.reserve(static_cast<size_t>(k));
  for (int v = 0; v < k; ++v) { views.push_back(ad::slice_rows(view_features, v * t, t)); }
  std::vector<Var<Scalar>> others;
  for (int v = 0; v < k; ++v) {
    if (v != fusion_view) { others.push_back(views[static_cast<size_t>(v)]); }
  }
  Var<Scalar> const context = ad::concat_rows(std::span<Var<Scalar> const>(others));
  Var<Scalar> const f0 = views[static_cast<size_t>(fusion_view)];

  Var<Scalar> const fused = f0 + attention(w, prefix + ".attn", norm(w, prefix + ".norm_q", f0), norm(w, prefix + ".norm_kv", context));
  Var<Scalar> const updated = fused + ffn(w, prefix + ".ffn", norm(w, prefix + ".norm_ffn", fused));

  views[static_cast<size_t>(fusion_view)] = updated;
  return ad::concat_rows(std::span<Var<Scalar> const>(views));
}

template <typename Scalar> Var<Scalar> ive_layer(BoundWeights<Scalar> &w, std::string const &prefix, Var<Scalar> view_features)
{
  if (!matches_feature_map(w.config(), view_features)) {
    throw std::invalid_argument("ive_layer: feature map shape does not match config");
  }
  return transformer_block(w, prefix, view_features);
}

template <typename Scalar> EncoderOutput<Scalar> multiview_encode(BoundWeights<Scalar> &w, Var<Scalar> view_features, int n_iters)
{
  if (n_iters < 1) { throw std::invalid_argument("multiview_encode: n_iters must be at least 1"); }
  auto const &c = w.config();
  Var<Scalar> x = view_features;
  for (int i = 0; i < n_iters; ++i) {
    std::string const p = "mv_encoder.iter" + std::to_string(i);
    int const fusion_view = c.rotate_fusion_view ? i % c.views : 0;
    if (c.views >= 2) { x = ivf_layer(w, p + ".ivf", x, fusion_view); }
    x = ive_layer(w, p + ".ive", x);
  }
  return {x, ad::segment_max_rows(x, c.views)};
}

template <typename Scalar> Var<Scalar> point_feature_extract(BoundWeights<Scalar> &w, Var<Scalar> points)
{
  if (points.rows() < 1 || points.cols() != 3) { throw std::invalid_argument("point_feature_extract: expected a nonempty N x 3 cloud"); }
  Var<Scalar> const h1 = ad::relu(dense(w, "point_branch.fc1", points));
  Var<Scalar> const h2 = dense(w, "point_branch.fc2", h1);
  Var<Scalar> const pooled = ad::broadcast_rows(ad::max_rows(h2), h2.rows());
  Var<Scalar> const h3 = ad::relu(dense(w, "point_branch.fc3", ad::concat_cols({h2, pooled})));
  return dense(w, "point_branch.fc4", h3);
}

template <typename Scalar>
Var<Scalar> generate_seed(BoundWeights<Scalar> &w, Var<Scalar> global_feature, PointCloudT<Scalar> const &input_cloud)
{
  auto const &c = w.config();
  if (global_feature.rows() != c.views || global_feature.cols() != c.channels) {
    throw std::invalid_argument("generate_seed: global feature must be views x channels");
  }
  Index const n_raw = c.seed_candidates(), d = c.point_dim;
  Var<Scalar> const pooled = pooled_global(global_feature);

  // Transposed 1D convolution from a length-1 signal: one kernel column block per output position.
  Var<Scalar> const expanded = ad::matmul(pooled, w("seed_gen.deconv.weight"));
  Var<Scalar> const feat = ad::add_bias(ad::reshape(expanded, n_raw, d), w("seed_gen.deconv.bias"));
  Var<Scalar> const ctx = ad::broadcast_rows(pooled, n_raw);

  auto residual_mlp = [&](std::string const &name, Var<Scalar> x) {
    Var<Scalar> const h = dense(w, name + ".fc2", ad::relu(dense(w, name + ".fc1", x)));
    return ad::relu(h + dense(w, name + ".shortcut", x));
  };
  Var<Scalar> const r1 = residual_mlp("seed_gen.res1", ad::concat_cols({feat, ctx}));
  Var<Scalar> const r2 = residual_mlp("seed_gen.res2", ad::concat_cols({r1, ctx}));
  Var<Scalar> const generated = dense(w, "seed_gen.out2", ad::relu(dense(w, "seed_gen.out1", r2)));

  PointCloudT<Scalar> const gen_values = generated.value();
  auto idx = geometry::merge_and_resample_indices<Scalar>(gen_values, input_cloud, c.coarse_points);
  Var<Scalar> const merged = ad::concat_rows({generated, w.tape().constant(Matrix<Scalar>(input_cloud))});
  return ad::gather_rows(merged, std::move(idx));
}

template <typename Scalar>
Var<Scalar> upsample_stage(
  BoundWeights<Scalar> &w,
  int stage,
  Var<Scalar> previous,
  Var<Scalar> global_feature,
  Var<Scalar> view_features,
  Var<Scalar> point_features,
  int ratio)
{
  auto const &c = w.config();
  if (ratio < 1) { throw std::invalid_argument("upsample_stage: ratio must be at least 1"); }
  if (previous.cols() != 3 || previous.rows() < 1) { throw std::invalid_argument("upsample_stage: previous cloud must be N x 3"); }
  if (stage < 1 || stage > static_cast<int>(c.stage_ratios.size()) || c.stage_ratios[static_cast<size_t>(stage - 1)] != ratio) {
    throw std::invalid_argument("upsample_stage: stage/ratio do not match config");
  }
  std::string const p = "stage" + std::to_string(stage);
  Index const n = previous.rows();

  Var<Scalar> const lifted = mini_pointnet(w, p + ".pointnet", previous);
  Var<Scalar> const ctx = ad::broadcast_rows(pooled_global(global_feature), n);
  Var<Scalar> const coarse_features = transformer_block(w, p + ".sa", dense(w, p + ".fuse", ad::concat_cols({lifted, ctx})));

  auto aggregate = [&](std::string const &name, Var<Scalar> source) {
    return coarse_features +
           attention(w, name + ".attn", norm(w, name + ".norm_q", coarse_features), norm(w, name + ".norm_kv", source));
  };
  Var<Scalar> const f2d = aggregate(p + ".agg2d", view_features);
  Var<Scalar> const f3d = aggregate(p + ".agg3d", c.point_source == "point_features" ? point_features : global_feature);

  Var<Scalar> h = ad::relu(dense(w, p + ".head.fc1", ad::concat_cols({f2d, f3d})));
  h = ad::relu(dense(w, p + ".head.fc2", h));
  Var<Scalar> const displacement = ad::reshape(dense(w, p + ".head.out", h), n * ratio, 3);
  return ad::repeat_rows(previous, ratio) + displacement;
}

template <typename Scalar> EncoderOutput<Scalar> encode_views(BoundWeights<Scalar> &w, projection::DepthImageGroup const &images)
{
  auto const &c = w.config();
  if (static_cast<int>(images.images.size()) != c.views || images.rig.height != c.image_height || images.rig.width != c.image_width) {
    throw std::invalid_argument("image group does not match network config");
  }
  Var<Scalar> const pixels = w.tape().constant(images.as_tokens<Scalar>());
  return multiview_encode(w, backbone_encode(w, pixels), c.encoder_iters);
}

template <typename Scalar>
ForwardOutputs<Scalar> forward(BoundWeights<Scalar> &w, projection::DepthImageGroup const &images, PointCloud const &input_cloud)
{
  auto const &c = w.config();
  geometry::check_cloud(input_cloud, "input cloud");
  EncoderOutput<Scalar> const enc = encode_views(w, images);

  PointCloudT<Scalar> const input = input_cloud.cast<Scalar>();
  Var<Scalar> const points = w.tape().constant(Matrix<Scalar>(input));
  Var<Scalar> const point_features = point_feature_extract(w, points);

  ForwardOutputs<Scalar> out;
  out.view_features = enc.view_features;
  out.global_feature = enc.global_feature;
  out.coarse = generate_seed(w, enc.global_feature, input);
  Var<Scalar> prev = out.coarse;
  for (size_t s = 0; s < c.stage_ratios.size(); ++s) {
    prev = upsample_stage(w, static_cast<int>(s + 1), prev, enc.global_feature, enc.view_features, point_features, c.stage_ratios[s]);
    out.stages.push_back(prev);
  }
  return out;
}

template <typename Scalar> ViewFeatureMap<Scalar> as_view_features(Matrix<Scalar> const &tokens, NetworkConfig const &config)
{
  return {tokens, config.views, config.feature_height(), config.feature_width()};
}

template <typename Scalar>
Prediction<Scalar> predict(ModelWeights<Scalar> const &weights, projection::DepthImageGroup const &images, PointCloud const &input_cloud)
{
  ad::Tape<Scalar> tape;
  BoundWeights<Scalar> bound(tape, weights, BoundWeights<Scalar>::none());
  auto const out = forward(bound, images, input_cloud);
  Prediction<Scalar> p;
  p.coarse = out.coarse.value();
  for (auto const &s : out.stages) { p.stages.emplace_back(s.value()); }
  p.view_features = as_view_features<Scalar>(out.view_features.value(), weights.config);
  p.global_feature = out.global_feature.value();
  return p;
}

projection::CameraRig make_rig(NetworkConfig const &config)
{
  if (config.views != 6) { throw std::invalid_argument("only the six-view axis rig is implemented"); }
  return projection::build_axis_rig(config.image_height, config.image_width, config.ortho_extent);
}

#define VDPCN_INSTANTIATE(S)                                                                                                   \
  template struct ModelWeights<S>;                                                                                             \
  template class BoundWeights<S>;                                                                                              \
  template struct ForwardOutputs<S>;                                                                                           \
  template ModelWeights<S> init_weights<S>(NetworkConfig const &, std::uint64_t);                                              \
  template void zero_encoder_residuals<S>(ModelWeights<S> &);                                                                  \
  template Var<S> backbone_encode<S>(BoundWeights<S> &, Var<S>);                                                               \
  template Var<S> attention<S>(BoundWeights<S> &, std::string const &, Var<S>, Var<S>);                                        \
  template Var<S> ivf_layer<S>(BoundWeights<S> &, std::string const &, Var<S>, int);                                           \
  template Var<S> ive_layer<S>(BoundWeights<S> &, std::string const &, Var<S>);                                                \
  template EncoderOutput<S> multiview_encode<S>(BoundWeights<S> &, Var<S>, int);                                               \
  template Var<S> point_feature_extract<S>(BoundWeights<S> &, Var<S>);                                                         \
  template Var<S> generate_seed<S>(BoundWeights<S> &, Var<S>, PointCloudT<S> const &);                                         \
  template Var<S> upsample_stage<S>(BoundWeights<S> &, int, Var<S>, Var<S>, Var<S>, Var<S>, int);                              \
  template EncoderOutput<S> encode_views<S>(BoundWeights<S> &, projection::DepthImageGroup const &);                           \
  template ForwardOutputs<S> forward<S>(BoundWeights<S> &, projection::DepthImageGroup const &, PointCloud const &);          \
  template ViewFeatureMap<S> as_view_features<S>(Matrix<S> const &, NetworkConfig const &);                                    \
  template Prediction<S> predict<S>(ModelWeights<S> const &, projection::DepthImageGroup const &, PointCloud const &);

VDPCN_INSTANTIATE(float)
VDPCN_INSTANTIATE(double)
#undef VDPCN_INSTANTIATE

} // namespace vdpcn::network
