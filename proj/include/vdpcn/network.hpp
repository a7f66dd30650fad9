#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vdpcn/autodiff.hpp"
#include "vdpcn/projection.hpp"
#include "vdpcn/types.hpp"

namespace vdpcn::network {

/// Architecture hyper-parameters. Everything that differs between the desk
/// and paper presets lives here.
struct NetworkConfig
{
  int views = 6;
  int image_height = 64;
  int image_width = 64;
  double ortho_extent = 1.05;
  int splat_radius = 1;
  int channels = 64;   ///< C, encoder width
  int point_dim = 128; ///< D, decoder width
  int coarse_points = 128;
  int raw_seed_points = 0; ///< candidate seeds before merging with the input; 0 means coarse_points
  std::vector<int> stage_ratios{4, 8};
  int encoder_iters = 2;
  int heads = 4;
  int ffn_mult = 2;
  int backbone_levels = 4;
  int backbone_convs_per_level = 2;
  bool rotate_fusion_view = false;
  std::string point_source = "point_features"; ///< keys/values of the 3D aggregation: point_features | global_feature

  int feature_height() const;
  int feature_width() const;
  int seed_candidates() const { return raw_seed_points > 0 ? raw_seed_points : coarse_points; }
  std::vector<int> backbone_channels() const;
  Index output_points() const;
  void validate() const;

  static NetworkConfig desk();
  static NetworkConfig paper();
};

nlohmann::json to_json(NetworkConfig const &c);
/// Rejects unknown keys; missing keys keep the values of `base`.
NetworkConfig network_config_from_json(nlohmann::json const &j, NetworkConfig base = {});

enum class Init
{
  xavier,
  xavier_small, ///< xavier scaled by 0.1, for residual output projections
  zeros,
  ones,
};

struct ParameterSpec
{
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Init init = Init::xavier;
};

/// Every learnable array the configuration implies, in a fixed order.
std::vector<ParameterSpec> parameter_specs(NetworkConfig const &config);

/// Sub-module a parameter belongs to: the prefix before the first '.'.
std::string group_of(std::string_view name);
/// backbone, mv_encoder, point_branch, seed_gen, stage1..stageN
std::vector<std::string> group_names(NetworkConfig const &config);

template <typename Scalar> struct ModelWeights
{
  NetworkConfig config;
  std::map<std::string, Matrix<Scalar>> params;

  Matrix<Scalar> const &at(std::string const &name) const;
  Matrix<Scalar> &at(std::string const &name);

  /// Throws if names or shapes disagree with parameter_specs(config), or if any value is non-finite.
  void validate() const;
  Index parameter_count() const;

  template <typename Other> ModelWeights<Other> cast() const
  {
    ModelWeights<Other> out;
    out.config = config;
    for (auto const &[name, m] : params) { out.params.emplace(name, m.template cast<Other>()); }
    return out;
  }
};

template <typename Scalar> ModelWeights<Scalar> init_weights(NetworkConfig const &config, std::uint64_t seed);

/// Zeroes every residual output projection (attention outputs, feed-forward outputs)
/// in the encoder so that the encoder stack is the identity map.
template <typename Scalar> void zero_encoder_residuals(ModelWeights<Scalar> &weights);

/// Parameters of one model exposed as tape leaves. Names for which
/// `trainable` is false are constants on the tape.
template <typename Scalar> class BoundWeights
{
public:
  using Predicate = std::function<bool(std::string const &)>;

  BoundWeights(ad::Tape<Scalar> &tape, ModelWeights<Scalar> const &weights, Predicate trainable);

  ad::Var<Scalar> operator()(std::string const &name);
  ad::Tape<Scalar> &tape() { return tape_; }
  NetworkConfig const &config() const { return weights_.config; }

  /// Gradients of trainable parameters reached by the last backward pass.
  std::map<std::string, Matrix<Scalar>> gradients() const;

  static Predicate all() { return [](std::string const &) { return true; }; }
  static Predicate none() { return [](std::string const &) { return false; }; }

private:
  ad::Tape<Scalar> &tape_;
  ModelWeights<Scalar> const &weights_;
  Predicate trainable_;
  std::map<std::string, ad::Var<Scalar>> bound_;
};

/// k x C x H1 x W1 features stored as (k*H1*W1) x C tokens, view-major then row-major.
template <typename Scalar> struct ViewFeatureMap
{
  Matrix<Scalar> tokens;
  int views = 0;
  int height = 0;
  int width = 0;

  Scalar at(int view, int channel, int y, int x) const { return tokens((static_cast<Index>(view) * height + y) * width + x, channel); }
  Index channels() const { return tokens.cols(); }
};

/// k x C per-view spatial maxima.
template <typename Scalar> using GlobalFeature = Matrix<Scalar>;

template <typename Scalar> struct EncoderOutput
{
  ad::Var<Scalar> view_features;
  ad::Var<Scalar> global_feature;
};

template <typename Scalar> struct ForwardOutputs
{
  ad::Var<Scalar> coarse;              ///< seed cloud P_c
  std::vector<ad::Var<Scalar>> stages; ///< P_1 .. P_n
  ad::Var<Scalar> view_features;       ///< encoder output F_v
  ad::Var<Scalar> global_feature;      ///< F_g

  /// P_c followed by every stage output.
  std::vector<ad::Var<Scalar>> supervised() const;
};

/// Shared strided CNN over each view; (k*H*W) x 1 pixels in, (k*H1*W1) x C out.
template <typename Scalar> ad::Var<Scalar> backbone_encode(BoundWeights<Scalar> &w, ad::Var<Scalar> images);

/// Multi-head attention with separate query and key/value token sets.
template <typename Scalar>
ad::Var<Scalar> attention(BoundWeights<Scalar> &w, std::string const &prefix, ad::Var<Scalar> queries, ad::Var<Scalar> keys_values);

/// The fusion view's tokens query all other views; other views pass through unchanged.
template <typename Scalar>
ad::Var<Scalar> ivf_layer(BoundWeights<Scalar> &w, std::string const &prefix, ad::Var<Scalar> view_features, int fusion_view = 0);

/// Self-attention over all views' tokens jointly.
template <typename Scalar> ad::Var<Scalar> ive_layer(BoundWeights<Scalar> &w, std::string const &prefix, ad::Var<Scalar> view_features);

/// n_iters rounds of IVF then IVE, then per-view spatial max pooling.
template <typename Scalar> EncoderOutput<Scalar> multiview_encode(BoundWeights<Scalar> &w, ad::Var<Scalar> view_features, int n_iters);

/// Per-point MLP with one max-pooled global context concatenation; N x 3 in, N x D out.
template <typename Scalar> ad::Var<Scalar> point_feature_extract(BoundWeights<Scalar> &w, ad::Var<Scalar> points);

/// Candidate points from the pooled global feature, merged with the input cloud and FPS-resampled.
template <typename Scalar>
ad::Var<Scalar> generate_seed(BoundWeights<Scalar> &w, ad::Var<Scalar> global_feature, PointCloudT<Scalar> const &input_cloud);

/// One coarse-to-fine step: |P_prev| * ratio output points.
template <typename Scalar>
ad::Var<Scalar> upsample_stage(
  BoundWeights<Scalar> &w,
  int stage,
  ad::Var<Scalar> previous,
  ad::Var<Scalar> global_feature,
  ad::Var<Scalar> view_features,
  ad::Var<Scalar> point_features,
  int ratio);

template <typename Scalar>
ForwardOutputs<Scalar> forward(BoundWeights<Scalar> &w, projection::DepthImageGroup const &images, PointCloud const &input_cloud);

/// Images -> backbone -> multi-view encoder only.
template <typename Scalar> EncoderOutput<Scalar> encode_views(BoundWeights<Scalar> &w, projection::DepthImageGroup const &images);

/// Plain values of a forward pass, without gradients.
template <typename Scalar> struct Prediction
{
  PointCloudT<Scalar> coarse;
  std::vector<PointCloudT<Scalar>> stages;
  ViewFeatureMap<Scalar> view_features;
  GlobalFeature<Scalar> global_feature;
};

template <typename Scalar>
Prediction<Scalar> predict(ModelWeights<Scalar> const &weights, projection::DepthImageGroup const &images, PointCloud const &input_cloud);

template <typename Scalar> ViewFeatureMap<Scalar> as_view_features(Matrix<Scalar> const &tokens, NetworkConfig const &config);

projection::CameraRig make_rig(NetworkConfig const &config);

} // namespace vdpcn::network
