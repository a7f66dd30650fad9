#include "vdpcn/distillation.hpp"

#include <cstring>
#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include "vdpcn/projection.hpp"

namespace vdpcn::distillation {

char to_char(Variant v) { return static_cast<char>('A' + static_cast<int>(v)); }

Variant variant_from_string(std::string const &s)
{
  char const c = s.size() == 1 ? static_cast<char>(std::toupper(static_cast<unsigned char>(s[0]))) : '?';
  if (c >= 'A' && c <= 'D') { return static_cast<Variant>(c - 'A'); }
  throw std::invalid_argument("unknown distillation variant '" + s + "' (expected A, B, C or D)");
}

double DistillConfig::feature_weight() const { return variant == Variant::B || variant == Variant::D ? tau1 : 0.0; }
double DistillConfig::global_weight() const { return variant == Variant::C || variant == Variant::D ? tau2 : 0.0; }

namespace {
template <typename Scalar>
void check_shapes(Matrix<Scalar> const &fv, Matrix<Scalar> const &fg, DistillTargets<Scalar> const &t)
{
  if (fv.rows() != t.view_features.tokens.rows() || fv.cols() != t.view_features.tokens.cols()) {
    throw std::invalid_argument("kd_loss: student and teacher view features differ in shape");
  }
  if (fg.rows() != t.global_feature.rows() || fg.cols() != t.global_feature.cols()) {
    throw std::invalid_argument("kd_loss: student and teacher global features differ in shape");
  }
}
} // namespace

template <typename Scalar>
ad::Var<Scalar> kd_loss(ad::Var<Scalar> fv, ad::Var<Scalar> fg, DistillTargets<Scalar> const &targets, double tau1, double tau2)
{
  check_shapes(fv.value(), fg.value(), targets);
  if (tau1 < 0 || tau2 < 0) { throw std::invalid_argument("kd_loss: weights must be non-negative"); }
  ad::Var<Scalar> const feature = ad::squared_error_sum(fv, targets.view_features.tokens);
  ad::Var<Scalar> const global = ad::abs_error_sum(fg, targets.global_feature);
  return ad::scale(feature, static_cast<Scalar>(tau1)) + ad::scale(global, static_cast<Scalar>(tau2));
}

template <typename Scalar>
double kd_loss_value(Matrix<Scalar> const &fv, Matrix<Scalar> const &fg, DistillTargets<Scalar> const &targets, double tau1, double tau2)
{
  check_shapes(fv, fg, targets);
  double const feature = (fv - targets.view_features.tokens).template cast<double>().squaredNorm();
  double const global = (fg - targets.global_feature).template cast<double>().cwiseAbs().sum();
  return tau1 * feature + tau2 * global;
}

template <typename Scalar> network::ModelWeights<Scalar> init_student_from_teacher(network::ModelWeights<Scalar> const &teacher)
{
  teacher.validate();
  network::ModelWeights<Scalar> student = teacher;
  return student;
}

template <typename Scalar>
std::set<std::string> trainable_parameter_set(network::ModelWeights<Scalar> const &weights, std::set<std::string> const &groups)
{
  auto const known = network::group_names(weights.config);
  for (auto const &g : groups) {
    if (std::find(known.begin(), known.end(), g) == known.end()) { throw std::invalid_argument("unknown parameter group '" + g + "'"); }
  }
  std::set<std::string> out;
  for (auto const &[name, _] : weights.params) {
    if (groups.count(network::group_of(name))) { out.insert(name); }
  }
  return out;
}

template <typename Scalar>
DistillTargets<Scalar> teacher_targets(
  network::ModelWeights<Scalar> const &teacher, dataset::Sample const &sample, projection::CameraRig const &rig, Index n_down)
{
  auto const images = projection::render_teacher_views(sample.gt, rig, std::min<Index>(n_down, sample.gt.rows()), teacher.config.splat_radius);
  ad::Tape<Scalar> tape;
  network::BoundWeights<Scalar> bound(tape, teacher, network::BoundWeights<Scalar>::none());
  auto const enc = network::encode_views(bound, images);
  return {network::as_view_features<Scalar>(enc.view_features.value(), teacher.config), enc.global_feature.value()};
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'V', 'D', 'P', 'C', 'N', 'K', 'D', 'T'};
constexpr std::uint32_t kVersion = 1;
} // namespace

TargetCache::TargetCache(std::filesystem::path directory, std::uint64_t teacher_hash)
  : directory_(std::move(directory)), teacher_hash_(teacher_hash)
{
}

std::filesystem::path TargetCache::record_path(std::string const &sample_id) const { return directory_ / (sample_id + ".kdt"); }

void TargetCache::store(std::string const &sample_id, DistillTargets<double> const &t) const
{
  std::filesystem::create_directories(directory_);
  std::ofstream out(record_path(sample_id), std::ios::binary | std::ios::trunc);
  if (!out) { throw std::runtime_error("cannot write target cache record for '" + sample_id + "'"); }
  auto put = [&out](auto v) { out.write(reinterpret_cast<char const *>(&v), sizeof(v)); };
  out.write(kMagic, sizeof(kMagic));
  put(kVersion);
  put(teacher_hash_);
  put(static_cast<std::int32_t>(t.view_features.views));
  put(static_cast<std::int32_t>(t.view_features.tokens.cols()));
  put(static_cast<std::int32_t>(t.view_features.height));
  put(static_cast<std::int32_t>(t.view_features.width));
  put(static_cast<std::int32_t>(t.global_feature.rows()));
  put(static_cast<std::int32_t>(t.global_feature.cols()));
  out.write(reinterpret_cast<char const *>(t.view_features.tokens.data()), static_cast<std::streamsize>(t.view_features.tokens.size() * sizeof(double)));
  out.write(reinterpret_cast<char const *>(t.global_feature.data()), static_cast<std::streamsize>(t.global_feature.size() * sizeof(double)));
}

std::optional<DistillTargets<double>> TargetCache::load(std::string const &sample_id) const
{
  std::ifstream in(record_path(sample_id), std::ios::binary);
  if (!in) { return std::nullopt; }
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t hash = 0;
  std::int32_t dims[6];
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char *>(&version), sizeof(version));
  in.read(reinterpret_cast<char *>(&hash), sizeof(hash));
  in.read(reinterpret_cast<char *>(dims), sizeof(dims));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0 || version != kVersion || hash != teacher_hash_) { return std::nullopt; }
  DistillTargets<double> t;
  t.view_features.views = dims[0];
  t.view_features.height = dims[2];
  t.view_features.width = dims[3];
  t.view_features.tokens.resize(static_cast<Index>(dims[0]) * dims[2] * dims[3], dims[1]);
  t.global_feature.resize(dims[4], dims[5]);
  in.read(reinterpret_cast<char *>(t.view_features.tokens.data()), static_cast<std::streamsize>(t.view_features.tokens.size() * sizeof(double)));
  in.read(reinterpret_cast<char *>(t.global_feature.data()), static_cast<std::streamsize>(t.global_feature.size() * sizeof(double)));
  if (!in) { return std::nullopt; }
  return t;
}

#define VDPCN_INSTANTIATE(S)                                                                                                      \
  template ad::Var<S> kd_loss<S>(ad::Var<S>, ad::Var<S>, DistillTargets<S> const &, double, double);                              \
  template double kd_loss_value<S>(Matrix<S> const &, Matrix<S> const &, DistillTargets<S> const &, double, double);              \
  template network::ModelWeights<S> init_student_from_teacher<S>(network::ModelWeights<S> const &);                               \
  template std::set<std::string> trainable_parameter_set<S>(network::ModelWeights<S> const &, std::set<std::string> const &);     \
  template DistillTargets<S> teacher_targets<S>(network::ModelWeights<S> const &, dataset::Sample const &, projection::CameraRig const &, Index);

VDPCN_INSTANTIATE(float)
VDPCN_INSTANTIATE(double)
#undef VDPCN_INSTANTIATE

} // namespace vdpcn::distillation
