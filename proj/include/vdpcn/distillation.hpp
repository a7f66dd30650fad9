#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include "vdpcn/dataset.hpp"
#include "vdpcn/network.hpp"

namespace vdpcn::distillation {

/// Which feature-alignment terms are active: A none, B view features only,
/// C global feature only, D both.
enum class Variant
{
  A,
  B,
  C,
  D,
};

char to_char(Variant v);
Variant variant_from_string(std::string const &s);

struct DistillConfig
{
  double tau0 = 1.0; ///< weight of the whole distillation term in the training loss
  double tau1 = 1.0; ///< squared-error weight on view features
  double tau2 = 1.0; ///< absolute-error weight on the global feature
  std::set<std::string> trainable_groups{"backbone", "mv_encoder"};
  double student_lr = 1e-4;
  Variant variant = Variant::D;

  /// tau1/tau2 after masking by the variant.
  double feature_weight() const;
  double global_weight() const;
  /// False for variant A: the training loss has no distillation term at all.
  bool has_kd_term() const { return variant != Variant::A; }
};

template <typename Scalar> struct DistillTargets
{
  network::ViewFeatureMap<Scalar> view_features;
  network::GlobalFeature<Scalar> global_feature;
};

/// tau1 * sum (F_v^T - F_v^S)^2 + tau2 * sum |F_g^T - F_g^S|; targets are constants.
template <typename Scalar>
ad::Var<Scalar> kd_loss(
  ad::Var<Scalar> student_view_features, ad::Var<Scalar> student_global_feature, DistillTargets<Scalar> const &targets, double tau1, double tau2);

template <typename Scalar>
double kd_loss_value(
  Matrix<Scalar> const &student_view_features, Matrix<Scalar> const &student_global_feature, DistillTargets<Scalar> const &targets,
  double tau1, double tau2);

/// Deep copy after validating the teacher.
template <typename Scalar> network::ModelWeights<Scalar> init_student_from_teacher(network::ModelWeights<Scalar> const &teacher);

/// Names of every parameter in the configured trainable groups. Throws on an unknown group.
template <typename Scalar>
std::set<std::string> trainable_parameter_set(network::ModelWeights<Scalar> const &weights, std::set<std::string> const &groups);

/// Teacher features from FPS-downsampled complete views of `sample.gt`.
template <typename Scalar>
DistillTargets<Scalar> teacher_targets(
  network::ModelWeights<Scalar> const &teacher, dataset::Sample const &sample, projection::CameraRig const &rig, Index n_down);

/// One binary record per sample id, tagged with the hash of the teacher
/// checkpoint that produced it. Records from another teacher are treated as absent.
class TargetCache
{
public:
  TargetCache(std::filesystem::path directory, std::uint64_t teacher_hash);

  std::optional<DistillTargets<double>> load(std::string const &sample_id) const;
  void store(std::string const &sample_id, DistillTargets<double> const &targets) const;
  std::filesystem::path record_path(std::string const &sample_id) const;

private:
  std::filesystem::path directory_;
  std::uint64_t teacher_hash_;
};

} // namespace vdpcn::distillation
