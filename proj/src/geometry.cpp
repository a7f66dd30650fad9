#include "vdpcn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace vdpcn::geometry {

PointCloud NormalizationTransform::apply(PointCloud const &cloud) const
{
  PointCloud out = cloud;
  out.rowwise() -= translation.transpose();
  out /= scale;
  return out;
}

PointCloud NormalizationTransform::invert(PointCloud const &normalized) const
{
  PointCloud out = normalized * scale;
  out.rowwise() += translation.transpose();
  return out;
}

template <typename Scalar> void check_cloud(PointCloudT<Scalar> const &cloud, char const *what)
{
  if (cloud.rows() == 0) { throw std::invalid_argument(std::string(what) + " is empty"); }
  if (!cloud.allFinite()) { throw std::invalid_argument(std::string(what) + " has non-finite coordinates"); }
}

NormalizedCloud normalize_to_unit(PointCloud const &cloud)
{
  check_cloud(cloud);
  Vector3 const centroid = cloud.colwise().mean().transpose();
  double radius = 0.0;
  for (Index i = 0; i < cloud.rows(); ++i) {
    radius = std::max(radius, (cloud.row(i).transpose() - centroid).norm());
  }
  if (!(radius > 1e-12 * std::max(1.0, centroid.norm()))) { throw std::invalid_argument("zero extent"); }

  NormalizationTransform transform{centroid, radius};
  PointCloud out = transform.apply(cloud);
  // Re-center after scaling so the centroid is exact to rounding of the second pass.
  Vector3 const residual = out.colwise().mean().transpose();
  out.rowwise() -= residual.transpose();
  transform.translation += residual * radius;
  return {std::move(out), transform};
}

template <typename Scalar> std::vector<Index> farthest_point_indices(PointCloudT<Scalar> const &cloud, Index m)
{
  Index const n = cloud.rows();
  if (m < 1) { throw std::invalid_argument("farthest_point_sample: m must be at least 1"); }
  if (m > n) {
    throw std::invalid_argument(
      "farthest_point_sample: m = " + std::to_string(m) + " exceeds cloud size " + std::to_string(n));
  }
  std::vector<Index> selected;
  selected.reserve(static_cast<size_t>(m));
  std::vector<Scalar> min_dist(static_cast<size_t>(n), std::numeric_limits<Scalar>::infinity());
  Index current = 0;
  for (Index s = 0; s < m; ++s) {
    selected.push_back(current);
    auto const p = cloud.row(current);
    Index best = -1;
    Scalar best_dist = -1;
    for (Index i = 0; i < n; ++i) {
      Scalar const d = (cloud.row(i) - p).squaredNorm();
      auto &md = min_dist[static_cast<size_t>(i)];
      if (d < md) { md = d; }
      if (md > best_dist) {
        best_dist = md;
        best = i;
      }
    }
    current = best;
  }
  return selected;
}

template <typename Scalar>
PointCloudT<Scalar> gather(PointCloudT<Scalar> const &cloud, std::span<Index const> indices)
{
  PointCloudT<Scalar> out(static_cast<Index>(indices.size()), 3);
  for (size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Index>(i)) = cloud.row(indices[i]);
  }
  return out;
}

template <typename Scalar> PointCloudT<Scalar> farthest_point_sample(PointCloudT<Scalar> const &cloud, Index m)
{
  auto const idx = farthest_point_indices(cloud, m);
  return gather<Scalar>(cloud, idx);
}

template <typename Scalar> PointCloudT<Scalar> concatenate(PointCloudT<Scalar> const &a, PointCloudT<Scalar> const &b)
{
  PointCloudT<Scalar> out(a.rows() + b.rows(), 3);
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

CropResult knn_crop(PointCloud const &cloud, Vector3 const &seed_point, double ratio)
{
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("knn_crop: ratio must lie in (0, 1), got " + std::to_string(ratio));
  }
  check_cloud(cloud);
  Index const n = cloud.rows();
  auto const n_remove = static_cast<Index>(std::llround(static_cast<double>(n) * ratio));
  if (n_remove < 1) { throw std::invalid_argument("knn_crop: N * ratio rounds to zero points"); }

  std::vector<double> dist(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    dist[static_cast<size_t>(i)] = (cloud.row(i).transpose() - seed_point).squaredNorm();
  }
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return dist[static_cast<size_t>(a)] < dist[static_cast<size_t>(b)];
  });

  CropResult result;
  std::vector<bool> removed(static_cast<size_t>(n), false);
  for (Index i = 0; i < n_remove; ++i) {
    removed[static_cast<size_t>(order[static_cast<size_t>(i)])] = true;
  }
  for (Index i = 0; i < n; ++i) {
    (removed[static_cast<size_t>(i)] ? result.removed_indices : result.partial_indices).push_back(i);
  }
  result.partial = gather<double>(cloud, result.partial_indices);
  result.removed = gather<double>(cloud, result.removed_indices);
  return result;
}

template <typename Scalar>
std::vector<Index> merge_and_resample_indices(
  PointCloudT<Scalar> const &generated, PointCloudT<Scalar> const &input_cloud, Index m)
{
  Index const total = generated.rows() + input_cloud.rows();
  if (m > total) {
    throw std::invalid_argument(
      "merge_and_resample: m = " + std::to_string(m) + " exceeds combined size " + std::to_string(total));
  }
  return farthest_point_indices<Scalar>(concatenate<Scalar>(generated, input_cloud), m);
}

template <typename Scalar>
PointCloudT<Scalar> merge_and_resample(PointCloudT<Scalar> const &generated, PointCloudT<Scalar> const &input_cloud, Index m)
{
  auto const merged = concatenate<Scalar>(generated, input_cloud);
  auto const idx = merge_and_resample_indices<Scalar>(generated, input_cloud, m);
  return gather<Scalar>(merged, idx);
}

#define VDPCN_INSTANTIATE(S)                                                                                         \
  template void check_cloud<S>(PointCloudT<S> const &, char const *);                                               \
  template std::vector<Index> farthest_point_indices<S>(PointCloudT<S> const &, Index);                             \
  template PointCloudT<S> farthest_point_sample<S>(PointCloudT<S> const &, Index);                                  \
  template PointCloudT<S> gather<S>(PointCloudT<S> const &, std::span<Index const>);                                \
  template PointCloudT<S> concatenate<S>(PointCloudT<S> const &, PointCloudT<S> const &);                           \
  template std::vector<Index> merge_and_resample_indices<S>(PointCloudT<S> const &, PointCloudT<S> const &, Index); \
  template PointCloudT<S> merge_and_resample<S>(PointCloudT<S> const &, PointCloudT<S> const &, Index);

VDPCN_INSTANTIATE(float)
VDPCN_INSTANTIATE(double)
#undef VDPCN_INSTANTIATE

} // namespace vdpcn::geometry
