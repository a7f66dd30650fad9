#pragma once

#include <span>
#include <vector>

#include "vdpcn/types.hpp"

namespace vdpcn::geometry {

/// Maps model coordinates into the unit ball: normalized = (p - translation) / scale.
struct NormalizationTransform
{
  Vector3 translation = Vector3::Zero();
  double scale = 1.0;

  PointCloud apply(PointCloud const &cloud) const;
  PointCloud invert(PointCloud const &normalized) const;
};

struct NormalizedCloud
{
  PointCloud cloud;
  NormalizationTransform transform;
};

struct CropResult
{
  PointCloud partial;
  PointCloud removed;
  std::vector<Index> partial_indices;
  std::vector<Index> removed_indices;
};

/// Throws std::invalid_argument if the cloud is empty or holds non-finite values.
template <typename Scalar> void check_cloud(PointCloudT<Scalar> const &cloud, char const *what = "cloud");

/// Centroid to the origin, farthest point to radius 1. Throws "zero extent" on a degenerate cloud.
NormalizedCloud normalize_to_unit(PointCloud const &cloud);

/// Farthest point sampling starting at index 0; ties go to the lowest index.
template <typename Scalar> std::vector<Index> farthest_point_indices(PointCloudT<Scalar> const &cloud, Index m);
template <typename Scalar> PointCloudT<Scalar> farthest_point_sample(PointCloudT<Scalar> const &cloud, Index m);

template <typename Scalar>
PointCloudT<Scalar> gather(PointCloudT<Scalar> const &cloud, std::span<Index const> indices);

template <typename Scalar> PointCloudT<Scalar> concatenate(PointCloudT<Scalar> const &a, PointCloudT<Scalar> const &b);

/// Removes the round(N * ratio) points nearest to `seed_point`. Ties in distance go to the lowest index.
CropResult knn_crop(PointCloud const &cloud, Vector3 const &seed_point, double ratio);

/// FPS over [generated; input_cloud]; indices refer to that concatenation.
template <typename Scalar>
std::vector<Index> merge_and_resample_indices(
  PointCloudT<Scalar> const &generated, PointCloudT<Scalar> const &input_cloud, Index m);
template <typename Scalar>
PointCloudT<Scalar> merge_and_resample(PointCloudT<Scalar> const &generated, PointCloudT<Scalar> const &input_cloud, Index m);

} // namespace vdpcn::geometry
