#pragma once

#include <Eigen/Core>

namespace vdpcn {

using Index = Eigen::Index;

template <typename Scalar> using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar> using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// N x 3 point coordinates, one point per row.
template <typename Scalar = double> using PointCloudT = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
using PointCloud = PointCloudT<double>;

template <typename Scalar = double> using Point3T = Eigen::Matrix<Scalar, 1, 3>;
using Vector3 = Eigen::Vector3d;

} // namespace vdpcn
