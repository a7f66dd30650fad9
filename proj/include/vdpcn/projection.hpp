#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "vdpcn/types.hpp"

namespace vdpcn::projection {

/// Orthographic depth cameras looking at the origin from k directions.
struct CameraRig
{
  int k = 0;
  std::vector<Vector3> directions; ///< viewing direction (camera looks along it)
  std::vector<Vector3> up_vectors;
  int height = 0;
  int width = 0;
  double ortho_extent = 1.0;

  /// Image-plane horizontal axis of view i: direction x up.
  Vector3 right(int view) const;
  void validate() const;
};

using DepthImage = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DepthImageGroup
{
  std::vector<DepthImage> images;
  CameraRig rig;

  /// Views stacked as (k*H*W) x 1, view-major then row-major pixels.
  template <typename Scalar> Matrix<Scalar> as_tokens() const;
};

inline constexpr double kNearDepth = 1.0;
inline constexpr double kFarDepth = 0.05;

/// Six axis-aligned views ordered +x, -x, +y, -y, +z, -z. Up is +y for the z views, +z otherwise.
CameraRig build_axis_rig(int height, int width, double ortho_extent);

/// Occupied pixels hold values in [0.05, 1] (nearer is brighter), background is 0.
/// `splat_radius` 1 writes exactly one pixel per point.
DepthImageGroup render_depth(PointCloud const &cloud, CameraRig const &rig, int splat_radius = 1);

/// FPS-downsample the ground truth to `n_down` points, then render.
DepthImageGroup render_teacher_views(PointCloud const &gt_cloud, CameraRig const &rig, Index n_down, int splat_radius = 1);

/// Value written for a point at signed distance `s` along the viewing direction.
double depth_value(double s, double ortho_extent);

Index occupied_pixels(DepthImage const &image);

/// 8-bit grayscale, value round(255 * depth).
void write_png(DepthImage const &image, std::filesystem::path const &path);

nlohmann::json to_json(CameraRig const &rig);
CameraRig rig_from_json(nlohmann::json const &j);

} // namespace vdpcn::projection
