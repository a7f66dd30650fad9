#include "vdpcn/projection.hpp"

#include <Eigen/Geometry>

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>

#include "vdpcn/geometry.hpp"

namespace vdpcn::projection {

Vector3 CameraRig::right(int view) const { return directions[static_cast<size_t>(view)].cross(up_vectors[static_cast<size_t>(view)]); }

void CameraRig::validate() const
{
  if (k < 1 || directions.size() != static_cast<size_t>(k) || up_vectors.size() != static_cast<size_t>(k)) {
    throw std::invalid_argument("camera rig: view count does not match direction/up arrays");
  }
  if (height < 8 || width < 8) { throw std::invalid_argument("camera rig: image size must be at least 8x8"); }
  if (!(ortho_extent > 0.0)) { throw std::invalid_argument("camera rig: ortho_extent must be positive"); }
  for (int i = 0; i < k; ++i) {
    auto const &d = directions[static_cast<size_t>(i)];
    auto const &u = up_vectors[static_cast<size_t>(i)];
    if (std::abs(d.norm() - 1.0) > 1e-9 || std::abs(u.norm() - 1.0) > 1e-9 || std::abs(d.dot(u)) > 1e-9) {
      throw std::invalid_argument("camera rig: view " + std::to_string(i) + " has a non-orthonormal frame");
    }
  }
}

template <typename Scalar> Matrix<Scalar> DepthImageGroup::as_tokens() const
{
  Index const hw = static_cast<Index>(rig.height) * rig.width;
  Matrix<Scalar> out(hw * static_cast<Index>(images.size()), 1);
  for (size_t v = 0; v < images.size(); ++v) {
    out.block(static_cast<Index>(v) * hw, 0, hw, 1) =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, 1> const>(images[v].data(), hw).template cast<Scalar>();
  }
  return out;
}
template Matrix<float> DepthImageGroup::as_tokens<float>() const;
template Matrix<double> DepthImageGroup::as_tokens<double>() const;

CameraRig build_axis_rig(int height, int width, double ortho_extent)
{
  CameraRig rig;
  rig.k = 6;
  rig.height = height;
  rig.width = width;
  rig.ortho_extent = ortho_extent;
  Vector3 const ex = Vector3::UnitX(), ey = Vector3::UnitY(), ez = Vector3::UnitZ();
  rig.directions = {ex, -ex, ey, -ey, ez, -ez};
  rig.up_vectors = {ez, ez, ez, ez, ey, ey};
  rig.validate();
  return rig;
}

double depth_value(double s, double ortho_extent)
{
  double const t = (s + ortho_extent) / (2.0 * ortho_extent); // 0 nearest, 1 farthest
  return kNearDepth - (kNearDepth - kFarDepth) * t;
}

namespace {
int pixel_index(double coord, double extent, int size)
{
  auto const i = static_cast<int>(std::floor((coord + extent) / (2.0 * extent) * size));
  return std::clamp(i, 0, size - 1);
}
} // namespace

DepthImageGroup render_depth(PointCloud const &cloud, CameraRig const &rig, int splat_radius)
{
  rig.validate();
  geometry::check_cloud(cloud);
  if (splat_radius < 1) { throw std::invalid_argument("render_depth: splat radius must be at least 1"); }
  double const e = rig.ortho_extent;
  if (cloud.cwiseAbs().maxCoeff() > e) { throw std::invalid_argument("point outside rig extent"); }

  DepthImageGroup group;
  group.rig = rig;
  group.images.reserve(static_cast<size_t>(rig.k));
  int const reach = splat_radius - 1;
  for (int v = 0; v < rig.k; ++v) {
    Vector3 const dir = rig.directions[static_cast<size_t>(v)];
    Vector3 const up = rig.up_vectors[static_cast<size_t>(v)];
    Vector3 const right = rig.right(v);
    DepthImage image = DepthImage::Zero(rig.height, rig.width);
    for (Index i = 0; i < cloud.rows(); ++i) {
      Vector3 const p = cloud.row(i).transpose();
      double const s = p.dot(dir), u = p.dot(right), w = p.dot(up);
      if (std::abs(s) > e || std::abs(u) > e || std::abs(w) > e) { throw std::invalid_argument("point outside rig extent"); }
      double const value = depth_value(s, e);
      int const col = pixel_index(u, e, rig.width);
      int const row = rig.height - 1 - pixel_index(w, e, rig.height);
      for (int dr = -reach; dr <= reach; ++dr) {
        for (int dc = -reach; dc <= reach; ++dc) {
          int const r = row + dr, c = col + dc;
          if (r < 0 || r >= rig.height || c < 0 || c >= rig.width) { continue; }
          double &px = image(r, c);
          if (value > px) { px = value; }
        }
      }
    }
    group.images.push_back(std::move(image));
  }
  return group;
}

DepthImageGroup render_teacher_views(PointCloud const &gt_cloud, CameraRig const &rig, Index n_down, int splat_radius)
{
  return render_depth(geometry::farthest_point_sample<double>(gt_cloud, n_down), rig, splat_radius);
}

Index occupied_pixels(DepthImage const &image) { return (image.array() > 0.0).count(); }

void write_png(DepthImage const &image, std::filesystem::path const &path)
{
  std::unique_ptr<FILE, int (*)(FILE *)> file(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!file) { throw std::runtime_error("cannot open " + path.string() + " for writing"); }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  auto const h = static_cast<png_uint_32>(image.rows()), w = static_cast<png_uint_32>(image.cols());
  png_init_io(png, file.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(w);
  for (png_uint_32 r = 0; r < h; ++r) {
    for (png_uint_32 c = 0; c < w; ++c) {
      double const v = std::clamp(image(r, c), 0.0, 1.0);
      row[c] = static_cast<png_byte>(std::lround(255.0 * v));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

nlohmann::json to_json(CameraRig const &rig)
{
  auto vecs = [](std::vector<Vector3> const &vs) {
    nlohmann::json a = nlohmann::json::array();
    for (auto const &v : vs) { a.push_back({v.x(), v.y(), v.z()}); }
    return a;
  };
  return {
    {"k", rig.k},
    {"height", rig.height},
    {"width", rig.width},
    {"ortho_extent", rig.ortho_extent},
    {"directions", vecs(rig.directions)},
    {"up_vectors", vecs(rig.up_vectors)}};
}

CameraRig rig_from_json(nlohmann::json const &j)
{
  auto vecs = [](nlohmann::json const &a) {
    std::vector<Vector3> out;
    for (auto const &v : a) { out.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()); }
    return out;
  };
  CameraRig rig;
  rig.k = j.at("k").get<int>();
  rig.height = j.at("height").get<int>();
  rig.width = j.at("width").get<int>();
  rig.ortho_extent = j.at("ortho_extent").get<double>();
  rig.directions = vecs(j.at("directions"));
  rig.up_vectors = vecs(j.at("up_vectors"));
  rig.validate();
  return rig;
}

} // namespace vdpcn::projection
