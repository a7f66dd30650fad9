#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdpcn/types.hpp"

namespace vdpcn::metrics {

struct Neighbor
{
  Index index = -1;
  double squared_distance = 0.0;
};

/// Exact nearest-neighbor queries over a fixed 3D point set (static kd-tree).
template <typename Scalar> class KdTree
{
public:
  explicit KdTree(PointCloudT<Scalar> const &points);

  Neighbor nearest(Eigen::Ref<Point3T<Scalar> const> const &query) const;
  /// Nearest neighbor of every row of `queries`.
  std::vector<Neighbor> nearest_all(PointCloudT<Scalar> const &queries) const;
  Index size() const { return points_.rows(); }

private:
  struct Node
  {
    Index begin, end; // range in order_
    int axis = -1;    // -1 marks a leaf
    double split = 0;
    Index left = -1, right = -1;
  };
  Index build(Index begin, Index end);
  void search(Index node, Point3T<Scalar> const &q, Neighbor &best) const;

  PointCloudT<Scalar> points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

template <typename Scalar> double chamfer_l1(PointCloudT<Scalar> const &p, PointCloudT<Scalar> const &q);
template <typename Scalar> double chamfer_l2(PointCloudT<Scalar> const &p, PointCloudT<Scalar> const &q);
template <typename Scalar> double f_score(PointCloudT<Scalar> const &p, PointCloudT<Scalar> const &q, double threshold);

struct MetricTriple
{
  double cd_l1 = 0.0;
  double cd_l2 = 0.0;
  double f_score = 0.0;
};

struct MetricReport
{
  double cd_l1 = 0.0;
  double cd_l2 = 0.0;
  double f_score = 0.0;
  Index samples = 0;
  std::map<std::string, MetricTriple> per_category;
};

/// All three metrics for one prediction/ground-truth pair.
MetricTriple evaluate_pair(PointCloud const &prediction, PointCloud const &gt, double f_threshold);

nlohmann::json to_json(MetricReport const &report);
MetricReport report_from_json(nlohmann::json const &j);

} // namespace vdpcn::metrics
