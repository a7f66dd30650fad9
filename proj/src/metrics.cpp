#include "vdpcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace vdpcn::metrics {

namespace {
constexpr Index kLeafSize = 12;

template <typename Scalar> void check_nonempty(PointCloudT<Scalar> const &p, PointCloudT<Scalar> const &q)
{
  if (p.rows() == 0 || q.rows() == 0) { throw std::invalid_argument("metric undefined for an empty cloud"); }
}

// Mean over p of the nearest distance into q, either plain or squared.
template <typename Scalar> double directed_mean(PointCloudT<Scalar> const &p, KdTree<Scalar> const &q_tree, bool squared)
{
  double sum = 0.0;
  for (Index i = 0; i < p.rows(); ++i) {
    double const d2 = q_tree.nearest(p.row(i)).squared_distance;
    sum += squared ? d2 : std::sqrt(d2);
  }
  return sum / static_cast<double>(p.rows());
}
} // namespace

template <typename Scalar> KdTree<Scalar>::KdTree(PointCloudT<Scalar> const &points) : points_(points)
{
  if (points_.rows() == 0) { throw std::invalid_argument("KdTree: empty point set"); }
  order_.resize(static_cast<size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), Index{0});
  nodes_.reserve(static_cast<size_t>(2 * points_.rows() / kLeafSize + 2));
  build(0, points_.rows());
}

template <typename Scalar> Index KdTree<Scalar>::build(Index begin, Index end)
{
  Index const id = static_cast<Index>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) { return id; }

  Point3T<Scalar> lo = Point3T<Scalar>::Constant(std::numeric_limits<Scalar>::max());
  Point3T<Scalar> hi = Point3T<Scalar>::Constant(std::numeric_limits<Scalar>::lowest());
  for (Index i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_.row(order_[static_cast<size_t>(i)]));
    hi = hi.cwiseMax(points_.row(order_[static_cast<size_t>(i)]));
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (!(hi(axis) > lo(axis))) { return id; } // all points coincide

  Index const mid = begin + (end - begin) / 2;
  auto first = order_.begin() + begin;
  std::nth_element(first, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
    return points_(a, axis) < points_(b, axis);
  });
  double const split = points_(order_[static_cast<size_t>(mid)], axis);
  Index const left = build(begin, mid);
  Index const right = build(mid, end);
  Node &node = nodes_[static_cast<size_t>(id)];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

template <typename Scalar> void KdTree<Scalar>::search(Index node_id, Point3T<Scalar> const &q, Neighbor &best) const
{
  Node const &node = nodes_[static_cast<size_t>(node_id)];
  if (node.axis < 0) {
    for (Index i = node.begin; i < node.end; ++i) {
      Index const idx = order_[static_cast<size_t>(i)];
      double const d = static_cast<double>((points_.row(idx) - q).squaredNorm());
      if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) {
        best.squared_distance = d;
        best.index = idx;
      }
    }
    return;
  }
  double const diff = static_cast<double>(q(node.axis)) - node.split;
  Index const near = diff < 0 ? node.left : node.right;
  Index const far = diff < 0 ? node.right : node.left;
  search(near, q, best);
  // <= so equal-distance candidates across the plane are still visited for index tie-breaking.
  if (diff * diff <= best.squared_distance) { search(far, q, best); }
}

template <typename Scalar> Neighbor KdTree<Scalar>::nearest(Eigen::Ref<Point3T<Scalar> const> const &query) const
{
  Neighbor best{-1, std::numeric_limits<double>::infinity()};
  Point3T<Scalar> const q = query;
  search(0, q, best);
  return best;
}

template <typename Scalar> std::vector<Neighbor> KdTree<Scalar>::nearest_all(PointCloudT<Scalar> const &queries) const
{
  std::vector<Neighbor> out(static_cast<size_t>(queries.rows()));
  for (Index i = 0; i < queries.rows(); ++i) {
    out[static_cast<size_t>(i)] = nearest(queries.row(i));
  }
  return out;
}

template <typename Scalar> double chamfer_l1(PointCloudT<Scalar> const &p, PointCloudT<Scalar> const &q)
{
  check_nonempty(p, q);
  KdTree<Scalar> const tp(p), tq(q);
  return 0.5 * (directed_mean(p, tq, false) + directed_mean(q, tp, false));
}

template <typename Scalar> double chamfer_l2(PointCloudT<Scalar> const &p, PointCloudT<Scalar> const &q)
{
  check_nonempty(p, q);
  KdTree<Scalar> const tp(p), tq(q);
  return directed_mean(p, tq, true) + directed_mean(q, tp, true);
}

template <typename Scalar> double f_score(PointCloudT<Scalar> const &p, PointCloudT<Scalar> const &q, double threshold)
{
  if (!(threshold > 0.0)) { throw std::invalid_argument("f_score: threshold must be positive"); }
  check_nonempty(p, q);
  KdTree<Scalar> const tp(p), tq(q);
  double const t2 = threshold * threshold;
  auto within = [&](PointCloudT<Scalar> const &a, KdTree<Scalar> const &tree) {
    Index count = 0;
    for (Index i = 0; i < a.rows(); ++i) {
      if (tree.nearest(a.row(i)).squared_distance <= t2) { ++count; }
    }
    return static_cast<double>(count) / static_cast<double>(a.rows());
  };
  double const precision = within(p, tq);
  double const recall = within(q, tp);
  if (precision + recall == 0.0) { return 0.0; }
  return 2.0 * precision * recall / (precision + recall);
}

MetricTriple evaluate_pair(PointCloud const &prediction, PointCloud const &gt, double f_threshold)
{
  return {chamfer_l1(prediction, gt), chamfer_l2(prediction, gt), f_score(prediction, gt, f_threshold)};
}

nlohmann::json to_json(MetricReport const &report)
{
  nlohmann::json per_category = nlohmann::json::object();
  for (auto const &[name, m] : report.per_category) {
    per_category[name] = {{"cd_l1", m.cd_l1}, {"cd_l2", m.cd_l2}, {"f_score", m.f_score}};
  }
  return {
    {"cd_l1", report.cd_l1},
    {"cd_l2", report.cd_l2},
    {"f_score", report.f_score},
    {"samples", report.samples},
    {"per_category", per_category}};
}

MetricReport report_from_json(nlohmann::json const &j)
{
  MetricReport r;
  r.cd_l1 = j.at("cd_l1").get<double>();
  r.cd_l2 = j.at("cd_l2").get<double>();
  r.f_score = j.at("f_score").get<double>();
  r.samples = j.value("samples", Index{0});
  for (auto const &[name, m] : j.at("per_category").items()) {
    r.per_category[name] = {m.at("cd_l1").get<double>(), m.at("cd_l2").get<double>(), m.at("f_score").get<double>()};
  }
  return r;
}

template class KdTree<float>;
template class KdTree<double>;
template double chamfer_l1<float>(PointCloudT<float> const &, PointCloudT<float> const &);
template double chamfer_l1<double>(PointCloudT<double> const &, PointCloudT<double> const &);
template double chamfer_l2<float>(PointCloudT<float> const &, PointCloudT<float> const &);
template double chamfer_l2<double>(PointCloudT<double> const &, PointCloudT<double> const &);
template double f_score<float>(PointCloudT<float> const &, PointCloudT<float> const &, double);
template double f_score<double>(PointCloudT<double> const &, PointCloudT<double> const &, double);

} // namespace vdpcn::metrics
