#pragma once

#include <cmath>

#include "vdpcn/autodiff.hpp"
#include "vdpcn/metrics.hpp"

namespace vdpcn::ad {

/// Differentiable halved-mean L1 Chamfer distance between predicted points
/// (N x 3) and a fixed ground-truth cloud. `gt_tree` must index `gt`.
template <typename Scalar>
Var<Scalar> chamfer_l1(Var<Scalar> prediction, PointCloudT<Scalar> const &gt, metrics::KdTree<Scalar> const &gt_tree)
{
  detail::require(prediction.cols() == 3 && prediction.rows() > 0 && gt.rows() > 0, "chamfer_l1", "expected nonempty N x 3 clouds");
  auto *t = prediction.tape;
  PointCloudT<Scalar> const pred = prediction.value();
  metrics::KdTree<Scalar> const pred_tree(pred);
  auto const fwd = gt_tree.nearest_all(pred);   // prediction -> gt
  auto const bwd = pred_tree.nearest_all(gt);   // gt -> prediction

  double const wp = 0.5 / static_cast<double>(pred.rows());
  double const wq = 0.5 / static_cast<double>(gt.rows());
  double total_p = 0.0, total_q = 0.0;
  Matrix<Scalar> grad = Matrix<Scalar>::Zero(pred.rows(), 3);
  for (Index i = 0; i < pred.rows(); ++i) {
    double const d = std::sqrt(fwd[static_cast<size_t>(i)].squared_distance);
    total_p += d;
    if (d > 0) { grad.row(i) += (pred.row(i) - gt.row(fwd[static_cast<size_t>(i)].index)) * static_cast<Scalar>(wp / d); }
  }
  for (Index j = 0; j < gt.rows(); ++j) {
    double const d = std::sqrt(bwd[static_cast<size_t>(j)].squared_distance);
    total_q += d;
    Index const i = bwd[static_cast<size_t>(j)].index;
    if (d > 0) { grad.row(i) += (pred.row(i) - gt.row(j)) * static_cast<Scalar>(wq / d); }
  }
  Matrix<Scalar> v(1, 1);
  v(0, 0) = static_cast<Scalar>(0.5 * (total_p / static_cast<double>(pred.rows()) + total_q / static_cast<double>(gt.rows())));
  return t->record(std::move(v), {prediction}, [t, prediction, grad = std::move(grad)](auto const &g) {
    t->accumulate(prediction, grad * g(0, 0));
  });
}

} // namespace vdpcn::ad
