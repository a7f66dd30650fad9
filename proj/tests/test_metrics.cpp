#include <doctest.h>

#include "oracles.hpp"
#include "vdpcn/metrics.hpp"

using namespace vdpcn;

TEST_SUITE("metrics")
{
  TEST_CASE("closed-form single-point values")
  {
    PointCloud p(1, 3), q(1, 3), r(1, 3);
    p << 0, 0, 0;
    q << 1, 0, 0;
    r << 2, 0, 0;
    CHECK(metrics::chamfer_l1<double>(p, q) == 1.0);
    CHECK(metrics::chamfer_l2<double>(p, r) == 8.0);
    CHECK(metrics::chamfer_l1<double>(p, p) == 0.0);
  }

  TEST_CASE("kd-tree chamfer equals the brute-force oracle")
  {
    Rng rng(1);
    for (int trial = 0; trial < 30; ++trial) {
      PointCloud const p = oracle::random_cloud(rng, 1 + static_cast<Index>(rng.below(300)));
      PointCloud const q = oracle::random_cloud(rng, 1 + static_cast<Index>(rng.below(300)));
      CHECK(std::abs(metrics::chamfer_l1<double>(p, q) - oracle::naive_chamfer(p, q, false)) < 1e-12);
      CHECK(std::abs(metrics::chamfer_l2<double>(p, q) - oracle::naive_chamfer(p, q, true)) < 1e-12);
      CHECK(metrics::f_score<double>(p, q, 0.1) == doctest::Approx(oracle::naive_f_score(p, q, 0.1)).epsilon(1e-12));
    }
  }

  TEST_CASE("kd-tree nearest neighbour agrees with a scan, duplicates included")
  {
    Rng rng(2);
    PointCloud pts = oracle::random_cloud(rng, 500);
    pts.block(250, 0, 50, 3) = pts.block(0, 0, 50, 3);
    metrics::KdTree<double> const tree(pts);
    PointCloud const queries = oracle::random_cloud(rng, 200, -1.5, 1.5);
    for (Index i = 0; i < queries.rows(); ++i) {
      auto const nb = tree.nearest(queries.row(i));
      CHECK(nb.squared_distance == doctest::Approx(oracle::nearest_distance(queries, i, pts, true)).epsilon(1e-14));
    }
  }

  TEST_CASE("symmetry and translation invariance")
  {
    Rng rng(7);
    PointCloud const p = oracle::random_cloud(rng, 120), q = oracle::random_cloud(rng, 90);
    CHECK(metrics::chamfer_l1<double>(p, q) == metrics::chamfer_l1<double>(q, p));
    CHECK(metrics::chamfer_l2<double>(p, q) == metrics::chamfer_l2<double>(q, p));
    Eigen::RowVector3d const t(0.4, -2.0, 1.3);
    PointCloud const pt = p.rowwise() + t, qt = q.rowwise() + t;
    CHECK(std::abs(metrics::chamfer_l1<double>(pt, qt) - metrics::chamfer_l1<double>(p, q)) < 1e-9);
    CHECK(std::abs(metrics::chamfer_l2<double>(pt, qt) - metrics::chamfer_l2<double>(p, q)) < 1e-9);
  }

  TEST_CASE("F-score closed forms")
  {
    Rng rng(8);
    PointCloud const p = oracle::random_cloud(rng, 50);
    CHECK(metrics::f_score<double>(p, p, 0.01) == 1.0);
    PointCloud one(1, 3), other(1, 3);
    one << 0, 0, 0;
    other << 0.1, 0, 0;
    CHECK(metrics::f_score<double>(one, other, 0.01) == 0.0);

    // Half of P is within the threshold of Q, all of Q is within the threshold of P.
    PointCloud a(4, 3), b(2, 3);
    a << 0, 0, 0, 1, 0, 0, 5, 5, 5, -5, -5, -5;
    b << 0.001, 0, 0, 1.001, 0, 0;
    CHECK(metrics::f_score<double>(a, b, 0.01) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(metrics::f_score<double>(a, b, 0.0), std::invalid_argument);
  }

  TEST_CASE("F-score is monotone in the threshold")
  {
    Rng rng(12);
    PointCloud const p = oracle::random_cloud(rng, 80), q = oracle::random_cloud(rng, 70);
    double prev = 0.0;
    for (double t = 0.01; t < 1.0; t += 0.05) {
      double const f = metrics::f_score<double>(p, q, t);
      CHECK(f >= prev);
      prev = f;
    }
  }

  TEST_CASE("empty clouds are rejected")
  {
    PointCloud e(0, 3), p = PointCloud::Zero(1, 3);
    CHECK_THROWS_AS(metrics::chamfer_l1<double>(e, p), std::invalid_argument);
    CHECK_THROWS_AS(metrics::chamfer_l2<double>(p, e), std::invalid_argument);
  }

  TEST_CASE("report JSON round trip")
  {
    metrics::MetricReport r;
    r.cd_l1 = 0.00632;
    r.cd_l2 = 0.0007;
    r.f_score = 0.852;
    r.samples = 3;
    r.per_category["box"] = {0.1, 0.2, 0.3};
    auto const j = metrics::to_json(r);
    CHECK(j.contains("cd_l1"));
    CHECK(j.contains("per_category"));
    auto const back = metrics::report_from_json(j);
    CHECK(back.cd_l1 == r.cd_l1);
    CHECK(back.per_category.at("box").f_score == 0.3);
  }
}
