#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sofsim/geometry.hpp"
#include "sofsim/rng.hpp"

using namespace sofsim;

TEST_CASE("homography identity and scaling") {
  Homography id = Homography::identity();
  Vec2 p = id.apply(Vec2(3.0, -1.5));
  CHECK(p.x() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(p.y() == doctest::Approx(-1.5).epsilon(1e-12));

  Eigen::Matrix3d d = Eigen::Vector3d(2.0, 2.0, 1.0).asDiagonal();
  Homography scale(d);
  Vec2 q = scale.apply(Vec2(1.0, 1.0));
  CHECK(q.x() == doctest::Approx(2.0));
  CHECK(q.y() == doctest::Approx(2.0));
}

TEST_CASE("homography matches direct multiply-and-divide oracle") {
  Rng rng(1234);
  int tested = 0;
  while (tested < 100) {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m(r, c) = rng.uniform(-2.0, 2.0);
    }
    if (std::abs(m.determinant()) < 0.1) continue;
    Homography h(m);
    const Vec2 p(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
    const double w = m(2, 0) * p.x() + m(2, 1) * p.y() + m(2, 2);
    if (std::abs(w) < 0.1) continue;
    const double ox = (m(0, 0) * p.x() + m(0, 1) * p.y() + m(0, 2)) / w;
    const double oy = (m(1, 0) * p.x() + m(1, 1) * p.y() + m(1, 2)) / w;
    const Vec2 got = h.apply(p);
    CHECK(std::abs(got.x() - ox) < 1e-9);
    CHECK(std::abs(got.y() - oy) < 1e-9);
    ++tested;
  }
}

TEST_CASE("homography round trip through inverse") {
  Rng rng(99);
  Eigen::Matrix3d m;
  m << 1.2, 0.1, 3.0, -0.2, 0.9, -1.0, 0.001, 0.002, 1.0;
  Homography h(m);
  Homography hinv = h.inverse();
  for (int i = 0; i < 50; ++i) {
    const Vec2 p(rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0));
    const Vec2 back = hinv.apply(h.apply(p));
    CHECK((back - p).norm() < 1e-9);
  }
}

TEST_CASE("degenerate projection raises") {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, 1, 0, 1, 0, 1;  // invertible, but w = x + 1
  Homography h(m);
  CHECK_THROWS_AS(h.apply(Vec2(-1.0, 2.0)), GeometryError);

  Eigen::Matrix3d singular = Eigen::Matrix3d::Zero();
  CHECK_THROWS_AS(Homography{singular}, GeometryError);
}

TEST_CASE("polygon validation") {
  CHECK_THROWS_AS(ObstaclePolygon({Vec2(0, 0), Vec2(1, 0)}), GeometryError);
  CHECK_THROWS_AS(ObstaclePolygon({Vec2(0, 0), Vec2(0, 0), Vec2(1, 1)}), GeometryError);
}

TEST_CASE("nearest point on unit square") {
  ObstaclePolygon square({Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)});
  const Vec2 top = square.nearest_point(Vec2(0.5, 2.0));
  CHECK(top.x() == doctest::Approx(0.5));
  CHECK(top.y() == doctest::Approx(1.0));
  const Vec2 corner = square.nearest_point(Vec2(2.0, 2.0));
  CHECK(corner.x() == doctest::Approx(1.0));
  CHECK(corner.y() == doctest::Approx(1.0));
}

namespace {
ObstaclePolygon random_star_polygon(Rng& rng, int n) {
  // random radii at sorted angles produce a simple (possibly concave) polygon
  std::vector<double> angles;
  for (int i = 0; i < n; ++i) angles.push_back(rng.uniform(0.0, kTwoPi));
  std::sort(angles.begin(), angles.end());
  std::vector<Vec2> verts;
  for (double a : angles) {
    const double r = rng.uniform(0.5, 3.0);
    verts.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  return ObstaclePolygon(verts);
}
}  // namespace

TEST_CASE("nearest point matches dense boundary sampling") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    ObstaclePolygon poly = random_star_polygon(rng, 5 + static_cast<int>(rng.uniform_int(4)));
    const Vec2 p(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
    const Vec2 got = poly.nearest_point(p);

    double best = std::numeric_limits<double>::infinity();
    const auto& vs = poly.vertices();
    for (std::size_t e = 0; e < vs.size(); ++e) {
      const Vec2 a = vs[e];
      const Vec2 b = vs[(e + 1) % vs.size()];
      for (int s = 0; s <= 10000; ++s) {
        const Vec2 q = a + (b - a) * (s / 10000.0);
        best = std::min(best, (q - p).norm());
      }
    }
    CHECK(std::abs((got - p).norm() - best) < 1e-4);

    for (const Vec2& v : vs) {
      CHECK((got - p).norm() <= (v - p).norm() + 1e-12);
    }
  }
}

TEST_CASE("angle bins: default convention") {
  AngleBinPartition bins(4, -kPi / 4.0);
  CHECK(bins.bin_index(Vec2(1, 0)) == 0);
  CHECK(bins.bin_index(Vec2(0, 1)) == 1);
  CHECK(bins.bin_index(Vec2(-1, 0)) == 2);
  CHECK(bins.bin_index(Vec2(0, -1)) == 3);
  CHECK_THROWS_AS(bins.bin_index(Vec2(0, 0)), GeometryError);

  AngleBinPartition def(4);
  CHECK(def.origin() == doctest::Approx(-kPi / 4.0));
}

TEST_CASE("angle bins: rotation by 2*pi/m advances the index") {
  Rng rng(7);
  for (int m : {1, 3, 4, 5, 8}) {
    AngleBinPartition bins(m, -kPi / m);
    const double delta = kTwoPi / m;
    for (int i = 0; i < 20000; ++i) {
      const double a = rng.uniform(0.0, kTwoPi);
      const double r = rng.uniform(0.1, 10.0);
      const Vec2 v(r * std::cos(a), r * std::sin(a));
      const int b = bins.bin_index(v);
      CHECK(b >= 0);
      CHECK(b < m);
      const Vec2 w(r * std::cos(a + delta), r * std::sin(a + delta));
      CHECK(bins.bin_index(w) == (b + 1) % m);
    }
  }
}

TEST_CASE("homography and obstacle file round trips") {
  std::stringstream hs("1 0 0  0 1 0  0 0 1");
  Homography h = read_homography(hs);
  CHECK((h.matrix() - Eigen::Matrix3d::Identity()).norm() == 0.0);

  std::stringstream short_file("1 2 3");
  CHECK_THROWS_AS(read_homography(short_file), DataError);

  std::vector<ObstaclePolygon> polys;
  polys.push_back(ObstaclePolygon({Vec2(0, 0), Vec2(1.5, 0), Vec2(0.25, 2.125)}));
  polys.push_back(ObstaclePolygon({Vec2(-1, -1), Vec2(1, -1), Vec2(1, 1), Vec2(-1, 1)}));
  std::stringstream out;
  write_obstacles(out, polys);
  std::vector<ObstaclePolygon> in = read_obstacles(out);
  REQUIRE(in.size() == 2);
  for (std::size_t i = 0; i < polys.size(); ++i) {
    REQUIRE(in[i].size() == polys[i].size());
    for (std::size_t j = 0; j < polys[i].size(); ++j) {
      CHECK(in[i].vertices()[j] == polys[i].vertices()[j]);
    }
  }

  std::stringstream odd("1,2 3");
  CHECK_THROWS_AS(read_obstacles(odd), DataError);
}
