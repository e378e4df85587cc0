#pragma once

#include <iosfwd>
#include <vector>

#include "sofsim/common.hpp"

namespace sofsim {

// Pixel -> world (meters) projective transform.
class Homography {
 public:
  explicit Homography(const Eigen::Matrix3d& h);
  static Homography identity();

  const Eigen::Matrix3d& matrix() const { return h_; }
  Homography inverse() const;

  // (x/w, y/w) with (x,y,w) = H (px,py,1). Throws GeometryError when |w| < 1e-12.
  Vec2 apply(const Vec2& pixel) const;

 private:
  Eigen::Matrix3d h_;
};

// Closed ring of world-space vertices, >= 3, consecutive vertices distinct.
class ObstaclePolygon {
 public:
  explicit ObstaclePolygon(std::vector<Vec2> vertices);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }

  // Boundary point minimizing distance to p. Exact per-edge segment
  // projection; ties broken by lowest edge index.
  Vec2 nearest_point(const Vec2& p) const;

  ObstaclePolygon transformed(const Homography& h) const;

 private:
  std::vector<Vec2> vertices_;
};

// m half-open arcs [origin + 2*pi*i/m, origin + 2*pi*(i+1)/m) covering the circle.
class AngleBinPartition {
 public:
  explicit AngleBinPartition(int m);
  AngleBinPartition(int m, double origin_angle);

  int bins() const { return m_; }
  double origin() const { return origin_; }

  // Bin containing atan2(v). Throws GeometryError for |v| ~ 0.
  int bin_index(const Vec2& v) const;

 private:
  int m_;
  double origin_;
};

// File formats: homography is a plain-text row-major 3x3 matrix; obstacle
// files hold one polygon per line as comma-separated x,y pairs.
Homography read_homography(std::istream& in);
Homography read_homography_file(const std::string& path);
std::vector<ObstaclePolygon> read_obstacles(std::istream& in);
std::vector<ObstaclePolygon> read_obstacles_file(const std::string& path);
void write_obstacles(std::ostream& out, const std::vector<ObstaclePolygon>& polys);

}  // namespace sofsim
