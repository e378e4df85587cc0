#include "sofsim/geometry.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sofsim {

Homography::Homography(const Eigen::Matrix3d& h) : h_(h) {
  if (std::abs(h.determinant()) <= 1e-12) {
    throw GeometryError("homography is singular (|det| <= 1e-12)");
  }
}

Homography Homography::identity() { return Homography(Eigen::Matrix3d::Identity()); }

Homography Homography::inverse() const { return Homography(h_.inverse().eval()); }

Vec2 Homography::apply(const Vec2& pixel) const {
  const Eigen::Vector3d q = h_ * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0);
  if (std::abs(q.z()) < 1e-12) {
    throw GeometryError("degenerate projection: |w| < 1e-12");
  }
  return Vec2(q.x() / q.z(), q.y() / q.z());
}

ObstaclePolygon::ObstaclePolygon(std::vector<Vec2> vertices)
    : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) {
    throw GeometryError("polygon needs >= 3 vertices, got " +
                        std::to_string(vertices_.size()));
  }
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[(i + 1) % vertices_.size()];
    if ((a - b).norm() <= 1e-9) {
      throw GeometryError("polygon has coincident consecutive vertices at index " +
                          std::to_string(i));
    }
  }
}

namespace {
Vec2 project_on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return a + t * ab;
}
}  // namespace

Vec2 ObstaclePolygon::nearest_point(const Vec2& p) const {
  Vec2 best = vertices_[0];
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Vec2& a = vertices_[i];
    const Vec2& b = vertices_[(i + 1) % vertices_.size()];
    const Vec2 q = project_on_segment(a, b, p);
    const double d2 = (q - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = q;
    }
  }
  return best;
}

ObstaclePolygon ObstaclePolygon::transformed(const Homography& h) const {
  std::vector<Vec2> out;
  out.reserve(vertices_.size());
  for (const Vec2& v : vertices_) out.push_back(h.apply(v));
  return ObstaclePolygon(std::move(out));
}

AngleBinPartition::AngleBinPartition(int m)
    : AngleBinPartition(m, m >= 1 ? -kPi / m : 0.0) {}

AngleBinPartition::AngleBinPartition(int m, double origin_angle)
    : m_(m), origin_(origin_angle) {
  if (m < 1) throw GeometryError("angle bin count must be >= 1, got " + std::to_string(m));
}

int AngleBinPartition::bin_index(const Vec2& v) const {
  if (v.norm() <= 1e-300) throw GeometryError("bin_index of zero vector");
  double a = std::atan2(v.y(), v.x()) - origin_;
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  int i = static_cast<int>(a / (kTwoPi / m_));
  if (i >= m_) i = 0;  // a == 2*pi after rounding wraps to bin 0
  return i;
}

Homography read_homography(std::istream& in) {
  Eigen::Matrix3d h;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (!(in >> h(r, c))) {
        throw DataError("homography file: expected 9 numbers (row-major 3x3)");
      }
    }
  }
  return Homography(h);
}

Homography read_homography_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open homography file: " + path);
  return read_homography(in);
}

std::vector<ObstaclePolygon> read_obstacles(std::istream& in) {
  std::vector<ObstaclePolygon> polys;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (char& ch : line) {
      if (ch == ',' || ch == ';') ch = ' ';
    }
    std::istringstream ls(line);
    std::vector<double> nums;
    double x;
    while (ls >> x) nums.push_back(x);
    if (nums.empty()) continue;
    if (nums.size() % 2 != 0) {
      throw DataError("obstacle file line " + std::to_string(line_no) +
                      ": odd number of coordinates");
    }
    std::vector<Vec2> verts;
    verts.reserve(nums.size() / 2);
    for (std::size_t i = 0; i + 1 < nums.size(); i += 2) {
      verts.emplace_back(nums[i], nums[i + 1]);
    }
    try {
      polys.emplace_back(std::move(verts));
    } catch (const GeometryError& e) {
      throw DataError("obstacle file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return polys;
}

std::vector<ObstaclePolygon> read_obstacles_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open obstacle file: " + path);
  return read_obstacles(in);
}

void write_obstacles(std::ostream& out, const std::vector<ObstaclePolygon>& polys) {
  out << std::setprecision(17);
  for (const auto& poly : polys) {
    bool first = true;
    for (const Vec2& v : poly.vertices()) {
      if (!first) out << ' ';
      out << v.x() << ',' << v.y();
      first = false;
    }
    out << '\n';
  }
}

}  // namespace sofsim
