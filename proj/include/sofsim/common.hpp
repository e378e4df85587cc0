#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace sofsim {

using Vec2 = Eigen::Vector2d;
using Mat = Eigen::MatrixXd;

// Raised for malformed or inconsistent input data (files, records, windows).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised for invalid geometry (degenerate projections, bad polygons, zero vectors).
class GeometryError : public std::runtime_error {
 public:
  explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised on tensor shape disagreements; message names both shapes.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised for runtime failures (non-finite losses, missing checkpoints, ...).
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Dataset cadence: annotations are sampled every 0.4 s.
constexpr double kFrameDt = 0.4;
constexpr int kObsSteps = 8;
constexpr int kPredSteps = 12;
constexpr int kWindowSteps = kObsSteps + kPredSteps;

}  // namespace sofsim
