#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sofsim/ndiff.hpp"
#include "sofsim/rng.hpp"

namespace sofsim::testing {

inline Mat random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = -1.0,
                      double hi = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

// Builds the loss from fresh leaves of `params` on a fresh tape.
using LossBuilder =
    std::function<ndiff::Value(ndiff::Tape&, std::vector<ndiff::Value>&)>;

// Max relative error between tape gradients and central finite differences.
inline double gradcheck(std::vector<Mat> params, const LossBuilder& build,
                        double h = 1e-5) {
  auto eval = [&](const std::vector<Mat>& ps) {
    ndiff::Tape tape;
    std::vector<ndiff::Value> leaves;
    leaves.reserve(ps.size());
    for (const Mat& p : ps) leaves.push_back(tape.leaf(p));
    return build(tape, leaves).scalar();
  };

  ndiff::Tape tape;
  std::vector<ndiff::Value> leaves;
  for (const Mat& p : params) leaves.push_back(tape.leaf(p));
  ndiff::Value loss = build(tape, leaves);
  tape.backward(loss);
  std::vector<Mat> analytic;
  analytic.reserve(leaves.size());
  for (auto& leaf : leaves) analytic.push_back(leaf.grad());

  double max_rel = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < params[k].cols(); ++j) {
        std::vector<Mat> plus = params, minus = params;
        plus[k](i, j) += h;
        minus[k](i, j) -= h;
        const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
        const double a = analytic[k](i, j);
        const double rel =
            std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1.0});
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  return max_rel;
}

}  // namespace sofsim::testing
