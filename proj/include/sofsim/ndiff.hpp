#pragma once

#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sofsim/common.hpp"
#include "sofsim/rng.hpp"

namespace sofsim::ndiff {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Value {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& mat() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return mat().rows(); }
  Eigen::Index cols() const { return mat().cols(); }
  double scalar() const;  // requires 1x1
};

// Reverse-mode tape. A tape is confined to one thread; nodes are created in
// topological order by construction, so backward() is a reverse sweep that
// only visits nodes actually reached by the gradient.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value leaf(Mat value);
  Value make(Mat value, std::function<void(Tape&, const Mat&)> backprop);

  // Seeds d(loss)/d(loss) = 1 and sweeps. Throws ShapeError unless loss is 1x1.
  void backward(Value loss);

  const Mat& value_of(Value v) const { return nodes_[v.id].value; }
  const Mat& grad_of(Value v);  // zero-filled if the sweep never reached v
  void accum_grad(Value v, const Mat& g);

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool touched = false;
    std::function<void(Tape&, const Mat&)> backprop;
  };
  std::vector<Node> nodes_;
};

// ---- forward ops ------------------------------------------------------
Value matmul(Value a, Value b);
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value scale(Value a, double c);
Value add_const(Value a, double c);
Value relu(Value a);
Value sigmoid(Value a);
Value tanh_op(Value a);
Value exp_op(Value a);
Value log_op(Value a);  // input clamped below at 1e-12
Value hadamard(Value a, Value b);
Value square(Value a);
Value concat_cols(std::span<const Value> parts);
Value concat_cols(Value a, Value b);
Value concat_rows(std::span<const Value> parts);
Value slice_cols(Value a, Eigen::Index start, Eigen::Index n);
Value slice_rows(Value a, Eigen::Index start, Eigen::Index n);
Value sum_all(Value a);
Value mean_all(Value a);
Value l2_norm(Value a);   // Frobenius norm, 1x1
Value rownorm(Value a);   // per-row Euclidean norm, (n x 1)
// x (B x d_in) * W^T (d_out x d_in) + bias (1 x d_out), broadcast over rows.
Value linear(Value x, Value w, Value b);
// Minimum over 1x1 values; gradient routed to the (lowest-index) argmin.
Value vmin(std::span<const Value> scalars, int* argmin = nullptr);

// Batch normalization over the batch (row) dimension, per feature (column).
// Training mode normalizes by batch statistics and, when update_running is
// set, folds them into the running accumulators with the given momentum
// (unbiased variance, matching common deep learning convention). Eval mode is
// a pure function of the running statistics.
Value batchnorm_train(Value x, Value gamma, Value beta, Mat* running_mean,
                      Mat* running_var, double momentum = 0.1,
                      bool update_running = true);
Value batchnorm_eval(Value x, Value gamma, Value beta, const Mat& running_mean,
                     const Mat& running_var);

// z = mu + exp(log_sigma) .* epsilon; epsilon is a constant (no gradient).
Value reparameterize(Value mu, Value log_sigma, const Mat& epsilon);

Mat glorot_uniform(int rows, int cols, Rng& rng);

// ---- LSTM cell ---------------------------------------------------------
struct LstmCellParams {
  Mat Wi, Wf, Wg, Wo;  // each (d_h x (d_in + d_h))
  Mat bi, bf, bg, bo;  // each (1 x d_h)

  static LstmCellParams init(int d_in, int d_h, Rng& rng);
  int hidden() const { return static_cast<int>(Wi.rows()); }
  int input() const { return static_cast<int>(Wi.cols() - Wi.rows()); }
};

struct LstmCellValues {
  Value Wi, Wf, Wg, Wo, bi, bf, bg, bo;
};

// Standard gate equations; differentiable end-to-end through the tape ops.
std::pair<Value, Value> lstm_step(const LstmCellValues& p, Value x, Value h, Value c);

// ---- parameters, checkpointing, Adam -----------------------------------
class ParamStore {
 public:
  Mat& add(const std::string& name, Mat init);
  Mat& add_buffer(const std::string& name, Mat init);
  Mat& get(const std::string& name);
  const Mat& get(const std::string& name) const;
  bool has(const std::string& name) const;
  bool is_buffer(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }  // insertion order

  void load_from(const std::vector<std::pair<std::string, Mat>>& records);

 private:
  std::vector<std::string> names_;
  std::map<std::string, Mat> values_;
  std::set<std::string> buffers_;
};

// Flat binary checkpoint: magic "SOFG", format version u32, then one record
// per parameter: name length u32, name bytes, shape rank u32, dims u32s,
// little-endian f64 payload (row-major).
void save_checkpoint(const std::string& path, const ParamStore& params);
std::vector<std::pair<std::string, Mat>> load_checkpoint(const std::string& path);

struct AdamState {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step_count = 0;
  std::map<std::string, Mat> m, v;

  // Bias-corrected update of every named parameter with a gradient entry.
  void step(ParamStore& params, const std::map<std::string, Mat>& grads);
};

// Binds parameters into a tape and collects their gradients back by name.
class ParamBinder {
 public:
  ParamBinder(Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {}

  Value operator()(const std::string& name);
  LstmCellValues lstm(const std::string& prefix);

  // Gradients of every bound parameter, after Tape::backward.
  std::map<std::string, Mat> grads() const;

 private:
  Tape* tape_;
  ParamStore* store_;
  std::vector<std::pair<std::string, Value>> bound_;
};

}  // namespace sofsim::ndiff
