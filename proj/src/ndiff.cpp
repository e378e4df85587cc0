#include "sofsim/ndiff.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>

namespace sofsim::ndiff {

namespace {
constexpr double kLogClamp = 1e-12;
constexpr double kBnEps = 1e-5;
constexpr double kNormEps = 1e-12;

void check_same_tape(Value a, Value b) {
  if (a.tape != b.tape) throw ShapeError("operands live on different tapes");
}

void check_same_shape(const char* op, const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                     shape_str(b));
  }
}
}  // namespace

const Mat& Value::mat() const { return tape->value_of(*this); }
const Mat& Value::grad() const { return tape->grad_of(*this); }

double Value::scalar() const {
  const Mat& m = mat();
  if (m.rows() != 1 || m.cols() != 1) {
    throw ShapeError("scalar() on non-scalar value " + shape_str(m));
  }
  return m(0, 0);
}

Value Tape::leaf(Mat value) {
  nodes_.push_back({std::move(value), Mat(), false, nullptr});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Value Tape::make(Mat value, std::function<void(Tape&, const Mat&)> backprop) {
  nodes_.push_back({std::move(value), Mat(), false, std::move(backprop)});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::accum_grad(Value v, const Mat& g) {
  Node& n = nodes_[v.id];
  if (!n.touched) {
    n.grad = g;
    n.touched = true;
  } else {
    n.grad += g;
  }
}

const Mat& Tape::grad_of(Value v) {
  Node& n = nodes_[v.id];
  if (!n.touched && n.grad.size() == 0) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::backward(Value loss) {
  if (loss.tape != this) throw ShapeError("loss lives on a different tape");
  const Mat& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + shape_str(lv));
  }
  accum_grad(loss, Mat::Ones(1, 1));
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.touched && n.backprop) n.backprop(*this, n.grad);
  }
}

void Tape::clear() { nodes_.clear(); }

// ---- ops ---------------------------------------------------------------

Value matmul(Value a, Value b) {
  check_same_tape(a, b);
  const Mat& av = a.mat();
  const Mat& bv = b.mat();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: " + shape_str(av) + " x " + shape_str(bv));
  }
  return a.tape->make(av * bv, [a, b](Tape& t, const Mat& gy) {
    t.accum_grad(a, gy * t.value_of(b).transpose());
    t.accum_grad(b, t.value_of(a).transpose() * gy);
  });
}

Value add(Value a, Value b) {
  check_same_tape(a, b);
  check_same_shape("add", a.mat(), b.mat());
  return a.tape->make(a.mat() + b.mat(), [a, b](Tape& t, const Mat& gy) {
    t.accum_grad(a, gy);
    t.accum_grad(b, gy);
  });
}

Value sub(Value a, Value b) {
  check_same_tape(a, b);
  check_same_shape("sub", a.mat(), b.mat());
  return a.tape->make(a.mat() - b.mat(), [a, b](Tape& t, const Mat& gy) {
    t.accum_grad(a, gy);
    t.accum_grad(b, -gy);
  });
}

Value scale(Value a, double c) {
  return a.tape->make(c * a.mat(), [a, c](Tape& t, const Mat& gy) {
    t.accum_grad(a, c * gy);
  });
}

Value add_const(Value a, double c) {
  return a.tape->make(a.mat().array() + c, [a](Tape& t, const Mat& gy) {
    t.accum_grad(a, gy);
  });
}

Value relu(Value a) {
  Mat y = a.mat().cwiseMax(0.0);
  return a.tape->make(std::move(y), [a](Tape& t, const Mat& gy) {
    const Mat mask = (t.value_of(a).array() > 0.0).cast<double>();
    t.accum_grad(a, gy.cwiseProduct(mask));
  });
}

Value sigmoid(Value a) {
  auto stable = [](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  };
  auto y = std::make_shared<Mat>(a.mat().unaryExpr(stable));
  Mat out = *y;
  return a.tape->make(std::move(out), [a, y](Tape& t, const Mat& gy) {
    const Mat dydx = y->array() * (1.0 - y->array());
    t.accum_grad(a, gy.cwiseProduct(dydx));
  });
}

Value tanh_op(Value a) {
  auto y = std::make_shared<Mat>(a.mat().array().tanh().matrix());
  Mat out = *y;
  return a.tape->make(std::move(out), [a, y](Tape& t, const Mat& gy) {
    t.accum_grad(a, gy.cwiseProduct((1.0 - y->array().square()).matrix()));
  });
}

Value exp_op(Value a) {
  auto y = std::make_shared<Mat>(a.mat().array().exp().matrix());
  Mat out = *y;
  return a.tape->make(std::move(out), [a, y](Tape& t, const Mat& gy) {
    t.accum_grad(a, gy.cwiseProduct(*y));
  });
}

Value log_op(Value a) {
  Mat y = a.mat().array().max(kLogClamp).log();
  return a.tape->make(std::move(y), [a](Tape& t, const Mat& gy) {
    const auto& av = t.value_of(a).array();
    const Mat inv = (av > kLogClamp).cast<double>() / av.max(kLogClamp);
    t.accum_grad(a, gy.cwiseProduct(inv));
  });
}

Value hadamard(Value a, Value b) {
  check_same_tape(a, b);
  check_same_shape("hadamard", a.mat(), b.mat());
  return a.tape->make(a.mat().cwiseProduct(b.mat()), [a, b](Tape& t, const Mat& gy) {
    t.accum_grad(a, gy.cwiseProduct(t.value_of(b)));
    t.accum_grad(b, gy.cwiseProduct(t.value_of(a)));
  });
}

Value square(Value a) {
  return a.tape->make(a.mat().array().square(), [a](Tape& t, const Mat& gy) {
    t.accum_grad(a, 2.0 * gy.cwiseProduct(t.value_of(a)));
  });
}

Value concat_cols(std::span<const Value> parts) {
  if (parts.empty()) throw ShapeError("concat_cols of zero parts");
  Tape* tape = parts[0].tape;
  Eigen::Index rows = parts[0].rows(), cols = 0;
  for (const Value& p : parts) {
    check_same_tape(parts[0], p);
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].mat()) +
                       " vs " + shape_str(p.mat()));
    }
    cols += p.cols();
  }
  Mat y(rows, cols);
  Eigen::Index off = 0;
  for (const Value& p : parts) {
    y.middleCols(off, p.cols()) = p.mat();
    off += p.cols();
  }
  std::vector<Value> ps(parts.begin(), parts.end());
  return tape->make(std::move(y), [ps](Tape& t, const Mat& gy) {
    Eigen::Index o = 0;
    for (const Value& p : ps) {
      const Eigen::Index n = t.value_of(p).cols();
      t.accum_grad(p, gy.middleCols(o, n));
      o += n;
    }
  });
}

Value concat_cols(Value a, Value b) {
  const Value parts[] = {a, b};
  return concat_cols(std::span<const Value>(parts, 2));
}

Value concat_rows(std::span<const Value> parts) {
  if (parts.empty()) throw ShapeError("concat_rows of zero parts");
  Tape* tape = parts[0].tape;
  Eigen::Index cols = parts[0].cols(), rows = 0;
  for (const Value& p : parts) {
    check_same_tape(parts[0], p);
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " + shape_str(parts[0].mat()) +
                       " vs " + shape_str(p.mat()));
    }
    rows += p.rows();
  }
  Mat y(rows, cols);
  Eigen::Index off = 0;
  for (const Value& p : parts) {
    y.middleRows(off, p.rows()) = p.mat();
    off += p.rows();
  }
  std::vector<Value> ps(parts.begin(), parts.end());
  return tape->make(std::move(y), [ps](Tape& t, const Mat& gy) {
    Eigen::Index o = 0;
    for (const Value& p : ps) {
      const Eigen::Index n = t.value_of(p).rows();
      t.accum_grad(p, gy.middleRows(o, n));
      o += n;
    }
  });
}

Value slice_cols(Value a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(start) + ", " +
                     std::to_string(start + n) + ") of " + shape_str(a.mat()));
  }
  return a.tape->make(a.mat().middleCols(start, n), [a, start, n](Tape& t, const Mat& gy) {
    Mat g = Mat::Zero(t.value_of(a).rows(), t.value_of(a).cols());
    g.middleCols(start, n) = gy;
    t.accum_grad(a, g);
  });
}

Value slice_rows(Value a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(start) + ", " +
                     std::to_string(start + n) + ") of " + shape_str(a.mat()));
  }
  return a.tape->make(a.mat().middleRows(start, n), [a, start, n](Tape& t, const Mat& gy) {
    Mat g = Mat::Zero(t.value_of(a).rows(), t.value_of(a).cols());
    g.middleRows(start, n) = gy;
    t.accum_grad(a, g);
  });
}

Value sum_all(Value a) {
  Mat y(1, 1);
  y(0, 0) = a.mat().sum();
  return a.tape->make(std::move(y), [a](Tape& t, const Mat& gy) {
    t.accum_grad(a, Mat::Constant(t.value_of(a).rows(), t.value_of(a).cols(), gy(0, 0)));
  });
}

Value mean_all(Value a) {
  const double n = static_cast<double>(a.mat().size());
  Mat y(1, 1);
  y(0, 0) = a.mat().sum() / n;
  return a.tape->make(std::move(y), [a, n](Tape& t, const Mat& gy) {
    t.accum_grad(a,
                 Mat::Constant(t.value_of(a).rows(), t.value_of(a).cols(), gy(0, 0) / n));
  });
}

Value l2_norm(Value a) {
  Mat y(1, 1);
  y(0, 0) = a.mat().norm();
  return a.tape->make(std::move(y), [a](Tape& t, const Mat& gy) {
    const Mat& av = t.value_of(a);
    const double norm = std::max(av.norm(), kNormEps);
    t.accum_grad(a, (gy(0, 0) / norm) * av);
  });
}

Value rownorm(Value a) {
  Mat y = a.mat().rowwise().norm();
  return a.tape->make(std::move(y), [a](Tape& t, const Mat& gy) {
    const Mat& av = t.value_of(a);
    Mat g(av.rows(), av.cols());
    for (Eigen::Index r = 0; r < av.rows(); ++r) {
      const double norm = std::max(av.row(r).norm(), kNormEps);
      g.row(r) = (gy(r, 0) / norm) * av.row(r);
    }
    t.accum_grad(a, g);
  });
}

Value linear(Value x, Value w, Value b) {
  check_same_tape(x, w);
  check_same_tape(x, b);
  const Mat& xv = x.mat();
  const Mat& wv = w.mat();
  const Mat& bv = b.mat();
  if (xv.cols() != wv.cols()) {
    throw ShapeError("linear: input " + shape_str(xv) + " vs weight " + shape_str(wv));
  }
  if (bv.rows() != 1 || bv.cols() != wv.rows()) {
    throw ShapeError("linear: bias " + shape_str(bv) + " vs weight " + shape_str(wv));
  }
  Mat y = (xv * wv.transpose()).rowwise() + bv.row(0);
  return x.tape->make(std::move(y), [x, w, b](Tape& t, const Mat& gy) {
    t.accum_grad(x, gy * t.value_of(w));
    t.accum_grad(w, gy.transpose() * t.value_of(x));
    t.accum_grad(b, gy.colwise().sum());
  });
}

Value vmin(std::span<const Value> scalars, int* argmin) {
  if (scalars.empty()) throw ShapeError("vmin of zero values");
  int best = 0;
  double bestv = scalars[0].scalar();
  for (int i = 1; i < static_cast<int>(scalars.size()); ++i) {
    const double v = scalars[i].scalar();
    if (v < bestv) {
      bestv = v;
      best = i;
    }
  }
  if (argmin) *argmin = best;
  Value chosen = scalars[best];
  Mat y(1, 1);
  y(0, 0) = bestv;
  return chosen.tape->make(std::move(y), [chosen](Tape& t, const Mat& gy) {
    t.accum_grad(chosen, gy);
  });
}

Value batchnorm_train(Value x, Value gamma, Value beta, Mat* running_mean,
                      Mat* running_var, double momentum, bool update_running) {
  check_same_tape(x, gamma);
  check_same_tape(x, beta);
  const Mat& xv = x.mat();
  const Eigen::Index B = xv.rows(), F = xv.cols();
  if (gamma.mat().rows() != 1 || gamma.mat().cols() != F ||
      beta.mat().rows() != 1 || beta.mat().cols() != F) {
    throw ShapeError("batchnorm: gamma " + shape_str(gamma.mat()) + ", beta " +
                     shape_str(beta.mat()) + " vs input " + shape_str(xv));
  }
  const Eigen::RowVectorXd mu = xv.colwise().mean();
  Mat xc = xv.rowwise() - mu;
  const Eigen::RowVectorXd var = xc.array().square().colwise().mean();
  const Eigen::RowVectorXd invstd = (var.array() + kBnEps).rsqrt();
  Mat xhat = xc.array().rowwise() * invstd.array();
  Mat y = (xhat.array().rowwise() * gamma.mat().row(0).array()).rowwise() +
          beta.mat().row(0).array();

  if (update_running && running_mean && running_var) {
    const double unbias = B > 1 ? static_cast<double>(B) / (B - 1) : 1.0;
    running_mean->row(0) = (1.0 - momentum) * running_mean->row(0) + momentum * mu;
    running_var->row(0) =
        (1.0 - momentum) * running_var->row(0) + momentum * (unbias * var);
  }

  auto xhat_s = std::make_shared<Mat>(std::move(xhat));
  auto invstd_s = std::make_shared<Eigen::RowVectorXd>(invstd);
  return x.tape->make(
      std::move(y), [x, gamma, beta, xhat_s, invstd_s, B](Tape& t, const Mat& gy) {
        const Mat& xh = *xhat_s;
        const auto& istd = *invstd_s;
        const Eigen::RowVectorXd g = t.value_of(gamma).row(0);
        t.accum_grad(gamma, gy.cwiseProduct(xh).colwise().sum());
        t.accum_grad(beta, gy.colwise().sum());
        // dxhat = gy * gamma (broadcast)
        Mat dxhat = gy.array().rowwise() * g.array();
        const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
        const Eigen::RowVectorXd sum_dxhat_xhat =
            dxhat.cwiseProduct(xh).colwise().sum();
        // dx = (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat)) * invstd
        Mat dx = dxhat;
        dx.array().rowwise() -= sum_dxhat.array() / static_cast<double>(B);
        dx -= (xh.array().rowwise() * (sum_dxhat_xhat.array() / static_cast<double>(B)))
                  .matrix();
        dx.array().rowwise() *= istd.array();
        t.accum_grad(x, dx);
      });
}

Value batchnorm_eval(Value x, Value gamma, Value beta, const Mat& running_mean,
                     const Mat& running_var) {
  const Mat& xv = x.mat();
  const Eigen::Index F = xv.cols();
  if (running_mean.cols() != F || running_var.cols() != F) {
    throw ShapeError("batchnorm_eval: running stats " + shape_str(running_mean) +
                     " vs input " + shape_str(xv));
  }
  const Eigen::RowVectorXd invstd = (running_var.row(0).array() + kBnEps).rsqrt();
  const Eigen::RowVectorXd rm = running_mean.row(0);
  Mat xhat = (xv.rowwise() - rm).array().rowwise() * invstd.array();
  Mat y = (xhat.array().rowwise() * gamma.mat().row(0).array()).rowwise() +
          beta.mat().row(0).array();
  auto xhat_s = std::make_shared<Mat>(std::move(xhat));
  auto invstd_s = std::make_shared<Eigen::RowVectorXd>(invstd);
  return x.tape->make(std::move(y),
                      [x, gamma, beta, xhat_s, invstd_s](Tape& t, const Mat& gy) {
                        t.accum_grad(gamma, gy.cwiseProduct(*xhat_s).colwise().sum());
                        t.accum_grad(beta, gy.colwise().sum());
                        Mat dx = gy.array().rowwise() *
                                 (t.value_of(gamma).row(0).array() * invstd_s->array());
                        t.accum_grad(x, dx);
                      });
}

Value reparameterize(Value mu, Value log_sigma, const Mat& epsilon) {
  check_same_tape(mu, log_sigma);
  check_same_shape("reparameterize", mu.mat(), log_sigma.mat());
  check_same_shape("reparameterize(epsilon)", mu.mat(), epsilon);
  Value eps = mu.tape->leaf(epsilon);
  return add(mu, hadamard(exp_op(log_sigma), eps));
}

// ---- LSTM ---------------------------------------------------------------

Mat glorot_uniform(int rows, int cols, Rng& rng) {
  const double lim = std::sqrt(6.0 / (rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-lim, lim);
  }
  return m;
}

LstmCellParams LstmCellParams::init(int d_in, int d_h, Rng& rng) {
  auto glorot = [&](int rows, int cols) { return glorot_uniform(rows, cols, rng); };
  LstmCellParams p;
  p.Wi = glorot(d_h, d_in + d_h);
  p.Wf = glorot(d_h, d_in + d_h);
  p.Wg = glorot(d_h, d_in + d_h);
  p.Wo = glorot(d_h, d_in + d_h);
  p.bi = Mat::Zero(1, d_h);
  p.bf = Mat::Ones(1, d_h);  // forget bias at 1 helps early gradient flow
  p.bg = Mat::Zero(1, d_h);
  p.bo = Mat::Zero(1, d_h);
  return p;
}

std::pair<Value, Value> lstm_step(const LstmCellValues& p, Value x, Value h, Value c) {
  Value xh = concat_cols(x, h);
  Value i = sigmoid(linear(xh, p.Wi, p.bi));
  Value f = sigmoid(linear(xh, p.Wf, p.bf));
  Value g = tanh_op(linear(xh, p.Wg, p.bg));
  Value o = sigmoid(linear(xh, p.Wo, p.bo));
  Value c_next = add(hadamard(f, c), hadamard(i, g));
  Value h_next = hadamard(o, tanh_op(c_next));
  return {h_next, c_next};
}

// ---- parameter store ------------------------------------------------------

Mat& ParamStore::add(const std::string& name, Mat init) {
  if (values_.count(name)) throw RuntimeFailure("duplicate parameter: " + name);
  names_.push_back(name);
  return values_[name] = std::move(init);
}

Mat& ParamStore::add_buffer(const std::string& name, Mat init) {
  Mat& m = add(name, std::move(init));
  buffers_.insert(name);
  return m;
}

Mat& ParamStore::get(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw RuntimeFailure("unknown parameter: " + name);
  return it->second;
}

const Mat& ParamStore::get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw RuntimeFailure("unknown parameter: " + name);
  return it->second;
}

bool ParamStore::has(const std::string& name) const { return values_.count(name) > 0; }

bool ParamStore::is_buffer(const std::string& name) const {
  return buffers_.count(name) > 0;
}

void ParamStore::load_from(const std::vector<std::pair<std::string, Mat>>& records) {
  std::map<std::string, const Mat*> by_name;
  for (const auto& [name, mat] : records) by_name[name] = &mat;
  for (const std::string& name : names_) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw RuntimeFailure("checkpoint missing parameter: " + name);
    Mat& dst = values_[name];
    if (it->second->rows() != dst.rows() || it->second->cols() != dst.cols()) {
      throw ShapeError("checkpoint parameter " + name + ": " + shape_str(*it->second) +
                       " vs expected " + shape_str(dst));
    }
    dst = *it->second;
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw RuntimeFailure("checkpoint has unknown parameter: " + by_name.begin()->first);
  }
}

// ---- checkpoint io --------------------------------------------------------

namespace {
void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("checkpoint: truncated u32");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw DataError("checkpoint: truncated f64");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write checkpoint: " + path);
  out.write("SOFG", 4);
  put_u32(out, 1);  // format version
  for (const std::string& name : params.names()) {
    const Mat& m = params.get(name);
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
    }
  }
  if (!out) throw RuntimeFailure("write error on checkpoint: " + path);
}

std::vector<std::pair<std::string, Mat>> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SOFG", 4) != 0) {
    throw DataError("checkpoint " + path + ": bad magic");
  }
  const std::uint32_t version = get_u32(in);
  if (version != 1) {
    throw DataError("checkpoint " + path + ": unsupported version " +
                    std::to_string(version));
  }
  std::vector<std::pair<std::string, Mat>> records;
  while (true) {
    in.peek();
    if (in.eof()) break;
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw DataError("checkpoint: truncated name");
    const std::uint32_t rank = get_u32(in);
    if (rank != 2) throw DataError("checkpoint: unsupported rank " + std::to_string(rank));
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    Mat m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = get_f64(in);
    }
    records.emplace_back(std::move(name), std::move(m));
  }
  return records;
}

// ---- Adam -----------------------------------------------------------------

void AdamState::step(ParamStore& params, const std::map<std::string, Mat>& grads) {
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (const auto& [name, g] : grads) {
    Mat& p = params.get(name);
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw ShapeError("adam: gradient " + shape_str(g) + " vs parameter " + name + " " +
                       shape_str(p));
    }
    auto mit = m.find(name);
    if (mit == m.end()) {
      m[name] = Mat::Zero(p.rows(), p.cols());
      v[name] = Mat::Zero(p.rows(), p.cols());
    }
    Mat& m1 = m[name];
    Mat& m2 = v[name];
    m1 = beta1 * m1 + (1.0 - beta1) * g;
    m2 = beta2 * m2 + (1.0 - beta2) * g.cwiseProduct(g);
    const Mat mhat = m1 / bc1;
    const Mat vhat = m2 / bc2;
    p -= lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps).matrix());
  }
}

// ---- binder ----------------------------------------------------------------

Value ParamBinder::operator()(const std::string& name) {
  Value v = tape_->leaf(store_->get(name));
  bound_.emplace_back(name, v);
  return v;
}

LstmCellValues ParamBinder::lstm(const std::string& prefix) {
  LstmCellValues v;
  v.Wi = (*this)(prefix + ".Wi");
  v.Wf = (*this)(prefix + ".Wf");
  v.Wg = (*this)(prefix + ".Wg");
  v.Wo = (*this)(prefix + ".Wo");
  v.bi = (*this)(prefix + ".bi");
  v.bf = (*this)(prefix + ".bf");
  v.bg = (*this)(prefix + ".bg");
  v.bo = (*this)(prefix + ".bo");
  return v;
}

std::map<std::string, Mat> ParamBinder::grads() const {
  std::map<std::string, Mat> out;
  for (const auto& [name, value] : bound_) {
    const Mat& g = value.grad();
    if (g.size() == 0) continue;
    auto it = out.find(name);
    if (it == out.end()) {
      out[name] = g;
    } else {
      it->second += g;
    }
  }
  return out;
}

}  // namespace sofsim::ndiff
