#include "sofsim/inference.hpp"

namespace sofsim {

namespace {
constexpr double kBnEps = 1e-5;
}

template <typename T>
InferenceNet<T>::InferenceNet(const ndiff::ParamStore& params, const ModelConfig& cfg)
    : cfg_(cfg) {
  auto mat = [&](const std::string& name) -> M {
    return params.get(name).cast<T>();
  };
  auto lin = [&](const std::string& prefix) {
    Linear l;
    l.W = mat(prefix + ".W");
    l.b = mat(prefix + ".b").row(0);
    return l;
  };
  auto lstm = [&](const std::string& prefix) {
    Lstm c;
    c.Wi = mat(prefix + ".Wi");
    c.Wf = mat(prefix + ".Wf");
    c.Wg = mat(prefix + ".Wg");
    c.Wo = mat(prefix + ".Wo");
    c.bi = mat(prefix + ".bi").row(0);
    c.bf = mat(prefix + ".bf").row(0);
    c.bg = mat(prefix + ".bg").row(0);
    c.bo = mat(prefix + ".bo").row(0);
    return c;
  };
  auto stack = [&](const std::string& prefix, const std::vector<int>& dims) {
    Stack s;
    const int layers = static_cast<int>(dims.size()) - 1;
    for (int i = 0; i < layers; ++i) {
      Dense d;
      const std::string lp = prefix + ".l" + std::to_string(i);
      d.W = mat(lp + ".W");
      d.b = mat(lp + ".b");
      if (i < layers - 1) {
        d.bn = true;
        const std::string bp = prefix + ".bn" + std::to_string(i);
        d.gamma = mat(bp + ".gamma");
        d.beta = mat(bp + ".beta");
        d.rm = mat(bp + ".running_mean");
        d.rv = mat(bp + ".running_var");
      }
      s.layers.push_back(std::move(d));
    }
    return s;
  };

  phi1_ = lin("gen.phi1");
  phi2_ = lin("gen.phi2");
  phi3_ = lin("gen.phi3");
  phi4_ = lin("gen.phi4");
  enc_ = lstm("gen.enc");
  dec_init_ = lin("gen.dec_init");
  dec_embed_ = lin("gen.dec_embed");
  dec_ = lstm("gen.dec");
  head_disp_ = lin("gen.head_disp");
  head_force_ = lin("gen.head_force");
  disc_embed_ = lin("disc.embed");
  disc_enc_ = lstm("disc.enc");
  psi_ = stack("disc.psi", cfg.psi_dims);
  has_cvae_ = cfg.use_cvae;
  if (has_cvae_) {
    cvae_embed_ = lin("cvae.embed");
    cvae_enc_ = lstm("cvae.enc");
    cvae_compress_ = lin("cvae.compress");
    theta_g_ = stack("cvae.theta_g", cfg.theta_g_dims);
    theta_e_ = stack("cvae.theta_e", cfg.theta_e_dims);
    theta_d_ = stack("cvae.theta_d", cfg.theta_d_dims);
  }
}

template <typename T>
typename InferenceNet<T>::M InferenceNet<T>::apply_linear(const Linear& l, const M& x) {
  return (x * l.W.transpose()).rowwise() + l.b;
}

template <typename T>
typename InferenceNet<T>::M InferenceNet<T>::run_stack(const Stack& s, M x,
                                                       BnMode mode) const {
  for (const Dense& d : s.layers) {
    x = (x * d.W.transpose()).rowwise() + d.b.row(0);
    if (d.bn) {
      if (mode == BnMode::Eval) {
        const auto invstd = (d.rv.row(0).array() + T(kBnEps)).rsqrt();
        x = ((x.rowwise() - d.rm.row(0)).array().rowwise() * invstd).matrix();
      } else {
        const Eigen::Matrix<T, 1, Eigen::Dynamic> mu = x.colwise().mean();
        M xc = x.rowwise() - mu;
        const Eigen::Matrix<T, 1, Eigen::Dynamic> var =
            xc.array().square().colwise().mean();
        const auto invstd = (var.array() + T(kBnEps)).rsqrt();
        x = (xc.array().rowwise() * invstd).matrix();
      }
      x = ((x.array().rowwise() * d.gamma.row(0).array()).rowwise() +
           d.beta.row(0).array())
              .matrix();
      x = x.cwiseMax(T(0));  // hidden layers: BN then ReLU
    }
  }
  return x;
}

template <typename T>
void InferenceNet<T>::lstm_step(const Lstm& cell, const M& x, M& h, M& c) const {
  M xh(x.rows(), x.cols() + h.cols());
  xh << x, h;
  auto gate = [&](const M& w, const auto& b) -> M {
    return (xh * w.transpose()).rowwise() + b;
  };
  const M i = gate(cell.Wi, cell.bi).unaryExpr([](T v) {
    return v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  });
  const M f = gate(cell.Wf, cell.bf).unaryExpr([](T v) {
    return v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  });
  const M g = gate(cell.Wg, cell.bg).array().tanh();
  const M o = gate(cell.Wo, cell.bo).unaryExpr([](T v) {
    return v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  });
  c = f.cwiseProduct(c) + i.cwiseProduct(g);
  h = o.cwiseProduct(c.array().tanh().matrix());
}

template <typename T>
typename InferenceNet<T>::M InferenceNet<T>::encode(
    const std::array<M, kObsSteps>& x_rel, const std::array<M, kObsSteps>& f_total,
    const std::array<M, kObsSteps>& rp, const std::array<M, kObsSteps>& goal_in) const {
  const Eigen::Index B = x_rel[0].rows();
  M h = M::Zero(B, cfg_.enc_hidden);
  M c = M::Zero(B, cfg_.enc_hidden);
  const int phi = cfg_.phi_dim();
  M e(B, 4 * phi);
  for (int t = 0; t < kObsSteps; ++t) {
    e.middleCols(0, phi) = apply_linear(phi1_, x_rel[t]);
    e.middleCols(phi, phi) = apply_linear(phi2_, f_total[t]);
    e.middleCols(2 * phi, phi) = apply_linear(phi3_, rp[t]);
    e.middleCols(3 * phi, phi) = apply_linear(phi4_, goal_in[t]);
    lstm_step(enc_, e, h, c);
  }
  return h;
}

template <typename T>
typename InferenceNet<T>::M InferenceNet<T>::cvae_context(
    const std::array<M, kObsSteps>& x_r) const {
  const Eigen::Index B = x_r[0].rows();
  M h = M::Zero(B, cfg_.enc_hidden);
  M c = M::Zero(B, cfg_.enc_hidden);
  for (int t = 0; t < kObsSteps; ++t) {
    lstm_step(cvae_enc_, apply_linear(cvae_embed_, x_r[t]), h, c);
  }
  return apply_linear(cvae_compress_, h);
}

template <typename T>
typename InferenceNet<T>::M InferenceNet<T>::theta_g(const M& goal, BnMode mode) const {
  return run_stack(theta_g_, goal, mode);
}

template <typename T>
std::pair<typename InferenceNet<T>::M, typename InferenceNet<T>::M>
InferenceNet<T>::theta_e(const M& in, BnMode mode) const {
  const M out = run_stack(theta_e_, in, mode);
  return {out.middleCols(0, cfg_.z_dim), out.middleCols(cfg_.z_dim, cfg_.z_dim)};
}

template <typename T>
typename InferenceNet<T>::M InferenceNet<T>::theta_d(const M& in, BnMode mode) const {
  return run_stack(theta_d_, in, mode);
}

template <typename T>
std::pair<typename InferenceNet<T>::M, typename InferenceNet<T>::M>
InferenceNet<T>::rollout(const M& context, const M& noise, const M& last_rel) const {
  const Eigen::Index B = context.rows();
  M init_in(B, context.cols() + noise.cols());
  init_in << context, noise;
  M h = apply_linear(dec_init_, init_in);
  M c = M::Zero(B, cfg_.dec_hidden);
  M disp(B, 2 * kPredSteps);
  M force(B, 2 * kPredSteps);
  M prev = last_rel;
  for (int t = 0; t < kPredSteps; ++t) {
    lstm_step(dec_, apply_linear(dec_embed_, prev), h, c);
    prev = apply_linear(head_disp_, h);
    disp.middleCols(2 * t, 2) = prev;
    force.middleCols(2 * t, 2) = apply_linear(head_force_, h);
  }
  return {std::move(disp), std::move(force)};
}

template <typename T>
typename InferenceNet<T>::M InferenceNet<T>::discriminate(const M& rel20_flat,
                                                          BnMode mode) const {
  if (rel20_flat.cols() != 2 * kWindowSteps) {
    throw ShapeError("discriminate: expected B x 40 relative trajectory, got " +
                     std::to_string(rel20_flat.rows()) + "x" +
                     std::to_string(rel20_flat.cols()));
  }
  const Eigen::Index B = rel20_flat.rows();
  M h = M::Zero(B, cfg_.enc_hidden);
  M c = M::Zero(B, cfg_.enc_hidden);
  for (int t = 0; t < kWindowSteps; ++t) {
    lstm_step(disc_enc_, apply_linear(disc_embed_, rel20_flat.middleCols(2 * t, 2)), h, c);
  }
  M score = run_stack(psi_, h, mode);
  return score.unaryExpr([](T v) {
    return v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  });
}

template class InferenceNet<double>;
template class InferenceNet<float>;

}  // namespace sofsim
