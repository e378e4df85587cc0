#pragma once

#include <array>
#include <utility>
#include <vector>

#include "sofsim/sofgan.hpp"

namespace sofsim {

enum class BnMode {
  Eval,        // running statistics, pure function
  TrainStats,  // batch statistics, accumulators untouched
};

// Plain-matrix forward pass over a parameter snapshot; no gradients. The
// float instantiation backs the streaming server, the double one batch
// prediction and the training-time sample scans.
template <typename T>
class InferenceNet {
 public:
  using M = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  InferenceNet(const ndiff::ParamStore& params, const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  // Encoder context from per-step embedded inputs (B x enc_hidden).
  M encode(const std::array<M, kObsSteps>& x_rel, const std::array<M, kObsSteps>& f_total,
           const std::array<M, kObsSteps>& rp,
           const std::array<M, kObsSteps>& goal_in) const;

  // CVAE trajectory context compressed to theta-space (B x compress_dim).
  M cvae_context(const std::array<M, kObsSteps>& x_r) const;

  M theta_g(const M& goal, BnMode mode) const;
  std::pair<M, M> theta_e(const M& goal_embed_cat_context, BnMode mode) const;  // mu, log sigma
  M theta_d(const M& z_cat_context, BnMode mode) const;

  // 12-step decoder rollout; returns (displacements B x 24, forces B x 24).
  std::pair<M, M> rollout(const M& context, const M& noise, const M& last_rel) const;

  // Scores in (0,1) for flattened 20-step relative trajectories (B x 40).
  M discriminate(const M& rel20_flat, BnMode mode) const;

 private:
  struct Dense {
    M W, b;
    bool bn = false;
    M gamma, beta, rm, rv;
  };
  struct Stack {
    std::vector<Dense> layers;
  };
  struct Lstm {
    M Wi, Wf, Wg, Wo;
    Eigen::Matrix<T, 1, Eigen::Dynamic> bi, bf, bg, bo;
  };
  struct Linear {
    M W;
    Eigen::Matrix<T, 1, Eigen::Dynamic> b;
  };

  M run_stack(const Stack& s, M x, BnMode mode) const;
  void lstm_step(const Lstm& cell, const M& x, M& h, M& c) const;
  static M apply_linear(const Linear& l, const M& x);

  ModelConfig cfg_;
  Linear phi1_, phi2_, phi3_, phi4_;
  Lstm enc_;
  Linear dec_init_, dec_embed_, head_disp_, head_force_;
  Lstm dec_;
  Linear disc_embed_;
  Lstm disc_enc_;
  Stack psi_;
  bool has_cvae_ = false;
  Linear cvae_embed_, cvae_compress_;
  Lstm cvae_enc_;
  Stack theta_g_, theta_e_, theta_d_;
};

extern template class InferenceNet<double>;
extern template class InferenceNet<float>;

}  // namespace sofsim
