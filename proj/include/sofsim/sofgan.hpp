#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sofsim/data.hpp"
#include "sofsim/ndiff.hpp"
#include "sofsim/rng.hpp"

namespace sofsim {

struct ModelConfig {
  int noise_dim = 32;
  int enc_hidden = 64;
  int dec_hidden = 128;
  int embed_dim = 64;  // split across the four input embeddings
  int batch = 256;
  int z_dim = 16;
  double alpha_test = 3.0;  // test-time latent variance
  double lambda1 = 0.5;     // variety loss weight
  double lambda2 = 1.0;     // KL weight
  double lambda3 = 0.5;     // goal variety weight
  double lambda_force = 0.5;  // variety weight on the force stream
  int k_samples = 20;
  int oversample = 1000;
  int variety_k = 20;  // generator samples during training
  std::vector<int> psi_dims{64, 1024, 1};
  std::vector<int> theta_g_dims{2, 8, 16, 16};
  std::vector<int> theta_e_dims{32, 8, 50, 32};
  std::vector<int> theta_d_dims{32, 1024, 512, 1024, 2};
  int m_bins = 4;
  bool use_cvae = true;
  bool literal_adv_loss = false;  // minimize log(1-D) instead of -log(D)
  double learning_rate = 0.0005;

  int phi_dim() const { return embed_dim / 4; }
  int rp_dim() const { return 4 * m_bins; }
  int compress_dim() const { return theta_e_dims.front() - theta_g_dims.back(); }
  void validate() const;
};

// Model inputs for a batch of windows, one (B x d) matrix per observed step.
struct BatchFeatures {
  std::array<Mat, kObsSteps> x_rel;    // B x 2
  std::array<Mat, kObsSteps> f_total;  // B x 2
  std::array<Mat, kObsSteps> rp;       // B x 4m (ped bins xy, then obstacle bins xy)
  std::array<Mat, kObsSteps> f_goal;   // B x 2
  std::array<Mat, kObsSteps> x_r;      // B x 2
  Mat gt_rel;    // B x 24, future displacements (training/eval only)
  Mat gt_force;  // B x 24, future generating forces
  Mat g_gt;      // B x 2, final future position relative to x_obs[0]
  Mat last_rel;  // B x 2, x_rel_obs[7]
  Mat last_pos;  // B x 2, x_obs[7] (absolute)
  Mat last_vel;  // B x 2, x_obs[7] - x_obs[6]
  std::vector<std::int64_t> ped_ids;

  Eigen::Index size() const { return last_pos.rows(); }
};

BatchFeatures pack_features(const std::vector<const TrajectoryWindow*>& windows,
                            const ModelConfig& cfg);
BatchFeatures pack_features(const SceneBatch& batch, const ModelConfig& cfg);

// k sampled futures for one pedestrian. Trajectories are stored as relative
// displacement steps; absolute positions follow by cumulative sum from the
// last observed position.
struct WindowPrediction {
  std::int64_t ped_id = 0;
  Vec2 last_pos = Vec2::Zero();
  Vec2 last_vel = Vec2::Zero();
  std::vector<std::array<Vec2, kPredSteps>> y_rel;    // k x 12 displacements
  std::vector<std::array<Vec2, kPredSteps>> f_pred;   // k x 12 forces
  std::vector<Vec2> g_pred;                           // k predicted goals (relative)

  int samples() const { return static_cast<int>(y_rel.size()); }
  std::array<Vec2, kPredSteps> abs_trajectory(int j) const;
  // Second trajectory: unit-mass integration of the force stream, seeded by
  // the last observed velocity.
  std::array<Vec2, kPredSteps> force_trajectory(int j) const;
};

struct PredictionSet {
  std::vector<WindowPrediction> windows;
};

// k-means on 2D points: returns for each of the k clusters the index of the
// member closest to its centroid. Farthest-point seeding from rng, at most
// `iters` Lloyd iterations, deterministic tie-breaking by lowest index.
std::vector<int> kmeans_select(const std::vector<Vec2>& points, int k, Rng& rng,
                               int iters = 50);

class Sofgan {
 public:
  Sofgan(ModelConfig cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ndiff::ParamStore& params() { return params_; }
  const ndiff::ParamStore& params() const { return params_; }

  void save(const std::string& path) const;
  void load(const std::string& path);

  struct StepLosses {
    double d_loss = 0;
    double g_adv = 0;
    double variety = 0;        // unweighted min-over-k displacement norm
    double force_variety = 0;  // unweighted, force stream
    double kl = 0;
    double goal_variety = 0;   // unweighted
    double total = 0;          // weighted generator objective
  };

  // One discriminator update followed by one generator/CVAE update.
  StepLosses train_step(const BatchFeatures& f, Rng& rng);

  // Test-time sampling: S samples per window, z ~ N(0, alpha I), batchnorm in
  // eval mode. Returns S entries per window.
  PredictionSet sample(const BatchFeatures& f, int samples, Rng& rng) const;

  // Oversample + k-means endpoint selection (degenerates to plain sampling
  // with a warning when oversample < k).
  PredictionSet predict_multimodal(const BatchFeatures& f, int oversample, int k,
                                   Rng& rng, std::ostream* warnings = nullptr) const;

  // Exposed for tests: encoder context (B x enc_hidden) in eval mode with the
  // configured goal input, and discriminator scores for 20-step relative
  // trajectories.
  Mat encode_eval(const BatchFeatures& f) const;
  Mat discriminate_eval(const Mat& rel20_flat) const;
  // CVAE pieces (eval mode): compressed trajectory context and goal decoding.
  Mat cvae_context_eval(const BatchFeatures& f) const;
  Mat cvae_decode_goal_eval(const Mat& z, const Mat& c16) const;

 private:
  ModelConfig cfg_;
  ndiff::ParamStore params_;
  ndiff::AdamState adam_gen_;
  ndiff::AdamState adam_disc_;
  std::vector<std::string> gen_param_names_;
  std::vector<std::string> disc_param_names_;

  void build_params(std::uint64_t seed);
};

struct TrainOptions {
  int epochs = 10;
  std::uint64_t seed = 1;
  bool augment = true;
  int batch_override = 0;  // 0 = ModelConfig::batch
};

struct EpochStats {
  int epoch = 0;
  Sofgan::StepLosses mean;
  double wall_s = 0;
};

// Shuffled minibatch training with optional per-scene rotation augmentation.
// Logs one JSON line per epoch to `log` when given. Throws on empty data or
// non-finite losses.
std::vector<EpochStats> train_sofgan(Sofgan& model, const std::vector<SceneBatch>& data,
                                     const BuildOptions& build_opts,
                                     const TrainOptions& opts, std::ostream* log);

}  // namespace sofsim
