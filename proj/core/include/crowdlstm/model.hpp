#pragma once

// The attention-augmented social LSTM. Every pedestrian of a sample owns an
// LSTM state; all states share parameters and advance frame by frame. At
// each frame the input of pedestrian i is
//
//   [ relu(pos_i W_pos + b)          (64)
//   | sum_j relu(alpha_ij W_att + b)  (64)
//   | relu(S_i W_soc + b)             (64) ]
//
// where pos_i is relative to the first observed position, alpha_ij are the
// attention scores over neighbors inside the local map and S_i is the
// social tensor of neighbors' previous hidden states. The output head gives
// a bivariate Gaussian over the displacement to the next frame.

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crowdlstm/attention.hpp"
#include "crowdlstm/dataset.hpp"
#include "crowdlstm/lstm.hpp"
#include "crowdlstm/param_store.hpp"
#include "crowdlstm/scores_file.hpp"
#include "crowdlstm/social_pooling.hpp"

namespace crowdlstm {

enum class Mode { attention, social };
// What the attention embedding consumes: per-neighbor scalar scores summed
// after a shared (1 -> 64) layer, or the score-weighted pair embedding
// through a (50 -> 64) layer.
enum class AttentionInput { scores, crowd };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);
std::string to_string(AttentionInput a);
AttentionInput parse_attention_input(const std::string& s);

struct ModelConfig {
  std::size_t embed = 64;
  std::size_t hidden = 128;
  double dropout = 0.5;
  AttentionInput attention_input = AttentionInput::scores;
  AttentionDims attention;
  PoolingGeometry pooling;

  std::size_t lstm_input() const { return 3 * embed; }
};

struct GaussianParams {
  double mux = 0.0;
  double muy = 0.0;
  double sx = 1.0;
  double sy = 1.0;
  double rho = 0.0;
};

inline constexpr double kRhoLimit = 0.999;
inline constexpr double kSigmaFloor = 1e-6;

// mu = raw[0..2], sigma = max(exp(raw[2..4]), 1e-6), rho = 0.999 tanh(raw[4]).
GaussianParams transform_outputs(std::span<const double> raw);

// Negative log density of `target` under the Gaussian.
double nll_loss(const GaussianParams& g, Vec2 target);

// Loss and dL/draw for the composed transform_outputs + nll_loss.
double nll_loss_raw(std::span<const double> raw, Vec2 target, std::array<double, 5>* d_raw);

// Per-call settings shared by training, validation and rollouts.
struct RunContext {
  Mode mode = Mode::attention;
  // When set, attention scores come from this table instead of the network.
  const FrozenScores* frozen = nullptr;
  std::string dataset;  // key into `frozen`
};

struct StepOutput {
  LstmState state;
  std::array<double, 5> raw{};
  GaussianParams gaussian;
};

// Called with (window frame index, pedestrian index, social tensor) for
// every pedestrian and frame of a rollout; used for debug dumps.
using SocialObserver = std::function<void(std::size_t, std::size_t, std::span<const double>)>;

struct RolloutOptions {
  bool sample = false;  // draw from the predicted Gaussian instead of using mu
  std::uint64_t seed = 0;
  SocialObserver on_social_tensor;
};

struct Rollout {
  // predicted[p][k] is pedestrian p's position at prediction frame k.
  std::vector<std::vector<Vec2>> predicted;
  std::vector<std::vector<GaussianParams>> gaussians;
};

// Neighbors used for attention: everyone else inside the target's local map.
std::vector<std::size_t> attention_neighbors(const std::vector<AgentState>& agents,
                                             std::size_t target);

class Predictor {
 public:
  explicit Predictor(const ModelConfig& config = {});

  Predictor(const Predictor&) = delete;
  Predictor& operator=(const Predictor&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const AttentionNet& attention() const { return attention_; }
  const SocialPooling& pooling() const { return pooling_; }

  void init(std::uint64_t seed) { store_.init_uniform(seed); }

  // Zeroes the parameters that only the attention branch reads.
  void zero_attention_branch();

  // The 192-wide LSTM input for one pedestrian and frame (scores input).
  Vec embed_inputs(Vec2 position, const AttentionScores& scores,
                   std::span<const double> social_tensor, Mode mode, bool training,
                   Rng* rng) const;

  // One LSTM step followed by the output head.
  StepOutput step(const LstmState& state, std::span<const double> embedded) const;

  // Teacher-forced loss over the prediction horizon, summed over
  // pedestrians and frames. With `with_grad`, gradients are accumulated into
  // params().grad. `rng` drives dropout and is required when training.
  double sample_loss(const SequenceSample& sample, const RunContext& ctx, bool training,
                     Rng* rng, bool with_grad);

  // Observed frames are teacher-forced; the predicted positions of all
  // pedestrians are fed back during the prediction horizon.
  Rollout rollout(const SequenceSample& sample, const RunContext& ctx,
                  const RolloutOptions& options = {}) const;

 private:
  struct StepCache;
  struct FrameResult;

  FrameResult forward_frame(const SequenceSample& sample, std::size_t t,
                            const std::vector<AgentState>& agents,
                            const std::vector<Vec2>& origins,
                            const std::vector<LstmState>& prev, const RunContext& ctx,
                            bool training, Rng* rng, std::vector<StepCache>* caches,
                            const SocialObserver* observer = nullptr) const;
  void backward_frame(std::vector<StepCache>& caches, std::vector<Vec>& d_hidden,
                      std::vector<Vec>& d_cell, std::vector<Vec>& d_hidden_prev,
                      std::vector<Vec>& d_cell_prev, const RunContext& ctx);

  Vec attention_feature(const AttentionScores& scores, const AttentionCache* att_cache,
                        StepCache* cache) const;

  ModelConfig config_;
  ParamStore store_;
  AttentionNet attention_;
  SocialPooling pooling_;
  std::size_t pos_w_, pos_b_, att_w_, att_b_, soc_w_, soc_b_;
  std::size_t lstm_wx_, lstm_wh_, lstm_b_, out_w_, out_b_;
  std::optional<std::size_t> crowd_w_, crowd_b_;
};

}  // namespace crowdlstm
