#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "crowdlstm/checkpoint.hpp"
#include "crowdlstm/metrics.hpp"
#include "crowdlstm/model.hpp"
#include "crowdlstm/run_config.hpp"
#include "crowdlstm/scores_file.hpp"

namespace crowdlstm {

struct PreparedData {
  std::string name;
  std::vector<TrackPoint> points;
  std::vector<SequenceSample> samples;
  DatasetSplit split;
};

// Loads (or synthesizes) the dataset named by the config, windows it and
// splits it with the config seed.
PreparedData prepare_data(const RunConfig& config);
std::string resolve_data_path(const RunConfig& config);

// Hex digest of the test windows (start frame and window index).
std::string split_fingerprint(const std::string& dataset, const std::vector<SequenceSample>& test);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_ade = 0.0;
  double val_fde = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;  // 0: initial parameters
  Checkpoint best;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mean per-sample teacher-forced loss with dropout off.
double mean_loss(Predictor& model, const std::vector<SequenceSample>& samples,
                 const RunContext& ctx);

DisplacementStats rollout_metrics(const Predictor& model, const std::vector<SequenceSample>& samples,
                                  const RunContext& ctx);

// Mini-batch RMSprop training with global-norm clipping. The model must
// already be initialized. Keeps the parameters with the best validation
// loss (or the last epoch when there is no validation split).
TrainResult train_model(Predictor& model, const DatasetSplit& split, const RunConfig& config,
                        const RunContext& ctx, const EpochCallback& on_epoch = {});

// Full run: data preparation, initialization with the config seed,
// training, then <out>/loss.csv, <out>/checkpoint.bin, <out>/run_config.txt.
TrainResult train(const RunConfig& config, const EpochCallback& on_epoch = {});

void write_loss_csv(std::ostream& out, const RunConfig& config,
                    const std::vector<EpochRecord>& curve);

std::vector<std::pair<std::string, std::string>> checkpoint_header(const RunConfig& config);
RunConfig config_from_checkpoint(const Checkpoint& ckpt);

// Model rebuilt from a checkpoint's header and blocks.
std::unique_ptr<Predictor> model_from_checkpoint(const Checkpoint& ckpt);

struct PredictionRow {
  std::string dataset;
  std::size_t sample = 0;
  std::int64_t ped_id = 0;
  std::int64_t frame = 0;
  Vec2 predicted;
  Vec2 truth;
};

struct EvaluationResult {
  DatasetMetrics metrics;
  std::vector<PredictionRow> predictions;
};

// Rolls out every test sample. Throws on an empty test split.
EvaluationResult evaluate(const Predictor& model, const std::string& dataset,
                          const std::vector<SequenceSample>& test, const RunContext& ctx,
                          const RolloutOptions& options = {});

void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows);
void write_metrics_csv(std::ostream& out, const std::vector<DatasetMetrics>& metrics,
                       const std::string& mode);

// Loads frozen scores named by the config, if any.
std::shared_ptr<FrozenScores> load_frozen_scores(const RunConfig& config);

}  // namespace crowdlstm
