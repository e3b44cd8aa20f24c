#include "crowdlstm/trainer.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "crowdlstm/synthetic.hpp"

namespace crowdlstm {

std::string resolve_data_path(const RunConfig& config) {
  if (!config.data_path.empty()) return config.data_path;
  const auto preset = find_preset(config.dataset);
  if (!preset) throw ConfigError("no data_path and '" + config.dataset + "' is not a preset");
  return (std::filesystem::path(config.data_dir) / preset->file_name).string();
}

PreparedData prepare_data(const RunConfig& config) {
  config.validate();
  PreparedData d;
  d.name = config.dataset;
  if (config.dataset == "synthetic") {
    SyntheticSceneConfig sc;
    sc.num_peds = config.synthetic_peds;
    sc.num_frames = config.synthetic_frames;
    sc.min_track = config.synthetic_min_track;
    sc.max_track = config.synthetic_max_track;
    sc.noise_sigma = config.synthetic_noise;
    sc.seed = config.synthetic_seed;
    sc.frame_period = config.frame_period;
    d.points = constant_velocity_scene(sc);
  } else {
    d.points = load_dataset(resolve_data_path(config), ColumnOrder::parse(config.columns));
  }
  d.samples = build_sequences(d.points, config.window());
  d.split = split_dataset(d.samples, config.split, config.seed);
  return d;
}

std::string split_fingerprint(const std::string& dataset, const std::vector<SequenceSample>& test) {
  // FNV-1a over a canonical text rendering.
  std::ostringstream os;
  os << dataset;
  for (const auto& s : test) os << ';' << s.start_frame() << ':' << s.index << ':' << s.num_peds();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : os.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

double mean_loss(Predictor& model, const std::vector<SequenceSample>& samples,
                 const RunContext& ctx) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const auto& s : samples) sum += model.sample_loss(s, ctx, false, nullptr, false);
  return sum / static_cast<double>(samples.size());
}

namespace {

// Rollouts of every sample, computed on a small worker pool. Each slot is
// written by exactly one worker; callers reduce in sample order, so results
// do not depend on the thread count.
std::vector<Rollout> parallel_rollouts(const Predictor& model,
                                       const std::vector<SequenceSample>& samples,
                                       const RunContext& ctx, const RolloutOptions& options) {
  std::vector<Rollout> out(samples.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      try {
        RolloutOptions o = options;
        o.seed = options.seed + i;
        out[i] = model.rollout(samples[i], ctx, o);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), samples.size());
  std::vector<std::jthread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace

DisplacementStats rollout_metrics(const Predictor& model, const std::vector<SequenceSample>& samples,
                                  const RunContext& ctx) {
  DisplacementAccumulator acc;
  const auto rollouts = parallel_rollouts(model, samples, ctx, {});
  for (std::size_t si = 0; si < samples.size(); ++si) {
    const auto& s = samples[si];
    const auto& r = rollouts[si];
    for (std::size_t p = 0; p < s.num_peds(); ++p) {
      std::span<const Vec2> truth(s.positions[p]);
      acc.add(r.predicted[p], truth.subspan(SequenceSample::kObserved));
    }
  }
  return acc.stats();
}

std::vector<std::pair<std::string, std::string>> checkpoint_header(const RunConfig& config) {
  const ModelConfig m = config.model_config();
  std::vector<std::pair<std::string, std::string>> h = {
      {"format_version", std::to_string(kCheckpointVersion)},
      {"crowdlstm_version", version()},
      {"embed", std::to_string(m.embed)},
      {"hidden", std::to_string(m.hidden)},
      {"lstm_input", std::to_string(m.lstm_input())},
      {"output", "5"},
      {"attention_feature", std::to_string(m.attention.feature)},
      {"attention_embed_hidden", std::to_string(m.attention.embed_hidden)},
      {"attention_embed", std::to_string(m.attention.embed)},
      {"attention_mlp_hidden", std::to_string(m.attention.mlp_hidden)},
      {"pool_fine_cells", std::to_string(m.pooling.fine_cells)},
      {"pool_window", std::to_string(m.pooling.window)},
  };
  for (const auto& [k, v] : config.to_entries()) h.emplace_back("config." + k, v);
  return h;
}

RunConfig config_from_checkpoint(const Checkpoint& ckpt) {
  RunConfig c;
  for (const auto& [k, v] : ckpt.header) {
    if (k.starts_with("config.")) c.set(k.substr(7), v);
  }
  return c;
}

std::unique_ptr<Predictor> model_from_checkpoint(const Checkpoint& ckpt) {
  const RunConfig config = config_from_checkpoint(ckpt);
  auto model = std::make_unique<Predictor>(config.model_config());
  const ModelConfig& m = model->config();
  if (ckpt.header_value("embed") != std::to_string(m.embed) ||
      ckpt.header_value("hidden") != std::to_string(m.hidden)) {
    throw DimensionError("checkpoint layer dimensions do not match this build");
  }
  apply_checkpoint(ckpt, model->params());
  return model;
}

void write_loss_csv(std::ostream& out, const RunConfig& config,
                    const std::vector<EpochRecord>& curve) {
  write_artifact_header(out, config);
  out << "epoch,train_loss,val_loss,val_ade,val_fde\n" << std::setprecision(17);
  for (const auto& r : curve) {
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_ade << ','
        << r.val_fde << '\n';
  }
}

TrainResult train_model(Predictor& model, const DatasetSplit& split, const RunConfig& config,
                        const RunContext& ctx, const EpochCallback& on_epoch) {
  config.validate();
  if (split.train.empty() && config.epochs > 0) throw ConfigError("training split is empty");
  ParamStore& store = model.params();
  const RmspropConfig opt = config.optimizer();
  Rng rng(config.seed ^ 0x5DEECE66DULL);

  TrainResult result;
  const auto header = checkpoint_header(config);
  result.best = make_checkpoint(store, header);
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(split.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    double train_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      store.zero_grad();
      try {
        for (std::size_t k = start; k < end; ++k) {
          train_sum += model.sample_loss(split.train[order[k]], ctx, true, &rng, true);
        }
        store.scale_grad(1.0 / static_cast<double>(end - start));
        store.clip_grad_norm(config.clip_norm);
        rmsprop_step(store, opt);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / config.batch_size) + ": " + e.what());
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_sum / static_cast<double>(order.size());
    rec.val_loss = mean_loss(model, split.val, ctx);
    const auto stats = rollout_metrics(model, split.val, ctx);
    rec.val_ade = split.val.empty() ? std::numeric_limits<double>::quiet_NaN() : stats.ade;
    rec.val_fde = split.val.empty() ? std::numeric_limits<double>::quiet_NaN() : stats.fde;
    result.curve.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const bool improved = split.val.empty() || rec.val_loss < best_val;
    if (improved) {
      best_val = split.val.empty() ? best_val : rec.val_loss;
      result.best_epoch = epoch;
      result.best = make_checkpoint(store, header);
    }
  }
  return result;
}

std::shared_ptr<FrozenScores> load_frozen_scores(const RunConfig& config) {
  if (config.scores_file.empty()) return nullptr;
  return std::make_shared<FrozenScores>(FrozenScores::load(config.scores_file));
}

TrainResult train(const RunConfig& config, const EpochCallback& on_epoch) {
  const PreparedData data = prepare_data(config);
  Predictor model(config.model_config());
  model.init(config.seed);
  const auto frozen = load_frozen_scores(config);
  const RunContext ctx{config.mode, frozen.get(), data.name};

  TrainResult result = train_model(model, data.split, config, ctx, on_epoch);

  std::filesystem::create_directories(config.out_dir);
  const std::filesystem::path out(config.out_dir);
  {
    std::ofstream csv(out / "loss.csv");
    if (!csv) throw Error("cannot write " + (out / "loss.csv").string());
    write_loss_csv(csv, config, result.curve);
  }
  save_checkpoint((out / "checkpoint.bin").string(), result.best);
  {
    std::ofstream cfg(out / "run_config.txt");
    write_run_config(cfg, config);
  }
  return result;
}

EvaluationResult evaluate(const Predictor& model, const std::string& dataset,
                          const std::vector<SequenceSample>& test, const RunContext& ctx,
                          const RolloutOptions& options) {
  if (test.empty()) throw ConfigError("evaluation split of " + dataset + " is empty");
  EvaluationResult res;
  DisplacementAccumulator acc;
  const auto rollouts = parallel_rollouts(model, test, ctx, options);
  for (std::size_t si = 0; si < test.size(); ++si) {
    const auto& s = test[si];
    const auto& r = rollouts[si];
    for (std::size_t p = 0; p < s.num_peds(); ++p) {
      std::span<const Vec2> truth = std::span<const Vec2>(s.positions[p]).subspan(SequenceSample::kObserved);
      acc.add(r.predicted[p], truth);
      for (std::size_t k = 0; k < truth.size(); ++k) {
        res.predictions.push_back({dataset, s.index, s.ped_ids[p],
                                   s.frames[SequenceSample::kObserved + k], r.predicted[p][k],
                                   truth[k]});
      }
    }
  }
  const auto st = acc.stats();
  res.metrics = {dataset, st.ade, st.fde, st.trajectories, split_fingerprint(dataset, test)};
  return res;
}

void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows) {
  out << "dataset,sample,ped_id,frame,pred_x,pred_y,gt_x,gt_y\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.dataset << ',' << r.sample << ',' << r.ped_id << ',' << r.frame << ','
        << r.predicted.x << ',' << r.predicted.y << ',' << r.truth.x << ',' << r.truth.y << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const std::vector<DatasetMetrics>& metrics,
                       const std::string& mode) {
  out << "dataset,mode,ade,fde,trajectories,split\n" << std::setprecision(17);
  for (const auto& m : metrics) {
    out << m.dataset << ',' << mode << ',' << m.ade << ',' << m.fde << ',' << m.trajectories << ','
        << m.split_fingerprint << '\n';
  }
}

}  // namespace crowdlstm
