// crowdlstm: prepare datasets, train, evaluate and compare trajectory
// predictors from the command line.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdlstm/grad_check.hpp"
#include "crowdlstm/local_map.hpp"
#include "crowdlstm/trainer.hpp"

using namespace crowdlstm;
namespace fs = std::filesystem;

namespace {

// Command-line flags that map one-to-one onto RunConfig keys. Values given on
// the command line override the --config file, which overrides the defaults.
class ConfigFlags {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key,
           const std::string& help) {
    options_.emplace_back(key, app->add_option(flag, values_[key], help));
  }

  void add_data_flags(CLI::App* app) {
    app->add_option("--config", config_file_, "key=value run configuration file");
    add(app, "--dataset", "dataset", "ETH, HOTEL, UNIV1, UNIV3, ZARA1, ZARA2 or synthetic");
    add(app, "--data", "data_path", "annotation file (overrides the preset location)");
    add(app, "--data-dir", "data_dir", "directory holding the preset annotation files");
    add(app, "--columns", "columns", "column order of the annotation file, fpxy or fpyx");
    add(app, "--frame-period", "frame_period", "seconds between annotated frames");
    add(app, "--stride", "stride", "annotated frames between window starts");
    add(app, "--seed", "seed", "seed for the split, initialization and dropout");
    add(app, "--out", "out", "output directory");
  }

  void add_model_flags(CLI::App* app) {
    add(app, "--mode", "mode", "attention or social");
    add(app, "--attention-input", "attention_input", "scores or crowd");
    add(app, "--scores-file", "scores_file", "frozen attention scores to use instead of the network");
  }

  void add_training_flags(CLI::App* app) {
    add(app, "--epochs", "epochs", "training epochs");
    add(app, "--lr", "lr", "RMSprop learning rate");
    add(app, "--dropout", "dropout", "dropout on the attention and social embeddings");
    add(app, "--batch-size", "batch_size", "windows per update");
  }

  RunConfig resolve(RunConfig base) const {
    if (!config_file_.empty()) base = load_run_config(config_file_);
    for (const auto& [key, opt] : options_) {
      if (opt->count() > 0) base.set(key, values_.at(key));
    }
    base.validate();
    return base;
  }

  bool given(const std::string& key) const {
    for (const auto& [k, opt] : options_) {
      if (k == key) return opt->count() > 0;
    }
    return false;
  }

 private:
  std::string config_file_;
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void print_metrics(const DatasetMetrics& m, const std::string& mode) {
  std::printf("%s %s: ADE %.4f FDE %.4f over %zu trajectories (split %s)\n", m.dataset.c_str(),
              mode.c_str(), m.ade, m.fde, m.trajectories, m.split_fingerprint.c_str());
}

// --- prepare ----------------------------------------------------------------

void write_local_maps(std::ostream& out, const std::vector<TrackPoint>& points,
                      const RunConfig& config, const std::string& which) {
  out << "frame,ped_id,row,col,occupancy,sum_vx,sum_vy\n";
  const auto frames = agents_by_frame(points, config.frame_period, config.frame_step);
  std::optional<std::int64_t> only;
  if (which != "all") only = std::stoll(which);
  for (const auto& [frame, agents] : frames) {
    if (only && frame != *only) continue;
    for (const auto& a : agents) {
      const LocalMap map = build_local_map(a, agents);
      for (int r = 0; r < LocalMap::kCells; ++r) {
        for (int c = 0; c < LocalMap::kCells; ++c) {
          out << frame << ',' << a.id << ',' << r << ',' << c << ',' << map.occupancy(r, c) << ','
              << map.sum_vx(r, c) << ',' << map.sum_vy(r, c) << '\n';
        }
      }
    }
  }
}

int run_prepare(const RunConfig& config, const std::string& dump_maps) {
  const PreparedData data = prepare_data(config);
  const fs::path out(config.out_dir);
  {
    auto f = open_output(out / (data.name + ".txt"));
    write_artifact_header(f, config);
    write_dataset(f, data.points);
  }
  {
    auto f = open_output(out / "split.txt");
    write_artifact_header(f, config);
    write_split_manifest(f, data.split);
  }
  if (!dump_maps.empty()) {
    auto f = open_output(out / "local_maps.csv");
    write_local_maps(f, data.points, config, dump_maps);
  }
  std::printf("%s: %zu points, %zu windows (train %zu, val %zu, test %zu) -> %s\n",
              data.name.c_str(), data.points.size(), data.samples.size(), data.split.train.size(),
              data.split.val.size(), data.split.test.size(), out.string().c_str());
  return 0;
}

// --- train ------------------------------------------------------------------

int run_train(const RunConfig& config) {
  const auto result = train(config, [](const EpochRecord& e) {
    std::printf("epoch %zu train_loss %.6f val_loss %.6f val_ade %.4f val_fde %.4f\n", e.epoch,
                e.train_loss, e.val_loss, e.val_ade, e.val_fde);
    std::fflush(stdout);
  });
  std::printf("best epoch %zu; wrote %s\n", result.best_epoch,
              (fs::path(config.out_dir) / "checkpoint.bin").string().c_str());
  return 0;
}

// --- eval -------------------------------------------------------------------

struct Loaded {
  RunConfig config;
  std::unique_ptr<Predictor> model;
};

// The checkpoint's embedded configuration, with command-line overrides.
Loaded load_model(const std::string& checkpoint, const ConfigFlags& flags) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  Loaded l;
  l.config = flags.resolve(config_from_checkpoint(ckpt));
  l.model = model_from_checkpoint(ckpt);
  return l;
}

std::string checkpoint_path(const std::string& given, const ConfigFlags& flags) {
  if (!given.empty()) return given;
  const RunConfig c = flags.resolve(RunConfig{});
  return (fs::path(c.out_dir) / "checkpoint.bin").string();
}

void write_social_norms(std::ostream& out, const Predictor& model, const SequenceSample& s,
                        const RunContext& ctx) {
  const std::size_t cells = static_cast<std::size_t>(model.pooling().geometry().coarse_cells());
  const std::size_t embed = model.pooling().embed();
  out << "sample,frame,ped_id,row,col,norm\n";
  RolloutOptions opts;
  opts.on_social_tensor = [&](std::size_t t, std::size_t p, std::span<const double> tensor) {
    for (std::size_t cell = 0; cell < cells * cells; ++cell) {
      double sq = 0.0;
      for (std::size_t k = 0; k < embed; ++k) sq += tensor[cell * embed + k] * tensor[cell * embed + k];
      out << s.index << ',' << s.frames[t] << ',' << s.ped_ids[p] << ',' << cell / cells << ','
          << cell % cells << ',' << std::sqrt(sq) << '\n';
    }
  };
  model.rollout(s, ctx, opts);
}

int run_eval(const std::string& checkpoint, const ConfigFlags& flags, bool sample,
             std::optional<std::size_t> dump_social) {
  const Loaded l = load_model(checkpoint_path(checkpoint, flags), flags);
  const PreparedData data = prepare_data(l.config);
  const auto frozen = load_frozen_scores(l.config);
  const RunContext ctx{l.config.mode, frozen.get(), data.name};
  const auto ev = evaluate(*l.model, data.name, data.split.test, ctx,
                           {.sample = sample, .seed = l.config.seed});

  const fs::path out(l.config.out_dir);
  {
    auto f = open_output(out / "metrics.csv");
    write_artifact_header(f, l.config);
    write_metrics_csv(f, {ev.metrics}, to_string(l.config.mode));
  }
  {
    auto f = open_output(out / "predictions.csv");
    write_artifact_header(f, l.config);
    write_predictions_csv(f, ev.predictions);
  }
  if (dump_social) {
    if (*dump_social >= data.split.test.size()) {
      throw ConfigError("--dump-social index " + std::to_string(*dump_social) + " exceeds the " +
                        std::to_string(data.split.test.size()) + " test windows");
    }
    auto f = open_output(out / "social_tensor.csv");
    write_social_norms(f, *l.model, data.split.test[*dump_social], ctx);
  }
  print_metrics(ev.metrics, to_string(l.config.mode));
  return 0;
}

// --- compare ----------------------------------------------------------------

std::vector<DatasetMetrics> evaluate_all(const std::vector<std::string>& checkpoints,
                                         const ConfigFlags& flags, Mode expected) {
  std::vector<DatasetMetrics> out;
  for (const auto& path : checkpoints) {
    const Loaded l = load_model(path, flags);
    if (l.config.mode != expected) {
      throw ConfigError(path + " was trained in " + to_string(l.config.mode) + " mode, expected " +
                        to_string(expected));
    }
    const PreparedData data = prepare_data(l.config);
    const auto frozen = load_frozen_scores(l.config);
    const RunContext ctx{l.config.mode, frozen.get(), data.name};
    out.push_back(evaluate(*l.model, data.name, data.split.test, ctx).metrics);
    print_metrics(out.back(), to_string(l.config.mode));
  }
  return out;
}

int run_compare(const std::vector<std::string>& social, const std::vector<std::string>& attention,
                const ConfigFlags& flags) {
  const auto base = evaluate_all(social, flags, Mode::social);
  const auto ours = evaluate_all(attention, flags, Mode::attention);
  const MetricsReport report = compare(base, ours);
  std::cout << format_report(report);
  if (flags.given("out")) {
    const RunConfig c = flags.resolve(RunConfig{});
    auto f = open_output(fs::path(c.out_dir) / "comparison.csv");
    write_report_csv(f, report);
  }
  return 0;
}

// --- gradcheck --------------------------------------------------------------

// Two pedestrians walking side by side, annotated every 10 raw frames.
SequenceSample two_walker_window() {
  std::vector<TrackPoint> points;
  for (int t = 0; t < static_cast<int>(SequenceSample::kLength); ++t) {
    const double s = t;
    points.push_back({10 * t, 1, 0.3 * s, 0.02 * std::sin(s)});
    points.push_back({10 * t, 2, 0.28 * s + 0.1, 0.7 + 0.03 * std::cos(s)});
  }
  return build_sequences(points).front();
}

int run_gradcheck(const RunConfig& config, std::size_t entries, double tolerance) {
  Predictor model(config.model_config());
  model.init(config.seed);
  const SequenceSample sample = two_walker_window();
  const RunContext ctx{config.mode, nullptr, "gradcheck"};
  const auto r = grad_check(
      [&](ParamStore&, bool with_grad) {
        return model.sample_loss(sample, ctx, false, nullptr, with_grad);
      },
      model.params(),
      {.tolerance = tolerance, .max_entries_per_param = entries, .denominator_floor = 1e-4,
       .seed = config.seed});
  std::printf("%s: %zu entries, %zu skipped at kinks, max relative error %.3e (%s[%zu]: analytic %.6e, "
              "numeric %.6e)\n",
              r.passed ? "passed" : "FAILED", r.entries_checked, r.nonsmooth_skipped,
              r.max_relative_error, r.worst_param.c_str(), r.worst_index, r.worst_analytic,
              r.worst_numeric);
  return r.passed ? 0 : 1;
}

// --- dump-scores ------------------------------------------------------------

// Scores every other pedestrian annotated in the same frame, so lookups for
// any neighbor subset succeed.
int run_dump_scores(const Loaded& l, const std::string& path) {
  const PreparedData data = prepare_data(l.config);
  const ParamStore& store = l.model->params();
  const AttentionNet& net = l.model->attention();
  std::vector<ScoreRecord> records;
  for (const auto& [frame, agents] : agents_by_frame(data.points, l.config.frame_period,
                                                      l.config.frame_step)) {
    for (std::size_t i = 0; i < agents.size(); ++i) {
      std::vector<AgentState> others;
      for (std::size_t j = 0; j < agents.size(); ++j) {
        if (j != i) others.push_back(agents[j]);
      }
      if (others.empty()) continue;
      const auto inputs = neighbor_inputs(others, agents);
      const AttentionScores s = net.score_neighbors(store, agents[i], inputs);
      for (std::size_t k = 0; k < s.neighbor_ids.size(); ++k) {
        records.push_back({data.name, frame, agents[i].id, s.neighbor_ids[k], s.weights[k]});
      }
    }
  }
  auto f = open_output(path);
  write_score_records(f, records);
  std::printf("wrote %zu scores for %s to %s\n", records.size(), data.name.c_str(), path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-weighted social LSTM for pedestrian trajectory prediction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  ConfigFlags prepare_flags, train_flags, eval_flags, compare_flags, grad_flags, scores_flags;

  auto* prepare = app.add_subcommand("prepare", "write the normalized dataset and split manifest");
  prepare_flags.add_data_flags(prepare);
  std::string dump_maps;
  prepare->add_option("--dump-maps", dump_maps, "write local_maps.csv for one frame id or 'all'");

  auto* train_cmd = app.add_subcommand("train", "train a model and write loss.csv and checkpoint.bin");
  train_flags.add_data_flags(train_cmd);
  train_flags.add_model_flags(train_cmd);
  train_flags.add_training_flags(train_cmd);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on its test split");
  eval_flags.add_data_flags(eval);
  eval_flags.add(eval, "--scores-file", "scores_file", "frozen attention scores");
  std::string eval_ckpt;
  bool sample = false;
  std::optional<std::size_t> dump_social;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file (default <out>/checkpoint.bin)");
  eval->add_flag("--sample", sample, "sample each step from the predicted Gaussian instead of its mean");
  eval->add_option("--dump-social", dump_social,
                   "write social_tensor.csv with per-cell norms for this test window");

  auto* cmp = app.add_subcommand("compare", "evaluate social and attention checkpoints side by side");
  std::vector<std::string> social_ckpts, attention_ckpts;
  cmp->add_option("--social", social_ckpts, "social-mode checkpoints, one per dataset")->required();
  cmp->add_option("--attention", attention_ckpts, "attention-mode checkpoints, same dataset order")
      ->required();
  compare_flags.add(cmp, "--data-dir", "data_dir", "directory holding the preset annotation files");
  compare_flags.add(cmp, "--out", "out", "also write comparison.csv here");

  auto* grad = app.add_subcommand("gradcheck", "compare analytic and numeric gradients of the full model");
  grad_flags.add_model_flags(grad);
  grad_flags.add(grad, "--seed", "seed", "initialization and sampling seed");
  std::size_t grad_entries = 10;
  double grad_tolerance = 1e-4;
  grad->add_option("--entries", grad_entries, "entries per parameter tensor (0: all)");
  grad->add_option("--tolerance", grad_tolerance, "maximum relative error");

  auto* scores = app.add_subcommand("dump-scores", "write a frozen score file from a checkpoint");
  scores_flags.add_data_flags(scores);
  std::string scores_ckpt, scores_path;
  scores->add_option("--checkpoint", scores_ckpt, "checkpoint file (default <out>/checkpoint.bin)");
  scores->add_option("--scores-out", scores_path, "score file (default <out>/scores.txt)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) return run_prepare(prepare_flags.resolve({}), dump_maps);
    if (*train_cmd) return run_train(train_flags.resolve({}));
    if (*eval) return run_eval(eval_ckpt, eval_flags, sample, dump_social);
    if (*cmp) return run_compare(social_ckpts, attention_ckpts, compare_flags);
    if (*grad) return run_gradcheck(grad_flags.resolve({}), grad_entries, grad_tolerance);
    if (*scores) {
      const Loaded l = load_model(checkpoint_path(scores_ckpt, scores_flags), scores_flags);
      if (scores_path.empty()) scores_path = (fs::path(l.config.out_dir) / "scores.txt").string();
      return run_dump_scores(l, scores_path);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
