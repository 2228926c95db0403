#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "tmd/data/dataset.hpp"
#include "tmd/dsp/representation.hpp"
#include "tmd/fusion/fusion.hpp"
#include "tmd/model/baseline.hpp"
#include "tmd/nn/graph.hpp"
#include "tmd/nn/parameter.hpp"

namespace tmd::train {

inline constexpr const char* kCodeVersion = "tmd 0.1.0";

struct RunConfig {
  std::vector<data::ChannelSelector> sensors;
  dsp::Recipe recipe = dsp::default_recipe();
  // Unset: the single-sensor baseline (exactly one sensor required).
  std::optional<fusion::FusionMode> fusion;
  std::size_t epochs = 50;
  std::size_t n_seeds = 5;
  std::uint64_t base_seed = 0;
  nn::AdamConfig optimizer;
  std::size_t batch_size = 64;
  bool standardize = true;
  model::ModelOverrides model;
  // Gradient-Blend schedule.
  std::size_t blend_period = 10;
  float blend_floor = 1e-3f;

  // Throws ConfigError on an inconsistent configuration.
  void validate() const;
  std::string mode_label() const;  // "baseline" or the fusion mode name
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  // FNV-1a 64 of the canonical JSON, as 16 hex digits.
  std::string hash() const;
};

// Preprocessed sensor streams in recording order.
struct PreparedSet {
  std::vector<std::string> sensors;
  std::vector<nn::Shape> shapes;
  std::vector<std::vector<nn::Tensor>> inputs;  // [sample][sensor]
  std::vector<std::size_t> labels;              // 0-based; empty for unlabelled sets

  std::size_t size() const { return inputs.size(); }
  PreparedSet subset(std::span<const std::size_t> indices) const;
  // Concatenation of two sets with the same streams.
  static PreparedSet join(const PreparedSet& a, const PreparedSet& b);
};

// Runs the recipe over every selected channel. Recordings are processed in
// parallel over `jobs` threads; results do not depend on `jobs`.
PreparedSet prepare(std::span<const data::RawRecording> recordings, const RunConfig& cfg, bool with_labels = true,
                    std::size_t jobs = 1);

// One mean/std per sensor stream, fitted on training data only.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const PreparedSet& train);
  // Returns a standardized deep copy.
  PreparedSet apply(const PreparedSet& set) const;
};

// Builds the graph a configuration describes for the given stream shapes.
std::unique_ptr<nn::ModelGraph> build_graph(const RunConfig& cfg, const std::vector<nn::Shape>& shapes,
                                            const std::vector<std::string>& sensors, std::uint64_t seed);

struct TrainResult {
  std::vector<float> loss_history;                    // mean total loss per epoch
  std::vector<std::vector<float>> component_history;  // per epoch, mean of each loss term
  std::vector<std::size_t> blend_refresh_epochs;      // Gradient-Blend only
  std::vector<std::vector<float>> blend_weight_history;
};

// Mini-batch Adam for cfg.epochs epochs, sample order reshuffled every epoch
// from `seed`. Throws RunFailure on a non-finite loss.
TrainResult train(nn::ModelGraph& graph, const PreparedSet& train_set, const RunConfig& cfg, std::uint64_t seed);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct F1Report {
  std::vector<ClassScores> per_class;  // 8 entries (mean over seeds for a multi-seed report)
  double macro_f1 = 0.0;
  std::vector<double> per_seed;
  double mean = 0.0;
  double stddev = 0.0;  // population

  nlohmann::json to_json() const;
};

// Per-class scores from predicted and true 0-based labels. A class that is
// never predicted and never present scores 0.
std::vector<ClassScores> class_scores(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                      std::size_t n_classes = data::kNumClasses);
double macro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                std::size_t n_classes = data::kNumClasses);
// Report for one evaluation.
F1Report make_report(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);
// Mean/std over per-seed reports.
F1Report aggregate(std::span<const F1Report> seeds);

std::vector<std::size_t> predict(const nn::ModelGraph& graph, const PreparedSet& set);
F1Report evaluate(const nn::ModelGraph& graph, const PreparedSet& set);

struct SeedOutcome {
  std::uint64_t seed = 0;
  F1Report report;
  TrainResult training;
  bool failed = false;
  std::string failure;
};

struct RunRecord {
  RunConfig config;
  std::vector<SeedOutcome> seeds;
  F1Report report;
  double wall_time_s = 0.0;
  std::string evaluated_on = "validation";

  bool any_failed() const;
  // Full record; `include_timing` = false drops the wall time so reruns
  // compare equal.
  nlohmann::json to_json(bool include_timing = true) const;
};

// Trains and evaluates cfg.n_seeds independent runs with seeds
// base_seed + i. A failed seed keeps the score of the all-class-0
// prediction (what an argmax over NaN scores yields).
RunRecord repeat_runs(const RunConfig& cfg, const PreparedSet& train_set, const PreparedSet& eval_set,
                      std::size_t jobs = 1);

// Trains on train + validation and scores the held-out test set.
RunRecord final_test_run(const RunConfig& cfg, const PreparedSet& train_set, const PreparedSet& val_set,
                         const data::HeldOutTestSet& test_set, std::size_t jobs = 1);

// Gatekeeper for held-out test labels: final_test_run is its only user.
class TestLabelAccess {
  static const std::vector<data::ClassLabel>& labels(const data::HeldOutTestSet& set) { return set.labels({}); }

  friend RunRecord final_test_run(const RunConfig&, const PreparedSet&, const PreparedSet&,
                                  const data::HeldOutTestSet&, std::size_t);
};

}  // namespace tmd::train
