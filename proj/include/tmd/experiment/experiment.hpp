#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "tmd/data/dataset.hpp"
#include "tmd/dsp/representation.hpp"
#include "tmd/train/trainer.hpp"

namespace tmd::experiment {

namespace fs = std::filesystem;

// Environment variable consulted when no dataset directory is given.
inline constexpr const char* kShlDirEnv = "TMD_SHL_DIR";

struct DataSource {
  enum class Kind { kShl, kSynthetic };
  Kind kind = Kind::kSynthetic;
  fs::path shl_dir;
  std::optional<fs::path> test_dir;  // held-out recordings with their labels
  std::optional<fs::path> manifest;
  std::size_t n_per_class = 80;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
};

// Explicit directory, else $TMD_SHL_DIR. Throws DatasetError saying how to
// get the data (or how to fall back to synthetic data) when neither points
// at an existing directory.
fs::path resolve_shl_dir(const std::optional<fs::path>& explicit_dir);

enum class Protocol { kValidation, kTest };
std::string protocol_name(Protocol p);

// Preprocessed streams over the labelled pool (train + validation), one per
// (selector, recipe), computed on first use and cached. SHL channel files
// are read on demand, so only the channels of one selector are in memory
// at a time. Safe to call from several threads.
class StreamProvider {
 public:
  explicit StreamProvider(DataSource source, std::size_t jobs = 1);

  const DataSource& source() const { return source_; }
  std::size_t size();
  const data::SplitIndices& split();
  // All labelled recordings in chronological order.
  const train::PreparedSet& stream(const data::ChannelSelector& selector, const dsp::Recipe& recipe);
  // The streams of cfg.sensors side by side.
  train::PreparedSet streams(const train::RunConfig& cfg);
  dsp::Signal signal(std::size_t index, const data::ChannelSelector& selector);
  // Held-out recordings carrying the channels cfg needs. For synthetic data
  // a second generator draw with a derived seed plays this role.
  data::HeldOutTestSet test_set(const train::RunConfig& cfg);

 private:
  std::vector<data::RawRecording> load(const std::vector<std::string>& channels, const fs::path& dir);
  void ensure_labels();

  DataSource source_;
  std::size_t jobs_;
  std::mutex mutex_;
  std::optional<std::vector<data::RawRecording>> synthetic_;
  std::optional<std::vector<std::size_t>> labels_;
  std::optional<data::SplitIndices> split_;
  std::map<std::pair<std::string, std::string>, train::PreparedSet> cache_;
};

struct RunEntry {
  std::string name;  // section the run came from
  train::RunConfig config;
};

struct ExperimentSuite {
  std::vector<RunEntry> runs;
  fs::path output_dir = "results";
  DataSource source;
  std::size_t jobs = 1;
  Protocol protocol = Protocol::kValidation;

  // Throws ConfigError on an invalid run or a repeated config hash.
  void validate() const;
};

// INI suite description:
//
//   [suite]            output, dataset (synthetic|shl), shl_dir, test_dir,
//                      manifest, synthetic_n_per_class, synthetic_seed,
//                      jobs, protocol (validation|test)
//   [defaults]         run keys shared by every run section
//   [run <name>]       sensors, recipe, fusion, epochs, seeds, base_seed,
//                      batch_size, learning_rate, standardize,
//                      blend_period, blend_floor
//
// In run sections ',' separates alternatives and every combination of
// alternatives becomes one run. '+' joins fused sensors ("|Acc|+|Mag|").
// "sensors = grid" lists the 26 grid cells, "recipe = all" the eight
// pipelines, "fusion = all" the thirteen modes, "fusion = baseline" none.
ExperimentSuite parse_suite_text(const std::string& text);
ExperimentSuite load_suite(const fs::path& path);

struct SuiteResult {
  std::vector<train::RunRecord> records;  // suite order
  std::vector<fs::path> record_files;
  bool any_failed = false;
};

// Runs every configuration on a pool of suite.jobs workers, then writes
// runs/<hash>.json (without timings), timings.json and the CSV tables.
SuiteResult run_suite(const ExperimentSuite& suite, StreamProvider& provider);
SuiteResult run_suite(const ExperimentSuite& suite);

// ---------------------------------------------------------------- tables

// "mean ± std" in percent, two decimals.
std::string format_cell(double mean, double stddev);
// Inverse of format_cell, in percent.
std::pair<double, double> parse_cell(const std::string& cell);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  std::size_t filled_cells() const;  // non-empty cells outside the row-label columns
  std::size_t label_columns = 1;
};

// Axis rows (x, y, z, norm, w) by sensor columns, from single-sensor
// baseline runs with the default recipe.
Table per_sensor_table(const std::vector<train::RunRecord>& records);
// One row per pipeline, one column per signal, single-sensor baselines.
Table preprocessing_table(const std::vector<train::RunRecord>& records);
// One row per sensor combination, one column per fusion mode.
Table fusion_table(const std::vector<train::RunRecord>& records);

struct InfluenceRow {
  std::string from;
  std::string to;
  double gain = 0.0;  // percentage points
  std::size_t pairs = 0;
};

// Runs scoring below this macro-F1 learned nothing and are left out.
inline constexpr double kLearnedNothingF1 = 0.10;

// The eight switches: three sensor swaps to |Acc|, raw to log power, two
// full-size to 48x48 swaps, temporal to the default image and median to
// best fusion mode. A sensor/preprocessing switch averages the F1
// difference over run pairs identical in everything else; the fusion
// switch averages best minus median over groups differing only in mode.
// With `require_all` a switch without any usable pair throws ConfigError;
// otherwise such switches are omitted.
std::vector<InfluenceRow> summarize_influence(const std::vector<train::RunRecord>& records, bool require_all = true);
Table influence_table(const std::vector<InfluenceRow>& rows);

void write_tables(const std::vector<train::RunRecord>& records, const fs::path& dir);

// ---------------------------------------------------------------- diagnostics

// Writes <stem>.pgm and <stem>.csv for one recording. Throws ConfigError for
// recipes that do not produce an image.
void dump_spectrogram(const dsp::Signal& signal, const dsp::Recipe& recipe, const fs::path& stem);

}  // namespace tmd::experiment
