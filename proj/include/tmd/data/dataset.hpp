#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmd/dsp/signal.hpp"

namespace tmd::train {
class TestLabelAccess;
}

namespace tmd::data {

// Challenge label codes 1..8.
enum class ClassLabel : int { kStill = 1, kWalk, kRun, kBike, kCar, kBus, kTrain, kSubway };
inline constexpr std::size_t kNumClasses = 8;
// Sample whose label stands for the whole recording (t = 30 s).
inline constexpr std::size_t kLabelIndex = 3000;

ClassLabel class_from_code(int code);
std::size_t class_index(ClassLabel label);  // 0-based
ClassLabel class_from_index(std::size_t index);
std::string class_name(ClassLabel label);

enum class Sensor { kAcc, kGra, kLAcc, kGyr, kMag, kOri, kPressure };
enum class Axis { kX, kY, kZ, kW, kNorm };

std::string sensor_name(Sensor s);
std::string axis_name(Axis a);

// The 20 raw channel ids in file order: Acc_x .. Ori_z, Pressure.
const std::vector<std::string>& channel_ids();

// One cell of the per-signal grid. Pressure is a single channel and sits
// on the z row, matching the grid layout.
struct ChannelSelector {
  Sensor sensor = Sensor::kAcc;
  Axis axis = Axis::kNorm;

  // "|Acc|", "Gyr_y", "Ori_w", "Pressure".
  std::string name() const;
  // Accepts "Acc:norm", "Acc_norm", "|Acc|", "Gyr_y", "Gyr:y", "Pressure".
  static ChannelSelector parse(const std::string& text);
  bool valid() const;
  // Raw channel ids this selector reads.
  std::vector<std::string> source_channels() const;

  friend bool operator==(const ChannelSelector&, const ChannelSelector&) = default;
};

// All 26 populated grid cells (6 sensors x {x,y,z,norm}, Ori w, Pressure).
const std::vector<ChannelSelector>& per_signal_grid();

struct RawRecording {
  std::map<std::string, dsp::Signal> channels;
  std::vector<int> labels;  // per-timestep class codes
  std::size_t order_index = 0;

  const dsp::Signal& channel(const std::string& id) const;
};

// Channel id -> file name, plus the "Label" file and an optional "order"
// file listing the chronological position of each line.
struct Manifest {
  std::map<std::string, std::string> files;
  std::optional<std::string> order_file;

  static Manifest defaults();
  // key = value lines; unspecified keys keep their default file names.
  static Manifest load(const std::filesystem::path& path);
};

// Parses one challenge text file: one recording per line, 6000 values.
std::vector<std::vector<float>> read_channel_file(const std::filesystem::path& path);

// Loads recordings in chronological order. `only_channels` restricts which
// sensor files are parsed (all 20 when empty). Files are parsed
// concurrently, one per task.
std::vector<RawRecording> load_shl_directory(const std::filesystem::path& dir, const Manifest& manifest = Manifest::defaults(),
                                             const std::vector<std::string>& only_channels = {});
void write_shl_directory(std::span<const RawRecording> recordings, const std::filesystem::path& dir,
                         const Manifest& manifest = Manifest::defaults());

// Code at kLabelIndex.
ClassLabel assign_label(const RawRecording& rec);

struct SplitIndices {
  std::vector<std::size_t> validation;
  std::vector<std::size_t> train;
  std::size_t discarded = 0;
};

// With >= 16000 recordings: first 3000 -> validation, last 13000 -> train.
// Smaller sets keep the same proportions (3000/16310 and 13000/16310,
// rounded). Throws ConfigError when either side would be empty.
SplitIndices chronological_split(std::size_t n_recordings);

std::vector<dsp::Signal> select_channels(const RawRecording& rec, std::span<const ChannelSelector> selectors);
std::vector<std::string> required_channels(std::span<const ChannelSelector> selectors);

// Desk-scale stand-in for the challenge data: n_per_class recordings per
// class, each class with its own spectral signature, shuffled into a
// seeded "chronological" order.
std::vector<RawRecording> generate_synthetic(std::uint64_t seed, std::size_t n_per_class);

// Test-set recordings whose labels are reachable only through
// train::TestLabelAccess (used by the final test run).
class TestLabelKey {
  TestLabelKey() = default;
  friend class train::TestLabelAccess;
};

class HeldOutTestSet {
 public:
  explicit HeldOutTestSet(std::vector<RawRecording> recordings);

  std::size_t size() const { return recordings_.size(); }
  // Recording with its per-timestep labels removed.
  const RawRecording& recording(std::size_t i) const { return recordings_.at(i); }
  const std::vector<ClassLabel>& labels(TestLabelKey) const { return labels_; }

 private:
  std::vector<RawRecording> recordings_;
  std::vector<ClassLabel> labels_;
};

}  // namespace tmd::data
