#include "tmd/data/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tmd/errors.hpp"

namespace tmd::data {

namespace fs = std::filesystem;

ClassLabel class_from_code(int code) {
  if (code < 1 || code > static_cast<int>(kNumClasses)) {
    throw DatasetError("label code " + std::to_string(code) + " outside 1..8");
  }
  return static_cast<ClassLabel>(code);
}

std::size_t class_index(ClassLabel label) { return static_cast<std::size_t>(static_cast<int>(label) - 1); }

ClassLabel class_from_index(std::size_t index) {
  if (index >= kNumClasses) throw ConfigError("class index " + std::to_string(index) + " outside 0..7");
  return static_cast<ClassLabel>(static_cast<int>(index) + 1);
}

std::string class_name(ClassLabel label) {
  static const char* const names[] = {"Still", "Walk", "Run", "Bike", "Car", "Bus", "Train", "Subway"};
  return names[class_index(label)];
}

std::string sensor_name(Sensor s) {
  switch (s) {
    case Sensor::kAcc: return "Acc";
    case Sensor::kGra: return "Gra";
    case Sensor::kLAcc: return "LAcc";
    case Sensor::kGyr: return "Gyr";
    case Sensor::kMag: return "Mag";
    case Sensor::kOri: return "Ori";
    case Sensor::kPressure: return "Pressure";
  }
  return "?";
}

std::string axis_name(Axis a) {
  switch (a) {
    case Axis::kX: return "x";
    case Axis::kY: return "y";
    case Axis::kZ: return "z";
    case Axis::kW: return "w";
    case Axis::kNorm: return "norm";
  }
  return "?";
}

const std::vector<std::string>& channel_ids() {
  static const std::vector<std::string> ids = {
      "Acc_x", "Acc_y", "Acc_z", "Gra_x", "Gra_y", "Gra_z", "LAcc_x", "LAcc_y", "LAcc_z", "Gyr_x",
      "Gyr_y", "Gyr_z", "Mag_x", "Mag_y", "Mag_z", "Ori_w", "Ori_x",  "Ori_y",  "Ori_z",  "Pressure"};
  return ids;
}

namespace {

constexpr Sensor kAxisSensors[] = {Sensor::kAcc, Sensor::kGra, Sensor::kLAcc, Sensor::kGyr, Sensor::kMag, Sensor::kOri};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<Sensor> sensor_from(const std::string& text) {
  const std::string t = lower(text);
  for (Sensor s : kAxisSensors) {
    if (lower(sensor_name(s)) == t) return s;
  }
  if (t == "pressure") return Sensor::kPressure;
  return std::nullopt;
}

std::optional<Axis> axis_from(const std::string& text) {
  const std::string t = lower(text);
  for (Axis a : {Axis::kX, Axis::kY, Axis::kZ, Axis::kW, Axis::kNorm}) {
    if (axis_name(a) == t) return a;
  }
  return std::nullopt;
}

}  // namespace

std::string ChannelSelector::name() const {
  if (sensor == Sensor::kPressure) return "Pressure";
  if (axis == Axis::kNorm) return "|" + sensor_name(sensor) + "|";
  return sensor_name(sensor) + "_" + axis_name(axis);
}

ChannelSelector ChannelSelector::parse(const std::string& text) {
  std::string body = text;
  std::optional<Sensor> sensor;
  std::optional<Axis> axis;
  if (body.size() > 2 && body.front() == '|' && body.back() == '|') {
    sensor = sensor_from(body.substr(1, body.size() - 2));
    axis = Axis::kNorm;
  } else if (const auto pos = body.find_first_of(":_"); pos != std::string::npos) {
    sensor = sensor_from(body.substr(0, pos));
    axis = axis_from(body.substr(pos + 1));
  } else if (lower(body) == "pressure") {
    sensor = Sensor::kPressure;
    axis = Axis::kZ;
  }
  if (!sensor || !axis) throw ConfigError("unknown channel selector '" + text + "'");
  ChannelSelector sel{*sensor, *axis};
  if (!sel.valid()) throw ConfigError("channel selector '" + text + "' is not a cell of the sensor grid");
  return sel;
}

bool ChannelSelector::valid() const {
  if (sensor == Sensor::kPressure) return axis == Axis::kZ;
  if (axis == Axis::kW) return sensor == Sensor::kOri;
  return true;
}

std::vector<std::string> ChannelSelector::source_channels() const {
  if (!valid()) throw ConfigError("invalid channel selector " + sensor_name(sensor) + ":" + axis_name(axis));
  if (sensor == Sensor::kPressure) return {"Pressure"};
  const std::string s = sensor_name(sensor);
  if (axis != Axis::kNorm) return {s + "_" + axis_name(axis)};
  if (sensor == Sensor::kOri) return {"Ori_w", "Ori_x", "Ori_y", "Ori_z"};
  return {s + "_x", s + "_y", s + "_z"};
}

const std::vector<ChannelSelector>& per_signal_grid() {
  static const std::vector<ChannelSelector> grid = [] {
    std::vector<ChannelSelector> g;
    for (Axis a : {Axis::kX, Axis::kY, Axis::kZ, Axis::kNorm}) {
      for (Sensor s : kAxisSensors) g.push_back({s, a});
      if (a == Axis::kZ) g.push_back({Sensor::kPressure, Axis::kZ});
    }
    g.push_back({Sensor::kOri, Axis::kW});
    return g;
  }();
  return grid;
}

const dsp::Signal& RawRecording::channel(const std::string& id) const {
  const auto it = channels.find(id);
  if (it == channels.end()) throw ConfigError("recording has no channel '" + id + "' loaded");
  return it->second;
}

// ---------------------------------------------------------------- files

Manifest Manifest::defaults() {
  Manifest m;
  for (const auto& id : channel_ids()) m.files[id] = id + ".txt";
  m.files["Label"] = "Label.txt";
  return m;
}

Manifest Manifest::load(const fs::path& path) {
  if (!fs::exists(path)) throw DatasetError("manifest not found", path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw DatasetError(e.message(), path.string(), static_cast<long>(e.line()));
  }
  Manifest m = defaults();
  for (const auto& [key, value] : tree) {
    const std::string v = value.get_value<std::string>();
    if (key == "order") {
      m.order_file = v;
    } else if (m.files.count(key)) {
      m.files[key] = v;
    } else {
      throw DatasetError("unknown manifest key '" + key + "'", path.string());
    }
  }
  return m;
}

namespace {

// Streams a file line by line, calling fn(line_number, begin, end). Challenge
// files run to a gigabyte of text, so they are never held whole.
template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open file", path.string());
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t stop = line.size();
    if (stop > 0 && line[stop - 1] == '\r') --stop;
    fn(line_no, line.data(), line.data() + stop);
  }
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == ','; }

}  // namespace

std::vector<std::vector<float>> read_channel_file(const fs::path& path) {
  std::vector<std::vector<float>> rows;
  for_each_line(path, [&](long line_no, const char* p, const char* end) {
    std::vector<float> row;
    row.reserve(dsp::kSamplesPerRecording);
    while (true) {
      while (p < end && is_space(*p)) ++p;
      if (p >= end) break;
      float v = 0.0f;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (next < end && !is_space(*next))) {
        const char* tok_end = p;
        while (tok_end < end && !is_space(*tok_end)) ++tok_end;
        throw DatasetError("unparseable value '" + std::string(p, tok_end) + "'", path.string(), line_no);
      }
      if (!std::isfinite(v)) {
        throw DatasetError("non-finite value in field " + std::to_string(row.size() + 1), path.string(), line_no);
      }
      row.push_back(v);
      p = next;
    }
    if (row.empty()) return;  // blank line
    if (row.size() != dsp::kSamplesPerRecording) {
      throw DatasetError("expected " + std::to_string(dsp::kSamplesPerRecording) + " values, found " +
                             std::to_string(row.size()),
                         path.string(), line_no);
    }
    rows.push_back(std::move(row));
  });
  return rows;
}

namespace {

std::vector<std::size_t> read_order_file(const fs::path& path, std::size_t n) {
  std::vector<std::size_t> order;
  for_each_line(path, [&](long line_no, const char* p, const char* end) {
    while (p < end && is_space(*p)) ++p;
    if (p >= end) return;
    std::size_t v = 0;
    const auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc()) throw DatasetError("expected a non-negative integer", path.string(), line_no);
    order.push_back(v);
    (void)next;
  });
  if (order.size() != n) {
    throw DatasetError("order file lists " + std::to_string(order.size()) + " entries for " + std::to_string(n) +
                           " recordings",
                       path.string());
  }
  std::vector<bool> seen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (order[i] >= n || seen[order[i]]) {
      throw DatasetError("order file is not a permutation of 0.." + std::to_string(n - 1), path.string(),
                         static_cast<long>(i + 1));
    }
    seen[order[i]] = true;
  }
  return order;
}

}  // namespace

std::vector<RawRecording> load_shl_directory(const fs::path& dir, const Manifest& manifest,
                                             const std::vector<std::string>& only_channels) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found", dir.string());
  std::vector<std::string> wanted = only_channels.empty() ? channel_ids() : only_channels;
  for (const auto& id : wanted) {
    if (std::find(channel_ids().begin(), channel_ids().end(), id) == channel_ids().end()) {
      throw ConfigError("unknown channel id '" + id + "'");
    }
  }
  wanted.push_back("Label");

  std::vector<std::future<std::vector<std::vector<float>>>> jobs;
  for (const auto& id : wanted) {
    const fs::path file = dir / manifest.files.at(id);
    if (!fs::exists(file)) throw DatasetError("missing file for channel " + id, file.string());
    jobs.push_back(std::async(std::launch::async, [file] { return read_channel_file(file); }));
  }
  std::vector<std::vector<std::vector<float>>> columns;
  for (auto& job : jobs) columns.push_back(job.get());

  const std::size_t n = columns.back().size();
  for (std::size_t c = 0; c < wanted.size(); ++c) {
    if (columns[c].size() != n) {
      throw DatasetError("has " + std::to_string(columns[c].size()) + " recordings, label file has " +
                             std::to_string(n),
                         (dir / manifest.files.at(wanted[c])).string());
    }
  }

  std::vector<std::size_t> position(n);
  for (std::size_t i = 0; i < n; ++i) position[i] = i;
  if (manifest.order_file) position = read_order_file(dir / *manifest.order_file, n);

  const fs::path label_file = dir / manifest.files.at("Label");
  std::vector<RawRecording> recs(n);
  for (std::size_t line = 0; line < n; ++line) {
    RawRecording& rec = recs[position[line]];
    rec.order_index = position[line];
    for (std::size_t c = 0; c + 1 < wanted.size(); ++c) {
      rec.channels[wanted[c]] = dsp::Signal{std::move(columns[c][line]), dsp::kSampleRateHz, wanted[c]};
    }
    const auto& raw_labels = columns.back()[line];
    rec.labels.resize(raw_labels.size());
    for (std::size_t t = 0; t < raw_labels.size(); ++t) {
      const float v = raw_labels[t];
      if (v != std::round(v)) {
        throw DatasetError("label " + std::to_string(v) + " is not an integer code", label_file.string(),
                           static_cast<long>(line + 1));
      }
      rec.labels[t] = static_cast<int>(v);
    }
    try {
      class_from_code(rec.labels[kLabelIndex]);
    } catch (const DatasetError& e) {
      throw DatasetError(e.what(), label_file.string(), static_cast<long>(line + 1));
    }
  }
  return recs;
}

void write_shl_directory(std::span<const RawRecording> recordings, const fs::path& dir, const Manifest& manifest) {
  fs::create_directories(dir);
  if (recordings.empty()) throw ConfigError("write_shl_directory: no recordings");
  std::vector<std::string> ids;
  for (const auto& [id, sig] : recordings.front().channels) ids.push_back(id);

  char buf[32];
  auto write_rows = [&](const fs::path& path, auto&& row_of) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write file", path.string());
    for (const auto& rec : recordings) {
      const auto& row = row_of(rec);
      for (std::size_t i = 0; i < row.size(); ++i) {
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, row[i]);
        (void)ec;
        if (i) out.put(' ');
        out.write(buf, end - buf);
      }
      out.put('\n');
    }
  };
  for (const auto& id : ids) {
    write_rows(dir / manifest.files.at(id), [&](const RawRecording& r) -> const std::vector<float>& {
      return r.channel(id).values;
    });
  }
  write_rows(dir / manifest.files.at("Label"), [](const RawRecording& r) -> const std::vector<int>& { return r.labels; });
  if (manifest.order_file) {
    std::ofstream out(dir / *manifest.order_file);
    for (const auto& rec : recordings) out << rec.order_index << '\n';
  }
}

// ---------------------------------------------------------------- labels and splits

ClassLabel assign_label(const RawRecording& rec) {
  if (rec.labels.size() <= kLabelIndex) {
    throw DatasetError("recording has " + std::to_string(rec.labels.size()) + " labels; need index " +
                       std::to_string(kLabelIndex));
  }
  return class_from_code(rec.labels[kLabelIndex]);
}

SplitIndices chronological_split(std::size_t n) {
  constexpr std::size_t kVal = 3000, kTrain = 13000, kFull = 16000;
  std::size_t n_val, n_train;
  if (n >= kFull) {
    n_val = kVal;
    n_train = kTrain;
  } else {
    constexpr double kTotal = 16310.0;
    n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * kVal / kTotal));
    n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * kTrain / kTotal));
    if (n_val + n_train > n) n_train = n - n_val;
  }
  if (n_val == 0 || n_train == 0) {
    throw ConfigError("chronological split of " + std::to_string(n) + " recordings leaves an empty " +
                      (n_val == 0 ? "validation" : "training") + " set");
  }
  SplitIndices s;
  for (std::size_t i = 0; i < n_val; ++i) s.validation.push_back(i);
  for (std::size_t i = n - n_train; i < n; ++i) s.train.push_back(i);
  s.discarded = n - n_val - n_train;
  return s;
}

std::vector<std::string> required_channels(std::span<const ChannelSelector> selectors) {
  std::set<std::string> ids;
  for (const auto& sel : selectors) {
    for (auto& id : sel.source_channels()) ids.insert(std::move(id));
  }
  return {ids.begin(), ids.end()};
}

std::vector<dsp::Signal> select_channels(const RawRecording& rec, std::span<const ChannelSelector> selectors) {
  std::vector<dsp::Signal> out;
  out.reserve(selectors.size());
  for (const auto& sel : selectors) {
    const auto ids = sel.source_channels();
    if (ids.size() == 1) {
      dsp::Signal s = rec.channel(ids[0]);
      s.channel_id = sel.name();
      out.push_back(std::move(s));
    } else {
      std::vector<dsp::Signal> parts;
      for (const auto& id : ids) parts.push_back(rec.channel(id));
      out.push_back(dsp::euclidean_norm(parts, sel.name()));
    }
  }
  return out;
}

// ---------------------------------------------------------------- synthetic data

namespace {

constexpr double kGravity = 9.81;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Tone {
  double freq, amp, phase;
};

// Sum of random-phase sinusoids packed around a centre: band-limited noise.
std::vector<Tone> narrowband(double centre, double half_width, double rms, std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> df(-half_width, half_width), ph(0.0, kTwoPi);
  std::vector<Tone> tones(count);
  const double amp = rms * std::sqrt(2.0 / static_cast<double>(count));
  for (auto& t : tones) t = {centre + df(rng), amp, ph(rng)};
  return tones;
}

struct ClassProfile {
  std::vector<Tone> acc;  // on top of gravity
  double acc_noise;
  std::vector<Tone> gyr;
  double gyr_noise;
  std::vector<Tone> mag;
  double mag_noise;
  double pressure_slope;  // hPa per second
};

ClassProfile profile_for(ClassLabel label, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0), ph(0.0, kTwoPi);
  auto span = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  ClassProfile p;
  p.acc_noise = 0.05;
  p.gyr_noise = 0.02;
  p.mag_noise = 0.3;
  p.pressure_slope = 0.0;
  auto gait = [&](double step_hz, double amp_lo, double amp_hi, double rot) {
    const double a = span(amp_lo, amp_hi);
    p.acc = {{step_hz, a, ph(rng)}, {2.0 * step_hz, 0.3 * a, ph(rng)}};
    p.gyr = {{step_hz / 2.0, rot, ph(rng)}, {step_hz, 0.5 * rot, ph(rng)}};
  };
  switch (label) {
    case ClassLabel::kStill:
      p.acc_noise = 0.02;
      break;
    case ClassLabel::kWalk:
      gait(2.0, 1.5, 2.5, 0.8);
      p.acc_noise = 0.15;
      break;
    case ClassLabel::kRun:
      gait(3.0, 5.0, 7.0, 2.0);
      p.acc_noise = 0.3;
      break;
    case ClassLabel::kBike:
      gait(1.0, 0.8, 1.2, 0.4);
      p.acc_noise = 0.2;
      break;
    case ClassLabel::kCar:
      p.acc = narrowband(12.0, 1.0, span(0.3, 0.5), 16, rng);
      p.gyr = narrowband(0.3, 0.1, 0.1, 4, rng);
      p.mag = narrowband(0.5, 0.3, 2.0, 6, rng);
      p.pressure_slope = span(-0.01, 0.01);
      break;
    case ClassLabel::kBus:
      p.acc = narrowband(6.0, 0.8, span(0.4, 0.6), 16, rng);
      p.gyr = narrowband(0.2, 0.1, 0.08, 4, rng);
      p.mag = narrowband(0.8, 0.3, 4.0, 6, rng);
      p.pressure_slope = span(-0.005, 0.005);
      break;
    case ClassLabel::kTrain:
      p.acc = narrowband(20.0, 1.5, span(0.2, 0.4), 16, rng);
      p.mag = narrowband(2.0, 1.0, 12.0, 8, rng);
      break;
    case ClassLabel::kSubway:
      p.acc = narrowband(32.0, 2.0, span(0.5, 0.7), 16, rng);
      p.mag = narrowband(1.0, 0.8, 20.0, 8, rng);
      break;
  }
  return p;
}

// Sums a set of tones sample by sample, advancing each by a fixed rotation
// instead of calling sin() per sample.
class ToneBank {
 public:
  explicit ToneBank(const std::vector<Tone>& tones) {
    for (const auto& t : tones) {
      amp_.push_back(t.amp);
      re_.push_back(std::cos(t.phase));
      im_.push_back(std::sin(t.phase));
      const double w = kTwoPi * t.freq / dsp::kSampleRateHz;
      rot_re_.push_back(std::cos(w));
      rot_im_.push_back(std::sin(w));
    }
  }

  // Value at the current sample, then advance by one sample.
  double next() {
    double v = 0.0;
    for (std::size_t i = 0; i < amp_.size(); ++i) {
      v += amp_[i] * im_[i];
      const double re = re_[i] * rot_re_[i] - im_[i] * rot_im_[i];
      im_[i] = re_[i] * rot_im_[i] + im_[i] * rot_re_[i];
      re_[i] = re;
    }
    return v;
  }

 private:
  std::vector<double> amp_, re_, im_, rot_re_, rot_im_;
};

std::array<double, 3> random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  while (true) {
    std::array<double, 3> v{n(rng), n(rng), n(rng)};
    const double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (len > 1e-6) return {v[0] / len, v[1] / len, v[2] / len};
  }
}

RawRecording synth_recording(ClassLabel label, std::mt19937_64& rng) {
  const std::size_t n = dsp::kSamplesPerRecording;
  const ClassProfile p = profile_for(label, rng);
  const auto up = random_unit(rng);       // gravity direction in the phone frame
  const auto field = random_unit(rng);    // geomagnetic direction
  const auto rot_axis = random_unit(rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double field_strength = 40.0 + 10.0 * u(rng);
  const double pressure0 = 1000.0 + 25.0 * u(rng);
  const double theta0 = kTwoPi * u(rng);

  std::map<std::string, std::vector<float>> ch;
  for (const auto& id : channel_ids()) ch[id].resize(n);
  ToneBank acc_tones(p.acc), gyr_tones(p.gyr), mag_tones(p.mag);
  std::array<float*, 3> acc_ch, gra_ch, lacc_ch, gyr_ch, mag_ch;
  const char* axes[] = {"x", "y", "z"};
  for (std::size_t a = 0; a < 3; ++a) {
    const std::string ax = axes[a];
    acc_ch[a] = ch["Acc_" + ax].data();
    gra_ch[a] = ch["Gra_" + ax].data();
    lacc_ch[a] = ch["LAcc_" + ax].data();
    gyr_ch[a] = ch["Gyr_" + ax].data();
    mag_ch[a] = ch["Mag_" + ax].data();
  }
  float* ori[] = {ch["Ori_w"].data(), ch["Ori_x"].data(), ch["Ori_y"].data(), ch["Ori_z"].data()};
  float* pressure = ch["Pressure"].data();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / dsp::kSampleRateHz;
    // Acceleration along the gravity direction keeps |Acc| equal to the
    // magnitude profile regardless of how the phone is held.
    const double mag_acc = kGravity + acc_tones.next() + p.acc_noise * noise(rng);
    const double gyr = gyr_tones.next();
    const double mag_pert = mag_tones.next();
    for (std::size_t a = 0; a < 3; ++a) {
      const double gra = kGravity * up[a];
      const double acc = mag_acc * up[a];
      acc_ch[a][i] = static_cast<float>(acc);
      gra_ch[a][i] = static_cast<float>(gra);
      lacc_ch[a][i] = static_cast<float>(acc - gra);
      gyr_ch[a][i] = static_cast<float>(gyr * rot_axis[a] + p.gyr_noise * noise(rng));
      mag_ch[a][i] = static_cast<float>((field_strength + mag_pert) * field[a] + p.mag_noise * noise(rng));
    }
    // Unit quaternion rotating slowly about rot_axis.
    const double theta = theta0 + 0.2 * gyr;
    const double s = std::sin(theta / 2.0);
    ori[0][i] = static_cast<float>(std::cos(theta / 2.0));
    ori[1][i] = static_cast<float>(s * rot_axis[0]);
    ori[2][i] = static_cast<float>(s * rot_axis[1]);
    ori[3][i] = static_cast<float>(s * rot_axis[2]);
    pressure[i] = static_cast<float>(pressure0 + p.pressure_slope * t + 0.01 * noise(rng));
  }

  RawRecording rec;
  for (auto& [id, values] : ch) rec.channels[id] = dsp::Signal{std::move(values), dsp::kSampleRateHz, id};
  rec.labels.assign(n, static_cast<int>(label));
  return rec;
}

}  // namespace

std::vector<RawRecording> generate_synthetic(std::uint64_t seed, std::size_t n_per_class) {
  if (n_per_class == 0) throw ConfigError("generate_synthetic: n_per_class must be positive");
  std::mt19937_64 rng(seed);
  std::vector<RawRecording> recs;
  recs.reserve(n_per_class * kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (std::size_t k = 0; k < n_per_class; ++k) recs.push_back(synth_recording(class_from_index(c), rng));
  }
  // Interleave classes in a seeded order so a chronological split sees all of them.
  std::vector<std::size_t> perm(recs.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(perm[i], perm[pick(rng)]);
  }
  std::vector<RawRecording> ordered(recs.size());
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    ordered[pos] = std::move(recs[perm[pos]]);
    ordered[pos].order_index = pos;
  }
  return ordered;
}

// ---------------------------------------------------------------- held-out test set

HeldOutTestSet::HeldOutTestSet(std::vector<RawRecording> recordings) : recordings_(std::move(recordings)) {
  labels_.reserve(recordings_.size());
  for (auto& rec : recordings_) {
    labels_.push_back(assign_label(rec));
    rec.labels.clear();
    rec.labels.shrink_to_fit();
  }
}

}  // namespace tmd::data
