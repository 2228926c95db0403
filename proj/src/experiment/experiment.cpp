#include "tmd/experiment/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tmd/errors.hpp"
#include "tmd/fusion/fusion.hpp"

namespace tmd::experiment {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Alternatives of one run key. A purely numeric piece re-joins its left
// neighbour, so "spectrogram/none/log/550,250" survives as one recipe.
std::vector<std::string> alternatives(const std::string& value) {
  std::vector<std::string> out;
  for (auto& piece : split_on(value, ',')) {
    if (all_digits(piece) && !out.empty() && !out.back().empty() && std::isdigit(static_cast<unsigned char>(out.back().back())) &&
        out.back().find('/') != std::string::npos) {
      out.back() += "," + piece;
    } else {
      out.push_back(piece);
    }
  }
  for (const auto& a : out) {
    if (a.empty()) throw ConfigError("suite: empty alternative in '" + value + "'");
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_floating_point_v<T>) {
      v = static_cast<T>(std::stod(text, &used));
    } else {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
      v = static_cast<T>(std::stoull(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("suite: '" + key + "' expects a number, got '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto t = lower(text);
  if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
  if (t == "false" || t == "no" || t == "0" || t == "off") return false;
  throw ConfigError("suite: '" + key + "' expects true or false, got '" + text + "'");
}

const std::vector<std::string>& run_keys() {
  static const std::vector<std::string> keys = {"sensors",    "recipe",        "fusion",       "epochs",
                                                "seeds",      "base_seed",     "batch_size",   "learning_rate",
                                                "standardize", "blend_period", "blend_floor"};
  return keys;
}

using Setter = std::function<void(train::RunConfig&)>;

// One setter per alternative of `key`.
std::vector<Setter> setters_for(const std::string& key, const std::string& value) {
  std::vector<Setter> out;
  const auto v = lower(trim(value));
  if (key == "sensors" && v == "grid") {
    for (const auto& sel : data::per_signal_grid()) out.push_back([sel](train::RunConfig& c) { c.sensors = {sel}; });
    return out;
  }
  if (key == "recipe" && v == "all") {
    for (const auto& r : dsp::preprocessing_recipes()) out.push_back([r](train::RunConfig& c) { c.recipe = r; });
    return out;
  }
  if (key == "fusion" && v == "all") {
    for (auto m : fusion::all_fusion_modes()) out.push_back([m](train::RunConfig& c) { c.fusion = m; });
    return out;
  }
  for (const auto& alt : alternatives(value)) {
    if (key == "sensors") {
      std::vector<data::ChannelSelector> sel;
      for (const auto& part : split_on(alt, '+')) sel.push_back(data::ChannelSelector::parse(part));
      out.push_back([sel](train::RunConfig& c) { c.sensors = sel; });
    } else if (key == "recipe") {
      const auto r = dsp::Recipe::parse(alt);
      out.push_back([r](train::RunConfig& c) { c.recipe = r; });
    } else if (key == "fusion") {
      const auto l = lower(alt);
      if (l == "baseline" || l == "none") {
        out.push_back([](train::RunConfig& c) { c.fusion.reset(); });
      } else {
        const auto m = fusion::parse_mode(alt);
        out.push_back([m](train::RunConfig& c) { c.fusion = m; });
      }
    } else if (key == "epochs") {
      const auto n = parse_number<std::size_t>(key, alt);
      out.push_back([n](train::RunConfig& c) { c.epochs = n; });
    } else if (key == "seeds") {
      const auto n = parse_number<std::size_t>(key, alt);
      out.push_back([n](train::RunConfig& c) { c.n_seeds = n; });
    } else if (key == "base_seed") {
      const auto n = parse_number<std::uint64_t>(key, alt);
      out.push_back([n](train::RunConfig& c) { c.base_seed = n; });
    } else if (key == "batch_size") {
      const auto n = parse_number<std::size_t>(key, alt);
      out.push_back([n](train::RunConfig& c) { c.batch_size = n; });
    } else if (key == "learning_rate") {
      const auto x = parse_number<float>(key, alt);
      out.push_back([x](train::RunConfig& c) { c.optimizer.learning_rate = x; });
    } else if (key == "standardize") {
      const bool b = parse_bool(key, alt);
      out.push_back([b](train::RunConfig& c) { c.standardize = b; });
    } else if (key == "blend_period") {
      const auto n = parse_number<std::size_t>(key, alt);
      out.push_back([n](train::RunConfig& c) { c.blend_period = n; });
    } else if (key == "blend_floor") {
      const auto x = parse_number<float>(key, alt);
      out.push_back([x](train::RunConfig& c) { c.blend_floor = x; });
    }
  }
  return out;
}

using Section = boost::property_tree::ptree;

void check_keys(const Section& sec, const std::string& name, const std::vector<std::string>& allowed) {
  for (const auto& [key, child] : sec) {
    if (!child.empty()) throw ConfigError("suite: nested key '" + key + "' in [" + name + "]");
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("suite: unknown key '" + key + "' in [" + name + "]");
    }
  }
}

std::vector<train::RunConfig> expand(const Section& run, const Section* defaults) {
  std::vector<train::RunConfig> configs(1);
  bool has_sensors = false;
  for (const auto& key : run_keys()) {
    boost::optional<std::string> value = run.get_optional<std::string>(key);
    if (!value && defaults) value = defaults->get_optional<std::string>(key);
    if (!value) continue;
    if (key == "sensors") has_sensors = true;
    const auto setters = setters_for(key, *value);
    std::vector<train::RunConfig> next;
    for (const auto& c : configs) {
      for (const auto& set : setters) {
        next.push_back(c);
        set(next.back());
      }
    }
    configs = std::move(next);
  }
  if (!has_sensors) throw ConfigError("suite: run section without 'sensors'");
  return configs;
}

}  // namespace

// ---------------------------------------------------------------- data source

nlohmann::json DataSource::to_json() const {
  nlohmann::json j;
  if (kind == Kind::kSynthetic) {
    j["kind"] = "synthetic";
    j["n_per_class"] = n_per_class;
    j["seed"] = seed;
  } else {
    j["kind"] = "shl";
    j["dir"] = shl_dir.string();
    if (test_dir) j["test_dir"] = test_dir->string();
  }
  return j;
}

fs::path resolve_shl_dir(const std::optional<fs::path>& explicit_dir) {
  fs::path dir;
  if (explicit_dir && !explicit_dir->empty()) {
    dir = *explicit_dir;
  } else if (const char* env = std::getenv(kShlDirEnv); env && *env) {
    dir = env;
  }
  if (dir.empty() || !fs::is_directory(dir)) {
    const std::string where = dir.empty() ? std::string("no SHL dataset directory given")
                                          : "SHL dataset directory '" + dir.string() + "' does not exist";
    throw DatasetError(where +
                       ". To use the real data, download the SHL 2018 challenge training set (one text file per "
                       "channel plus Label.txt) and pass --shl-dir <path> or set " +
                       kShlDirEnv + ". To run without it, use --synthetic n_per_class=K seed=S.");
  }
  return dir;
}

std::string protocol_name(Protocol p) { return p == Protocol::kTest ? "test" : "validation"; }

// ---------------------------------------------------------------- stream provider

StreamProvider::StreamProvider(DataSource source, std::size_t jobs) : source_(std::move(source)), jobs_(std::max<std::size_t>(jobs, 1)) {
  if (source_.kind == DataSource::Kind::kShl) {
    source_.shl_dir = resolve_shl_dir(source_.shl_dir.empty() ? std::nullopt : std::optional<fs::path>(source_.shl_dir));
  } else {
    if (source_.n_per_class == 0) throw ConfigError("synthetic data needs n_per_class >= 1");
  }
}

std::vector<data::RawRecording> StreamProvider::load(const std::vector<std::string>& channels, const fs::path& dir) {
  const auto manifest = source_.manifest ? data::Manifest::load(*source_.manifest) : data::Manifest::defaults();
  return data::load_shl_directory(dir, manifest, channels);
}

void StreamProvider::ensure_labels() {
  if (labels_) return;
  std::vector<std::size_t> labels;
  auto collect = [&](const std::vector<data::RawRecording>& recs) {
    for (const auto& r : recs) labels.push_back(data::class_index(data::assign_label(r)));
  };
  if (source_.kind == DataSource::Kind::kSynthetic) {
    if (!synthetic_) synthetic_ = data::generate_synthetic(source_.seed, source_.n_per_class);
    collect(*synthetic_);
  } else {
    collect(load({"Pressure"}, source_.shl_dir));
  }
  split_ = data::chronological_split(labels.size());
  labels_ = std::move(labels);
}

std::size_t StreamProvider::size() {
  std::lock_guard lock(mutex_);
  ensure_labels();
  return labels_->size();
}

const data::SplitIndices& StreamProvider::split() {
  std::lock_guard lock(mutex_);
  ensure_labels();
  return *split_;
}

const train::PreparedSet& StreamProvider::stream(const data::ChannelSelector& selector, const dsp::Recipe& recipe) {
  std::lock_guard lock(mutex_);
  const auto key = std::make_pair(selector.name(), recipe.name());
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  train::RunConfig cfg;
  cfg.sensors = {selector};
  cfg.recipe = recipe;
  train::PreparedSet set;
  if (source_.kind == DataSource::Kind::kSynthetic) {
    ensure_labels();
    set = train::prepare(*synthetic_, cfg, true, jobs_);
  } else {
    const auto recs = load(selector.source_channels(), source_.shl_dir);
    set = train::prepare(recs, cfg, true, jobs_);
    if (!labels_) {
      labels_ = set.labels;
      split_ = data::chronological_split(set.size());
    }
  }
  if (set.labels != *labels_) throw DatasetError("recordings changed between channel loads", source_.shl_dir.string());
  return cache_.emplace(key, std::move(set)).first->second;
}

train::PreparedSet StreamProvider::streams(const train::RunConfig& cfg) {
  train::PreparedSet out;
  for (const auto& sel : cfg.sensors) {
    const auto& s = stream(sel, cfg.recipe);
    if (out.inputs.empty()) {
      out.inputs.resize(s.size());
      out.labels = s.labels;
    }
    out.sensors.push_back(s.sensors.at(0));
    out.shapes.push_back(s.shapes.at(0));
    for (std::size_t i = 0; i < s.size(); ++i) out.inputs[i].push_back(s.inputs[i].at(0));
  }
  return out;
}

dsp::Signal StreamProvider::signal(std::size_t index, const data::ChannelSelector& selector) {
  const std::array<data::ChannelSelector, 1> sel{selector};
  if (source_.kind == DataSource::Kind::kSynthetic) {
    std::lock_guard lock(mutex_);
    ensure_labels();
    if (index >= synthetic_->size()) {
      throw ConfigError("sample " + std::to_string(index) + " out of range (" + std::to_string(synthetic_->size()) +
                        " recordings)");
    }
    return data::select_channels((*synthetic_)[index], sel).at(0);
  }
  const auto recs = load(selector.source_channels(), source_.shl_dir);
  if (index >= recs.size()) {
    throw ConfigError("sample " + std::to_string(index) + " out of range (" + std::to_string(recs.size()) +
                      " recordings)");
  }
  return data::select_channels(recs[index], sel).at(0);
}

data::HeldOutTestSet StreamProvider::test_set(const train::RunConfig& cfg) {
  if (source_.kind == DataSource::Kind::kSynthetic) {
    return data::HeldOutTestSet(data::generate_synthetic(source_.seed ^ 0x7e57da7aULL, source_.n_per_class));
  }
  if (!source_.test_dir) {
    throw DatasetError("the test protocol needs the labelled SHL test recordings; set test_dir in the suite");
  }
  if (!fs::is_directory(*source_.test_dir)) {
    throw DatasetError("SHL test directory '" + source_.test_dir->string() + "' does not exist");
  }
  return data::HeldOutTestSet(load(data::required_channels(cfg.sensors), *source_.test_dir));
}

// ---------------------------------------------------------------- suites

void ExperimentSuite::validate() const {
  if (runs.empty()) throw ConfigError("suite: no runs");
  if (jobs < 1) throw ConfigError("suite: jobs must be >= 1");
  std::map<std::string, std::string> seen;
  for (const auto& r : runs) {
    r.config.validate();
    const auto h = r.config.hash();
    if (auto [it, fresh] = seen.emplace(h, r.name); !fresh) {
      throw ConfigError("suite: runs in [" + it->second + "] and [" + r.name + "] resolve to the same configuration (hash " +
                        h + ")");
    }
  }
}

ExperimentSuite parse_suite_text(const std::string& text) {
  Section root;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("suite: ") + e.what());
  }
  ExperimentSuite suite;
  const Section* defaults = nullptr;
  for (const auto& [name, sec] : root) {
    if (sec.empty() && !sec.data().empty()) throw ConfigError("suite: key '" + name + "' outside a section");
    if (name == "defaults") defaults = &sec;
  }
  if (defaults) check_keys(*defaults, "defaults", run_keys());
  bool saw_suite = false;
  for (const auto& [name, sec] : root) {
    if (name == "suite") {
      saw_suite = true;
      check_keys(sec, name,
                 {"output", "dataset", "shl_dir", "test_dir", "manifest", "synthetic_n_per_class", "synthetic_seed",
                  "jobs", "protocol"});
      if (auto v = sec.get_optional<std::string>("output")) suite.output_dir = trim(*v);
      const auto kind = lower(sec.get<std::string>("dataset", "synthetic"));
      if (kind == "synthetic") {
        suite.source.kind = DataSource::Kind::kSynthetic;
      } else if (kind == "shl") {
        suite.source.kind = DataSource::Kind::kShl;
      } else {
        throw ConfigError("suite: dataset must be synthetic or shl, got '" + kind + "'");
      }
      if (auto v = sec.get_optional<std::string>("shl_dir")) suite.source.shl_dir = trim(*v);
      if (auto v = sec.get_optional<std::string>("test_dir")) suite.source.test_dir = fs::path(trim(*v));
      if (auto v = sec.get_optional<std::string>("manifest")) suite.source.manifest = fs::path(trim(*v));
      if (auto v = sec.get_optional<std::string>("synthetic_n_per_class")) {
        suite.source.n_per_class = parse_number<std::size_t>("synthetic_n_per_class", trim(*v));
      }
      if (auto v = sec.get_optional<std::string>("synthetic_seed")) {
        suite.source.seed = parse_number<std::uint64_t>("synthetic_seed", trim(*v));
      }
      if (auto v = sec.get_optional<std::string>("jobs")) suite.jobs = parse_number<std::size_t>("jobs", trim(*v));
      const auto proto = lower(sec.get<std::string>("protocol", "validation"));
      if (proto == "validation") {
        suite.protocol = Protocol::kValidation;
      } else if (proto == "test") {
        suite.protocol = Protocol::kTest;
      } else {
        throw ConfigError("suite: protocol must be validation or test, got '" + proto + "'");
      }
    } else if (name == "defaults") {
      continue;
    } else if (name.rfind("run", 0) == 0) {
      check_keys(sec, name, run_keys());
      const auto configs = expand(sec, defaults);
      for (std::size_t i = 0; i < configs.size(); ++i) {
        suite.runs.push_back({configs.size() == 1 ? name : name + "#" + std::to_string(i + 1), configs[i]});
      }
    } else {
      throw ConfigError("suite: unknown section [" + name + "]");
    }
  }
  if (!saw_suite) throw ConfigError("suite: missing [suite] section");
  suite.validate();
  return suite;
}

ExperimentSuite load_suite(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("suite: cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_suite_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

SuiteResult run_suite(const ExperimentSuite& suite, StreamProvider& provider) {
  suite.validate();
  const std::size_t n = suite.runs.size();
  // Every stream is prepared up front (itself parallel), so the workers
  // below only read the cache.
  for (const auto& r : suite.runs) provider.streams(r.config);
  const auto& split = provider.split();

  const std::size_t outer = std::clamp<std::size_t>(suite.jobs, 1, n);
  const std::size_t inner = std::max<std::size_t>(1, suite.jobs / outer);
  SuiteResult result;
  result.records.resize(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const auto& cfg = suite.runs[i].config;
        const auto all = provider.streams(cfg);
        const auto train_set = all.subset(split.train);
        const auto val_set = all.subset(split.validation);
        if (suite.protocol == Protocol::kTest) {
          result.records[i] = train::final_test_run(cfg, train_set, val_set, provider.test_set(cfg), inner);
        } else {
          result.records[i] = train::repeat_runs(cfg, train_set, val_set, inner);
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < outer; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);

  fs::create_directories(suite.output_dir / "runs");
  nlohmann::json timings = nlohmann::json::object();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = result.records[i];
    auto j = rec.to_json(false);
    j["run_name"] = suite.runs[i].name;
    j["data"] = provider.source().to_json();
    const auto path = suite.output_dir / "runs" / (rec.config.hash() + ".json");
    write_text(path, j.dump(2) + "\n");
    result.record_files.push_back(path);
    timings[rec.config.hash()] = rec.wall_time_s;
    result.any_failed = result.any_failed || rec.any_failed();
  }
  write_text(suite.output_dir / "timings.json", timings.dump(2) + "\n");
  write_tables(result.records, suite.output_dir);
  return result;
}

SuiteResult run_suite(const ExperimentSuite& suite) {
  StreamProvider provider(suite.source, suite.jobs);
  return run_suite(suite, provider);
}

// ---------------------------------------------------------------- tables

std::string format_cell(double mean, double stddev) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", mean * 100.0, stddev * 100.0);
  return buf;
}

std::pair<double, double> parse_cell(const std::string& cell) {
  const std::string pm = "±";
  const auto at = cell.find(pm);
  if (at == std::string::npos) throw ConfigError("cell '" + cell + "' is not 'mean ± std'");
  const auto a = trim(cell.substr(0, at));
  const auto b = trim(cell.substr(at + pm.size()));
  return {parse_number<double>("cell", a), parse_number<double>("cell", b)};
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

bool single_baseline(const train::RunConfig& c) { return !c.fusion && c.sensors.size() == 1; }

std::string cell_of(const train::RunRecord& r) { return format_cell(r.report.mean, r.report.stddev); }

std::string sensor_combo(const train::RunConfig& c) {
  std::string s;
  for (const auto& sel : c.sensors) s += (s.empty() ? "" : "+") + sel.name();
  return s;
}

}  // namespace

std::string Table::to_csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
    out += "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::size_t Table::filled_cells() const {
  std::size_t n = 0;
  for (const auto& r : rows) {
    for (std::size_t i = label_columns; i < r.size(); ++i) n += !r[i].empty();
  }
  return n;
}

Table per_sensor_table(const std::vector<train::RunRecord>& records) {
  using data::Axis;
  using data::Sensor;
  const std::vector<Sensor> sensors = {Sensor::kAcc, Sensor::kLAcc, Sensor::kGra, Sensor::kGyr,
                                       Sensor::kMag, Sensor::kOri,  Sensor::kPressure};
  const std::vector<Axis> axes = {Axis::kX, Axis::kY, Axis::kZ, Axis::kNorm, Axis::kW};
  Table t;
  t.header.push_back("axis");
  for (auto s : sensors) t.header.push_back(data::sensor_name(s));
  for (auto a : axes) {
    std::vector<std::string> row = {data::axis_name(a)};
    for (auto s : sensors) {
      std::string cell;
      for (const auto& r : records) {
        const auto& c = r.config;
        if (single_baseline(c) && c.recipe == dsp::default_recipe() && c.sensors[0] == data::ChannelSelector{s, a}) {
          cell = cell_of(r);
        }
      }
      row.push_back(cell);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table preprocessing_table(const std::vector<train::RunRecord>& records) {
  std::vector<std::string> signals;
  for (const auto& r : records) {
    if (!single_baseline(r.config)) continue;
    const auto name = r.config.sensors[0].name();
    if (std::find(signals.begin(), signals.end(), name) == signals.end()) signals.push_back(name);
  }
  Table t;
  t.header = {"mode", "interpolation", "power", "size"};
  t.label_columns = 4;
  t.header.insert(t.header.end(), signals.begin(), signals.end());
  for (const auto& recipe : dsp::preprocessing_recipes()) {
    std::vector<std::string> cells(signals.size());
    bool any = false;
    for (const auto& r : records) {
      if (!single_baseline(r.config) || !(r.config.recipe == recipe)) continue;
      const auto pos = std::find(signals.begin(), signals.end(), r.config.sensors[0].name()) - signals.begin();
      cells[static_cast<std::size_t>(pos)] = cell_of(r);
      any = true;
    }
    if (!any) continue;
    std::vector<std::string> row;
    switch (recipe.kind) {
      case dsp::RepresentationKind::kTemporal: row = {"temporal", "", "", "6000"}; break;
      case dsp::RepresentationKind::kFft: row = {"fft", "", "", "6000"}; break;
      case dsp::RepresentationKind::kSpectrogram: {
        const char* interp = recipe.interpolation == dsp::FreqAxis::kNone     ? "none"
                             : recipe.interpolation == dsp::FreqAxis::kLinear ? "linear"
                                                                               : "log-freq";
        row = {"spectrogram", interp, recipe.power == dsp::PowerScale::kLog ? "log" : "linear",
               std::to_string(recipe.frames) + "x" + std::to_string(recipe.bins)};
        break;
      }
    }
    row.insert(row.end(), cells.begin(), cells.end());
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table fusion_table(const std::vector<train::RunRecord>& records) {
  const auto& modes = fusion::all_fusion_modes();
  std::vector<std::string> combos;
  for (const auto& r : records) {
    if (!r.config.fusion) continue;
    const auto c = sensor_combo(r.config);
    if (std::find(combos.begin(), combos.end(), c) == combos.end()) combos.push_back(c);
  }
  Table t;
  t.header.push_back("sensors");
  for (auto m : modes) t.header.push_back(fusion::mode_name(m));
  for (const auto& combo : combos) {
    std::vector<std::string> row = {combo};
    row.resize(1 + modes.size());
    for (const auto& r : records) {
      if (!r.config.fusion || sensor_combo(r.config) != combo) continue;
      const auto pos = std::find(modes.begin(), modes.end(), *r.config.fusion) - modes.begin();
      row[1 + static_cast<std::size_t>(pos)] = cell_of(r);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------- influence

namespace {

struct PairSwitch {
  std::string from, to;
  std::function<bool(const train::RunConfig&)> is_from, is_to;
  // Erases the switched attribute, so matching keys mean "identical otherwise".
  std::function<void(train::RunConfig&)> erase;
};

std::vector<PairSwitch> pair_switches() {
  using data::ChannelSelector;
  const auto acc = ChannelSelector::parse("|Acc|");
  auto sensor_switch = [acc](const std::string& from) {
    const auto sel = ChannelSelector::parse(from);
    return PairSwitch{sel.name(), acc.name(),
                      [sel](const train::RunConfig& c) { return c.sensors.size() == 1 && c.sensors[0] == sel; },
                      [acc](const train::RunConfig& c) { return c.sensors.size() == 1 && c.sensors[0] == acc; },
                      [acc](train::RunConfig& c) { c.sensors = {acc}; }};
  };
  const auto& r = dsp::preprocessing_recipes();
  auto recipe_switch = [](std::string from, std::string to, dsp::Recipe a, dsp::Recipe b) {
    return PairSwitch{std::move(from), std::move(to), [a](const train::RunConfig& c) { return c.recipe == a; },
                      [b](const train::RunConfig& c) { return c.recipe == b; },
                      [](train::RunConfig& c) { c.recipe = dsp::default_recipe(); }};
  };
  std::vector<PairSwitch> out;
  out.push_back(sensor_switch("Gyr_y"));
  out.push_back(sensor_switch("|Mag|"));
  out.push_back(sensor_switch("Ori_w"));
  out.push_back({"spectrogram, linear power", "spectrogram, log power",
                 [](const train::RunConfig& c) { return c.recipe.is_image() && c.recipe.power == dsp::PowerScale::kLinear; },
                 [](const train::RunConfig& c) { return c.recipe.is_image() && c.recipe.power == dsp::PowerScale::kLog; },
                 [](train::RunConfig& c) { c.recipe.power = dsp::PowerScale::kLog; }});
  out.push_back(recipe_switch("550x250 spectrogram, log power", "48x48 spectrogram, linear freq, log power", r[3], r[5]));
  out.push_back(recipe_switch("550x250 spectrogram, log power", "48x48 spectrogram, log freq, log power", r[3], r[7]));
  out.push_back(recipe_switch("temporal", "48x48 spectrogram, log freq, log power", r[0], r[7]));
  return out;
}

std::string key_of(train::RunConfig c, const std::function<void(train::RunConfig&)>& erase) {
  erase(c);
  return c.to_json().dump();
}

double percent(const train::RunRecord& r) { return r.report.mean * 100.0; }
bool learned(const train::RunRecord& r) { return r.report.mean >= kLearnedNothingF1; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<InfluenceRow> summarize_influence(const std::vector<train::RunRecord>& records, bool require_all) {
  std::vector<InfluenceRow> rows;
  auto finish = [&](InfluenceRow row, double sum) {
    if (row.pairs == 0) {
      if (require_all) {
        throw ConfigError("influence: no counterpart runs for the switch '" + row.from + "' -> '" + row.to +
                          "' (runs scoring below 10% are excluded)");
      }
      return;
    }
    row.gain = sum / static_cast<double>(row.pairs);
    rows.push_back(std::move(row));
  };

  for (const auto& sw : pair_switches()) {
    InfluenceRow row{sw.from, sw.to, 0.0, 0};
    double sum = 0.0;
    for (const auto& a : records) {
      if (!sw.is_from(a.config) || !learned(a)) continue;
      const auto ka = key_of(a.config, sw.erase);
      for (const auto& b : records) {
        if (&a == &b || !sw.is_to(b.config) || !learned(b)) continue;
        if (key_of(b.config, sw.erase) != ka) continue;
        sum += (b.report.mean - a.report.mean) * 100.0;
        ++row.pairs;
      }
    }
    finish(std::move(row), sum);
  }

  // Fusion: groups of runs that differ only in the mode.
  std::map<std::string, std::vector<double>> groups;
  for (const auto& r : records) {
    if (!r.config.fusion || !learned(r)) continue;
    groups[key_of(r.config, [](train::RunConfig& c) { c.fusion = fusion::FusionMode::kScoreAverage; })].push_back(
        percent(r));
  }
  InfluenceRow row{"median fusion mode", "best fusion mode", 0.0, 0};
  double sum = 0.0;
  for (const auto& [key, scores] : groups) {
    if (scores.size() < 2) continue;
    sum += *std::max_element(scores.begin(), scores.end()) - median(scores);
    ++row.pairs;
  }
  finish(std::move(row), sum);
  return rows;
}

Table influence_table(const std::vector<InfluenceRow>& rows) {
  Table t;
  t.header = {"from", "to", "gain", "pairs"};
  t.label_columns = 2;
  for (const auto& r : rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.2f", r.gain);
    t.rows.push_back({r.from, r.to, buf, std::to_string(r.pairs)});
  }
  return t;
}

void write_tables(const std::vector<train::RunRecord>& records, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "per_sensor.csv", per_sensor_table(records).to_csv());
  write_text(dir / "preprocessing.csv", preprocessing_table(records).to_csv());
  write_text(dir / "fusion.csv", fusion_table(records).to_csv());
  write_text(dir / "influence.csv", influence_table(summarize_influence(records, false)).to_csv());
}

// ---------------------------------------------------------------- diagnostics

void dump_spectrogram(const dsp::Signal& signal, const dsp::Recipe& recipe, const fs::path& stem) {
  if (!recipe.is_image()) {
    throw ConfigError("recipe '" + recipe.name() + "' is not an image; pick a spectrogram recipe to dump");
  }
  const auto spec = dsp::spectrogram_for(signal, recipe);
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  auto with = [&](const char* ext) {
    fs::path p = stem;
    p += ext;
    return p;
  };
  dsp::write_spectrogram_csv(spec, with(".csv"));
  dsp::write_spectrogram_pgm(spec, with(".pgm"));
}

}  // namespace tmd::experiment
