// Command-line driver: suites, single runs and spectrogram dumps.
//
// Exit codes: 0 success, 1 configuration error, 2 dataset error, 3 run
// failure (a seed aborted on a non-finite loss).

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tmd/errors.hpp"
#include "tmd/experiment/experiment.hpp"

namespace {

namespace ex = tmd::experiment;

enum Exit { kOk = 0, kConfig = 1, kDataset = 2, kRunFailure = 3 };

// "n_per_class=K seed=S" (either order, both optional).
void apply_synthetic_args(const std::vector<std::string>& args, ex::DataSource& src) {
  src.kind = ex::DataSource::Kind::kSynthetic;
  for (const auto& a : args) {
    if (a.empty()) continue;  // bare --synthetic
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw tmd::ConfigError("--synthetic expects key=value, got '" + a + "'");
    const auto key = a.substr(0, eq);
    const auto value = a.substr(eq + 1);
    try {
      std::size_t used = 0;
      const auto v = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      if (key == "n_per_class") {
        src.n_per_class = v;
      } else if (key == "seed") {
        src.seed = v;
      } else {
        throw tmd::ConfigError("--synthetic: unknown key '" + key + "' (use n_per_class and seed)");
      }
    } catch (const std::logic_error&) {
      throw tmd::ConfigError("--synthetic: '" + key + "' needs a non-negative integer, got '" + value + "'");
    }
  }
}

std::string safe_file_part(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
      out += c;
    } else if (c == '|') {
      if (out.empty()) out += "norm_";
    } else {
      out += '_';
    }
  }
  return out;
}

void print_records(const ex::ExperimentSuite& suite, const ex::SuiteResult& result) {
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const auto& rec = result.records[i];
    std::string sensors;
    for (const auto& s : rec.config.sensors) sensors += (sensors.empty() ? "" : "+") + s.name();
    std::printf("%-24s %-18s %-28s %-34s %s%s\n", suite.runs[i].name.c_str(), rec.config.mode_label().c_str(),
                sensors.c_str(), rec.config.recipe.name().c_str(),
                ex::format_cell(rec.report.mean, rec.report.stddev).c_str(),
                rec.any_failed() ? "  (failed seeds)" : "");
  }
  std::printf("results in %s\n", suite.output_dir.string().c_str());
}

int run(int argc, char** argv) {
  CLI::App app{"Transport-mode detection experiments"};
  app.set_version_flag("--version", tmd::train::kCodeVersion);

  std::optional<std::string> suite_file, shl_dir, test_dir, out_dir;
  std::vector<std::string> synthetic_args;
  std::optional<std::size_t> jobs;
  std::vector<std::string> dump_args;

  app.add_option("--suite", suite_file, "INI file listing the runs");
  auto* synth = app.add_option("--synthetic", synthetic_args, "use generated data: n_per_class=K seed=S")
                    ->expected(0, 2)
                    ->allow_extra_args(false);
  app.add_option("--shl-dir", shl_dir, std::string("SHL challenge directory (default: $") + ex::kShlDirEnv + ")");
  app.add_option("--test-dir", test_dir, "labelled SHL test directory for --protocol test");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--dump-spectrogram", dump_args, "write <out>/spectrogram_<idx>_<signal>.{pgm,csv}: IDX RECIPE")
      ->expected(2);

  std::string sensors = "|Acc|", recipe = tmd::dsp::default_recipe().name(), mode = "baseline", protocol = "validation";
  tmd::train::RunConfig defaults;
  std::size_t epochs = defaults.epochs, seeds = defaults.n_seeds, batch = defaults.batch_size;
  std::uint64_t base_seed = defaults.base_seed;
  float lr = defaults.optimizer.learning_rate;
  app.add_option("--sensors", sensors, "single run: sensors joined by '+'")->capture_default_str();
  app.add_option("--recipe", recipe, "single run: preprocessing pipeline")->capture_default_str();
  app.add_option("--fusion", mode, "single run: fusion mode or 'baseline'")->capture_default_str();
  app.add_option("--epochs", epochs, "single run: epochs")->capture_default_str();
  app.add_option("--seeds", seeds, "single run: number of seeds")->capture_default_str();
  app.add_option("--base-seed", base_seed, "single run: first seed")->capture_default_str();
  app.add_option("--batch-size", batch, "single run: mini-batch size")->capture_default_str();
  app.add_option("--learning-rate", lr, "single run: Adam step size")->capture_default_str();
  app.add_option("--protocol", protocol, "single run: validation or test")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    ex::ExperimentSuite suite;
    if (suite_file) {
      suite = ex::load_suite(*suite_file);
    } else {
      // Single run from flags; the dataset defaults to SHL.
      suite.source.kind = ex::DataSource::Kind::kShl;
      suite.output_dir = "results";
      tmd::train::RunConfig cfg;
      cfg.sensors.clear();
      for (std::size_t start = 0;;) {
        const auto plus = sensors.find('+', start);
        cfg.sensors.push_back(tmd::data::ChannelSelector::parse(sensors.substr(start, plus - start)));
        if (plus == std::string::npos) break;
        start = plus + 1;
      }
      cfg.recipe = tmd::dsp::Recipe::parse(recipe);
      if (mode != "baseline") cfg.fusion = tmd::fusion::parse_mode(mode);
      cfg.epochs = epochs;
      cfg.n_seeds = seeds;
      cfg.base_seed = base_seed;
      cfg.batch_size = batch;
      cfg.optimizer.learning_rate = lr;
      if (protocol == "test") {
        suite.protocol = ex::Protocol::kTest;
      } else if (protocol != "validation") {
        throw tmd::ConfigError("--protocol must be validation or test, got '" + protocol + "'");
      }
      suite.runs.push_back({"cli", cfg});
    }
    if (synth->count() > 0) apply_synthetic_args(synthetic_args, suite.source);
    if (shl_dir) {
      if (synth->count() > 0) throw tmd::ConfigError("--synthetic and --shl-dir are mutually exclusive");
      suite.source.kind = ex::DataSource::Kind::kShl;
      suite.source.shl_dir = *shl_dir;
    }
    if (test_dir) suite.source.test_dir = *test_dir;
    if (out_dir) suite.output_dir = *out_dir;
    if (jobs) suite.jobs = *jobs;

    if (!dump_args.empty()) {
      std::size_t idx = 0;
      try {
        idx = std::stoull(dump_args[0]);
      } catch (const std::logic_error&) {
        throw tmd::ConfigError("--dump-spectrogram: sample index must be a non-negative integer");
      }
      const auto r = tmd::dsp::Recipe::parse(dump_args[1]);
      if (!r.is_image()) throw tmd::ConfigError("--dump-spectrogram: recipe '" + r.name() + "' is not an image");
      const auto selector = tmd::data::ChannelSelector::parse(sensors.substr(0, sensors.find('+')));
      ex::StreamProvider provider(suite.source, suite.jobs);
      const auto stem = suite.output_dir / ("spectrogram_" + std::to_string(idx) + "_" + safe_file_part(selector.name()));
      ex::dump_spectrogram(provider.signal(idx, selector), r, stem);
      std::printf("wrote %s.pgm and %s.csv\n", stem.string().c_str(), stem.string().c_str());
      return kOk;
    }

    const auto result = ex::run_suite(suite);
    print_records(suite, result);
    return result.any_failed ? kRunFailure : kOk;
  } catch (const tmd::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const tmd::DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kDataset;
  } catch (const tmd::RunFailure& e) {
    std::cerr << "run failure: " << e.what() << "\n";
    return kRunFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
}
