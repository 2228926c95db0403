#include "tmd/train/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "tmd/errors.hpp"
#include "tmd/nn/ops.hpp"

namespace tmd::train {

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads, rethrowing the first
// exception after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T, std::size_t N>
nlohmann::json array_json(const std::array<T, N>& a) {
  return nlohmann::json(std::vector<T>(a.begin(), a.end()));
}

template <std::size_t N>
std::array<std::size_t, N> array_from(const nlohmann::json& j, const char* what) {
  const auto v = j.get<std::vector<std::size_t>>();
  if (v.size() != N) throw ConfigError(std::string("config: ") + what + " needs " + std::to_string(N) + " entries");
  std::array<std::size_t, N> a{};
  std::copy(v.begin(), v.end(), a.begin());
  return a;
}

}  // namespace

// ---------------------------------------------------------------- RunConfig

void RunConfig::validate() const {
  if (sensors.empty()) throw ConfigError("config: at least one sensor is required");
  for (const auto& s : sensors) {
    if (!s.valid()) throw ConfigError("config: sensor " + s.name() + " is not a grid cell");
  }
  if (!fusion && sensors.size() != 1) {
    throw ConfigError("config: the baseline takes exactly one sensor; set a fusion mode for " +
                      std::to_string(sensors.size()));
  }
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (n_seeds < 1) throw ConfigError("config: n_seeds must be >= 1");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (!(optimizer.learning_rate > 0.0f)) throw ConfigError("config: learning rate must be positive");
  if (blend_period < 1) throw ConfigError("config: blend period must be >= 1");
  if (!(blend_floor >= 0.0f) || blend_floor >= 1.0f) throw ConfigError("config: blend floor must be in [0, 1)");
}

std::string RunConfig::mode_label() const { return fusion ? fusion::mode_name(*fusion) : "baseline"; }

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  std::vector<std::string> names;
  for (const auto& s : sensors) names.push_back(s.name());
  j["sensors"] = names;
  j["recipe"] = recipe.name();
  j["fusion"] = mode_label();
  j["epochs"] = epochs;
  j["n_seeds"] = n_seeds;
  j["base_seed"] = base_seed;
  j["optimizer"] = {{"learning_rate", optimizer.learning_rate},
                    {"beta1", optimizer.beta1},
                    {"beta2", optimizer.beta2},
                    {"epsilon", optimizer.epsilon}};
  j["batch_size"] = batch_size;
  j["standardize"] = standardize;
  nlohmann::json m = nlohmann::json::object();
  if (model.conv_channels) m["conv_channels"] = array_json(*model.conv_channels);
  if (model.kernel) m["kernel"] = *model.kernel;
  if (model.pools) m["pools"] = array_json(*model.pools);
  if (model.hidden) m["hidden"] = *model.hidden;
  j["model"] = m;
  if (fusion == fusion::FusionMode::kGradientBlend) j["blend"] = {{"period", blend_period}, {"floor", blend_floor}};
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    for (const auto& s : j.at("sensors")) c.sensors.push_back(data::ChannelSelector::parse(s.get<std::string>()));
    if (j.contains("recipe")) c.recipe = dsp::Recipe::parse(j["recipe"].get<std::string>());
    if (j.contains("fusion") && j["fusion"].get<std::string>() != "baseline") {
      c.fusion = fusion::parse_mode(j["fusion"].get<std::string>());
    }
    c.epochs = j.value("epochs", c.epochs);
    c.n_seeds = j.value("n_seeds", c.n_seeds);
    c.base_seed = j.value("base_seed", c.base_seed);
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      c.optimizer.learning_rate = o.value("learning_rate", c.optimizer.learning_rate);
      c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
      c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
      c.optimizer.epsilon = o.value("epsilon", c.optimizer.epsilon);
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.standardize = j.value("standardize", c.standardize);
    if (j.contains("model")) {
      const auto& m = j["model"];
      if (m.contains("conv_channels")) c.model.conv_channels = array_from<3>(m["conv_channels"], "conv_channels");
      if (m.contains("kernel")) c.model.kernel = m["kernel"].get<std::size_t>();
      if (m.contains("pools")) c.model.pools = array_from<3>(m["pools"], "pools");
      if (m.contains("hidden")) c.model.hidden = m["hidden"].get<std::size_t>();
    }
    if (j.contains("blend")) {
      c.blend_period = j["blend"].value("period", c.blend_period);
      c.blend_floor = j["blend"].value("floor", c.blend_floor);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json().dump())));
  return buf;
}

// ---------------------------------------------------------------- data preparation

PreparedSet PreparedSet::subset(std::span<const std::size_t> indices) const {
  PreparedSet out;
  out.sensors = sensors;
  out.shapes = shapes;
  for (std::size_t i : indices) {
    out.inputs.push_back(inputs.at(i));
    if (!labels.empty()) out.labels.push_back(labels.at(i));
  }
  return out;
}

PreparedSet PreparedSet::join(const PreparedSet& a, const PreparedSet& b) {
  if (a.sensors != b.sensors || a.shapes != b.shapes) throw ConfigError("join: sets carry different streams");
  if (a.labels.empty() != b.labels.empty()) throw ConfigError("join: cannot mix labelled and unlabelled sets");
  PreparedSet out = a;
  out.inputs.insert(out.inputs.end(), b.inputs.begin(), b.inputs.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

namespace {

template <typename Get>
PreparedSet prepare_impl(std::size_t n, Get&& get, const RunConfig& cfg, bool with_labels, std::size_t jobs) {
  PreparedSet set;
  for (const auto& s : cfg.sensors) {
    set.sensors.push_back(s.name());
    set.shapes.push_back(cfg.recipe.output_shape());
  }
  set.inputs.resize(n);
  if (with_labels) set.labels.resize(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const data::RawRecording& rec = get(i);
    const auto signals = data::select_channels(rec, cfg.sensors);
    auto& row = set.inputs[i];
    for (const auto& sig : signals) row.push_back(dsp::preprocess(sig, cfg.recipe).tensor);
    if (with_labels) set.labels[i] = data::class_index(data::assign_label(rec));
  });
  return set;
}

}  // namespace

PreparedSet prepare(std::span<const data::RawRecording> recordings, const RunConfig& cfg, bool with_labels,
                    std::size_t jobs) {
  return prepare_impl(
      recordings.size(), [&](std::size_t i) -> const data::RawRecording& { return recordings[i]; }, cfg, with_labels,
      jobs);
}

Standardizer Standardizer::fit(const PreparedSet& train) {
  if (train.size() == 0) throw ConfigError("standardizer: empty training set");
  Standardizer s;
  for (std::size_t k = 0; k < train.sensors.size(); ++k) {
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (const auto& row : train.inputs) {
      for (float v : row[k].data()) {
        sum += v;
        sq += static_cast<double>(v) * v;
      }
      count += row[k].size();
    }
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
    const double sd = std::sqrt(var);
    s.mean.push_back(mean);
    s.stddev.push_back(sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0);
  }
  return s;
}

PreparedSet Standardizer::apply(const PreparedSet& set) const {
  if (mean.size() != set.sensors.size()) throw ConfigError("standardizer: fitted on a different number of streams");
  PreparedSet out;
  out.sensors = set.sensors;
  out.shapes = set.shapes;
  out.labels = set.labels;
  out.inputs.reserve(set.size());
  for (const auto& row : set.inputs) {
    std::vector<nn::Tensor> scaled;
    for (std::size_t k = 0; k < row.size(); ++k) {
      std::vector<float> v(row[k].data().begin(), row[k].data().end());
      for (auto& x : v) x = static_cast<float>((x - mean[k]) / stddev[k]);
      scaled.push_back(nn::Tensor::from(row[k].shape(), std::move(v)));
    }
    out.inputs.push_back(std::move(scaled));
  }
  return out;
}

std::unique_ptr<nn::ModelGraph> build_graph(const RunConfig& cfg, const std::vector<nn::Shape>& shapes,
                                            const std::vector<std::string>& sensors, std::uint64_t seed) {
  if (!cfg.fusion) {
    if (shapes.size() != 1) throw ConfigError("baseline: exactly one input stream expected");
    const auto mcfg = model::config_for_input(shapes[0], cfg.model);
    return std::make_unique<model::BaselineGraph>(mcfg, seed, sensors.empty() ? "input" : sensors[0]);
  }
  fusion::FusionInputs in;
  in.shapes = shapes;
  in.sensors = sensors;
  in.seed = seed;
  in.model = cfg.model;
  return fusion::build_fusion(*cfg.fusion, in);
}

// ---------------------------------------------------------------- training

namespace {

// Mean of every loss term over `indices`, without recording a tape.
std::vector<float> mean_terms(const nn::ModelGraph& graph, const PreparedSet& set, std::span<const std::size_t> indices) {
  const nn::NoGradGuard no_grad;
  std::vector<double> acc;
  for (std::size_t i : indices) {
    const auto terms = graph.loss(set.inputs[i], set.labels[i]).components;
    if (acc.empty()) acc.assign(terms.size(), 0.0);
    for (std::size_t t = 0; t < terms.size(); ++t) acc[t] += terms[t];
  }
  std::vector<float> out(acc.size());
  for (std::size_t t = 0; t < acc.size(); ++t) out[t] = static_cast<float>(acc[t] / static_cast<double>(indices.size()));
  return out;
}

}  // namespace

TrainResult train(nn::ModelGraph& graph, const PreparedSet& train_set, const RunConfig& cfg, std::uint64_t seed) {
  if (train_set.size() == 0) throw ConfigError("train: empty training set");
  if (train_set.labels.size() != train_set.size()) throw ConfigError("train: training set is unlabelled");
  TrainResult result;
  nn::Adam optimizer(cfg.optimizer);

  // Gradient-Blend holds out every tenth training sample to measure
  // generalization; those samples are not trained on.
  auto* blend = dynamic_cast<fusion::GradientBlendGraph*>(&graph);
  std::vector<std::size_t> fit, holdout;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (blend && train_set.size() >= 10 && i % 10 == 9) {
      holdout.push_back(i);
    } else {
      fit.push_back(i);
    }
  }
  std::vector<std::vector<float>> train_series, held_series;
  const auto checkpoint = [&] {
    const std::span<const std::size_t> probe(fit.data(), std::min(fit.size(), holdout.size()));
    const auto tr = mean_terms(graph, train_set, probe);
    const auto ho = mean_terms(graph, train_set, holdout);
    if (train_series.empty()) {
      train_series.resize(tr.size());
      held_series.resize(ho.size());
    }
    for (std::size_t t = 0; t < tr.size(); ++t) {
      train_series[t].push_back(tr[t]);
      held_series[t].push_back(ho[t]);
    }
  };
  if (blend && !holdout.empty()) checkpoint();

  nn::Rng order_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(fit.begin(), fit.end(), order_rng);
    double epoch_loss = 0.0;
    std::vector<double> epoch_terms;
    for (std::size_t start = 0; start < fit.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(fit.size(), start + cfg.batch_size);
      const float inv = 1.0f / static_cast<float>(stop - start);
      try {
        for (std::size_t b = start; b < stop; ++b) {
          const std::size_t i = fit[b];
          const nn::LossTerms terms = graph.loss(train_set.inputs[i], train_set.labels[i]);
          const float value = terms.total.item();
          if (!std::isfinite(value)) throw NumericError("loss is " + std::to_string(value));
          epoch_loss += value;
          if (epoch_terms.empty()) epoch_terms.assign(terms.components.size(), 0.0);
          for (std::size_t t = 0; t < terms.components.size(); ++t) epoch_terms[t] += terms.components[t];
          nn::scale(terms.total, inv).backward();
        }
        optimizer.step(graph.parameters());
      } catch (const NumericError& e) {
        throw RunFailure(graph.info().mode + ", seed " + std::to_string(seed) + ": non-finite value at epoch " +
                         std::to_string(epoch + 1) + ", batch " + std::to_string(start / cfg.batch_size + 1) + " (" +
                         e.what() + ")");
      }
    }
    const double n = static_cast<double>(fit.size());
    result.loss_history.push_back(static_cast<float>(epoch_loss / n));
    std::vector<float> terms(epoch_terms.size());
    for (std::size_t t = 0; t < terms.size(); ++t) terms[t] = static_cast<float>(epoch_terms[t] / n);
    result.component_history.push_back(std::move(terms));

    if (blend && !holdout.empty() && (epoch + 1) % cfg.blend_period == 0) {
      checkpoint();
      fusion::BlendOptions opts;
      opts.floor = cfg.blend_floor;
      auto w = fusion::gradient_blend_weights(train_series, held_series, opts);
      blend->set_blend_weights(w);
      result.blend_refresh_epochs.push_back(epoch + 1);
      result.blend_weight_history.push_back(std::move(w));
    }
  }
  return result;
}

// ---------------------------------------------------------------- metrics

std::vector<ClassScores> class_scores(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                      std::size_t n_classes) {
  if (predicted.size() != truth.size()) throw ConfigError("class_scores: prediction/label count mismatch");
  if (predicted.empty()) throw ConfigError("class_scores: empty evaluation set");
  std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const std::size_t p = predicted[i], t = truth[i];
    if (p >= n_classes || t >= n_classes) throw ConfigError("class_scores: label outside 0.." + std::to_string(n_classes - 1));
    if (p == t) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  std::vector<ClassScores> out(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double t = static_cast<double>(tp[c]);
    out[c].precision = tp[c] + fp[c] ? t / static_cast<double>(tp[c] + fp[c]) : 0.0;
    out[c].recall = tp[c] + fn[c] ? t / static_cast<double>(tp[c] + fn[c]) : 0.0;
    const double denom = out[c].precision + out[c].recall;
    out[c].f1 = denom > 0.0 ? 2.0 * out[c].precision * out[c].recall / denom : 0.0;
  }
  return out;
}

double macro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> truth, std::size_t n_classes) {
  const auto scores = class_scores(predicted, truth, n_classes);
  double sum = 0.0;
  for (const auto& s : scores) sum += s.f1;
  return sum / static_cast<double>(n_classes);
}

F1Report make_report(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  F1Report r;
  r.per_class = class_scores(predicted, truth);
  double sum = 0.0;
  for (const auto& s : r.per_class) sum += s.f1;
  r.macro_f1 = sum / static_cast<double>(r.per_class.size());
  r.per_seed = {r.macro_f1};
  r.mean = r.macro_f1;
  r.stddev = 0.0;
  return r;
}

F1Report aggregate(std::span<const F1Report> seeds) {
  if (seeds.empty()) throw ConfigError("aggregate: no reports");
  F1Report r;
  r.per_class.assign(seeds.front().per_class.size(), {});
  for (const auto& s : seeds) {
    r.per_seed.push_back(s.macro_f1);
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
      r.per_class[c].precision += s.per_class[c].precision;
      r.per_class[c].recall += s.per_class[c].recall;
      r.per_class[c].f1 += s.per_class[c].f1;
    }
  }
  const double n = static_cast<double>(seeds.size());
  for (auto& c : r.per_class) {
    c.precision /= n;
    c.recall /= n;
    c.f1 /= n;
  }
  double sum = 0.0;
  for (double v : r.per_seed) sum += v;
  r.mean = sum / n;
  double sq = 0.0;
  for (double v : r.per_seed) sq += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(sq / n);
  r.macro_f1 = r.mean;
  return r;
}

nlohmann::json F1Report::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    classes.push_back({{"class", data::class_name(data::class_from_index(c))},
                       {"precision", per_class[c].precision},
                       {"recall", per_class[c].recall},
                       {"f1", per_class[c].f1}});
  }
  return {{"per_class", classes}, {"macro_f1", macro_f1}, {"per_seed", per_seed}, {"mean", mean}, {"std", stddev}};
}

std::vector<std::size_t> predict(const nn::ModelGraph& graph, const PreparedSet& set) {
  const nn::NoGradGuard no_grad;
  std::vector<std::size_t> out;
  out.reserve(set.size());
  for (const auto& row : set.inputs) {
    std::size_t best = 0;
    try {
      const nn::Tensor lp = graph.forward(row);
      for (std::size_t c = 1; c < lp.size(); ++c) {
        if (lp[c] > lp[best]) best = c;
      }
    } catch (const NumericError&) {
      best = 0;  // NaN scores: the argmax never moves off class 0
    }
    out.push_back(best);
  }
  return out;
}

F1Report evaluate(const nn::ModelGraph& graph, const PreparedSet& set) {
  if (set.size() == 0) throw ConfigError("evaluate: empty evaluation set");
  if (set.labels.size() != set.size()) throw ConfigError("evaluate: evaluation set is unlabelled");
  return make_report(predict(graph, set), set.labels);
}

// ---------------------------------------------------------------- repeated runs

bool RunRecord::any_failed() const {
  return std::any_of(seeds.begin(), seeds.end(), [](const SeedOutcome& s) { return s.failed; });
}

nlohmann::json RunRecord::to_json(bool include_timing) const {
  nlohmann::json j;
  j["config"] = config.to_json();
  j["config_hash"] = config.hash();
  j["code_version"] = kCodeVersion;
  j["evaluated_on"] = evaluated_on;
  std::vector<std::uint64_t> seed_values;
  std::vector<double> f1s;
  nlohmann::json curves = nlohmann::json::array(), components = nlohmann::json::array(),
                 failures = nlohmann::json::array(), blend = nlohmann::json::array();
  for (const auto& s : seeds) {
    seed_values.push_back(s.seed);
    f1s.push_back(s.report.macro_f1);
    curves.push_back(s.training.loss_history);
    components.push_back(s.training.component_history);
    if (s.failed) failures.push_back({{"seed", s.seed}, {"message", s.failure}});
    if (!s.training.blend_refresh_epochs.empty()) {
      blend.push_back({{"seed", s.seed},
                       {"refresh_epochs", s.training.blend_refresh_epochs},
                       {"weights", s.training.blend_weight_history}});
    }
  }
  j["seeds"] = seed_values;
  j["per_seed_f1"] = f1s;
  j["mean"] = report.mean;
  j["std"] = report.stddev;
  j["report"] = report.to_json();
  j["failed_seeds"] = failures;
  j["loss_curves"] = curves;
  j["loss_components"] = components;
  if (!blend.empty()) j["blend"] = blend;
  if (include_timing) j["wall_time_s"] = wall_time_s;
  return j;
}

namespace {

F1Report constant_class0_report(std::span<const std::size_t> truth) {
  const std::vector<std::size_t> zeros(truth.size(), 0);
  return make_report(zeros, truth);
}

using Scorer = std::function<F1Report(const nn::ModelGraph&)>;
using FailureScorer = std::function<F1Report()>;

RunRecord run_seeds(const RunConfig& cfg, const PreparedSet& fit_set, const Scorer& score,
                    const FailureScorer& failure_score, std::size_t jobs) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = cfg;
  rec.seeds.resize(cfg.n_seeds);
  parallel_for(cfg.n_seeds, jobs, [&](std::size_t i) {
    SeedOutcome& out = rec.seeds[i];
    out.seed = cfg.base_seed + i;
    auto graph = build_graph(cfg, fit_set.shapes, fit_set.sensors, out.seed);
    try {
      out.training = train(*graph, fit_set, cfg, out.seed);
      out.report = score(*graph);
    } catch (const RunFailure& e) {
      out.failed = true;
      out.failure = e.what();
      out.report = failure_score();
    }
  });
  std::vector<F1Report> reports;
  for (const auto& s : rec.seeds) reports.push_back(s.report);
  rec.report = aggregate(reports);
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace

RunRecord repeat_runs(const RunConfig& cfg, const PreparedSet& train_set, const PreparedSet& eval_set,
                      std::size_t jobs) {
  if (eval_set.size() == 0) throw ConfigError("repeat_runs: empty evaluation set");
  PreparedSet fit = train_set, held = eval_set;
  if (cfg.standardize) {
    const auto st = Standardizer::fit(train_set);
    fit = st.apply(train_set);
    held = st.apply(eval_set);
  }
  return run_seeds(
      cfg, fit, [&](const nn::ModelGraph& g) { return evaluate(g, held); },
      [&] { return constant_class0_report(held.labels); }, jobs);
}

RunRecord final_test_run(const RunConfig& cfg, const PreparedSet& train_set, const PreparedSet& val_set,
                         const data::HeldOutTestSet& test_set, std::size_t jobs) {
  if (test_set.size() == 0) throw ConfigError("final_test_run: empty test set");
  const PreparedSet joined = PreparedSet::join(train_set, val_set);
  PreparedSet test = prepare_impl(
      test_set.size(), [&](std::size_t i) -> const data::RawRecording& { return test_set.recording(i); }, cfg, false,
      jobs);
  std::vector<std::size_t> truth;
  for (const auto label : TestLabelAccess::labels(test_set)) truth.push_back(data::class_index(label));

  PreparedSet fit = joined;
  if (cfg.standardize) {
    const auto st = Standardizer::fit(joined);
    fit = st.apply(joined);
    test = st.apply(test);
  }
  RunRecord rec = run_seeds(
      cfg, fit, [&](const nn::ModelGraph& g) { return make_report(predict(g, test), truth); },
      [&] { return constant_class0_report(truth); }, jobs);
  rec.evaluated_on = "test";
  return rec;
}

}  // namespace tmd::train
