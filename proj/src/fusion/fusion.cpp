#include "tmd/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tmd/errors.hpp"
#include "tmd/nn/ops.hpp"

namespace tmd::fusion {

namespace {

const char* const kModeNames[] = {"TimeConcat",    "FreqConcat",   "DepthConcat",  "BottleneckFilters", "FeatureConcat",
                                  "SelectiveFusion", "Attention",  "ProbAverage",  "ScoreAverage",      "WeightedProb",
                                  "WeightedScore", "GradientBlend", "LearnToCombine"};

std::string branch_prefix(std::size_t k, std::size_t n) { return n == 1 ? "" : "s" + std::to_string(k) + "."; }

void prefixed(std::vector<std::string>& out, const std::vector<std::string>& lines, const std::string& prefix) {
  for (const auto& l : lines) out.push_back(prefix + l);
}

std::string count_suffix(std::size_t n) { return "(" + std::to_string(n) + ")"; }

nn::GraphInfo info_for(const std::string& mode, const FusionInputs& in) {
  if (in.shapes.empty()) throw ConfigError(mode + ": needs at least one sensor stream");
  std::vector<std::string> sensors = in.sensors;
  if (sensors.empty()) {
    for (std::size_t k = 0; k < in.shapes.size(); ++k) sensors.push_back("sensor" + std::to_string(k));
  }
  if (sensors.size() != in.shapes.size()) {
    throw ConfigError(mode + ": " + std::to_string(sensors.size()) + " sensor labels for " +
                      std::to_string(in.shapes.size()) + " streams");
  }
  return {mode, std::move(sensors), in.shapes, 8};
}

void require_same_shapes(const std::string& mode, const FusionInputs& in) {
  for (const auto& s : in.shapes) {
    if (s != in.shapes.front()) {
      throw ConfigError(mode + ": heterogeneous input shapes (" + nn::shape_string(in.shapes.front()) + " vs " +
                        nn::shape_string(s) + ")");
    }
  }
  const auto& s = in.shapes.front();
  if (s.size() != 3 || s[0] != 1) {
    throw ConfigError(mode + ": input-level fusion needs single-channel images [1,H,W], got " + nn::shape_string(s));
  }
}

nn::Tensor probs_of(std::vector<float> values) {
  const std::size_t n = values.size();
  return nn::Tensor::from({n}, std::move(values));
}

nn::Tensor log_of(const std::vector<float>& coefficients, std::size_t n, const std::string& what) {
  if (coefficients.size() != n) throw ConfigError(what + ": expected " + std::to_string(n) + " coefficients");
  std::vector<float> lw(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(coefficients[k] >= 0.0f)) throw ConfigError(what + ": coefficients must be non-negative");
    total += coefficients[k];
    lw[k] = coefficients[k] == 0.0f ? -std::numeric_limits<float>::infinity() : std::log(coefficients[k]);
  }
  if (std::abs(total - 1.0) > 1e-5) throw ConfigError(what + ": coefficients must sum to 1");
  return probs_of(std::move(lw));
}

// ---------------------------------------------------------------- early fusion

class EarlyGraph : public nn::ModelGraph {
 public:
  EarlyGraph(FusionMode mode, const FusionInputs& in) : nn::ModelGraph(info_for(mode_name(mode), in)), mode_(mode) {
    require_same_shapes(info_.mode, in);
    const auto& s = in.shapes.front();
    const std::size_t n = in.count();
    nn::Shape fused = s;
    switch (mode) {
      case FusionMode::kTimeConcat: fused[1] *= n; break;
      case FusionMode::kFreqConcat: fused[2] *= n; break;
      case FusionMode::kDepthConcat: fused[0] = n; break;
      default: throw ConfigError("build_early: " + mode_name(mode) + " is not an input-level mode");
    }
    cfg_ = model::config_for_input(fused, in.model);
    cfg_.validate();
    nn::Rng rng(in.seed);
    net_ = std::make_unique<model::BaselineNetwork>(params_, rng, "", cfg_);
  }

  nn::Tensor forward(std::span<const nn::Tensor> inputs) const override {
    check_inputs(inputs);
    return nn::log_softmax(net_->logits(stack(inputs)));
  }

  std::vector<std::string> topology() const override { return net_->describe(); }

 private:
  nn::Tensor stack(std::span<const nn::Tensor> inputs) const {
    if (inputs.size() == 1) return inputs[0];
    const std::size_t axis = mode_ == FusionMode::kTimeConcat ? 1 : mode_ == FusionMode::kFreqConcat ? 2 : 0;
    return nn::concat(inputs, axis);
  }

  FusionMode mode_;
  model::BaselineConfig cfg_;
  std::unique_ptr<model::BaselineNetwork> net_;
};

class BottleneckGraph : public nn::ModelGraph {
 public:
  BottleneckGraph(const FusionInputs& in, std::size_t width)
      : nn::ModelGraph(info_for(mode_name(FusionMode::kBottleneckFilters), in)) {
    if (width < 1) throw ConfigError("BottleneckFilters: bottleneck width must be at least 1");
    require_same_shapes(info_.mode, in);
    nn::Shape reduced = in.shapes.front();
    reduced[0] = width;
    cfg_ = model::config_for_input(reduced, in.model);
    cfg_.validate();
    nn::Rng rng(in.seed);
    net_ = std::make_unique<model::BaselineNetwork>(params_, rng, "", cfg_);
    squeeze_ = std::make_unique<nn::Conv2dLayer>(params_, rng, "bottleneck", in.count(), width, 1);
  }

  nn::Tensor forward(std::span<const nn::Tensor> inputs) const override {
    check_inputs(inputs);
    const nn::Tensor depth = inputs.size() == 1 ? inputs[0] : nn::concat(inputs, 0);
    return nn::log_softmax(net_->logits(squeeze_->forward(depth)));
  }

  std::vector<std::string> topology() const override {
    std::vector<std::string> out{squeeze_->describe()};
    const auto rest = net_->describe();
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
  }

 private:
  model::BaselineConfig cfg_;
  std::unique_ptr<model::BaselineNetwork> net_;
  std::unique_ptr<nn::Conv2dLayer> squeeze_;
};

}  // namespace

const std::vector<FusionMode>& all_fusion_modes() {
  static const std::vector<FusionMode> modes = [] {
    std::vector<FusionMode> m;
    for (int i = 0; i <= static_cast<int>(FusionMode::kLearnToCombine); ++i) m.push_back(static_cast<FusionMode>(i));
    return m;
  }();
  return modes;
}

std::string mode_name(FusionMode mode) { return kModeNames[static_cast<int>(mode)]; }

FusionMode parse_mode(const std::string& name) {
  for (FusionMode m : all_fusion_modes()) {
    if (mode_name(m) == name) return m;
  }
  throw ConfigError("unknown fusion mode '" + name + "'");
}

FusionInputs make_inputs(std::vector<nn::Shape> shapes, std::uint64_t seed) {
  FusionInputs in;
  in.shapes = std::move(shapes);
  in.seed = seed;
  return in;
}

// ---------------------------------------------------------------- multi-branch (late) fusion

MultiBranchGraph::MultiBranchGraph(std::string mode, const FusionInputs& in)
    : nn::ModelGraph(info_for(mode, in)), rng_(in.seed) {
  for (std::size_t k = 0; k < in.count(); ++k) {
    auto cfg = model::config_for_input(in.shapes[k], in.model);
    cfg.validate();
    branches_.push_back(std::make_unique<model::BaselineNetwork>(params_, rng_, branch_prefix(k, in.count()), cfg));
  }
}

std::vector<nn::Tensor> MultiBranchGraph::branch_logits(std::span<const nn::Tensor> inputs) const {
  check_inputs(inputs);
  std::vector<nn::Tensor> out;
  out.reserve(branches_.size());
  for (std::size_t k = 0; k < branches_.size(); ++k) out.push_back(branches_[k]->logits(inputs[k]));
  return out;
}

std::vector<std::string> MultiBranchGraph::topology() const {
  if (branches_.size() == 1) return branches_[0]->describe();
  std::vector<std::string> out;
  for (std::size_t k = 0; k < branches_.size(); ++k) prefixed(out, branches_[k]->describe(), "s" + std::to_string(k) + "/");
  const auto comb = combiner_topology();
  out.insert(out.end(), comb.begin(), comb.end());
  return out;
}


LateAverageGraph::LateAverageGraph(FusionMode mode, const FusionInputs& in)
    : MultiBranchGraph(mode_name(mode), in), mode_(mode) {
  if (mode != FusionMode::kProbAverage && mode != FusionMode::kScoreAverage) {
    throw ConfigError("build_late_average: " + mode_name(mode) + " is not an averaging mode");
  }
}

nn::Tensor LateAverageGraph::forward(std::span<const nn::Tensor> inputs) const {
  const auto logits = branch_logits(inputs);
  const std::size_t n = logits.size();
  if (n == 1) return nn::log_softmax(logits[0]);
  if (mode_ == FusionMode::kScoreAverage) return nn::log_softmax(nn::mean(logits));
  std::vector<nn::Tensor> lp;
  for (const auto& l : logits) lp.push_back(nn::log_softmax(l));
  const float lw = -std::log(static_cast<float>(n));
  return nn::log_mixture(lp, nn::Tensor::full({n}, lw));
}

std::vector<std::string> LateAverageGraph::combiner_topology() const {
  return {(mode_ == FusionMode::kProbAverage ? "prob-average" : "score-average") + count_suffix(branches_.size())};
}

WeightedGraph::WeightedGraph(FusionMode mode, const FusionInputs& in)
    : MultiBranchGraph(mode_name(mode), in), mode_(mode) {
  if (mode != FusionMode::kWeightedProb && mode != FusionMode::kWeightedScore) {
    throw ConfigError("build_weighted: " + mode_name(mode) + " is not a weighted mode");
  }
  const std::size_t n = in.count();
  if (n > 1) weights_ = params_.create("sensor_weights", {n}, std::vector<float>(n, 1.0f / static_cast<float>(n)));
}

nn::Tensor WeightedGraph::forward(std::span<const nn::Tensor> inputs) const {
  const auto logits = branch_logits(inputs);
  if (logits.size() == 1) return nn::log_softmax(logits[0]);
  if (mode_ == FusionMode::kWeightedScore) return nn::log_softmax(nn::weighted_sum(logits, weights_));
  std::vector<nn::Tensor> lp;
  for (const auto& l : logits) lp.push_back(nn::log_softmax(l));
  const nn::Tensor lw = forced_ ? log_of(*forced_, logits.size(), "WeightedProb") : nn::log_softmax(weights_);
  return nn::log_mixture(lp, lw);
}

std::vector<float> WeightedGraph::effective_weights() const {
  if (!weights_.defined()) return {1.0f};
  if (mode_ == FusionMode::kWeightedScore) return {weights_.data().begin(), weights_.data().end()};
  if (forced_) return *forced_;
  const nn::NoGradGuard no_grad;
  const nn::Tensor p = nn::softmax(weights_);
  return {p.data().begin(), p.data().end()};
}

void WeightedGraph::force_mixture(std::optional<std::vector<float>> coefficients) {
  if (mode_ != FusionMode::kWeightedProb) throw ConfigError("force_mixture applies to WeightedProb only");
  if (coefficients) log_of(*coefficients, branches_.size(), "WeightedProb");
  forced_ = std::move(coefficients);
}

std::vector<std::string> WeightedGraph::combiner_topology() const {
  return {"sensor-weights" + count_suffix(branches_.size()),
          mode_ == FusionMode::kWeightedProb ? "weighted-prob" : "weighted-score"};
}

GradientBlendGraph::GradientBlendGraph(const FusionInputs& in)
    : MultiBranchGraph(mode_name(FusionMode::kGradientBlend), in),
      blend_(in.count() + 1, 1.0f / static_cast<float>(in.count() + 1)) {}

nn::Tensor GradientBlendGraph::forward(std::span<const nn::Tensor> inputs) const {
  const auto logits = branch_logits(inputs);
  if (logits.size() == 1) return nn::log_softmax(logits[0]);
  return nn::log_softmax(nn::mean(logits));
}

nn::LossTerms GradientBlendGraph::loss(std::span<const nn::Tensor> inputs, std::size_t label) const {
  const auto logits = branch_logits(inputs);
  std::vector<nn::Tensor> terms;
  for (const auto& l : logits) terms.push_back(nn::nll_loss(nn::log_softmax(l), label));
  const nn::Tensor fused = logits.size() == 1 ? nn::log_softmax(logits[0]) : nn::log_softmax(nn::mean(logits));
  terms.push_back(nn::nll_loss(fused, label));

  nn::LossTerms out;
  for (const auto& t : terms) out.components.push_back(t.item());
  std::vector<nn::Tensor> flat;
  for (const auto& t : terms) flat.push_back(nn::reshape(t, {1}));
  const nn::Tensor stacked = nn::concat(flat, 0);
  out.total = nn::sum(nn::mul(stacked, nn::Tensor::from({blend_.size()}, blend_)));
  return out;
}

void GradientBlendGraph::set_blend_weights(std::vector<float> weights) {
  if (weights.size() != term_count()) {
    throw ConfigError("GradientBlend: expected " + std::to_string(term_count()) + " blend weights");
  }
  for (float w : weights) {
    if (!(w >= 0.0f) || !std::isfinite(w)) throw ConfigError("GradientBlend: blend weights must be finite and >= 0");
  }
  blend_ = std::move(weights);
}

std::vector<std::string> GradientBlendGraph::combiner_topology() const {
  return {"score-average" + count_suffix(branches_.size()), "blend-loss" + count_suffix(term_count())};
}

LearnToCombineGraph::LearnToCombineGraph(const FusionInputs& in)
    : MultiBranchGraph(mode_name(FusionMode::kLearnToCombine), in) {
  const std::size_t n = in.count();
  if (n > 1) {
    gate1_ = std::make_unique<nn::DenseLayer>(params_, rng_, "combine.fc1", 2 * n, 16);
    gate2_ = std::make_unique<nn::DenseLayer>(params_, rng_, "combine.fc2", 16, n);
  }
}

nn::Tensor LearnToCombineGraph::log_coefficients(std::span<const nn::Tensor> log_probs) const {
  const std::size_t n = log_probs.size();
  if (forced_) return log_of(*forced_, n, "LearnToCombine");
  std::vector<nn::Tensor> conf;
  for (const auto& lp : log_probs) {
    const nn::Tensor p = nn::exp(lp);
    conf.push_back(nn::reshape(nn::max(p), {1}));
    conf.push_back(nn::reshape(nn::scale(nn::sum(nn::mul(p, lp)), -1.0f), {1}));
  }
  const nn::Tensor features = nn::concat(conf, 0);
  return nn::log_softmax(gate2_->forward(nn::relu(gate1_->forward(features))));
}

nn::Tensor LearnToCombineGraph::forward(std::span<const nn::Tensor> inputs) const {
  const auto logits = branch_logits(inputs);
  if (logits.size() == 1) return nn::log_softmax(logits[0]);
  std::vector<nn::Tensor> lp;
  for (const auto& l : logits) lp.push_back(nn::log_softmax(l));
  return nn::log_mixture(lp, log_coefficients(lp));
}

std::vector<float> LearnToCombineGraph::mixture_weights(std::span<const nn::Tensor> inputs) const {
  const nn::NoGradGuard no_grad;
  if (branches_.size() == 1) return {1.0f};
  const auto logits = branch_logits(inputs);
  std::vector<nn::Tensor> lp;
  for (const auto& l : logits) lp.push_back(nn::log_softmax(l));
  const nn::Tensor lw = log_coefficients(lp);
  std::vector<float> w(lw.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::exp(lw[k]);
  return w;
}

void LearnToCombineGraph::force_mixture(std::optional<std::vector<float>> coefficients) {
  if (coefficients) log_of(*coefficients, branches_.size(), "LearnToCombine");
  forced_ = std::move(coefficients);
}

std::vector<std::string> LearnToCombineGraph::combiner_topology() const {
  return {"combine:" + gate1_->describe(), "combine:relu", "combine:" + gate2_->describe(),
          "mixture" + count_suffix(branches_.size())};
}

// ---------------------------------------------------------------- feature-level fusion

FeatureLevelGraph::FeatureLevelGraph(std::string mode, const FusionInputs& in, bool head_on_concat)
    : nn::ModelGraph(info_for(mode, in)), rng_(in.seed) {
  std::size_t head_in = 0;
  model::BaselineConfig first;
  for (std::size_t k = 0; k < in.count(); ++k) {
    auto cfg = model::config_for_input(in.shapes[k], in.model);
    cfg.validate();
    if (k == 0) first = cfg;
    stacks_.push_back(std::make_unique<model::ConvStack>(params_, rng_, branch_prefix(k, in.count()), cfg));
    feature_shapes_.push_back(cfg.feature_shape());
    head_in += cfg.flattened_size();
  }
  if (!head_on_concat) {
    for (const auto& s : feature_shapes_) {
      if (s != feature_shapes_.front()) {
        throw ConfigError(info_.mode + ": heterogeneous feature shapes (" + nn::shape_string(feature_shapes_.front()) +
                          " vs " + nn::shape_string(s) + ")");
      }
    }
    head_in = first.flattened_size();
  }
  head_ = std::make_unique<model::ClassifierHead>(params_, rng_, "", head_in, first.hidden, first.n_classes);
}

std::vector<nn::Tensor> FeatureLevelGraph::features(std::span<const nn::Tensor> inputs) const {
  check_inputs(inputs);
  std::vector<nn::Tensor> out;
  for (std::size_t k = 0; k < stacks_.size(); ++k) out.push_back(stacks_[k]->forward(inputs[k]));
  return out;
}

std::vector<std::string> FeatureLevelGraph::stack_topology() const {
  if (stacks_.size() == 1) return stacks_[0]->describe();
  std::vector<std::string> out;
  for (std::size_t k = 0; k < stacks_.size(); ++k) prefixed(out, stacks_[k]->describe(), "s" + std::to_string(k) + "/");
  return out;
}

namespace {

nn::Tensor concat_flat(const std::vector<nn::Tensor>& feats) {
  if (feats.size() == 1) return feats[0];
  std::vector<nn::Tensor> flat;
  for (const auto& f : feats) flat.push_back(nn::flatten(f));
  return nn::concat(flat, 0);
}

}  // namespace

FeatureConcatGraph::FeatureConcatGraph(const FusionInputs& in)
    : FeatureLevelGraph(mode_name(FusionMode::kFeatureConcat), in, true) {}

nn::Tensor FeatureConcatGraph::forward(std::span<const nn::Tensor> inputs) const {
  return nn::log_softmax(head_->forward(concat_flat(features(inputs))));
}

std::vector<std::string> FeatureConcatGraph::topology() const {
  auto out = stack_topology();
  if (stacks_.size() > 1) out.push_back("feature-concat" + count_suffix(stacks_.size()));
  const auto head = head_->describe();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

SelectiveFusionGraph::SelectiveFusionGraph(const FusionInputs& in)
    : FeatureLevelGraph(mode_name(FusionMode::kSelectiveFusion), in, true) {
  if (in.count() > 1) {
    std::size_t pooled = 0;
    for (const auto& s : feature_shapes_) pooled += s[0];
    for (std::size_t k = 0; k < in.count(); ++k) {
      gate_layers_.push_back(
          std::make_unique<nn::DenseLayer>(params_, rng_, "gate" + std::to_string(k), pooled, feature_shapes_[k][0]));
    }
  }
}

std::vector<nn::Tensor> SelectiveFusionGraph::gates(const std::vector<nn::Tensor>& feats) const {
  std::vector<nn::Tensor> out;
  if (forced_) {
    for (std::size_t k = 0; k < feats.size(); ++k) out.push_back(probs_of(forced_->at(k)));
    return out;
  }
  std::vector<nn::Tensor> pooled;
  for (const auto& f : feats) pooled.push_back(nn::global_avg_pool(f));
  const nn::Tensor summary = nn::concat(pooled, 0);
  for (const auto& layer : gate_layers_) out.push_back(nn::sigmoid(layer->forward(summary)));
  return out;
}

nn::Tensor SelectiveFusionGraph::forward(std::span<const nn::Tensor> inputs) const {
  auto feats = features(inputs);
  if (feats.size() > 1) {
    const auto g = gates(feats);
    for (std::size_t k = 0; k < feats.size(); ++k) feats[k] = nn::channel_scale(feats[k], g[k]);
  }
  return nn::log_softmax(head_->forward(concat_flat(feats)));
}

std::vector<std::vector<float>> SelectiveFusionGraph::gate_values(std::span<const nn::Tensor> inputs) const {
  const nn::NoGradGuard no_grad;
  const auto feats = features(inputs);
  if (feats.size() == 1) return {std::vector<float>(feature_shapes_[0][0], 1.0f)};
  std::vector<std::vector<float>> out;
  for (const auto& g : gates(feats)) out.emplace_back(g.data().begin(), g.data().end());
  return out;
}

void SelectiveFusionGraph::force_gates(std::optional<std::vector<std::vector<float>>> gates) {
  if (gates) {
    if (gates->size() != stacks_.size()) throw ConfigError("SelectiveFusion: one gate vector per sensor required");
    for (std::size_t k = 0; k < gates->size(); ++k) {
      if ((*gates)[k].size() != feature_shapes_[k][0]) {
        throw ConfigError("SelectiveFusion: gate vector " + std::to_string(k) + " must have " +
                          std::to_string(feature_shapes_[k][0]) + " entries");
      }
    }
  }
  forced_ = std::move(gates);
}

std::vector<std::string> SelectiveFusionGraph::topology() const {
  auto out = stack_topology();
  if (stacks_.size() > 1) {
    for (const auto& g : gate_layers_) out.push_back("gate:" + g->describe() + "+sigmoid");
    out.push_back("feature-concat" + count_suffix(stacks_.size()));
  }
  const auto head = head_->describe();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

AttentionGraph::AttentionGraph(const FusionInputs& in)
    : FeatureLevelGraph(mode_name(FusionMode::kAttention), in, false) {
  const std::size_t c = feature_shapes_.front()[0];
  score1_ = std::make_unique<nn::DenseLayer>(params_, rng_, "attention.fc1", c * in.count(), 32);
  score2_ = std::make_unique<nn::DenseLayer>(params_, rng_, "attention.fc2", 32, in.count());
}

nn::Tensor AttentionGraph::weights_for(const std::vector<nn::Tensor>& feats) const {
  if (forced_) return nn::softmax(probs_of(*forced_));
  std::vector<nn::Tensor> pooled;
  for (const auto& f : feats) pooled.push_back(nn::global_avg_pool(f));
  const nn::Tensor summary = pooled.size() == 1 ? pooled[0] : nn::concat(pooled, 0);
  return nn::softmax(score2_->forward(nn::relu(score1_->forward(summary))));
}

nn::Tensor AttentionGraph::forward(std::span<const nn::Tensor> inputs) const {
  const auto feats = features(inputs);
  const nn::Tensor alpha = weights_for(feats);
  return nn::log_softmax(head_->forward(nn::weighted_sum(feats, alpha)));
}

std::vector<float> AttentionGraph::attention_weights(std::span<const nn::Tensor> inputs) const {
  const nn::NoGradGuard no_grad;
  const nn::Tensor alpha = weights_for(features(inputs));
  return {alpha.data().begin(), alpha.data().end()};
}

void AttentionGraph::force_scores(std::optional<std::vector<float>> scores) {
  if (scores && scores->size() != stacks_.size()) throw ConfigError("Attention: one score per sensor required");
  forced_ = std::move(scores);
}

std::vector<std::string> AttentionGraph::topology() const {
  auto out = stack_topology();
  out.push_back("attention:" + score1_->describe());
  out.push_back("attention:relu");
  out.push_back("attention:" + score2_->describe());
  out.push_back("attention:softmax+weighted-sum" + count_suffix(stacks_.size()));
  const auto head = head_->describe();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

// ---------------------------------------------------------------- builders

std::unique_ptr<nn::ModelGraph> build_early(FusionMode mode, const FusionInputs& in) {
  return std::make_unique<EarlyGraph>(mode, in);
}

std::unique_ptr<nn::ModelGraph> build_bottleneck(const FusionInputs& in, std::size_t width) {
  return std::make_unique<BottleneckGraph>(in, width);
}

std::unique_ptr<nn::ModelGraph> build_feature_concat(const FusionInputs& in) {
  return std::make_unique<FeatureConcatGraph>(in);
}

std::unique_ptr<nn::ModelGraph> build_late_average(FusionMode mode, const FusionInputs& in) {
  return std::make_unique<LateAverageGraph>(mode, in);
}

std::unique_ptr<nn::ModelGraph> build_weighted(FusionMode mode, const FusionInputs& in) {
  return std::make_unique<WeightedGraph>(mode, in);
}

std::unique_ptr<nn::ModelGraph> build_attention(const FusionInputs& in) { return std::make_unique<AttentionGraph>(in); }

std::unique_ptr<nn::ModelGraph> build_selective_fusion(const FusionInputs& in) {
  return std::make_unique<SelectiveFusionGraph>(in);
}

std::unique_ptr<nn::ModelGraph> build_gradient_blend(const FusionInputs& in) {
  return std::make_unique<GradientBlendGraph>(in);
}

std::unique_ptr<nn::ModelGraph> build_learn_to_combine(const FusionInputs& in) {
  return std::make_unique<LearnToCombineGraph>(in);
}

std::unique_ptr<nn::ModelGraph> build_fusion(FusionMode mode, const FusionInputs& in) {
  switch (mode) {
    case FusionMode::kTimeConcat:
    case FusionMode::kFreqConcat:
    case FusionMode::kDepthConcat: return build_early(mode, in);
    case FusionMode::kBottleneckFilters: return build_bottleneck(in);
    case FusionMode::kFeatureConcat: return build_feature_concat(in);
    case FusionMode::kSelectiveFusion: return build_selective_fusion(in);
    case FusionMode::kAttention: return build_attention(in);
    case FusionMode::kProbAverage:
    case FusionMode::kScoreAverage: return build_late_average(mode, in);
    case FusionMode::kWeightedProb:
    case FusionMode::kWeightedScore: return build_weighted(mode, in);
    case FusionMode::kGradientBlend: return build_gradient_blend(in);
    case FusionMode::kLearnToCombine: return build_learn_to_combine(in);
  }
  throw ConfigError("unknown fusion mode");
}

// ---------------------------------------------------------------- Gradient-Blend weights

std::vector<double> gradient_blend_ratios(const std::vector<std::vector<float>>& train_losses,
                                          const std::vector<std::vector<float>>& heldout_losses,
                                          const BlendOptions& opts) {
  if (train_losses.empty() || train_losses.size() != heldout_losses.size()) {
    throw ConfigError("gradient_blend_weights: need matching train and held-out series for every term");
  }
  const std::size_t n_checkpoints = train_losses.front().size();
  if (n_checkpoints < 2) throw ConfigError("gradient_blend_weights: needs at least 2 checkpoints");
  std::vector<double> ratio(train_losses.size(), 0.0);
  for (std::size_t k = 0; k < train_losses.size(); ++k) {
    const auto& tr = train_losses[k];
    const auto& ho = heldout_losses[k];
    if (tr.size() != n_checkpoints || ho.size() != n_checkpoints) {
      throw ConfigError("gradient_blend_weights: every series needs " + std::to_string(n_checkpoints) + " checkpoints");
    }
    const std::size_t a = n_checkpoints - 2, b = n_checkpoints - 1;
    const double gain = static_cast<double>(ho[a]) - static_cast<double>(ho[b]);
    const double gap_growth = (static_cast<double>(ho[b]) - static_cast<double>(tr[b])) -
                              (static_cast<double>(ho[a]) - static_cast<double>(tr[a]));
    if (!std::isfinite(gain) || !std::isfinite(gap_growth)) continue;
    const double d_o = std::max(gap_growth, static_cast<double>(opts.min_gap_increase));
    if (gain > 0.0) ratio[k] = gain / (d_o * d_o);
  }
  double total = 0.0;
  for (double r : ratio) total += r;
  if (total > 0.0) {
    for (double& r : ratio) r /= total;
  }
  return ratio;
}

std::vector<float> gradient_blend_weights(const std::vector<std::vector<float>>& train_losses,
                                          const std::vector<std::vector<float>>& heldout_losses,
                                          const BlendOptions& opts) {
  const auto ratio = gradient_blend_ratios(train_losses, heldout_losses, opts);
  const std::size_t n = ratio.size();
  std::size_t clamped = 0;
  for (double r : ratio) clamped += r <= 0.0 ? 1 : 0;
  std::vector<float> w(n);
  if (clamped == n) {
    std::fill(w.begin(), w.end(), 1.0f / static_cast<float>(n));
    return w;
  }
  const double share = 1.0 - static_cast<double>(opts.floor) * static_cast<double>(clamped);
  for (std::size_t k = 0; k < n; ++k) w[k] = ratio[k] <= 0.0 ? opts.floor : static_cast<float>(ratio[k] * share);
  return w;
}

}  // namespace tmd::fusion
