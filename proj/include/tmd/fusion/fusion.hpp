#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmd/model/baseline.hpp"
#include "tmd/nn/graph.hpp"

namespace tmd::fusion {

enum class FusionMode {
  kTimeConcat,
  kFreqConcat,
  kDepthConcat,
  kBottleneckFilters,
  kFeatureConcat,
  kSelectiveFusion,
  kAttention,
  kProbAverage,
  kScoreAverage,
  kWeightedProb,
  kWeightedScore,
  kGradientBlend,
  kLearnToCombine,
};

const std::vector<FusionMode>& all_fusion_modes();
std::string mode_name(FusionMode mode);
// Exact enum name, e.g. "WeightedScore".
FusionMode parse_mode(const std::string& name);

// Everything a builder needs besides the mode.
struct FusionInputs {
  std::vector<nn::Shape> shapes;     // one per sensor stream
  std::vector<std::string> sensors;  // labels, same length as shapes
  std::uint64_t seed = 0;
  model::ModelOverrides model;

  std::size_t count() const { return shapes.size(); }
};

FusionInputs make_inputs(std::vector<nn::Shape> shapes, std::uint64_t seed);

// Input-level fusion: the streams are stacked into one tensor read by a
// single baseline network. TimeConcat: [1,HN,W]; FreqConcat: [1,H,WN];
// DepthConcat: [N,H,W].
std::unique_ptr<nn::ModelGraph> build_early(FusionMode mode, const FusionInputs& in);
// DepthConcat followed by a 1x1 convolution down to `width` channels.
std::unique_ptr<nn::ModelGraph> build_bottleneck(const FusionInputs& in, std::size_t width = 1);
// Per-sensor conv stacks, flattened features concatenated, one shared head.
std::unique_ptr<nn::ModelGraph> build_feature_concat(const FusionInputs& in);
std::unique_ptr<nn::ModelGraph> build_late_average(FusionMode mode, const FusionInputs& in);
std::unique_ptr<nn::ModelGraph> build_weighted(FusionMode mode, const FusionInputs& in);
std::unique_ptr<nn::ModelGraph> build_attention(const FusionInputs& in);
std::unique_ptr<nn::ModelGraph> build_selective_fusion(const FusionInputs& in);
std::unique_ptr<nn::ModelGraph> build_gradient_blend(const FusionInputs& in);
std::unique_ptr<nn::ModelGraph> build_learn_to_combine(const FusionInputs& in);

// Dispatches to the builder of `mode`.
std::unique_ptr<nn::ModelGraph> build_fusion(FusionMode mode, const FusionInputs& in);

// ---------------------------------------------------------------- concrete graphs

// N full baseline networks whose outputs are combined. Shared by the
// late-fusion modes.
class MultiBranchGraph : public nn::ModelGraph {
 public:
  std::size_t branch_count() const { return branches_.size(); }
  const model::BaselineNetwork& branch(std::size_t k) const { return *branches_.at(k); }
  // Class scores of every branch.
  std::vector<nn::Tensor> branch_logits(std::span<const nn::Tensor> inputs) const;
  std::vector<std::string> topology() const override;

 protected:
  MultiBranchGraph(std::string mode, const FusionInputs& in);
  virtual std::vector<std::string> combiner_topology() const = 0;

  // Draws continue from the branches into combiner parameters, so a graph
  // is fully determined by its seed.
  nn::Rng rng_;
  std::vector<std::unique_ptr<model::BaselineNetwork>> branches_;
};

// ProbAverage: mean of the branch distributions. ScoreAverage: softmax of
// the mean branch scores.
class LateAverageGraph : public MultiBranchGraph {
 public:
  LateAverageGraph(FusionMode mode, const FusionInputs& in);
  nn::Tensor forward(std::span<const nn::Tensor> inputs) const override;

 protected:
  std::vector<std::string> combiner_topology() const override;

 private:
  FusionMode mode_;
};

// One learned scalar per sensor, initialised to 1/N. WeightedProb mixes
// the branch distributions with softmax(weights); WeightedScore applies
// softmax to the weighted sum of scores with the raw weights. With a
// single sensor no weight is created.
class WeightedGraph : public MultiBranchGraph {
 public:
  WeightedGraph(FusionMode mode, const FusionInputs& in);
  nn::Tensor forward(std::span<const nn::Tensor> inputs) const override;

  // The raw per-sensor weights (undefined when N = 1).
  const nn::Tensor& sensor_weights() const { return weights_; }
  // Mixture coefficients actually applied (softmax of the raw weights for
  // WeightedProb, the raw weights for WeightedScore).
  std::vector<float> effective_weights() const;
  // WeightedProb only: replace the mixture coefficients (each >= 0, summing
  // to 1; zeros are exact).
  void force_mixture(std::optional<std::vector<float>> coefficients);

 protected:
  std::vector<std::string> combiner_topology() const override;

 private:
  FusionMode mode_;
  nn::Tensor weights_;
  std::optional<std::vector<float>> forced_;
};

// Trains every branch on its own loss plus the fused ScoreAverage output;
// the per-term weights are refreshed by the trainer from held-out losses.
class GradientBlendGraph : public MultiBranchGraph {
 public:
  explicit GradientBlendGraph(const FusionInputs& in);
  nn::Tensor forward(std::span<const nn::Tensor> inputs) const override;
  // Weighted sum of the N branch losses and the fused loss; components hold
  // the N+1 unweighted terms.
  nn::LossTerms loss(std::span<const nn::Tensor> inputs, std::size_t label) const override;

  // N branch terms then the fused term.
  std::size_t term_count() const { return branches_.size() + 1; }
  const std::vector<float>& blend_weights() const { return blend_; }
  void set_blend_weights(std::vector<float> weights);

 protected:
  std::vector<std::string> combiner_topology() const override;

 private:
  std::vector<float> blend_;
};

// Branch distributions mixed with coefficients from a gating network over
// per-branch confidence features (max probability, entropy).
class LearnToCombineGraph : public MultiBranchGraph {
 public:
  explicit LearnToCombineGraph(const FusionInputs& in);
  nn::Tensor forward(std::span<const nn::Tensor> inputs) const override;

  std::vector<float> mixture_weights(std::span<const nn::Tensor> inputs) const;
  void force_mixture(std::optional<std::vector<float>> coefficients);

 protected:
  std::vector<std::string> combiner_topology() const override;

 private:
  nn::Tensor log_coefficients(std::span<const nn::Tensor> log_probs) const;

  std::unique_ptr<nn::DenseLayer> gate1_, gate2_;
  std::optional<std::vector<float>> forced_;
};

// Per-sensor conv stacks and one shared head; the subclasses differ in how
// the feature maps are merged before the head.
class FeatureLevelGraph : public nn::ModelGraph {
 public:
  std::size_t stack_count() const { return stacks_.size(); }
  const model::ConvStack& stack(std::size_t k) const { return *stacks_.at(k); }
  const model::ClassifierHead& head() const { return *head_; }
  std::vector<nn::Tensor> features(std::span<const nn::Tensor> inputs) const;

 protected:
  FeatureLevelGraph(std::string mode, const FusionInputs& in, bool head_on_concat);

  nn::Rng rng_;
  std::vector<std::unique_ptr<model::ConvStack>> stacks_;
  std::unique_ptr<model::ClassifierHead> head_;
  std::vector<std::string> stack_topology() const;
  std::vector<nn::Shape> feature_shapes_;
};

class FeatureConcatGraph : public FeatureLevelGraph {
 public:
  explicit FeatureConcatGraph(const FusionInputs& in);
  nn::Tensor forward(std::span<const nn::Tensor> inputs) const override;
  std::vector<std::string> topology() const override;
};

// Each sensor's feature map is scaled channel-wise by sigmoid gates
// computed from the pooled features of all sensors. No gates at N = 1.
class SelectiveFusionGraph : public FeatureLevelGraph {
 public:
  explicit SelectiveFusionGraph(const FusionInputs& in);
  nn::Tensor forward(std::span<const nn::Tensor> inputs) const override;
  std::vector<std::string> topology() const override;

  // One gate vector (length = feature channels) per sensor.
  std::vector<std::vector<float>> gate_values(std::span<const nn::Tensor> inputs) const;
  void force_gates(std::optional<std::vector<std::vector<float>>> gates);

 private:
  std::vector<nn::Tensor> gates(const std::vector<nn::Tensor>& feats) const;

  std::vector<std::unique_ptr<nn::DenseLayer>> gate_layers_;
  std::optional<std::vector<std::vector<float>>> forced_;
};

// A small dense network scores the pooled features of each sensor; the
// softmax of the scores weights a sum of the feature maps fed to the head.
// The scoring network exists for every N.
class AttentionGraph : public FeatureLevelGraph {
 public:
  explicit AttentionGraph(const FusionInputs& in);
  nn::Tensor forward(std::span<const nn::Tensor> inputs) const override;
  std::vector<std::string> topology() const override;

  std::vector<float> attention_weights(std::span<const nn::Tensor> inputs) const;
  // Replaces the pre-softmax scores (length N).
  void force_scores(std::optional<std::vector<float>> scores);

 private:
  nn::Tensor weights_for(const std::vector<nn::Tensor>& feats) const;

  std::unique_ptr<nn::DenseLayer> score1_, score2_;
  std::optional<std::vector<float>> forced_;
};

// ---------------------------------------------------------------- Gradient-Blend weights

struct BlendOptions {
  float floor = 1e-3f;
  // Lower bound on the gap increase, so a shrinking gap cannot divide by
  // zero or flip the sign.
  float min_gap_increase = 1e-2f;
};

// One series per term; all series share the checkpoint count (>= 2). The
// newest two checkpoints define dG (drop in held-out loss) and dO (growth
// of held-out minus train loss). w_k = dG_k / dO_k^2 for dG_k > 0; other
// terms get `floor`. Result sums to 1.
std::vector<float> gradient_blend_weights(const std::vector<std::vector<float>>& train_losses,
                                          const std::vector<std::vector<float>>& heldout_losses,
                                          const BlendOptions& opts = {});

// The unfloored, normalized dG/dO^2 ratios (for inspection).
std::vector<double> gradient_blend_ratios(const std::vector<std::vector<float>>& train_losses,
                                          const std::vector<std::vector<float>>& heldout_losses,
                                          const BlendOptions& opts = {});

}  // namespace tmd::fusion
