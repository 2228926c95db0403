#pragma once

#include <span>
#include <string>
#include <vector>

#include "tmd/nn/parameter.hpp"
#include "tmd/nn/tensor.hpp"

namespace tmd::nn {

struct GraphInfo {
  std::string mode;                  // "baseline" or a fusion mode name
  std::vector<std::string> sensors;  // one label per input stream
  std::vector<Shape> input_shapes;   // declared shape of each stream
  std::size_t n_classes = 8;
};

// Training objective of one sample. `components` mirrors the individual
// terms (one entry for single-objective graphs) for logging.
struct LossTerms {
  Tensor total;
  std::vector<float> components;
};

// A network over one or more input streams that emits log class
// probabilities. Owns its parameters.
class ModelGraph {
 public:
  explicit ModelGraph(GraphInfo info) : info_(std::move(info)) {}
  virtual ~ModelGraph() = default;
  ModelGraph(const ModelGraph&) = delete;
  ModelGraph& operator=(const ModelGraph&) = delete;

  // Returns log-probabilities of shape [n_classes].
  virtual Tensor forward(std::span<const Tensor> inputs) const = 0;
  virtual LossTerms loss(std::span<const Tensor> inputs, std::size_t label) const;
  virtual std::vector<std::string> topology() const = 0;

  std::vector<float> probabilities(std::span<const Tensor> inputs) const;

  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }
  std::size_t arity() const { return info_.input_shapes.size(); }
  const GraphInfo& info() const { return info_; }

 protected:
  // Arity and per-stream shape check; throws ConfigError.
  void check_inputs(std::span<const Tensor> inputs) const;

  ParameterStore params_;
  GraphInfo info_;
};

}  // namespace tmd::nn
