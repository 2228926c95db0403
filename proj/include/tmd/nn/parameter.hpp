#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tmd/nn/tensor.hpp"

namespace tmd::nn {

// Trainable tensor plus its Adam moment buffers.
struct Parameter {
  std::string name;
  Tensor tensor;
  std::vector<float> first_moment;
  std::vector<float> second_moment;
};

// Registry of a graph's parameters in creation order. Names are unique.
class ParameterStore {
 public:
  Tensor create(std::string name, Shape shape, std::vector<float> values);

  std::size_t size() const { return params_.size(); }
  // Total number of scalar weights.
  std::size_t scalar_count() const;

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  const Parameter& get(const std::string& name) const;
  Parameter& get(const std::string& name);
  bool contains(const std::string& name) const;

  void zero_grad();

 private:
  std::vector<Parameter> params_;
};

using Rng = std::mt19937_64;

// U(-sqrt(6/fan_in), sqrt(6/fan_in)); for conv layers feeding ReLUs.
std::vector<float> he_uniform(std::size_t count, std::size_t fan_in, Rng& rng);
// U(-sqrt(6/(fan_in+fan_out)), +...); for dense layers.
std::vector<float> xavier_uniform(std::size_t count, std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct AdamConfig {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

// Adam with bias correction. step() consumes the accumulated gradients and
// zeroes them.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParameterStore& params);
  std::uint64_t steps_taken() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
};

// Versioned little-endian dump: "TMDW", u32 version, u32 count, then per
// parameter u32 name length, name, u32 rank, u64 dims, float32 values.
void save_parameters(const ParameterStore& params, const std::filesystem::path& path);
// Loads values into an already-built store; names and shapes must match.
void load_parameters(ParameterStore& params, const std::filesystem::path& path);

}  // namespace tmd::nn
