#include "tmd/nn/parameter.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "tmd/errors.hpp"

namespace tmd::nn {

static_assert(std::endian::native == std::endian::little, "weight dump assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'M', 'D', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ConfigError("truncated weight file " + path.string());
  return value;
}

std::vector<float> uniform(std::size_t count, float bound, Rng& rng) {
  std::uniform_real_distribution<float> dist(-bound, bound);
  std::vector<float> out(count);
  for (auto& v : out) v = dist(rng);
  return out;
}

}  // namespace

Tensor ParameterStore::create(std::string name, Shape shape, std::vector<float> values) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  Tensor t = Tensor::from(std::move(shape), std::move(values), true);
  const std::size_t n = t.size();
  params_.push_back({std::move(name), t, std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f)});
  return t;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.tensor.size();
  return total;
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

const Parameter& ParameterStore::get(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown parameter '" + name + "'");
}

Parameter& ParameterStore::get(const std::string& name) {
  return const_cast<Parameter&>(std::as_const(*this).get(name));
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<float> he_uniform(std::size_t count, std::size_t fan_in, Rng& rng) {
  return uniform(count, std::sqrt(6.0f / static_cast<float>(fan_in)), rng);
}

std::vector<float> xavier_uniform(std::size_t count, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  return uniform(count, std::sqrt(6.0f / static_cast<float>(fan_in + fan_out)), rng);
}

void Adam::step(ParameterStore& params) {
  const bool any_grad = std::any_of(params.all().begin(), params.all().end(),
                                    [](const Parameter& p) { return p.tensor.has_grad(); });
  if (!any_grad) throw StateError("Adam::step: no parameter has a gradient; run backward() first");

  ++step_;
  const float b1 = config_.beta1, b2 = config_.beta2;
  const float correction1 = 1.0f - static_cast<float>(std::pow(static_cast<double>(b1), step_));
  const float correction2 = 1.0f - static_cast<float>(std::pow(static_cast<double>(b2), step_));
  for (auto& p : params.all()) {
    if (!p.tensor.has_grad()) continue;
    auto w = p.tensor.mutable_data();
    auto g = p.tensor.mutable_grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      p.first_moment[i] = b1 * p.first_moment[i] + (1.0f - b1) * g[i];
      p.second_moment[i] = b2 * p.second_moment[i] + (1.0f - b2) * g[i] * g[i];
      const float m_hat = p.first_moment[i] / correction1;
      const float v_hat = p.second_moment[i] / correction2;
      w[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    if (!p.tensor.all_finite()) throw NumericError("Adam::step: parameter '" + p.name + "' became non-finite");
    std::fill(g.begin(), g.end(), 0.0f);
  }
}

void save_parameters(const ParameterStore& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write weight file " + path.string());
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params.all()) {
    write_pod(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto d : p.tensor.shape()) write_pod(out, static_cast<std::uint64_t>(d));
    const auto data = p.tensor.data();
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  }
}

void load_parameters(ParameterStore& params, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read weight file " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) throw ConfigError(path.string() + " is not a weight dump");
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) throw ConfigError("unsupported weight dump version " + std::to_string(version));
  const auto count = read_pod<std::uint32_t>(in, path);
  if (count != params.size()) {
    throw ConfigError("weight dump has " + std::to_string(count) + " parameters, graph has " +
                      std::to_string(params.size()));
  }
  for (auto& p : params.all()) {
    const auto name_len = read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (name != p.name) throw ConfigError("weight dump parameter '" + name + "' where '" + p.name + "' expected");
    const auto rank = read_pod<std::uint32_t>(in, path);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(in, path));
    if (shape != p.tensor.shape()) {
      throw ConfigError("weight dump shape " + shape_string(shape) + " for '" + name + "', expected " +
                        shape_string(p.tensor.shape()));
    }
    auto data = p.tensor.mutable_data();
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
    if (!in) throw ConfigError("truncated weight file " + path.string());
  }
}

}  // namespace tmd::nn
