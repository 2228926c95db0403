#include "tmd/dsp/signal.hpp"

#include <cmath>

#include "tmd/dsp/fft.hpp"
#include "tmd/errors.hpp"

namespace tmd::dsp {

Signal euclidean_norm(std::span<const Signal> channels, std::string channel_id) {
  if (channels.empty()) throw ConfigError("euclidean_norm: no channels");
  const std::size_t n = channels[0].size();
  for (const auto& ch : channels) {
    if (ch.size() != n) {
      throw ConfigError("euclidean_norm: channel '" + ch.channel_id + "' has " + std::to_string(ch.size()) +
                        " samples, expected " + std::to_string(n));
    }
  }
  Signal out;
  out.sample_rate = channels[0].sample_rate;
  out.channel_id = std::move(channel_id);
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (const auto& ch : channels) acc += static_cast<double>(ch.values[i]) * ch.values[i];
    out.values[i] = static_cast<float>(std::sqrt(acc));
  }
  return out;
}

std::vector<double> power_spectrum(std::span<const float> signal) {
  for (float v : signal) {
    if (!std::isfinite(v)) throw NumericError("power_spectrum: non-finite input sample");
  }
  const auto spectrum = fft(signal);
  std::vector<double> out(spectrum.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k) out[k] = std::norm(spectrum[k]);
  return out;
}

}  // namespace tmd::dsp
