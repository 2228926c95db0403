#pragma once

#include <span>
#include <string>
#include <vector>

namespace tmd::dsp {

inline constexpr double kSampleRateHz = 100.0;
inline constexpr std::size_t kSamplesPerRecording = 6000;  // 60 s at 100 Hz

// One sensor channel. Recordings loaded from disk always hold
// kSamplesPerRecording values; the DSP routines accept any length.
struct Signal {
  std::vector<float> values;
  double sample_rate = kSampleRateHz;
  std::string channel_id;

  std::size_t size() const { return values.size(); }
};

// out[i] = sqrt(sum_c channels[c][i]^2). Throws ConfigError on length mismatch.
Signal euclidean_norm(std::span<const Signal> channels, std::string channel_id = {});

// |DFT|^2 of the whole signal, all N bins.
std::vector<double> power_spectrum(std::span<const float> signal);

}  // namespace tmd::dsp
