#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tmd/dsp/signal.hpp"

namespace tmd::dsp {

enum class PowerScale { kLinear, kLog };
enum class FreqAxis { kNone, kLinear, kLog };  // how the frequency axis was resampled
enum class WindowFunction { kHann, kRectangular };

// Power image, row-major [frames x bins].
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> power;
  std::vector<double> frame_times;  // seconds, centre of each frame
  std::vector<double> bin_freqs;    // Hz, strictly increasing
  PowerScale power_scale = PowerScale::kLinear;
  FreqAxis freq_axis = FreqAxis::kNone;

  double at(std::size_t frame, std::size_t bin) const { return power[frame * bins + bin]; }
  double& at(std::size_t frame, std::size_t bin) { return power[frame * bins + bin]; }
};

struct StftConfig {
  double window_seconds = 5.0;
  double overlap_seconds = 4.9;
  WindowFunction window = WindowFunction::kHann;

  std::size_t window_length(double sample_rate) const;
  std::size_t hop_length(double sample_rate) const;
};

// Periodic window of the given length.
std::vector<double> make_window(WindowFunction fn, std::size_t length);

// Frames at every hop, one-sided |windowed DFT|^2 with bins 0..window/2.
// A 6000-sample signal gives 551 x 251 with the default config.
Spectrogram stft(const Signal& signal, const StftConfig& cfg = {});

// Drops the final frame and the Nyquist bin (551 x 251 -> 550 x 250).
Spectrogram trim_full_size(const Spectrogram& spec);

// ln(power + eps). Throws StateError if already in log scale.
Spectrogram log_power(const Spectrogram& spec, double eps = 1e-10);

struct RescaleOptions {
  std::size_t frames = 48;
  std::size_t bins = 48;
  FreqAxis freq_mode = FreqAxis::kLog;
  double f_min = 0.2;   // log mode only
  double f_max = 50.0;  // log mode only
};

// Query frequencies of the resampled axis: uniform in Hz across the source
// range (linear) or uniform in log-Hz between f_min and f_max (log).
std::vector<double> frequency_queries(const Spectrogram& spec, const RescaleOptions& opts);

// Time axis resampled linearly, frequency axis at frequency_queries(); both
// piecewise-linear in the source index domain. Throws ConfigError when the
// target exceeds the source.
Spectrogram rescale(const Spectrogram& spec, const RescaleOptions& opts = {});

// Diagnostics: CSV of the [frames x bins] array and an 8-bit binary PGM
// (time on x, low frequencies at the bottom, min-max normalized; a
// constant image becomes uniform mid-gray).
void write_spectrogram_csv(const Spectrogram& spec, const std::filesystem::path& path);
std::vector<unsigned char> spectrogram_gray_pixels(const Spectrogram& spec);
void write_spectrogram_pgm(const Spectrogram& spec, const std::filesystem::path& path);

}  // namespace tmd::dsp
