#include "tmd/dsp/spectrogram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "tmd/dsp/fft.hpp"
#include "tmd/errors.hpp"

namespace tmd::dsp {

namespace {

// Fractional position of `value` on a strictly increasing grid.
double fractional_index(std::span<const double> grid, double value) {
  if (value <= grid.front()) return 0.0;
  if (value >= grid.back()) return static_cast<double>(grid.size() - 1);
  const auto hi = std::upper_bound(grid.begin(), grid.end(), value);
  const std::size_t j = static_cast<std::size_t>(hi - grid.begin()) - 1;
  return static_cast<double>(j) + (value - grid[j]) / (grid[j + 1] - grid[j]);
}

struct Tap {
  std::size_t lo, hi;
  double w_hi;  // weight of `hi`; `lo` gets 1 - w_hi
};

Tap make_tap(double pos, std::size_t n) {
  const std::size_t lo = std::min(static_cast<std::size_t>(std::floor(pos)), n - 1);
  const std::size_t hi = std::min(lo + 1, n - 1);
  return {lo, hi, pos - static_cast<double>(lo)};
}

}  // namespace

std::size_t StftConfig::window_length(double sample_rate) const {
  return static_cast<std::size_t>(std::llround(window_seconds * sample_rate));
}

std::size_t StftConfig::hop_length(double sample_rate) const {
  const auto hop = std::llround((window_seconds - overlap_seconds) * sample_rate);
  if (hop < 1) throw ConfigError("stft: overlap leaves a hop of less than one sample");
  return static_cast<std::size_t>(hop);
}

std::vector<double> make_window(WindowFunction fn, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (fn == WindowFunction::kHann) {
    for (std::size_t n = 0; n < length; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(length));
    }
  }
  return w;
}

Spectrogram stft(const Signal& signal, const StftConfig& cfg) {
  const std::size_t win = cfg.window_length(signal.sample_rate);
  const std::size_t hop = cfg.hop_length(signal.sample_rate);
  if (win < 2) throw ConfigError("stft: window shorter than two samples");
  if (win > signal.size()) {
    throw ConfigError("stft: window of " + std::to_string(win) + " samples longer than signal of " +
                      std::to_string(signal.size()));
  }
  for (float v : signal.values) {
    if (!std::isfinite(v)) throw NumericError("stft: non-finite input sample");
  }

  Spectrogram spec;
  spec.frames = (signal.size() - win) / hop + 1;
  spec.bins = win / 2 + 1;
  spec.power.resize(spec.frames * spec.bins);
  spec.frame_times.resize(spec.frames);
  spec.bin_freqs.resize(spec.bins);
  for (std::size_t k = 0; k < spec.bins; ++k) {
    spec.bin_freqs[k] = static_cast<double>(k) * signal.sample_rate / static_cast<double>(win);
  }

  const auto window = make_window(cfg.window, win);
  const FftPlan plan(win);
  std::vector<Complex> frame(win), out(win);
  // Two real frames per complex transform: z = a + ib gives
  // A[k] = (Z[k] + conj(Z[N-k])) / 2 and B[k] = (Z[k] - conj(Z[N-k])) / 2i.
  for (std::size_t t = 0; t < spec.frames; t += 2) {
    const bool pair = t + 1 < spec.frames;
    const float* a = signal.values.data() + t * hop;
    const float* b = pair ? a + hop : nullptr;
    for (std::size_t n = 0; n < win; ++n) {
      frame[n] = {window[n] * static_cast<double>(a[n]), pair ? window[n] * static_cast<double>(b[n]) : 0.0};
    }
    plan.forward(frame, out);
    for (std::size_t k = 0; k < spec.bins; ++k) {
      const Complex z = out[k];
      const Complex zc = std::conj(out[(win - k) % win]);
      const Complex fa = 0.5 * (z + zc);
      spec.at(t, k) = std::norm(fa);
      if (pair) {
        const Complex d = 0.5 * (z - zc);  // = i * B[k]
        spec.at(t + 1, k) = std::norm(d);
      }
    }
  }
  for (std::size_t t = 0; t < spec.frames; ++t) {
    spec.frame_times[t] = (static_cast<double>(t * hop) + static_cast<double>(win) / 2.0) / signal.sample_rate;
  }
  return spec;
}

Spectrogram trim_full_size(const Spectrogram& spec) {
  if (spec.frames < 2 || spec.bins < 2) throw ConfigError("trim_full_size: spectrogram too small");
  Spectrogram out;
  out.frames = spec.frames - 1;
  out.bins = spec.bins - 1;
  out.power.resize(out.frames * out.bins);
  for (std::size_t t = 0; t < out.frames; ++t) {
    for (std::size_t k = 0; k < out.bins; ++k) out.at(t, k) = spec.at(t, k);
  }
  out.frame_times.assign(spec.frame_times.begin(), spec.frame_times.end() - 1);
  out.bin_freqs.assign(spec.bin_freqs.begin(), spec.bin_freqs.end() - 1);
  out.power_scale = spec.power_scale;
  out.freq_axis = spec.freq_axis;
  return out;
}

Spectrogram log_power(const Spectrogram& spec, double eps) {
  if (spec.power_scale == PowerScale::kLog) throw StateError("log_power: spectrogram is already in log scale");
  Spectrogram out = spec;
  for (auto& v : out.power) {
    if (v < 0.0) throw NumericError("log_power: negative power");
    v = std::log(v + eps);
  }
  out.power_scale = PowerScale::kLog;
  return out;
}

std::vector<double> frequency_queries(const Spectrogram& spec, const RescaleOptions& opts) {
  std::vector<double> q(opts.bins);
  const double denom = opts.bins > 1 ? static_cast<double>(opts.bins - 1) : 1.0;
  if (opts.freq_mode == FreqAxis::kLog) {
    if (!(opts.f_min > 0.0) || !(opts.f_max > opts.f_min)) {
      throw ConfigError("rescale: log axis needs 0 < f_min < f_max");
    }
    if (opts.f_min < spec.bin_freqs.front() || opts.f_max > spec.bin_freqs.back() + 1e-9) {
      throw ConfigError("rescale: log range [" + std::to_string(opts.f_min) + ", " + std::to_string(opts.f_max) +
                        "] Hz outside the spectrogram's [" + std::to_string(spec.bin_freqs.front()) + ", " +
                        std::to_string(spec.bin_freqs.back()) + "] Hz");
    }
    const double ratio = std::log(opts.f_max / opts.f_min);
    for (std::size_t i = 0; i < opts.bins; ++i) q[i] = opts.f_min * std::exp(ratio * static_cast<double>(i) / denom);
  } else {
    const double lo = spec.bin_freqs.front(), hi = spec.bin_freqs.back();
    for (std::size_t i = 0; i < opts.bins; ++i) q[i] = lo + (hi - lo) * static_cast<double>(i) / denom;
  }
  return q;
}

Spectrogram rescale(const Spectrogram& spec, const RescaleOptions& opts) {
  if (opts.freq_mode == FreqAxis::kNone) throw ConfigError("rescale: frequency mode must be linear or log");
  if (opts.frames < 2 || opts.bins < 2) throw ConfigError("rescale: target must be at least 2 x 2");
  if (opts.frames > spec.frames || opts.bins > spec.bins) {
    throw ConfigError("rescale: target " + std::to_string(opts.frames) + "x" + std::to_string(opts.bins) +
                      " larger than source " + std::to_string(spec.frames) + "x" + std::to_string(spec.bins));
  }

  const auto freqs = frequency_queries(spec, opts);
  std::vector<Tap> freq_taps(opts.bins);
  for (std::size_t i = 0; i < opts.bins; ++i) freq_taps[i] = make_tap(fractional_index(spec.bin_freqs, freqs[i]), spec.bins);
  std::vector<Tap> time_taps(opts.frames);
  const double time_step = static_cast<double>(spec.frames - 1) / static_cast<double>(opts.frames - 1);
  for (std::size_t i = 0; i < opts.frames; ++i) time_taps[i] = make_tap(time_step * static_cast<double>(i), spec.frames);

  // Time axis first, then frequency.
  std::vector<double> by_time(opts.frames * spec.bins);
  for (std::size_t t = 0; t < opts.frames; ++t) {
    const Tap& tap = time_taps[t];
    for (std::size_t k = 0; k < spec.bins; ++k) {
      by_time[t * spec.bins + k] = (1.0 - tap.w_hi) * spec.at(tap.lo, k) + tap.w_hi * spec.at(tap.hi, k);
    }
  }

  Spectrogram out;
  out.frames = opts.frames;
  out.bins = opts.bins;
  out.power.resize(out.frames * out.bins);
  for (std::size_t t = 0; t < out.frames; ++t) {
    const double* row = by_time.data() + t * spec.bins;
    for (std::size_t f = 0; f < out.bins; ++f) {
      const Tap& tap = freq_taps[f];
      out.at(t, f) = (1.0 - tap.w_hi) * row[tap.lo] + tap.w_hi * row[tap.hi];
    }
  }
  out.frame_times.resize(out.frames);
  for (std::size_t t = 0; t < out.frames; ++t) {
    const Tap& tap = time_taps[t];
    out.frame_times[t] = (1.0 - tap.w_hi) * spec.frame_times[tap.lo] + tap.w_hi * spec.frame_times[tap.hi];
  }
  out.bin_freqs = freqs;
  out.power_scale = spec.power_scale;
  out.freq_axis = opts.freq_mode;
  return out;
}

void write_spectrogram_csv(const Spectrogram& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.precision(9);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t k = 0; k < spec.bins; ++k) {
      if (k) out << ',';
      out << spec.at(t, k);
    }
    out << '\n';
  }
}

std::vector<unsigned char> spectrogram_gray_pixels(const Spectrogram& spec) {
  const auto [lo_it, hi_it] = std::minmax_element(spec.power.begin(), spec.power.end());
  const double lo = *lo_it, hi = *hi_it;
  // Image rows are frequency bins, highest frequency at the top.
  std::vector<unsigned char> pixels(spec.frames * spec.bins);
  for (std::size_t row = 0; row < spec.bins; ++row) {
    const std::size_t bin = spec.bins - 1 - row;
    for (std::size_t t = 0; t < spec.frames; ++t) {
      const double v = spec.at(t, bin);
      const double unit = hi > lo ? (v - lo) / (hi - lo) : 0.5;
      pixels[row * spec.frames + t] = static_cast<unsigned char>(std::lround(unit * 255.0));
    }
  }
  return pixels;
}

void write_spectrogram_pgm(const Spectrogram& spec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  const auto pixels = spectrogram_gray_pixels(spec);
  out << "P5\n" << spec.frames << ' ' << spec.bins << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

}  // namespace tmd::dsp
