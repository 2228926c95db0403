#pragma once

#include <map>
#include <string>
#include <vector>

#include "tmd/dsp/signal.hpp"
#include "tmd/dsp/spectrogram.hpp"
#include "tmd/nn/tensor.hpp"

namespace tmd::dsp {

enum class RepresentationKind { kTemporal, kFft, kSpectrogram };

// One preprocessing pipeline: temporal | FFT | spectrogram with a frequency
// interpolation and a power scale. `frames x bins` is the output size of
// spectrogram recipes (ignored otherwise).
struct Recipe {
  RepresentationKind kind = RepresentationKind::kSpectrogram;
  FreqAxis interpolation = FreqAxis::kLog;
  PowerScale power = PowerScale::kLog;
  std::size_t frames = 48;
  std::size_t bins = 48;

  // Canonical name, e.g. "spectrogram/log-freq/log/48x48", "temporal", "fft".
  std::string name() const;
  // Accepts canonical names and the "spectrogram/none/log/550,250" form.
  static Recipe parse(const std::string& text);
  // Tensor shape the recipe produces for a 6000-sample signal.
  nn::Shape output_shape() const;
  bool is_image() const { return kind == RepresentationKind::kSpectrogram; }

  friend bool operator==(const Recipe&, const Recipe&) = default;
};

// The eight preprocessing rows, in table order.
const std::vector<Recipe>& preprocessing_recipes();
// The default pipeline: log-frequency, log-power, 48x48.
Recipe default_recipe();

struct PreprocessOptions {
  StftConfig stft;
  double log_eps = 1e-10;
  double f_min = 0.2;
  double f_max = 50.0;
};

struct Representation {
  RepresentationKind kind;
  nn::Tensor tensor;  // [1,6000], [1,48,48] or [1,550,250]
  std::map<std::string, std::string> provenance;
};

// Pipeline order for images: STFT -> resize (or trim) -> log power.
Spectrogram spectrogram_for(const Signal& signal, const Recipe& recipe, const PreprocessOptions& opts = {});
Representation preprocess(const Signal& signal, const Recipe& recipe, const PreprocessOptions& opts = {});

}  // namespace tmd::dsp
