#include "tmd/dsp/representation.hpp"

#include <algorithm>
#include <sstream>

#include "tmd/errors.hpp"

namespace tmd::dsp {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string interpolation_name(FreqAxis a) {
  switch (a) {
    case FreqAxis::kNone: return "none";
    case FreqAxis::kLinear: return "linear";
    case FreqAxis::kLog: return "log-freq";
  }
  return "?";
}

}  // namespace

std::string Recipe::name() const {
  switch (kind) {
    case RepresentationKind::kTemporal: return "temporal";
    case RepresentationKind::kFft: return "fft";
    case RepresentationKind::kSpectrogram: break;
  }
  return "spectrogram/" + interpolation_name(interpolation) + "/" + (power == PowerScale::kLog ? "log" : "linear") +
         "/" + std::to_string(frames) + "x" + std::to_string(bins);
}

Recipe Recipe::parse(const std::string& text) {
  const std::string t = lower(text);
  if (t == "temporal") return preprocessing_recipes()[0];
  if (t == "fft") return preprocessing_recipes()[1];
  Recipe r;
  const auto parts = split(t, '/');
  if (parts.size() != 4 || parts[0] != "spectrogram") throw ConfigError("unknown recipe '" + text + "'");
  if (parts[1] == "none") {
    r.interpolation = FreqAxis::kNone;
  } else if (parts[1] == "linear") {
    r.interpolation = FreqAxis::kLinear;
  } else if (parts[1] == "log-freq" || parts[1] == "logfreq" || parts[1] == "log") {
    r.interpolation = FreqAxis::kLog;
  } else {
    throw ConfigError("unknown recipe '" + text + "': interpolation must be none, linear or log-freq");
  }
  if (parts[2] == "log") {
    r.power = PowerScale::kLog;
  } else if (parts[2] == "linear") {
    r.power = PowerScale::kLinear;
  } else {
    throw ConfigError("unknown recipe '" + text + "': power scale must be linear or log");
  }
  std::string size = parts[3];
  std::replace(size.begin(), size.end(), ',', 'x');
  const auto dims = split(size, 'x');
  try {
    if (dims.size() != 2) throw std::invalid_argument("size");
    r.frames = std::stoul(dims[0]);
    r.bins = std::stoul(dims[1]);
  } catch (const std::exception&) {
    throw ConfigError("unknown recipe '" + text + "': size must be T,F or TxF");
  }
  if (std::find(preprocessing_recipes().begin(), preprocessing_recipes().end(), r) == preprocessing_recipes().end()) {
    throw ConfigError("unknown recipe '" + text + "': not one of the eight preprocessing pipelines");
  }
  return r;
}

nn::Shape Recipe::output_shape() const {
  if (kind != RepresentationKind::kSpectrogram) return {1, kSamplesPerRecording};
  return {1, frames, bins};
}

const std::vector<Recipe>& preprocessing_recipes() {
  static const std::vector<Recipe> recipes = [] {
    using RK = RepresentationKind;
    std::vector<Recipe> r;
    r.push_back({RK::kTemporal, FreqAxis::kNone, PowerScale::kLinear, 0, 0});
    r.push_back({RK::kFft, FreqAxis::kNone, PowerScale::kLinear, 0, 0});
    r.push_back({RK::kSpectrogram, FreqAxis::kNone, PowerScale::kLinear, 550, 250});
    r.push_back({RK::kSpectrogram, FreqAxis::kNone, PowerScale::kLog, 550, 250});
    r.push_back({RK::kSpectrogram, FreqAxis::kLinear, PowerScale::kLinear, 48, 48});
    r.push_back({RK::kSpectrogram, FreqAxis::kLinear, PowerScale::kLog, 48, 48});
    r.push_back({RK::kSpectrogram, FreqAxis::kLog, PowerScale::kLinear, 48, 48});
    r.push_back({RK::kSpectrogram, FreqAxis::kLog, PowerScale::kLog, 48, 48});
    return r;
  }();
  return recipes;
}

Recipe default_recipe() { return preprocessing_recipes().back(); }

Spectrogram spectrogram_for(const Signal& signal, const Recipe& recipe, const PreprocessOptions& opts) {
  if (!recipe.is_image()) throw ConfigError("recipe '" + recipe.name() + "' does not produce an image");
  const Spectrogram raw = stft(signal, opts.stft);
  Spectrogram sized;
  if (recipe.interpolation == FreqAxis::kNone) {
    sized = trim_full_size(raw);
    if (sized.frames != recipe.frames || sized.bins != recipe.bins) {
      throw ConfigError("recipe '" + recipe.name() + "': full-size spectrogram is " + std::to_string(sized.frames) +
                        "x" + std::to_string(sized.bins));
    }
  } else {
    RescaleOptions ro;
    ro.frames = recipe.frames;
    ro.bins = recipe.bins;
    ro.freq_mode = recipe.interpolation;
    ro.f_min = opts.f_min;
    ro.f_max = opts.f_max;
    sized = rescale(raw, ro);
  }
  return recipe.power == PowerScale::kLog ? log_power(sized, opts.log_eps) : sized;
}

Representation preprocess(const Signal& signal, const Recipe& recipe, const PreprocessOptions& opts) {
  Representation rep;
  rep.kind = recipe.kind;
  rep.provenance["recipe"] = recipe.name();
  rep.provenance["channel"] = signal.channel_id;
  switch (recipe.kind) {
    case RepresentationKind::kTemporal:
      rep.tensor = nn::Tensor::from({1, signal.size()}, signal.values);
      break;
    case RepresentationKind::kFft: {
      const auto power = power_spectrum(signal.values);
      rep.tensor = nn::Tensor::from({1, power.size()}, std::vector<float>(power.begin(), power.end()));
      break;
    }
    case RepresentationKind::kSpectrogram: {
      const Spectrogram spec = spectrogram_for(signal, recipe, opts);
      rep.tensor = nn::Tensor::from({1, spec.frames, spec.bins}, std::vector<float>(spec.power.begin(), spec.power.end()));
      rep.provenance["window_s"] = std::to_string(opts.stft.window_seconds);
      rep.provenance["overlap_s"] = std::to_string(opts.stft.overlap_seconds);
      if (recipe.interpolation == FreqAxis::kLog) {
        rep.provenance["f_min"] = std::to_string(opts.f_min);
        rep.provenance["f_max"] = std::to_string(opts.f_max);
      }
      break;
    }
  }
  return rep;
}

}  // namespace tmd::dsp
