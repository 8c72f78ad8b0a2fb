#include "lungnet/audio/Spectrogram.h"

#include <algorithm>
#include <cmath>

#include "lungnet/audio/Dsp.h"
#include "lungnet/common/Errors.h"

namespace lungnet::audio {

std::size_t MelConfig::windowLength() const {
  return static_cast<std::size_t>(std::lround(windowMs * 1e-3 * sampleRate));
}

std::size_t MelConfig::hopLength() const {
  return static_cast<std::size_t>(
      std::lround(static_cast<double>(windowLength()) * (1.0 - overlap)));
}

void MelConfig::validate() const {
  if (!(sampleRate > 0.0) || !(windowMs > 0.0)) {
    throw ConfigurationError("sample rate and window length must be positive");
  }
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw ConfigurationError("overlap must be in [0, 1)");
  }
  if (windowLength() == 0 || hopLength() == 0) {
    throw ConfigurationError("window and hop must span at least one sample");
  }
  if (nFft < windowLength() || (nFft & (nFft - 1)) != 0) {
    throw ConfigurationError("n_fft must be a power of two no smaller than the window");
  }
  if (nMels == 0) {
    throw ConfigurationError("n_mels must be positive");
  }
  if (!(fminHz >= 0.0 && fminHz < fmaxHz && fmaxHz <= sampleRate / 2.0)) {
    throw ConfigurationError("need 0 <= fmin < fmax <= Nyquist");
  }
  if (!std::isfinite(floorDb)) {
    throw ConfigurationError("floor_db must be finite");
  }
}

double hzToMel(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double melToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

namespace {

std::vector<double> melEdges(const MelConfig& cfg) {
  const double lo = hzToMel(cfg.fminHz), hi = hzToMel(cfg.fmaxHz);
  std::vector<double> edges(cfg.nMels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = melToHz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.nMels + 1));
  }
  return edges;
}

} // namespace

std::vector<double> melCenters(const MelConfig& cfg) {
  auto edges = melEdges(cfg);
  return {edges.begin() + 1, edges.end() - 1};
}

std::vector<double> melFilterbank(const MelConfig& cfg) {
  cfg.validate();
  const auto edges = melEdges(cfg);
  const std::size_t bins = cfg.nFft / 2 + 1;
  std::vector<double> fb(cfg.nMels * bins, 0.0);
  for (std::size_t m = 0; m < cfg.nMels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sampleRate / static_cast<double>(cfg.nFft);
      const double rising = (f - left) / (center - left);
      const double falling = (right - f) / (right - center);
      fb[m * bins + k] = std::max(0.0, std::min(rising, falling));
    }
  }
  return fb;
}

std::size_t frameCount(std::size_t n, const MelConfig& cfg) {
  const std::size_t win = cfg.windowLength();
  if (n < win) {
    return 0;
  }
  return (n - win) / cfg.hopLength() + 1;
}

MelSpectrogram melSpectrogram(const std::vector<double>& samples, const MelConfig& cfg) {
  cfg.validate();
  if (samples.empty()) {
    throw InputError("cannot compute a spectrogram of an empty signal");
  }
  const std::size_t win = cfg.windowLength(), hop = cfg.hopLength();
  const std::vector<double>* signal = &samples;
  std::vector<double> padded;
  if (samples.size() < win) {
    padded.resize(win);
    for (std::size_t i = 0; i < win; ++i) {
      padded[i] = samples[i % samples.size()];
    }
    signal = &padded;
  }

  const auto window = hannWindow(win);
  const auto fb = melFilterbank(cfg);
  const std::size_t bins = cfg.nFft / 2 + 1;

  MelSpectrogram spec;
  spec.nMels = cfg.nMels;
  spec.frames = frameCount(signal->size(), cfg);
  spec.frameHopS = static_cast<double>(hop) / cfg.sampleRate;
  spec.values.assign(spec.nMels * spec.frames, cfg.floorDb);

  std::vector<double> frame(win);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t i = 0; i < win; ++i) {
      frame[i] = (*signal)[t * hop + i] * window[i];
    }
    const auto power = powerSpectrum(frame, cfg.nFft);
    for (std::size_t m = 0; m < spec.nMels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) {
        e += fb[m * bins + k] * power[k];
      }
      spec.at(m, t) = std::max(cfg.floorDb, 10.0 * std::log10(e + 1e-10));
    }
  }
  return spec;
}

MelSpectrogram melSpectrogram(const BreathingCycle& cycle, const MelConfig& cfg) {
  return melSpectrogram(cycle.samples, cfg);
}

MelSpectrogram fixWidth(const MelSpectrogram& spec, std::size_t width) {
  if (spec.frames == 0 || spec.nMels == 0) {
    throw InputError("cannot fix the width of an empty spectrogram");
  }
  if (width == 0) {
    throw ArgumentError("target width must be positive");
  }
  if (spec.frames == width) {
    return spec;
  }
  MelSpectrogram out = spec;
  out.frames = width;
  out.values.assign(spec.nMels * width, 0.0);
  const std::size_t offset = spec.frames > width ? (spec.frames - width) / 2 : 0;
  for (std::size_t m = 0; m < spec.nMels; ++m) {
    for (std::size_t t = 0; t < width; ++t) {
      const std::size_t src = spec.frames > width ? offset + t : t % spec.frames;
      out.at(m, t) = spec.at(m, src);
    }
  }
  return out;
}

} // namespace lungnet::audio
