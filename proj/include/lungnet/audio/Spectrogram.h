#pragma once

#include <cstddef>
#include <vector>

#include "lungnet/audio/Cycles.h"

namespace lungnet::audio {

struct MelConfig {
  double sampleRate = 4000.0;
  double windowMs = 60.0;
  double overlap = 0.5;
  std::size_t nFft = 256;
  std::size_t nMels = 40;
  double fminHz = 0.0;
  double fmaxHz = 2000.0;
  double floorDb = -80.0;

  std::size_t windowLength() const;
  std::size_t hopLength() const;
  /// Throws ConfigurationError for inconsistent settings.
  void validate() const;
};

/// Log-Mel spectrogram, rows are Mel bands, columns are frames.
struct MelSpectrogram {
  std::size_t nMels = 0;
  std::size_t frames = 0;
  double frameHopS = 0.0;
  /// Row-major [nMels, frames].
  std::vector<double> values;

  double at(std::size_t mel, std::size_t frame) const {
    return values[mel * frames + frame];
  }
  double& at(std::size_t mel, std::size_t frame) {
    return values[mel * frames + frame];
  }
};

double hzToMel(double hz);
double melToHz(double mel);

/// Center frequencies (Hz) of the nMels triangular filters.
std::vector<double> melCenters(const MelConfig& cfg);

/// Triangular filterbank, row-major [nMels, nFft/2 + 1], peak weight 1.
std::vector<double> melFilterbank(const MelConfig& cfg);

/// floor((n - window) / hop) + 1 for n >= window.
std::size_t frameCount(std::size_t n, const MelConfig& cfg);

/**
 * Hann-windowed frames -> power spectrum -> Mel filterbank ->
 * 10*log10(p + 1e-10) clamped at floorDb. Signals shorter than one window
 * are cyclically repeated up to the window length first.
 */
MelSpectrogram melSpectrogram(const std::vector<double>& samples, const MelConfig& cfg = {});
MelSpectrogram melSpectrogram(const BreathingCycle& cycle, const MelConfig& cfg = {});

/// Cyclic repetition along time when shorter than width, center crop when
/// longer, identity otherwise.
MelSpectrogram fixWidth(const MelSpectrogram& spec, std::size_t width = 128);

} // namespace lungnet::audio
