#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "lungnet/audio/Cycles.h"

namespace lungnet::audio {

struct CycleStats {
  double durationS = 0.0;
  double rmsEnergy = 0.0;
  double zcr = 0.0;
  double spectralBandwidthHz = 0.0;
  double rolloffHz = 0.0;
};

inline constexpr double kRolloffFraction = 0.85;

/**
 * Time-domain and spectral descriptors of one cycle at 4 kHz. Spectral
 * features use a Hann-windowed FFT of the whole cycle, zero-padded to the
 * next power of two. ZCR is sign changes / (n - 1), 0 for a single sample.
 */
CycleStats cycleStats(const std::vector<double>& samples, double sampleRate = 4000.0);
CycleStats cycleStats(const BreathingCycle& cycle);

/// Five-number summary for a box plot.
struct BoxSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

/// Linear-interpolation quartiles; empty input yields a zero summary.
BoxSummary boxSummary(std::vector<double> values);

struct FeatureVariability {
  std::string feature;
  std::vector<double> intra;
  std::vector<double> inter;
  BoxSummary intraSummary;
  BoxSummary interSummary;
};

struct VariabilityReport {
  std::vector<FeatureVariability> features;
  std::vector<std::string> warnings;
};

inline constexpr std::array<const char*, 5> kStatFeatureNames = {
    "duration", "rms", "zcr", "bandwidth", "rolloff"};

/// Per-feature ratios to the patient mean (intra) and to the global mean
/// over all cycles (inter). A patient whose mean is 0 for a feature is left
/// out of that feature and reported in warnings.
VariabilityReport variabilityReport(std::span<const CycleStats> stats,
                                    std::span<const std::string> patientIds);
VariabilityReport variabilityReport(std::span<const BreathingCycle> cycles);

} // namespace lungnet::audio
