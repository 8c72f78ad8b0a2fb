#include "lungnet/audio/Stats.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "lungnet/audio/Dsp.h"
#include "lungnet/common/Errors.h"

namespace lungnet::audio {

CycleStats cycleStats(const std::vector<double>& x, double sampleRate) {
  if (x.empty()) {
    throw InputError("cycle statistics need at least one sample");
  }
  const std::size_t n = x.size();
  CycleStats s;
  s.durationS = static_cast<double>(n) / sampleRate;

  double energy = 0.0;
  std::size_t crossings = 0;
  for (std::size_t i = 0; i < n; ++i) {
    energy += x[i] * x[i];
    if (i > 0 && x[i - 1] * x[i] < 0.0) {
      ++crossings;
    }
  }
  s.rmsEnergy = std::sqrt(energy / static_cast<double>(n));
  s.zcr = n > 1 ? static_cast<double>(crossings) / static_cast<double>(n - 1) : 0.0;

  const std::size_t nfft = std::max<std::size_t>(2, nextPowerOfTwo(n));
  const auto window = hannWindow(n);
  std::vector<double> windowed(n);
  for (std::size_t i = 0; i < n; ++i) {
    windowed[i] = x[i] * window[i];
  }
  const auto p = powerSpectrum(windowed, nfft);
  const double df = sampleRate / static_cast<double>(nfft);

  double total = 0.0, weighted = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    total += p[k];
    weighted += p[k] * static_cast<double>(k) * df;
  }
  if (total <= 0.0) {
    return s;
  }
  const double centroid = weighted / total;
  double spread = 0.0, cumulative = 0.0;
  bool rolled = false;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double f = static_cast<double>(k) * df;
    spread += p[k] * (f - centroid) * (f - centroid);
    cumulative += p[k];
    if (!rolled && cumulative >= kRolloffFraction * total) {
      s.rolloffHz = f;
      rolled = true;
    }
  }
  s.spectralBandwidthHz = std::sqrt(spread / total);
  return s;
}

CycleStats cycleStats(const BreathingCycle& cycle) {
  return cycleStats(cycle.samples, kCycleSampleRate);
}

BoxSummary boxSummary(std::vector<double> v) {
  BoxSummary b;
  b.count = v.size();
  if (v.empty()) {
    return b;
  }
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return std::lerp(v[lo], v[hi], pos - static_cast<double>(lo));
  };
  b.min = v.front();
  b.q1 = quantile(0.25);
  b.median = quantile(0.5);
  b.q3 = quantile(0.75);
  b.max = v.back();
  return b;
}

namespace {

double featureOf(const CycleStats& s, std::size_t f) {
  switch (f) {
    case 0:
      return s.durationS;
    case 1:
      return s.rmsEnergy;
    case 2:
      return s.zcr;
    case 3:
      return s.spectralBandwidthHz;
    default:
      return s.rolloffHz;
  }
}

} // namespace

VariabilityReport variabilityReport(std::span<const CycleStats> stats,
                                    std::span<const std::string> patientIds) {
  if (stats.size() != patientIds.size()) {
    throw DimensionError("one patient id per cycle is required");
  }
  if (stats.empty()) {
    throw InputError("variability report needs at least one cycle");
  }
  VariabilityReport report;
  for (std::size_t f = 0; f < kStatFeatureNames.size(); ++f) {
    FeatureVariability fv;
    fv.feature = kStatFeatureNames[f];
    std::map<std::string, std::pair<double, std::size_t>> perPatient;
    double globalSum = 0.0;
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const double v = featureOf(stats[i], f);
      auto& acc = perPatient[patientIds[i]];
      acc.first += v;
      acc.second += 1;
      globalSum += v;
    }
    const double globalMean = globalSum / static_cast<double>(stats.size());
    if (globalMean == 0.0) {
      report.warnings.push_back(fv.feature + ": global mean is 0, feature skipped");
    }
    for (const auto& [pid, acc] : perPatient) {
      if (acc.first == 0.0 && globalMean != 0.0) {
        report.warnings.push_back(fv.feature + ": patient " + pid +
                                  " has mean 0 and is excluded");
      }
    }
    for (std::size_t i = 0; i < stats.size() && globalMean != 0.0; ++i) {
      const auto& acc = perPatient[patientIds[i]];
      if (acc.first == 0.0) {
        continue;
      }
      const double v = featureOf(stats[i], f);
      fv.intra.push_back(v / (acc.first / static_cast<double>(acc.second)));
      fv.inter.push_back(v / globalMean);
    }
    fv.intraSummary = boxSummary(fv.intra);
    fv.interSummary = boxSummary(fv.inter);
    report.features.push_back(std::move(fv));
  }
  return report;
}

VariabilityReport variabilityReport(std::span<const BreathingCycle> cycles) {
  std::vector<CycleStats> stats;
  std::vector<std::string> ids;
  stats.reserve(cycles.size());
  ids.reserve(cycles.size());
  for (const auto& c : cycles) {
    stats.push_back(cycleStats(c));
    ids.push_back(c.patientId);
  }
  return variabilityReport(stats, ids);
}

} // namespace lungnet::audio
