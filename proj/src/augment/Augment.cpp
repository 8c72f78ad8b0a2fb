#include "lungnet/augment/Augment.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lungnet/audio/Dsp.h"
#include "lungnet/common/Errors.h"

namespace lungnet::augment {

namespace {

constexpr std::size_t kRateDenominator = 1000;
// WSOLA frame of 80 ms at 4 kHz, 50% overlap, +-20 ms search.
constexpr std::size_t kFrame = 320;
constexpr std::size_t kHop = kFrame / 2;
constexpr long kTolerance = 80;

double power(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) {
    p += v * v;
  }
  return x.empty() ? 0.0 : p / static_cast<double>(x.size());
}

double sampleAt(const std::vector<double>& x, long i) {
  return (i < 0 || i >= static_cast<long>(x.size())) ? 0.0 : x[static_cast<std::size_t>(i)];
}

} // namespace

const char* transformName(Transform t) {
  switch (t) {
    case Transform::Noise:
      return "noise";
    case Transform::Speed:
      return "speed";
    case Transform::Shift:
      return "shift";
    case Transform::Pitch:
      return "pitch";
  }
  return "unknown";
}

void AugmentSpec::validate() const {
  if (!std::isfinite(value)) {
    throw ArgumentError(std::string(transformName(transform)) + " parameter must be finite");
  }
  if (transform == Transform::Speed && !(value > 0.5 && value < 2.0)) {
    throw ArgumentError("speed factor must be in (0.5, 2.0)");
  }
  if (transform == Transform::Pitch && std::abs(value) > 12.0) {
    throw ArgumentError("pitch shift must be within +-12 semitones");
  }
}

std::vector<double> scaledNoise(const std::vector<double>& signal, double snrDb,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> noise(signal.size());
  for (auto& v : noise) {
    v = gauss(rng);
  }
  const double target = power(signal) / std::pow(10.0, snrDb / 10.0);
  const double current = power(noise);
  const double scale = current > 0.0 ? std::sqrt(target / current) : 0.0;
  for (auto& v : noise) {
    v *= scale;
  }
  return noise;
}

std::vector<double> changeSpeed(const std::vector<double>& x, double factor) {
  if (!(factor > 0.0)) {
    throw ArgumentError("speed factor must be positive");
  }
  const auto down = static_cast<std::size_t>(std::llround(factor * kRateDenominator));
  const auto outLength = static_cast<std::size_t>(
      std::llround(static_cast<double>(x.size()) / factor));
  return audio::resamplePolyphase(x, kRateDenominator, down, std::max<std::size_t>(1, outLength));
}

std::vector<double> timeStretch(const std::vector<double>& x, std::size_t outLength) {
  if (x.empty() || outLength == 0) {
    throw InputError("time stretch needs a non-empty input and output");
  }
  if (outLength == x.size()) {
    return x;
  }
  const auto window = audio::hannWindow(kFrame);
  const double analysisHop =
      static_cast<double>(kHop) * static_cast<double>(x.size()) / static_cast<double>(outLength);
  const long half = static_cast<long>(kFrame / 2);
  const std::size_t frames = outLength / kHop + 2;

  std::vector<double> out(outLength + kFrame, 0.0), norm(outLength + kFrame, 0.0);
  long prev = 0;
  for (std::size_t k = 0; k < frames; ++k) {
    const long nominal =
        static_cast<long>(std::llround(static_cast<double>(k) * analysisHop)) - half;
    long chosen = nominal;
    if (k > 0) {
      // Pick the offset whose frame best continues the previous one.
      const long natural = prev + static_cast<long>(kHop);
      double best = -1e300;
      for (long d = -kTolerance; d <= kTolerance; ++d) {
        double corr = 0.0;
        for (std::size_t i = 0; i < kFrame; ++i) {
          const long li = static_cast<long>(i);
          corr += sampleAt(x, nominal + d + li) * sampleAt(x, natural + li);
        }
        if (corr > best) {
          best = corr;
          chosen = nominal + d;
        }
      }
    }
    prev = chosen;
    // Output frame k is centered at k*hop; buffer index is offset by half a frame.
    const std::size_t base = k * kHop;
    for (std::size_t i = 0; i < kFrame && base + i < out.size(); ++i) {
      out[base + i] += window[i] * sampleAt(x, chosen + static_cast<long>(i));
      norm[base + i] += window[i];
    }
  }
  std::vector<double> y(outLength);
  for (std::size_t i = 0; i < outLength; ++i) {
    const double w = norm[i + kFrame / 2];
    y[i] = w > 1e-8 ? out[i + kFrame / 2] / w : 0.0;
  }
  return y;
}

std::vector<double> circularShift(const std::vector<double>& x, long k) {
  const long n = static_cast<long>(x.size());
  if (n == 0) {
    return x;
  }
  const long s = ((k % n) + n) % n;
  std::vector<double> y(x.size());
  for (long i = 0; i < n; ++i) {
    y[static_cast<std::size_t>((i + s) % n)] = x[static_cast<std::size_t>(i)];
  }
  return y;
}

std::vector<double> pitchShift(const std::vector<double>& x, double semitones) {
  if (semitones == 0.0) {
    return x;
  }
  const double ratio = std::pow(2.0, semitones / 12.0);
  return timeStretch(changeSpeed(x, ratio), x.size());
}

audio::BreathingCycle applyAugmentation(const audio::BreathingCycle& cycle,
                                        const AugmentSpec& spec) {
  if (cycle.samples.empty()) {
    throw InputError("cannot augment an empty cycle");
  }
  spec.validate();
  audio::BreathingCycle out = cycle;
  switch (spec.transform) {
    case Transform::Noise: {
      const auto noise = scaledNoise(cycle.samples, spec.value, spec.seed);
      for (std::size_t i = 0; i < noise.size(); ++i) {
        out.samples[i] += noise[i];
      }
      break;
    }
    case Transform::Speed:
      out.samples = changeSpeed(cycle.samples, spec.value);
      break;
    case Transform::Shift:
      out.samples = circularShift(
          cycle.samples, std::lround(spec.value * kCycleSampleRate));
      break;
    case Transform::Pitch:
      out.samples = pitchShift(cycle.samples, spec.value);
      break;
  }
  for (auto& v : out.samples) {
    v = std::clamp(v, -1.0, 1.0);
  }
  return out;
}

AugmentSpec drawAugmentSpec(std::mt19937_64& rng, const AugmentRanges& ranges) {
  auto pickFrom = [&](const std::vector<double>& options) {
    if (options.empty()) {
      throw ConfigurationError("augmentation parameter list is empty");
    }
    return options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
  };
  AugmentSpec spec;
  spec.transform = static_cast<Transform>(std::uniform_int_distribution<int>(0, 3)(rng));
  switch (spec.transform) {
    case Transform::Noise:
      spec.value = pickFrom(ranges.snrDb);
      break;
    case Transform::Speed:
      spec.value = pickFrom(ranges.speedFactors);
      break;
    case Transform::Shift:
      spec.value =
          std::uniform_real_distribution<double>(-ranges.maxShiftS, ranges.maxShiftS)(rng);
      break;
    case Transform::Pitch:
      spec.value = std::uniform_real_distribution<double>(-ranges.maxPitchSemitones,
                                                          ranges.maxPitchSemitones)(rng);
      break;
  }
  spec.seed = rng();
  return spec;
}

ClassTargets balanceTargets(const std::vector<audio::BreathingCycle>& cycles) {
  ClassTargets counts{};
  for (const auto& c : cycles) {
    ++counts[static_cast<std::size_t>(classIndex(c.label))];
  }
  const std::size_t top = *std::max_element(counts.begin(), counts.end());
  counts.fill(top);
  return counts;
}

namespace {

audio::BreathingCycle augmentOne(const audio::BreathingCycle& src, std::uint64_t seed,
                                 std::uint64_t pass, std::uint64_t index,
                                 const AugmentRanges& ranges) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(pass), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  return applyAugmentation(src, drawAugmentSpec(rng, ranges));
}

} // namespace

std::vector<audio::BreathingCycle> augmentDataset(
    const std::vector<audio::BreathingCycle>& cycles, std::size_t multiplier, std::uint64_t seed,
    const std::optional<ClassTargets>& policy, const AugmentRanges& ranges) {
  if (multiplier < 1) {
    throw ArgumentError("augmentation multiplier must be at least 1");
  }
  std::vector<audio::BreathingCycle> out = cycles;
  out.reserve(cycles.size() * multiplier);
  for (std::size_t pass = 1; pass < multiplier; ++pass) {
    for (std::size_t i = 0; i < cycles.size(); ++i) {
      out.push_back(augmentOne(cycles[i], seed, pass, i, ranges));
    }
  }
  if (!policy) {
    return out;
  }

  ClassTargets have{};
  std::array<std::vector<std::size_t>, 4> members;
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    members[static_cast<std::size_t>(classIndex(cycles[i].label))].push_back(i);
  }
  for (const auto& c : out) {
    ++have[static_cast<std::size_t>(classIndex(c.label))];
  }
  // Top-up passes use indices past the multiplier passes so seeds never collide.
  for (std::size_t cls = 0; cls < 4; ++cls) {
    const auto& pool = members[cls];
    for (std::size_t j = 0; have[cls] < (*policy)[cls] && !pool.empty(); ++j, ++have[cls]) {
      const std::size_t src = pool[j % pool.size()];
      out.push_back(augmentOne(cycles[src], seed, multiplier + cls, j, ranges));
    }
  }
  return out;
}

} // namespace lungnet::augment
