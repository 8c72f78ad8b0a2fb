#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "lungnet/audio/Cycles.h"

namespace lungnet::augment {

enum class Transform { Noise, Speed, Shift, Pitch };

const char* transformName(Transform t);

/// One transform with its parameter: SNR in dB, speed factor, shift in
/// seconds or pitch in semitones.
struct AugmentSpec {
  Transform transform = Transform::Shift;
  double value = 0.0;
  std::uint64_t seed = 0;

  /// Throws ArgumentError for non-finite values, speed outside (0.5, 2) or
  /// pitch beyond +-12 semitones.
  void validate() const;
};

/// White Gaussian noise rescaled so 10*log10(P_signal / P_noise) is exactly snrDb.
std::vector<double> scaledNoise(const std::vector<double>& signal, double snrDb,
                                std::uint64_t seed);

/// Plays the signal `factor` times faster: length round(n / factor), all
/// frequencies scaled by factor.
std::vector<double> changeSpeed(const std::vector<double>& x, double factor);

/// WSOLA time-scale modification to exactly outLength samples, pitch kept.
std::vector<double> timeStretch(const std::vector<double>& x, std::size_t outLength);

/// y[i] = x[(i - k) mod n]; positive k delays.
std::vector<double> circularShift(const std::vector<double>& x, long k);

/// Frequencies scaled by 2^(semitones/12), length unchanged.
std::vector<double> pitchShift(const std::vector<double>& x, double semitones);

/// Applies one transform and clips the result to [-1, 1]. Label and ids are
/// carried over. Throws InputError on an empty cycle.
audio::BreathingCycle applyAugmentation(const audio::BreathingCycle& cycle,
                                        const AugmentSpec& spec);

/// Parameter ranges used when transforms are drawn at random.
struct AugmentRanges {
  std::vector<double> snrDb = {10.0, 20.0};
  std::vector<double> speedFactors = {0.9, 1.1};
  double maxShiftS = 0.25;
  double maxPitchSemitones = 2.0;
};

/// Uniform transform kind, then a parameter from `ranges`.
AugmentSpec drawAugmentSpec(std::mt19937_64& rng, const AugmentRanges& ranges = {});

/// Desired cycle count per class, indexed by class index.
using ClassTargets = std::array<std::size_t, 4>;

/// Every class raised to the size of the largest one.
ClassTargets balanceTargets(const std::vector<audio::BreathingCycle>& cycles);

/**
 * Originals first, then (multiplier - 1) * n augmented copies (pass r
 * augments cycle i with a transform drawn from a generator seeded by
 * (seed, r, i)). With a policy, classes still below their target are then
 * topped up from their own cycles. Classes without any cycle cannot be
 * topped up and are left as they are.
 */
std::vector<audio::BreathingCycle> augmentDataset(
    const std::vector<audio::BreathingCycle>& cycles, std::size_t multiplier, std::uint64_t seed,
    const std::optional<ClassTargets>& policy = std::nullopt, const AugmentRanges& ranges = {});

} // namespace lungnet::augment
