#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "lungnet/audio/Wav.h"

namespace lungnet::audio {

/// In-place iterative radix-2 FFT. Size must be a power of two.
void fft(std::vector<std::complex<double>>& data);

std::size_t nextPowerOfTwo(std::size_t n);

/// |X_k|^2 for k = 0..n/2 of the real input zero-padded to n (a power of two).
std::vector<double> powerSpectrum(const std::vector<double>& frame, std::size_t n);

/// Periodic Hann window of the given length.
std::vector<double> hannWindow(std::size_t length);

/**
 * Rational polyphase resampler with a Kaiser-windowed sinc kernel.
 *
 * Output sample k sits at input position k*down/up. The low-pass cutoff is
 * given as a fraction of the lower of the two rates; 0.45 keeps the
 * transition band below Nyquist. Output length is supplied by the caller so
 * the same kernel serves both decimation and time scaling.
 */
std::vector<double> resamplePolyphase(const std::vector<double>& x, std::size_t up,
                                      std::size_t down, std::size_t outLength,
                                      double cutoffFraction = 0.45);

/// round(n * target / source) computed without floating-point drift.
std::size_t resampledLength(std::size_t n, std::size_t up, std::size_t down);

/// Downsamples to target_hz (default 4000). Identity when the rate already
/// matches; throws UnsupportedError when target exceeds the source rate.
AudioRecording resample(const AudioRecording& rec, double targetHz = 4000.0);

} // namespace lungnet::audio
