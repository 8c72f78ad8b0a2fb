#include "lungnet/audio/Dsp.h"

#include <cmath>
#include <numeric>

#include "lungnet/common/Errors.h"

namespace lungnet::audio {

namespace {

constexpr double kKaiserBeta = 8.0;
constexpr double kZeroCrossings = 16.0;

double sinc(double x) {
  if (std::abs(x) < 1e-12) {
    return 1.0;
  }
  return std::sin(M_PI * x) / (M_PI * x);
}

std::size_t integerRate(double hz, const char* what) {
  if (!(hz > 0.0) || std::nearbyint(hz) != hz) {
    throw ArgumentError(std::string(what) + " sample rate must be a positive integer");
  }
  return static_cast<std::size_t>(hz);
}

} // namespace

std::size_t nextPowerOfTwo(std::size_t n) {
  std::size_t p = 1;
  while (p < n) {
    p <<= 1;
  }
  return p;
}

void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw ArgumentError("fft size must be a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) {
      j ^= bit;
    }
    j ^= bit;
    if (i < j) {
      std::swap(a[i], a[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

std::vector<double> powerSpectrum(const std::vector<double>& frame, std::size_t n) {
  if (frame.size() > n) {
    throw ArgumentError("frame longer than fft size");
  }
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    buf[i] = frame[i];
  }
  fft(buf);
  std::vector<double> p(n / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::norm(buf[k]);
  }
  return p;
}

std::vector<double> hannWindow(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(length));
  }
  return w;
}

std::size_t resampledLength(std::size_t n, std::size_t up, std::size_t down) {
  // round half up of n*up/down
  return (2 * n * up + down) / (2 * down);
}

std::vector<double> resamplePolyphase(const std::vector<double>& x, std::size_t up,
                                      std::size_t down, std::size_t outLength,
                                      double cutoffFraction) {
  if (up == 0 || down == 0) {
    throw ArgumentError("resampling factors must be positive");
  }
  const std::size_t g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1 && outLength == x.size()) {
    return x;
  }

  // Cutoff in cycles per input sample.
  const double fc = cutoffFraction * std::min(1.0, static_cast<double>(up) / down);
  const auto half = static_cast<long>(std::ceil(kZeroCrossings / (2.0 * fc)));
  const std::size_t taps = static_cast<std::size_t>(2 * half);
  const double i0Beta = std::cyl_bessel_i(0.0, kKaiserBeta);

  std::vector<double> table(up * taps);
  for (std::size_t p = 0; p < up; ++p) {
    double* row = table.data() + p * taps;
    double sum = 0.0;
    for (std::size_t j = 0; j < taps; ++j) {
      const double t = static_cast<double>(p) / up + static_cast<double>(half - 1) -
          static_cast<double>(j);
      const double r = t / static_cast<double>(half);
      double w = 0.0;
      if (std::abs(r) < 1.0) {
        w = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / i0Beta;
      }
      row[j] = 2.0 * fc * sinc(2.0 * fc * t) * w;
      sum += row[j];
    }
    for (std::size_t j = 0; j < taps; ++j) {
      row[j] /= sum;
    }
  }

  const long n = static_cast<long>(x.size());
  std::vector<double> y(outLength);
  for (std::size_t k = 0; k < outLength; ++k) {
    const std::size_t num = k * down;
    const long n0 = static_cast<long>(num / up);
    const double* row = table.data() + (num % up) * taps;
    const long first = n0 - half + 1;
    const long jBegin = std::max(0L, -first);
    const long jEnd = std::min(static_cast<long>(taps), n - first);
    double acc = 0.0;
    for (long j = jBegin; j < jEnd; ++j) {
      acc += row[j] * x[static_cast<std::size_t>(first + j)];
    }
    y[k] = acc;
  }
  return y;
}

AudioRecording resample(const AudioRecording& rec, double targetHz) {
  const std::size_t source = integerRate(rec.sampleRate, "source");
  const std::size_t target = integerRate(targetHz, "target");
  if (target > source) {
    throw UnsupportedError("upsampling from " + std::to_string(source) + " Hz to " +
                           std::to_string(target) + " Hz is not supported");
  }
  AudioRecording out = rec;
  out.sampleRate = static_cast<double>(target);
  if (target == source) {
    return out;
  }
  const std::size_t g = std::gcd(source, target);
  const std::size_t up = target / g, down = source / g;
  out.samples = resamplePolyphase(rec.samples, up, down,
                                  resampledLength(rec.samples.size(), up, down));
  return out;
}

} // namespace lungnet::audio
