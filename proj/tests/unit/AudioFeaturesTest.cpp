#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "../support/Oracles.h"
#include "lungnet/audio/Cycles.h"
#include "lungnet/audio/Dsp.h"
#include "lungnet/audio/Spectrogram.h"
#include "lungnet/audio/Stats.h"
#include "lungnet/audio/Wav.h"
#include "lungnet/common/Errors.h"

using namespace lungnet;
using namespace lungnet::audio;
using lungnet::testing::dftPeakHz;
using lungnet::testing::sine;

namespace {

std::filesystem::path tempDir() {
  auto dir = std::filesystem::temp_directory_path() / "lungnet_audio_test";
  std::filesystem::create_directories(dir);
  return dir;
}

void put16(std::ofstream& out, std::uint16_t v) {
  out.put(static_cast<char>(v & 0xff));
  out.put(static_cast<char>(v >> 8));
}

void put32(std::ofstream& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v & 0xffff));
  put16(out, static_cast<std::uint16_t>(v >> 16));
}

// Hand-assembled RIFF file, independent of the library writer.
std::filesystem::path rawWav(const std::string& name, const std::vector<std::int16_t>& pcm,
                             std::uint16_t format = 1, std::uint16_t channels = 1,
                             std::uint16_t bits = 16, std::uint32_t rate = 4000) {
  auto path = tempDir() / name;
  std::ofstream out(path, std::ios::binary);
  const auto dataBytes = static_cast<std::uint32_t>(pcm.size() * 2);
  out.write("RIFF", 4);
  put32(out, 36 + dataBytes);
  out.write("WAVEfmt ", 8);
  put32(out, 16);
  put16(out, format);
  put16(out, channels);
  put32(out, rate);
  put32(out, rate * channels * bits / 8);
  put16(out, static_cast<std::uint16_t>(channels * bits / 8));
  put16(out, bits);
  out.write("data", 4);
  put32(out, dataBytes);
  for (auto v : pcm) put16(out, static_cast<std::uint16_t>(v));
  return path;
}

AudioRecording recordingAt4k(std::size_t n) {
  AudioRecording rec;
  rec.sampleRate = 4000.0;
  rec.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) rec.samples[i] = static_cast<double>(i);
  rec.patientId = "101";
  rec.recordingId = "101_1b1_Al_sc_Meditron";
  return rec;
}

// Nearest Mel band center to hz, computed from the HTK formula directly.
std::size_t nearestMelBand(double hz, std::size_t nMels, double fmax) {
  const double melMax = 2595.0 * std::log10(1.0 + fmax / 700.0);
  std::size_t best = 0;
  double bestDist = 1e300;
  for (std::size_t i = 0; i < nMels; ++i) {
    const double mel = melMax * static_cast<double>(i + 1) / static_cast<double>(nMels + 1);
    const double center = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
    if (std::abs(center - hz) < bestDist) {
      bestDist = std::abs(center - hz);
      best = i;
    }
  }
  return best;
}

} // namespace

TEST(Wav, ScalingOfExtremeValues) {
  auto path = rawWav("101_1b1_Al_sc_Meditron.wav", {0, -32768, 32767});
  auto rec = loadWav(path);
  ASSERT_EQ(rec.samples.size(), 3u);
  EXPECT_EQ(rec.samples[0], 0.0);
  EXPECT_EQ(rec.samples[1], -1.0);
  EXPECT_EQ(rec.samples[2], 32767.0 / 32768.0);
  EXPECT_EQ(rec.sampleRate, 4000.0);
  EXPECT_EQ(rec.patientId, "101");
  EXPECT_EQ(rec.recordingIndex, "1b1");
  EXPECT_EQ(rec.chestLocation, ChestLocation::Al);
  EXPECT_EQ(rec.mode, "sc");
  EXPECT_EQ(rec.equipment, "Meditron");
  EXPECT_EQ(rec.recordingId, "101_1b1_Al_sc_Meditron");
}

TEST(Wav, RoundTripIsExact) {
  std::vector<double> samples;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dist(-32768, 32767);
  for (int i = 0; i < 1000; ++i) samples.push_back(dist(rng) / 32768.0);
  auto path = tempDir() / "102_2b3_Pr_mc_LittC2SE.wav";
  writePcm16(path, samples, 44100);
  auto rec = loadWav(path);
  EXPECT_EQ(rec.sampleRate, 44100.0);
  EXPECT_EQ(rec.samples, samples);
}

TEST(Wav, RejectsNonPcmLayouts) {
  EXPECT_THROW(readPcm16(rawWav("float.wav", {1, 2}, 3)), FormatError);
  EXPECT_THROW(readPcm16(rawWav("stereo.wav", {1, 2}, 1, 2)), FormatError);
  EXPECT_THROW(readPcm16(rawWav("eight.wav", {1, 2}, 1, 1, 8)), FormatError);
  auto junk = tempDir() / "junk.wav";
  std::ofstream(junk) << "definitely not riff";
  EXPECT_THROW(readPcm16(junk), FormatError);
}

TEST(Wav, UnparseableNameKeepsRawName) {
  auto path = rawWav("recording.wav", {1});
  try {
    loadWav(path);
    FAIL() << "expected MetadataError";
  } catch (const MetadataError& e) {
    EXPECT_EQ(e.rawName(), "recording.wav");
  }
  EXPECT_THROW(parseRecordingName("101_1b1_Xx_sc_Meditron.wav"), MetadataError);
}

TEST(Resample, SameRateIsBitIdentical) {
  AudioRecording rec;
  rec.sampleRate = 4000;
  rec.samples = sine(123.4, 4000, 777);
  auto out = resample(rec, 4000);
  EXPECT_EQ(out.samples, rec.samples);
}

TEST(Resample, ToneAt8kKeepsFrequency) {
  AudioRecording rec;
  rec.sampleRate = 8000;
  rec.samples = sine(100, 8000, 8000);
  auto out = resample(rec);
  ASSERT_EQ(out.samples.size(), 4000u);
  EXPECT_EQ(out.sampleRate, 4000.0);
  EXPECT_DOUBLE_EQ(dftPeakHz(out.samples, 4000), 100.0);
}

TEST(Resample, LengthFormula) {
  AudioRecording rec;
  rec.sampleRate = 44100;
  rec.samples.assign(110250, 0.1);
  EXPECT_EQ(resample(rec).samples.size(), 10000u);
  rec.samples.assign(12345, 0.1);
  // round(12345 * 4000 / 44100) = round(1119.73)
  EXPECT_EQ(resample(rec).samples.size(), 1120u);
}

TEST(Resample, UpsamplingIsUnsupported) {
  AudioRecording rec;
  rec.sampleRate = 2000;
  rec.samples.assign(10, 0.0);
  EXPECT_THROW(resample(rec, 4000), UnsupportedError);
}

TEST(Resample, PreservesToneFrequencyBelow2k) {
  std::mt19937_64 rng(11);
  const std::vector<double> rates = {8000, 16000, 22050, 44100};
  for (int trial = 0; trial < 10; ++trial) {
    const double src = rates[static_cast<std::size_t>(trial) % rates.size()];
    const double hz = std::uniform_real_distribution<double>(30.0, 1990.0)(rng);
    AudioRecording rec;
    rec.sampleRate = src;
    rec.samples = sine(hz, src, static_cast<std::size_t>(src));
    auto out = resample(rec);
    // 1 s of output gives 1 Hz bins.
    EXPECT_LE(std::abs(dftPeakHz(out.samples, 4000) - hz), 1.0) << "src " << src << " hz " << hz;
  }
}

TEST(Resample, SuppressesContentAboveNewNyquist) {
  AudioRecording rec;
  rec.sampleRate = 8000;
  rec.samples = sine(3000, 8000, 8000, 1.0);
  auto out = resample(rec);
  double rms = 0.0;
  // Skip the filter edge transient at both ends.
  for (std::size_t i = 200; i + 200 < out.samples.size(); ++i) rms += out.samples[i] * out.samples[i];
  rms = std::sqrt(rms / static_cast<double>(out.samples.size() - 400));
  EXPECT_LT(rms, 1e-3);
}

TEST(Annotations, ParsesTabsAndSpaces) {
  auto rows = parseAnnotations("0.036\t0.579\t0\t0\n\n0.579 2.45 1 1\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[1].endS, 2.45);
  EXPECT_EQ(rows[1].crackle, 1);
  EXPECT_THROW(parseAnnotations("0.1 0.2 0\n"), AnnotationError);
  EXPECT_THROW(parseAnnotations("0.1 0.2 0 1 7\n"), AnnotationError);
}

TEST(SliceCycles, IndexArithmeticAndLabel) {
  auto rec = recordingAt4k(12000);
  auto cycles = sliceCycles(rec, {{0.5, 2.1, 0, 1}, {0.0, 1.0, 1, 1}});
  ASSERT_EQ(cycles.size(), 2u);
  ASSERT_EQ(cycles[0].samples.size(), 6400u);
  EXPECT_EQ(cycles[0].samples.front(), 2000.0);
  EXPECT_EQ(cycles[0].samples.back(), 8399.0);
  EXPECT_EQ(cycles[0].label, CycleLabel::Wheeze);
  EXPECT_EQ(cycles[0].patientId, "101");
  EXPECT_EQ(cycles[1].label, CycleLabel::Both);
}

TEST(SliceCycles, Errors) {
  auto rec = recordingAt4k(12000);
  EXPECT_THROW(sliceCycles(rec, {{1.0, 1.0, 0, 0}}), AnnotationError);
  EXPECT_THROW(sliceCycles(rec, {{2.0, 1.0, 0, 0}}), AnnotationError);
  try {
    sliceCycles(rec, {{0.0, 1.0, 0, 0}, {2.0, 3.5, 0, 0}});
    FAIL() << "expected AnnotationError";
  } catch (const AnnotationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
  EXPECT_THROW(sliceCycles(rec, {{0.0, 1.0, 2, 0}}), AnnotationError);
  rec.sampleRate = 8000;
  EXPECT_THROW(sliceCycles(rec, {{0.0, 1.0, 0, 0}}), ArgumentError);
}

TEST(SliceCycles, LabelMapTotalAndInjective) {
  auto rec = recordingAt4k(8000);
  std::set<CycleLabel> seen;
  for (int c = 0; c <= 1; ++c)
    for (int w = 0; w <= 1; ++w) seen.insert(sliceCycles(rec, {{0.0, 1.0, c, w}})[0].label);
  EXPECT_EQ(seen.size(), 4u);
}

TEST(MelSpectrogram, SilenceIsFloor) {
  auto spec = melSpectrogram(std::vector<double>(4000, 0.0));
  for (double v : spec.values) EXPECT_EQ(v, -80.0);
}

TEST(MelSpectrogram, ToneLandsInNearestBand) {
  auto spec = melSpectrogram(sine(1000, 4000, 4000));
  const std::size_t expected = nearestMelBand(1000, 40, 2000);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    std::size_t arg = 0;
    for (std::size_t m = 1; m < spec.nMels; ++m)
      if (spec.at(m, t) > spec.at(arg, t)) arg = m;
    EXPECT_EQ(arg, expected) << "frame " << t;
  }
}

TEST(MelSpectrogram, FrameCountClosedForm) {
  auto spec = melSpectrogram(std::vector<double>(4000, 0.1));
  EXPECT_EQ(spec.frames, 32u);
  EXPECT_EQ(spec.nMels, 40u);
  EXPECT_DOUBLE_EQ(spec.frameHopS, 0.03);

  auto framesByScan = [](std::size_t n) {
    std::size_t count = 0;
    for (std::size_t start = 0; start + 240 <= n; start += 120) ++count;
    return count;
  };
  std::mt19937_64 rng(3);
  std::vector<std::size_t> lengths;
  for (std::size_t n = 240; n <= 1500; ++n) lengths.push_back(n);
  for (int i = 0; i < 200; ++i)
    lengths.push_back(std::uniform_int_distribution<std::size_t>(240, 40000)(rng));
  lengths.push_back(40000);
  MelConfig cfg;
  for (auto n : lengths) {
    EXPECT_EQ(frameCount(n, cfg), framesByScan(n)) << n;
  }
  // Full computation on a subset, so the spectrogram itself agrees.
  for (std::size_t i = 0; i < lengths.size(); i += 37) {
    EXPECT_EQ(melSpectrogram(std::vector<double>(lengths[i], 0.2)).frames,
              framesByScan(lengths[i]));
  }
}

TEST(MelSpectrogram, ShortCycleIsRepeatedToOneWindow) {
  auto shortSig = sine(300, 4000, 100);
  std::vector<double> repeated(240);
  for (std::size_t i = 0; i < 240; ++i) repeated[i] = shortSig[i % 100];
  auto a = melSpectrogram(shortSig);
  auto b = melSpectrogram(repeated);
  EXPECT_EQ(a.frames, 1u);
  EXPECT_EQ(a.values, b.values);
}

TEST(MelSpectrogram, ValuesNeverBelowFloor) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1e-4);
  std::vector<double> x(3000);
  for (auto& v : x) v = nd(rng);
  for (double v : melSpectrogram(x).values) EXPECT_GE(v, -80.0);
}

TEST(Filterbank, RowsPositiveAndNoGap) {
  MelConfig cfg;
  auto fb = melFilterbank(cfg);
  const std::size_t bins = cfg.nFft / 2 + 1;
  for (std::size_t m = 0; m < cfg.nMels; ++m) {
    double s = 0.0;
    for (std::size_t k = 0; k < bins; ++k) s += fb[m * bins + k];
    EXPECT_GT(s, 0.0) << "band " << m;
  }
  // Every bin strictly between fmin and fmax gets some response.
  for (std::size_t k = 1; k + 1 < bins; ++k) {
    double s = 0.0;
    for (std::size_t m = 0; m < cfg.nMels; ++m) s += fb[m * bins + k];
    EXPECT_GT(s, 0.0) << "bin " << k;
  }
}

namespace {
MelSpectrogram rampSpec(std::size_t frames) {
  MelSpectrogram s;
  s.nMels = 3;
  s.frames = frames;
  s.values.resize(3 * frames);
  for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = static_cast<double>(i);
  return s;
}
} // namespace

TEST(FixWidth, IdentityRepeatAndCrop) {
  auto same = rampSpec(128);
  EXPECT_EQ(fixWidth(same).values, same.values);

  auto shortSpec = rampSpec(64);
  auto rep = fixWidth(shortSpec);
  ASSERT_EQ(rep.frames, 128u);
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t t = 0; t < 64; ++t) {
      EXPECT_EQ(rep.at(m, t), shortSpec.at(m, t));
      EXPECT_EQ(rep.at(m, t + 64), shortSpec.at(m, t));
    }

  auto longSpec = rampSpec(200);
  auto crop = fixWidth(longSpec);
  ASSERT_EQ(crop.frames, 128u);
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t t = 0; t < 128; ++t) EXPECT_EQ(crop.at(m, t), longSpec.at(m, 36 + t));
}

TEST(FixWidth, Idempotent) {
  for (std::size_t frames : {1u, 5u, 64u, 127u, 128u, 129u, 300u}) {
    auto once = fixWidth(rampSpec(frames));
    EXPECT_EQ(fixWidth(once).values, once.values);
  }
  EXPECT_THROW(fixWidth(MelSpectrogram{}), InputError);
}

TEST(CycleStats, TimeDomain) {
  auto constant = cycleStats(std::vector<double>(100, 0.3));
  EXPECT_EQ(constant.zcr, 0.0);
  EXPECT_DOUBLE_EQ(constant.durationS, 0.025);

  std::vector<double> alt(101);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? -1.0 : 1.0;
  auto s = cycleStats(alt);
  EXPECT_DOUBLE_EQ(s.rmsEnergy, 1.0);
  EXPECT_DOUBLE_EQ(s.zcr, 1.0);
  EXPECT_LE(s.rolloffHz, 2000.0);
}

TEST(CycleStats, PureToneSpectrum) {
  auto s = cycleStats(sine(500, 4000, 4000));
  const double bin = 4000.0 / 4096.0;
  EXPECT_LE(std::abs(s.rolloffHz - 500.0), bin);
  // A Hann-windowed tone spreads over ~+-2 bins; anything of that order is ~0
  // against a 2 kHz band.
  EXPECT_LT(s.spectralBandwidthHz, 2.0 * bin);
}

TEST(Variability, HandNormalization) {
  std::vector<CycleStats> stats(2);
  stats[0].durationS = 1.0;
  stats[1].durationS = 3.0;
  for (auto& s : stats) s.rmsEnergy = s.zcr = s.spectralBandwidthHz = s.rolloffHz = 0.5;
  std::vector<std::string> ids = {"a", "b"};
  auto report = variabilityReport(stats, ids);
  const auto& dur = report.features[0];
  EXPECT_EQ(dur.feature, "duration");
  EXPECT_EQ(dur.inter, (std::vector<double>{0.5, 1.5}));
  EXPECT_EQ(dur.intra, (std::vector<double>{1.0, 1.0}));
  for (std::size_t f = 1; f < report.features.size(); ++f) {
    for (double v : report.features[f].intra) EXPECT_EQ(v, 1.0);
    for (double v : report.features[f].inter) EXPECT_EQ(v, 1.0);
  }
  EXPECT_TRUE(report.warnings.empty());
}

TEST(Variability, SinglePatientIntraEqualsInter) {
  std::mt19937_64 rng(9);
  std::vector<BreathingCycle> cycles(5);
  for (auto& c : cycles) {
    c.patientId = "only";
    c.samples = sine(std::uniform_real_distribution<double>(100, 900)(rng), 4000,
                     std::uniform_int_distribution<std::size_t>(500, 3000)(rng));
  }
  auto report = variabilityReport(cycles);
  for (const auto& f : report.features) EXPECT_EQ(f.intra, f.inter) << f.feature;
}

TEST(Variability, ZeroMeanPatientExcludedWithWarning) {
  std::vector<CycleStats> stats(3);
  for (auto& s : stats) s.durationS = 1.0;
  stats[0].rmsEnergy = 2.0;
  stats[1].rmsEnergy = 0.0;
  stats[2].rmsEnergy = 0.0;
  std::vector<std::string> ids = {"a", "b", "b"};
  auto report = variabilityReport(stats, ids);
  EXPECT_EQ(report.features[1].intra.size(), 1u);
  EXPECT_FALSE(report.warnings.empty());
}

TEST(BoxSummary, Quartiles) {
  auto b = boxSummary({5, 1, 3, 2, 4});
  EXPECT_EQ(b.min, 1);
  EXPECT_EQ(b.q1, 2);
  EXPECT_EQ(b.median, 3);
  EXPECT_EQ(b.q3, 4);
  EXPECT_EQ(b.max, 5);
}
