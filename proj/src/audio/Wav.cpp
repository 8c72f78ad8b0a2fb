#include "lungnet/audio/Wav.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lungnet/common/Errors.h"

namespace lungnet::audio {

namespace {

constexpr std::array<const char*, 7> kLocationNames = {"Tc", "Al", "Ar", "Pl", "Pr", "Ll", "Lr"};

std::uint32_t readU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
      (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t readU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void putU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void putU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

} // namespace

std::string chestLocationName(ChestLocation loc) {
  return kLocationNames[static_cast<std::size_t>(loc)];
}

RecordingName parseRecordingName(const std::string& fileName) {
  std::string stem = std::filesystem::path(fileName).filename().string();
  if (stem.size() > 4 && stem.compare(stem.size() - 4, 4, ".wav") == 0) {
    stem.resize(stem.size() - 4);
  }
  std::vector<std::string> parts;
  std::stringstream ss(stem);
  for (std::string part; std::getline(ss, part, '_');) {
    parts.push_back(part);
  }
  if (parts.size() != 5 || std::any_of(parts.begin(), parts.end(),
                                       [](const std::string& p) { return p.empty(); })) {
    throw MetadataError("file name does not follow patient_rec_location_mode_equipment",
                        fileName);
  }
  RecordingName name;
  name.patientId = parts[0];
  name.recordingIndex = parts[1];
  auto it = std::find(kLocationNames.begin(), kLocationNames.end(), parts[2]);
  if (it == kLocationNames.end()) {
    throw MetadataError("unknown chest location '" + parts[2] + "'", fileName);
  }
  name.location = static_cast<ChestLocation>(it - kLocationNames.begin());
  name.mode = parts[3];
  name.equipment = parts[4];
  return name;
}

PcmAudio readPcm16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) {
    throw FormatError(path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }

  bool haveFmt = false;
  PcmAudio out;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t size = readU32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      fail("truncated chunk");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) {
        fail("short fmt chunk");
      }
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t format = readU16(f);
      const std::uint16_t channels = readU16(f + 2);
      out.sampleRate = static_cast<int>(readU32(f + 4));
      const std::uint16_t bits = readU16(f + 14);
      if (format != 1) {
        fail("not PCM (format tag " + std::to_string(format) + ")");
      }
      if (channels != 1) {
        fail(std::to_string(channels) + " channels, expected mono");
      }
      if (bits != 16) {
        fail(std::to_string(bits) + "-bit samples, expected 16");
      }
      if (out.sampleRate <= 0) {
        fail("invalid sample rate");
      }
      haveFmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!haveFmt) {
        fail("data chunk before fmt chunk");
      }
      const std::size_t n = size / 2;
      out.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::int16_t>(readU16(bytes.data() + body + 2 * i));
        out.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return out;
    }
    pos = body + size + (size & 1);
  }
  fail(haveFmt ? "missing data chunk" : "missing fmt chunk");
  return out;
}

void writePcm16(const std::filesystem::path& path, const std::vector<double>& samples,
                int sampleRate) {
  if (sampleRate <= 0) {
    throw ArgumentError("sample rate must be positive");
  }
  const auto dataBytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::string buf;
  buf.reserve(44 + dataBytes);
  buf += "RIFF";
  putU32(buf, 36 + dataBytes);
  buf += "WAVEfmt ";
  putU32(buf, 16);
  putU16(buf, 1);
  putU16(buf, 1);
  putU32(buf, static_cast<std::uint32_t>(sampleRate));
  putU32(buf, static_cast<std::uint32_t>(sampleRate) * 2);
  putU16(buf, 2);
  putU16(buf, 16);
  buf += "data";
  putU32(buf, dataBytes);
  for (double s : samples) {
    const double scaled = std::clamp(std::nearbyint(s * 32768.0), -32768.0, 32767.0);
    putU16(buf, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

AudioRecording loadWav(const std::filesystem::path& path) {
  auto name = parseRecordingName(path.filename().string());
  auto pcm = readPcm16(path);
  if (pcm.samples.empty()) {
    throw FormatError(path.string() + ": no samples");
  }
  AudioRecording rec;
  rec.samples = std::move(pcm.samples);
  rec.sampleRate = pcm.sampleRate;
  rec.patientId = name.patientId;
  rec.recordingId = path.stem().string();
  rec.recordingIndex = name.recordingIndex;
  rec.chestLocation = name.location;
  rec.mode = name.mode;
  rec.equipment = name.equipment;
  return rec;
}

} // namespace lungnet::audio
