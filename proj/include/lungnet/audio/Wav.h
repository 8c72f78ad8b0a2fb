#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lungnet::audio {

enum class ChestLocation { Tc, Al, Ar, Pl, Pr, Ll, Lr };

std::string chestLocationName(ChestLocation loc);

/// Fields encoded in an ICBHI file name:
/// <patient>_<recording index>_<location>_<mode>_<equipment>.wav
struct RecordingName {
  std::string patientId;
  std::string recordingIndex;
  ChestLocation location = ChestLocation::Tc;
  std::string mode;
  std::string equipment;
};

/// Throws MetadataError (keeping the raw name) when the name does not parse.
RecordingName parseRecordingName(const std::string& fileName);

struct AudioRecording {
  std::vector<double> samples;
  double sampleRate = 0.0;
  std::string patientId;
  /// File stem; unique across the dataset.
  std::string recordingId;
  std::string recordingIndex;
  ChestLocation chestLocation = ChestLocation::Tc;
  std::string mode;
  std::string equipment;

  double durationSeconds() const {
    return sampleRate > 0 ? static_cast<double>(samples.size()) / sampleRate : 0.0;
  }
};

struct PcmAudio {
  std::vector<double> samples;
  int sampleRate = 0;
};

/// Reads a RIFF/WAVE PCM 16-bit mono file; samples are value / 32768.
/// Throws FormatError for anything else.
PcmAudio readPcm16(const std::filesystem::path& path);

/// Writes samples as 16-bit PCM mono. Values are scaled by 32768, rounded to
/// nearest and clamped to the int16 range.
void writePcm16(const std::filesystem::path& path, const std::vector<double>& samples,
                int sampleRate);

/// readPcm16 plus ICBHI file-name metadata.
AudioRecording loadWav(const std::filesystem::path& path);

} // namespace lungnet::audio
