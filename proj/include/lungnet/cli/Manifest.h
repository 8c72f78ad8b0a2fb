#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "lungnet/audio/Cycles.h"
#include "lungnet/common/Labels.h"

namespace lungnet::cli {

/// One breathing cycle as listed by `prepare`.
struct ManifestRow {
  std::string cycleId;
  std::string patientId;
  std::string recordingId;
  std::size_t index = 0;
  CycleLabel label = CycleLabel::Normal;
  int crackle = 0;
  int wheeze = 0;
  double startS = 0.0;
  double endS = 0.0;
  double durationS = 0.0;
  /// WAV path relative to the dataset root, '/' separated.
  std::string source;
};

/// Shortest decimal text that parses back to the same double.
std::string formatReal(double v);

/// Tab-separated with a header line; rows are written as given.
std::string formatManifest(const std::vector<ManifestRow>& rows);
/// Throws FormatError naming the line for a bad header, column count or value.
std::vector<ManifestRow> parseManifest(const std::string& text);

/// Rows of the listed patients, or every row when the set is empty.
std::vector<ManifestRow> selectPatients(const std::vector<ManifestRow>& rows,
                                        const std::set<std::string>& patients);

/**
 * Reloads the cycles listed in the manifest: each source WAV is read once,
 * resampled to 4 kHz and sliced at the recorded offsets. Output follows row
 * order.
 */
std::vector<audio::BreathingCycle> loadCycles(const std::vector<ManifestRow>& rows,
                                              const std::filesystem::path& datasetRoot);

} // namespace lungnet::cli
