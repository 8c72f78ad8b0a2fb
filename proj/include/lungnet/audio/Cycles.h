#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lungnet/audio/Wav.h"
#include "lungnet/common/Labels.h"

namespace lungnet::audio {

struct BreathingCycle {
  std::vector<double> samples;
  CycleLabel label = CycleLabel::Normal;
  double startS = 0.0;
  double endS = 0.0;
  std::string patientId;
  std::string recordingId;
};

/// One row of an ICBHI annotation file.
struct Annotation {
  double startS = 0.0;
  double endS = 0.0;
  int crackle = 0;
  int wheeze = 0;
};

/// Parses `start end crackle wheeze` rows (tab or space separated). Blank
/// lines are skipped; anything malformed throws AnnotationError naming the line.
std::vector<Annotation> parseAnnotations(const std::string& text);
std::vector<Annotation> readAnnotations(const std::filesystem::path& path);

/**
 * Cuts the annotated cycles out of a 4 kHz recording. Cycle i covers samples
 * [floor(start*4000), floor(end*4000)). Throws ArgumentError when the
 * recording is not at 4 kHz and AnnotationError (naming the row) for empty,
 * reversed or out-of-range intervals and flags other than 0/1.
 */
std::vector<BreathingCycle> sliceCycles(const AudioRecording& rec,
                                        const std::vector<Annotation>& annotations);

} // namespace lungnet::audio
