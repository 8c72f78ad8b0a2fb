#include "lungnet/audio/Cycles.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lungnet/common/Errors.h"

namespace lungnet::audio {

std::vector<Annotation> parseAnnotations(const std::string& text) {
  std::vector<Annotation> rows;
  std::istringstream in(text);
  std::size_t lineNo = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    std::istringstream fields(line);
    Annotation a;
    std::string extra;
    if (!(fields >> a.startS >> a.endS >> a.crackle >> a.wheeze) || (fields >> extra)) {
      throw AnnotationError("annotation line " + std::to_string(lineNo) +
                            ": expected 'start end crackle wheeze', got '" + line + "'");
    }
    rows.push_back(a);
  }
  return rows;
}

std::vector<Annotation> readAnnotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parseAnnotations(buf.str());
}

std::vector<BreathingCycle> sliceCycles(const AudioRecording& rec,
                                        const std::vector<Annotation>& annotations) {
  if (rec.sampleRate != kCycleSampleRate) {
    throw ArgumentError("sliceCycles expects a 4000 Hz recording, got " +
                        std::to_string(rec.sampleRate) + " Hz");
  }
  const double duration = rec.durationSeconds();
  std::vector<BreathingCycle> cycles;
  cycles.reserve(annotations.size());
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    const std::string row = "annotation row " + std::to_string(i) + " (" + rec.recordingId + ")";
    if (!std::isfinite(a.startS) || !std::isfinite(a.endS) || a.startS >= a.endS) {
      throw AnnotationError(row + ": start must be before end");
    }
    if (a.startS < 0.0 || a.endS > duration) {
      throw AnnotationError(row + ": interval outside the recording");
    }
    if ((a.crackle != 0 && a.crackle != 1) || (a.wheeze != 0 && a.wheeze != 1)) {
      throw AnnotationError(row + ": crackle/wheeze flags must be 0 or 1");
    }
    const auto begin = static_cast<std::size_t>(std::floor(a.startS * kCycleSampleRate));
    const auto end = std::min(rec.samples.size(),
                              static_cast<std::size_t>(std::floor(a.endS * kCycleSampleRate)));
    if (end <= begin) {
      throw AnnotationError(row + ": interval shorter than one sample");
    }
    BreathingCycle c;
    c.samples.assign(rec.samples.begin() + static_cast<long>(begin),
                     rec.samples.begin() + static_cast<long>(end));
    c.label = labelFromFlags(a.crackle == 1, a.wheeze == 1);
    c.startS = a.startS;
    c.endS = a.endS;
    c.patientId = rec.patientId;
    c.recordingId = rec.recordingId;
    cycles.push_back(std::move(c));
  }
  return cycles;
}

} // namespace lungnet::audio
