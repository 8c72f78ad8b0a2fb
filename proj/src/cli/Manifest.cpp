#include "lungnet/cli/Manifest.h"

#include <charconv>
#include <map>
#include <sstream>

#include "lungnet/audio/Dsp.h"
#include "lungnet/audio/Wav.h"
#include "lungnet/common/Errors.h"

namespace lungnet::cli {

namespace {

constexpr const char* kHeader =
    "cycle_id\tpatient_id\trecording_id\tindex\tlabel\tcrackle\twheeze\tstart_s\tend_s\t"
    "duration_s\tsource";
constexpr std::size_t kColumns = 11;

std::vector<std::string> splitTabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) {
      return out;
    }
    start = tab + 1;
  }
}

template <typename T>
T parseNumber(const std::string& s, std::size_t line, const char* column) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("manifest line " + std::to_string(line) + ": bad " + column + " '" + s +
                      "'");
  }
  return v;
}

} // namespace

std::string formatReal(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string formatManifest(const std::vector<ManifestRow>& rows) {
  std::ostringstream out;
  out << kHeader << '\n';
  for (const auto& r : rows) {
    out << r.cycleId << '\t' << r.patientId << '\t' << r.recordingId << '\t' << r.index << '\t'
        << labelName(r.label) << '\t' << r.crackle << '\t' << r.wheeze << '\t'
        << formatReal(r.startS) << '\t' << formatReal(r.endS) << '\t' << formatReal(r.durationS)
        << '\t' << r.source << '\n';
  }
  return out.str();
}

std::vector<ManifestRow> parseManifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw FormatError("manifest line 1: unexpected header");
  }
  std::vector<ManifestRow> rows;
  for (std::size_t lineNo = 2; std::getline(in, line); ++lineNo) {
    if (line.empty()) {
      continue;
    }
    const auto f = splitTabs(line);
    if (f.size() != kColumns) {
      throw FormatError("manifest line " + std::to_string(lineNo) + ": expected " +
                        std::to_string(kColumns) + " columns, found " + std::to_string(f.size()));
    }
    ManifestRow r;
    r.cycleId = f[0];
    r.patientId = f[1];
    r.recordingId = f[2];
    r.index = parseNumber<std::size_t>(f[3], lineNo, "index");
    try {
      r.label = parseLabel(f[4]);
    } catch (const InputError&) {
      throw FormatError("manifest line " + std::to_string(lineNo) + ": bad label '" + f[4] + "'");
    }
    r.crackle = parseNumber<int>(f[5], lineNo, "crackle");
    r.wheeze = parseNumber<int>(f[6], lineNo, "wheeze");
    r.startS = parseNumber<double>(f[7], lineNo, "start_s");
    r.endS = parseNumber<double>(f[8], lineNo, "end_s");
    r.durationS = parseNumber<double>(f[9], lineNo, "duration_s");
    r.source = f[10];
    if (labelFromFlags(r.crackle, r.wheeze) != r.label) {
      throw FormatError("manifest line " + std::to_string(lineNo) +
                        ": label does not match the crackle/wheeze flags");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ManifestRow> selectPatients(const std::vector<ManifestRow>& rows,
                                        const std::set<std::string>& patients) {
  if (patients.empty()) {
    return rows;
  }
  std::vector<ManifestRow> out;
  for (const auto& r : rows) {
    if (patients.count(r.patientId)) {
      out.push_back(r);
    }
  }
  return out;
}

std::vector<audio::BreathingCycle> loadCycles(const std::vector<ManifestRow>& rows,
                                              const std::filesystem::path& datasetRoot) {
  // Group rows by source while remembering where each one goes.
  std::map<std::string, std::vector<std::size_t>> bySource;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    bySource[rows[i].source].push_back(i);
  }
  std::vector<audio::BreathingCycle> out(rows.size());
  for (const auto& [source, idx] : bySource) {
    const auto rec = audio::resample(audio::loadWav(datasetRoot / source));
    std::vector<audio::Annotation> ann;
    for (auto i : idx) {
      ann.push_back({rows[i].startS, rows[i].endS, rows[i].crackle, rows[i].wheeze});
    }
    auto cycles = audio::sliceCycles(rec, ann);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out[idx[k]] = std::move(cycles[k]);
    }
  }
  return out;
}

} // namespace lungnet::cli
