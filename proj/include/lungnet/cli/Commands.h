#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lungnet/cli/Config.h"
#include "lungnet/train/Metrics.h"

namespace lungnet::cli {

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<int> bits;
  /// Replaces split, model, train and tune seeds.
  std::optional<std::uint64_t> seed;
  /// Restricts eval/tune to these patients instead of the test split.
  std::vector<std::string> patients;
  /// eval: score a prediction file instead of running the model.
  std::optional<std::filesystem::path> predictions;
  /// eval: decode the stored quantized model before predicting.
  bool quantized = false;
};

// Artifact names inside output_dir.
inline constexpr const char* kManifestFile = "manifest.tsv";
inline constexpr const char* kSkipFile = "skipped.tsv";
inline constexpr const char* kSplitFile = "split.tsv";
inline constexpr const char* kModelFile = "network.model";
inline constexpr const char* kQuantFile = "network.qmodel";
inline constexpr const char* kSweepFile = "sweep.tsv";

void applyOverrides(RunConfig& cfg, const Overrides& o);

// Each command writes its artifacts atomically and logs progress to `log`.
// Missing prerequisites throw InputError naming the artifact.
void cmdPrepare(const RunConfig& cfg, std::ostream& log);
void cmdTrain(const RunConfig& cfg, std::ostream& log);
void cmdEval(const RunConfig& cfg, const Overrides& o, std::ostream& log);
void cmdTune(const RunConfig& cfg, const Overrides& o, std::ostream& log);
void cmdQuantize(const RunConfig& cfg, std::ostream& log);
void cmdReport(const RunConfig& cfg, std::ostream& log);

/// Human-readable and line-oriented (key<TAB>value) renderings of a report.
std::string metricsText(const train::MetricsReport& r);
std::string metricsTsv(const train::MetricsReport& r);

/// Reads `label` and `prediction` columns (class names or 0..3) from a TSV with header.
void readPredictionFile(const std::filesystem::path& path, std::vector<int>& labels,
                        std::vector<int>& predictions);

/**
 * Entry point shared by the executable and the tests. Returns 0 on success,
 * 1 on a runtime failure and 2 on a usage or configuration error.
 */
int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace lungnet::cli
