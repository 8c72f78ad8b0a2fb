#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lungnet/audio/Spectrogram.h"
#include "lungnet/model/ModelZoo.h"
#include "lungnet/quant/LogQuant.h"
#include "lungnet/train/Trainer.h"
#include "lungnet/tuning/PatientTuning.h"

namespace lungnet::cli {

/// Bad command line or configuration; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration text error with a 1-based position.
class ConfigParseError : public UsageError {
 public:
  ConfigParseError(const std::string& source, std::size_t line, std::size_t column,
                   const std::string& what)
      : UsageError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                   what),
        line_(line),
        column_(column) {}

  std::size_t line() const {
    return line_;
  }
  std::size_t column() const {
    return column_;
  }

 private:
  std::size_t line_, column_;
};

struct RunConfig {
  std::filesystem::path datasetRoot;
  std::filesystem::path outputDir = "out";

  double splitFrac = 0.8;
  std::uint64_t splitSeed = 0;
  /// When either list is set, the split is explicit and splitFrac is unused.
  std::vector<std::string> trainPatients;
  std::vector<std::string> testPatients;

  audio::MelConfig mel;
  std::size_t frames = 128;

  model::ModelSpec model = model::ModelSpec::reference();
  std::uint64_t modelSeed = 0;
  train::TrainConfig train;

  tuning::TuneConfig tune;
  double screenThreshold = tuning::kDefaultScreeningThreshold;

  int quantBits = 8;
  std::vector<int> sweepBits = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  quant::NormMode quantMode = quant::NormMode::Local;
  double zeroThreshold = quant::kDefaultZeroThreshold;
};

/**
 * Parses the flat `key = value` format. `#` starts a comment, keys use dotted
 * sections (`train.epochs`), lists are comma separated and relative paths are
 * resolved against baseDir. Unknown or repeated keys and bad values throw
 * ConfigParseError pointing at the offending text.
 */
RunConfig parseConfig(const std::string& text, const std::filesystem::path& baseDir,
                      const std::string& sourceName = "config");
RunConfig loadConfig(const std::filesystem::path& path);

/// Every recognised key in the order documented for users.
const std::vector<std::string>& configKeys();

} // namespace lungnet::cli
