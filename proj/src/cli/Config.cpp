#include "lungnet/cli/Config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "lungnet/common/Errors.h"

namespace lungnet::cli {

namespace {

struct Value {
  std::string key;
  std::string text;
  std::size_t line;
  std::size_t column;
};

// Thrown by the value converters; the caller attaches the position.
struct BadValue {
  std::string what;
};

std::string trim(const std::string& s, std::size_t& offset) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    offset = s.size();
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  offset = b;
  return s.substr(b, e - b + 1);
}

template <typename T>
T number(const std::string& s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw BadValue{"'" + s + "' is not a valid number"};
  }
  return v;
}

double real(const std::string& s) {
  return number<double>(s);
}

std::size_t count(const std::string& s) {
  if (!s.empty() && s[0] == '-') {
    throw BadValue{"expected a non-negative integer, got '" + s + "'"};
  }
  return number<std::size_t>(s);
}

bool boolean(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") {
    return true;
  }
  if (s == "false" || s == "0" || s == "no") {
    return false;
  }
  throw BadValue{"expected true or false, got '" + s + "'"};
}

std::vector<std::string> list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t off = 0;
    auto t = trim(item, off);
    if (t.empty()) {
      throw BadValue{"empty item in list '" + s + "'"};
    }
    out.push_back(t);
  }
  return out;
}

struct Builder {
  RunConfig cfg;
  std::string conv = "16x3x3/2x2,32x3x3/2x2,64x3x3/2x2";
  std::string hidden = "64";
  std::string fc = "20";
  std::string dropout = "0.5";
};

const std::vector<std::pair<std::string, std::function<void(Builder&, const std::string&)>>>&
table() {
  using B = Builder;
  static const std::vector<std::pair<std::string, std::function<void(B&, const std::string&)>>>
      t = {
          {"dataset_root", [](B& b, const std::string& v) { b.cfg.datasetRoot = v; }},
          {"output_dir", [](B& b, const std::string& v) { b.cfg.outputDir = v; }},
          {"split.frac", [](B& b, const std::string& v) { b.cfg.splitFrac = real(v); }},
          {"split.seed", [](B& b, const std::string& v) { b.cfg.splitSeed = number<std::uint64_t>(v); }},
          {"split.train_patients", [](B& b, const std::string& v) { b.cfg.trainPatients = list(v); }},
          {"split.test_patients", [](B& b, const std::string& v) { b.cfg.testPatients = list(v); }},
          {"features.window_ms", [](B& b, const std::string& v) { b.cfg.mel.windowMs = real(v); }},
          {"features.overlap", [](B& b, const std::string& v) { b.cfg.mel.overlap = real(v); }},
          {"features.n_fft", [](B& b, const std::string& v) { b.cfg.mel.nFft = count(v); }},
          {"features.n_mels", [](B& b, const std::string& v) { b.cfg.mel.nMels = count(v); }},
          {"features.fmin_hz", [](B& b, const std::string& v) { b.cfg.mel.fminHz = real(v); }},
          {"features.fmax_hz", [](B& b, const std::string& v) { b.cfg.mel.fmaxHz = real(v); }},
          {"features.floor_db", [](B& b, const std::string& v) { b.cfg.mel.floorDb = real(v); }},
          {"features.frames", [](B& b, const std::string& v) { b.cfg.frames = count(v); }},
          {"model.conv", [](B& b, const std::string& v) { b.conv = v; }},
          {"model.hidden", [](B& b, const std::string& v) { b.hidden = std::to_string(count(v)); }},
          {"model.fc", [](B& b, const std::string& v) { b.fc = std::to_string(count(v)); }},
          {"model.dropout",
           [](B& b, const std::string& v) {
             real(v);
             b.dropout = v;
           }},
          {"model.seed", [](B& b, const std::string& v) { b.cfg.modelSeed = number<std::uint64_t>(v); }},
          {"train.epochs", [](B& b, const std::string& v) { b.cfg.train.epochs = count(v); }},
          {"train.batch_size", [](B& b, const std::string& v) { b.cfg.train.batchSize = count(v); }},
          {"train.lr", [](B& b, const std::string& v) { b.cfg.train.lr = real(v); }},
          {"train.seed", [](B& b, const std::string& v) { b.cfg.train.seed = number<std::uint64_t>(v); }},
          {"train.augment_multiplier",
           [](B& b, const std::string& v) { b.cfg.train.augmentMultiplier = count(v); }},
          {"tune.epochs", [](B& b, const std::string& v) { b.cfg.tune.epochs = count(v); }},
          {"tune.lr", [](B& b, const std::string& v) { b.cfg.tune.lr = real(v); }},
          {"tune.batch_size", [](B& b, const std::string& v) { b.cfg.tune.batchSize = count(v); }},
          {"tune.seed", [](B& b, const std::string& v) { b.cfg.tune.seed = number<std::uint64_t>(v); }},
          {"tune.warm_start", [](B& b, const std::string& v) { b.cfg.tune.warmStart = boolean(v); }},
          {"tune.threshold", [](B& b, const std::string& v) { b.cfg.screenThreshold = real(v); }},
          {"quantize.bits", [](B& b, const std::string& v) { b.cfg.quantBits = number<int>(v); }},
          {"quantize.sweep",
           [](B& b, const std::string& v) {
             b.cfg.sweepBits.clear();
             for (const auto& item : list(v)) {
               b.cfg.sweepBits.push_back(number<int>(item));
             }
           }},
          {"quantize.mode",
           [](B& b, const std::string& v) {
             try {
               b.cfg.quantMode = quant::parseNormMode(v);
             } catch (const ArgumentError& e) {
               throw BadValue{e.what()};
             }
           }},
          {"quantize.zero_threshold", [](B& b, const std::string& v) { b.cfg.zeroThreshold = real(v); }},
      };
  return t;
}

void checkRanges(const RunConfig& c, const std::string& source) {
  auto fail = [&](const std::string& what) { throw UsageError(source + ": " + what); };
  if (!(c.splitFrac > 0.0 && c.splitFrac < 1.0)) {
    fail("split.frac must be in (0, 1)");
  }
  std::set<std::string> train(c.trainPatients.begin(), c.trainPatients.end());
  for (const auto& p : c.testPatients) {
    if (train.count(p)) {
      fail("patient " + p + " is listed in both split.train_patients and split.test_patients");
    }
  }
  if (c.train.batchSize == 0 || c.tune.batchSize == 0) {
    fail("batch sizes must be positive");
  }
  if (!(c.train.lr > 0.0) || !(c.tune.lr > 0.0)) {
    fail("learning rates must be positive");
  }
  if (c.train.augmentMultiplier == 0) {
    fail("train.augment_multiplier must be at least 1");
  }
  if (!(c.screenThreshold >= 0.0 && c.screenThreshold <= 1.0)) {
    fail("tune.threshold must be in [0, 1]");
  }
  for (int b : c.sweepBits) {
    if (b < 1 || b > quant::kMaxBits) {
      fail("quantize.sweep entries must be in [1, " + std::to_string(quant::kMaxBits) + "]");
    }
  }
  if (c.quantBits < 1 || c.quantBits > quant::kMaxBits) {
    fail("quantize.bits must be in [1, " + std::to_string(quant::kMaxBits) + "]");
  }
  if (!(c.zeroThreshold >= 0.0)) {
    fail("quantize.zero_threshold must be non-negative");
  }
}

} // namespace

const std::vector<std::string>& configKeys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : table()) {
      k.push_back(name);
    }
    return k;
  }();
  return keys;
}

RunConfig parseConfig(const std::string& text, const std::filesystem::path& baseDir,
                      const std::string& sourceName) {
  Builder b;
  std::vector<Value> entries;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string raw;
  for (std::size_t lineNo = 1; std::getline(in, raw); ++lineNo) {
    const auto line = raw.substr(0, raw.find('#'));
    std::size_t off = 0;
    if (trim(line, off).empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigParseError(sourceName, lineNo, off + 1, "expected 'key = value'");
    }
    std::size_t keyOff = 0, valOff = 0;
    const auto key = trim(line.substr(0, eq), keyOff);
    const auto value = trim(line.substr(eq + 1), valOff);
    if (key.empty()) {
      throw ConfigParseError(sourceName, lineNo, eq + 1, "missing key before '='");
    }
    if (seen.count(key)) {
      throw ConfigParseError(sourceName, lineNo, keyOff + 1,
                             "duplicate key '" + key + "' (first set on line " +
                                 std::to_string(seen.at(key)) + ")");
    }
    seen[key] = lineNo;
    entries.push_back({key, value, lineNo, eq + 1 + valOff + 1});
  }

  for (const auto& v : entries) {
    const auto& key = v.key;
    const auto& t = table();
    const auto it = std::find_if(t.begin(), t.end(), [&](const auto& e) { return e.first == key; });
    if (it == t.end()) {
      throw ConfigParseError(sourceName, v.line, 1, "unknown key '" + key + "'");
    }
    if (v.text.empty()) {
      throw ConfigParseError(sourceName, v.line, v.column, "missing value for '" + key + "'");
    }
    try {
      it->second(b, v.text);
    } catch (const BadValue& e) {
      throw ConfigParseError(sourceName, v.line, v.column, key + ": " + e.what);
    }
  }

  auto& cfg = b.cfg;
  if (!cfg.datasetRoot.empty()) {
    cfg.datasetRoot = baseDir / cfg.datasetRoot;
  }
  cfg.outputDir = baseDir / cfg.outputDir;

  std::ostringstream spec;
  spec << "conv=" << b.conv << " hidden=" << b.hidden << " fc=" << b.fc << " dropout=" << b.dropout
       << " classes=4 input=" << cfg.mel.nMels << "x" << cfg.frames;
  try {
    cfg.mel.validate();
    cfg.model = model::ModelSpec::parse(spec.str());
    cfg.model.validate();
  } catch (const std::exception& e) {
    throw UsageError(sourceName + ": " + e.what());
  }
  checkRanges(cfg, sourceName);
  return cfg;
}

RunConfig loadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("cannot read config file " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parseConfig(ss.str(), path.parent_path(), path.string());
}

} // namespace lungnet::cli
