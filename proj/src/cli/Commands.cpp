#include "lungnet/cli/Commands.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lungnet/audio/Dsp.h"
#include "lungnet/audio/Stats.h"
#include "lungnet/audio/Wav.h"
#include "lungnet/cli/Manifest.h"
#include "lungnet/common/Errors.h"
#include "lungnet/nn/Serialize.h"
#include "lungnet/quant/LogQuant.h"
#include "lungnet/train/Dataset.h"
#include "lungnet/train/Trainer.h"
#include "lungnet/tuning/PatientTuning.h"

namespace lungnet::cli {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

fs::path outPath(const RunConfig& cfg, const std::string& name) {
  return cfg.outputDir / name;
}

fs::path requireArtifact(const RunConfig& cfg, const std::string& name, const std::string& hint) {
  const auto p = outPath(cfg, name);
  if (!fs::exists(p)) {
    throw InputError("missing " + p.string() + " (" + hint + ")");
  }
  return p;
}

void write(const fs::path& path, const std::string& bytes) {
  fs::create_directories(path.parent_path());
  nn::writeFileAtomic(path, bytes);
}

std::vector<ManifestRow> readManifestArtifact(const RunConfig& cfg) {
  return parseManifest(
      nn::readFile(requireArtifact(cfg, kManifestFile, "run `lungnet prepare` first")));
}

struct Split {
  std::set<std::string> train;
  std::set<std::string> test;
};

Split readSplit(const RunConfig& cfg) {
  std::istringstream in(nn::readFile(requireArtifact(cfg, kSplitFile, "run `lungnet train` first")));
  Split s;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      continue;
    }
    const auto pid = line.substr(0, tab);
    (line.substr(tab + 1) == "train" ? s.train : s.test).insert(pid);
  }
  return s;
}

/// Patients the evaluation-style commands work on.
std::set<std::string> targetPatients(const RunConfig& cfg, const Overrides& o) {
  if (!o.patients.empty()) {
    return {o.patients.begin(), o.patients.end()};
  }
  return readSplit(cfg).test;
}

train::FeatureSet featuresFor(const RunConfig& cfg, const std::vector<ManifestRow>& rows) {
  const auto cycles = loadCycles(rows, cfg.datasetRoot);
  return train::extractFeatures(cycles, cfg.mel, cfg.frames);
}

nn::Network loadModel(const RunConfig& cfg) {
  return nn::loadNetwork(requireArtifact(cfg, kModelFile, "run `lungnet train` first"));
}

std::string classList(const std::array<std::size_t, 4>& counts) {
  std::ostringstream s;
  for (int c = 0; c < 4; ++c) {
    s << (c ? ", " : "") << labelName(static_cast<CycleLabel>(c)) << " " << counts[c];
  }
  return s.str();
}

} // namespace

void applyOverrides(RunConfig& cfg, const Overrides& o) {
  if (o.bits) {
    if (*o.bits < 1 || *o.bits > quant::kMaxBits) {
      throw UsageError("--bits must be in [1, " + std::to_string(quant::kMaxBits) + "]");
    }
    cfg.quantBits = *o.bits;
  }
  if (o.seed) {
    cfg.splitSeed = cfg.modelSeed = cfg.train.seed = cfg.tune.seed = *o.seed;
  }
}

// ---------------------------------------------------------------- prepare

void cmdPrepare(const RunConfig& cfg, std::ostream& log) {
  if (cfg.datasetRoot.empty() || !fs::is_directory(cfg.datasetRoot)) {
    throw InputError("dataset_root " + cfg.datasetRoot.string() + " is not a directory");
  }
  std::vector<fs::path> wavs;
  for (const auto& e : fs::recursive_directory_iterator(cfg.datasetRoot)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") {
      wavs.push_back(fs::relative(e.path(), cfg.datasetRoot));
    }
  }
  std::sort(wavs.begin(), wavs.end(),
            [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });

  std::vector<ManifestRow> rows;
  std::ostringstream skipped;
  skipped << "source\treason\n";
  std::size_t nSkipped = 0, nRecordings = 0;
  std::set<std::string> patients;
  for (const auto& rel : wavs) {
    const auto wav = cfg.datasetRoot / rel;
    auto txt = wav;
    txt.replace_extension(".txt");
    const auto source = rel.generic_string();
    if (!fs::exists(txt)) {
      skipped << source << "\tno annotation file\n";
      ++nSkipped;
      continue;
    }
    try {
      const auto rec = audio::resample(audio::loadWav(wav));
      const auto ann = audio::readAnnotations(txt);
      const auto cycles = audio::sliceCycles(rec, ann);
      for (std::size_t i = 0; i < cycles.size(); ++i) {
        ManifestRow r;
        char id[16];
        std::snprintf(id, sizeof id, "%03zu", i);
        r.cycleId = rec.recordingId + "#" + id;
        r.patientId = rec.patientId;
        r.recordingId = rec.recordingId;
        r.index = i;
        r.label = cycles[i].label;
        r.crackle = ann[i].crackle;
        r.wheeze = ann[i].wheeze;
        r.startS = ann[i].startS;
        r.endS = ann[i].endS;
        r.durationS = static_cast<double>(cycles[i].samples.size()) / kCycleSampleRate;
        r.source = source;
        rows.push_back(std::move(r));
      }
      patients.insert(rec.patientId);
      ++nRecordings;
    } catch (const std::exception& e) {
      skipped << source << '\t' << e.what() << '\n';
      ++nSkipped;
    }
  }

  std::array<std::size_t, 4> counts{};
  for (const auto& r : rows) {
    ++counts[classIndex(r.label)];
  }
  std::ostringstream summary;
  summary << "key\tvalue\n"
          << "recordings\t" << nRecordings << '\n'
          << "patients\t" << patients.size() << '\n'
          << "cycles\t" << rows.size() << '\n';
  for (int c = 0; c < 4; ++c) {
    summary << labelName(static_cast<CycleLabel>(c)) << '\t' << counts[c] << '\n';
  }
  summary << "skipped\t" << nSkipped << '\n';

  write(outPath(cfg, kManifestFile), formatManifest(rows));
  write(outPath(cfg, kSkipFile), skipped.str());
  write(outPath(cfg, "prepare_summary.tsv"), summary.str());

  if (wavs.empty()) {
    log << "warning: no .wav files under " << cfg.datasetRoot.string() << "\n";
  }
  log << "prepare: " << nRecordings << " recordings, " << patients.size() << " patients, "
      << rows.size() << " cycles (" << classList(counts) << "); " << nSkipped << " skipped\n";
}

// ---------------------------------------------------------------- train

void cmdTrain(const RunConfig& cfg, std::ostream& log) {
  const auto rows = readManifestArtifact(cfg);
  if (rows.empty()) {
    throw InputError("the manifest lists no cycles");
  }
  std::vector<std::string> ids;
  std::vector<int> labels;
  for (const auto& r : rows) {
    ids.push_back(r.patientId);
    labels.push_back(classIndex(r.label));
  }
  Split split;
  if (!cfg.trainPatients.empty() || !cfg.testPatients.empty()) {
    const std::set<std::string> known(ids.begin(), ids.end());
    split.train = {cfg.trainPatients.begin(), cfg.trainPatients.end()};
    split.test = {cfg.testPatients.begin(), cfg.testPatients.end()};
    for (const auto* group : {&split.train, &split.test}) {
      for (const auto& p : *group) {
        if (!known.count(p)) {
          throw InputError("split lists patient " + p + ", who is not in the manifest");
        }
      }
    }
    // An explicit train list alone means "everyone else is test", and vice versa.
    for (const auto& p : known) {
      if (cfg.trainPatients.empty() && !split.test.count(p)) {
        split.train.insert(p);
      }
      if (cfg.testPatients.empty() && !split.train.count(p)) {
        split.test.insert(p);
      }
    }
  } else {
    const auto plan = train::splitPatients(ids, labels, cfg.splitFrac, cfg.splitSeed);
    split.train = plan.trainPatients;
    split.test = plan.testPatients;
  }

  std::ostringstream splitText;
  splitText << "patient_id\tset\n";
  std::map<std::string, std::string> all;
  for (const auto& p : split.train) all[p] = "train";
  for (const auto& p : split.test) all[p] = "test";
  for (const auto& [p, set] : all) {
    splitText << p << '\t' << set << '\n';
  }

  const auto trainRows = selectPatients(rows, split.train);
  log << "train: " << split.train.size() << " training patients (" << trainRows.size()
      << " cycles), " << split.test.size() << " test patients\n";
  const auto cycles = loadCycles(trainRows, cfg.datasetRoot);
  auto net = model::buildHybrid(cfg.model, cfg.modelSeed);
  auto tc = cfg.train;
  tc.forbiddenPatients = split.test;
  const auto result = train::trainOnCycles(net, cycles, tc, cfg.mel, cfg.frames);

  std::ostringstream curve;
  curve << "epoch\tloss\n";
  for (std::size_t e = 0; e < result.lossCurve.size(); ++e) {
    curve << e + 1 << '\t' << formatReal(result.lossCurve[e]) << '\n';
  }
  write(outPath(cfg, kSplitFile), splitText.str());
  write(outPath(cfg, "loss_curve.tsv"), curve.str());
  write(outPath(cfg, kModelFile), nn::serializeNetwork(net));
  log << "train: " << result.lossCurve.size() << " epochs, final loss "
      << (result.lossCurve.empty() ? std::string("n/a") : fixed(result.lossCurve.back())) << "\n";
}

// ---------------------------------------------------------------- eval

std::string metricsText(const train::MetricsReport& r) {
  std::ostringstream s;
  s << "cycles        " << r.count << "\n"
    << "sensitivity   " << fixed(r.se) << "\n"
    << "specificity   " << fixed(r.sp) << "\n"
    << "score         " << fixed(r.score) << "\n"
    << "macro P/R/F1  " << fixed(r.macroPrecision) << " " << fixed(r.macroRecall) << " "
    << fixed(r.macroF1) << "\n\n"
    << "class      precision  recall     f1\n";
  for (int c = 0; c < 4; ++c) {
    auto name = labelName(static_cast<CycleLabel>(c));
    name.resize(10, ' ');
    s << name << " " << fixed(r.precision[c]) << "     " << fixed(r.recall[c]) << "     "
      << fixed(r.f1[c]) << "\n";
  }
  s << "\nconfusion (rows true, columns predicted)\n";
  for (int t = 0; t < 4; ++t) {
    auto name = labelName(static_cast<CycleLabel>(t));
    name.resize(10, ' ');
    s << name;
    for (int p = 0; p < 4; ++p) {
      auto cell = std::to_string(r.confusion[t][p]);
      s << std::string(cell.size() < 7 ? 7 - cell.size() : 1, ' ') << cell;
    }
    s << "\n";
  }
  return s.str();
}

std::string metricsTsv(const train::MetricsReport& r) {
  std::ostringstream s;
  s << "key\tvalue\n"
    << "cycles\t" << r.count << "\n"
    << "se\t" << formatReal(r.se) << "\n"
    << "sp\t" << formatReal(r.sp) << "\n"
    << "score\t" << formatReal(r.score) << "\n"
    << "macro_precision\t" << formatReal(r.macroPrecision) << "\n"
    << "macro_recall\t" << formatReal(r.macroRecall) << "\n"
    << "macro_f1\t" << formatReal(r.macroF1) << "\n";
  for (int c = 0; c < 4; ++c) {
    const auto name = labelName(static_cast<CycleLabel>(c));
    s << "precision." << name << "\t" << formatReal(r.precision[c]) << "\n"
      << "recall." << name << "\t" << formatReal(r.recall[c]) << "\n"
      << "f1." << name << "\t" << formatReal(r.f1[c]) << "\n";
  }
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 4; ++p) {
      s << "confusion." << labelName(static_cast<CycleLabel>(t)) << "."
        << labelName(static_cast<CycleLabel>(p)) << "\t" << r.confusion[t][p] << "\n";
    }
  }
  return s.str();
}

void readPredictionFile(const fs::path& path, std::vector<int>& labels,
                        std::vector<int>& predictions) {
  if (!fs::exists(path)) {
    throw InputError("missing prediction file " + path.string());
  }
  std::istringstream in(nn::readFile(path));
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(path.string() + ": empty prediction file");
  }
  auto columns = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    std::string f;
    while (std::getline(ss, f, '\t')) {
      out.push_back(f);
    }
    return out;
  };
  const auto header = columns(line);
  const auto find = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw FormatError(path.string() + ": header has no '" + name + "' column");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto li = find("label"), pi = find("prediction");
  auto classOf = [&](const std::string& v, std::size_t lineNo) {
    if (v.size() == 1 && v[0] >= '0' && v[0] <= '3') {
      return v[0] - '0';
    }
    try {
      return classIndex(parseLabel(v));
    } catch (const InputError&) {
      throw FormatError(path.string() + ":" + std::to_string(lineNo) + ": unknown class '" + v +
                        "'");
    }
  };
  for (std::size_t lineNo = 2; std::getline(in, line); ++lineNo) {
    if (line.empty()) {
      continue;
    }
    const auto f = columns(line);
    if (f.size() != header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(lineNo) + ": expected " +
                        std::to_string(header.size()) + " columns");
    }
    labels.push_back(classOf(f[li], lineNo));
    predictions.push_back(classOf(f[pi], lineNo));
  }
}

void cmdEval(const RunConfig& cfg, const Overrides& o, std::ostream& log) {
  std::vector<int> labels, preds;
  std::string prefix = "eval";
  std::ostringstream predText;
  if (o.predictions) {
    readPredictionFile(*o.predictions, labels, preds);
    prefix = "eval_file";
  } else {
    auto net = loadModel(cfg);
    if (o.quantized) {
      const auto q = quant::deserializeQuantized(
          nn::readFile(requireArtifact(cfg, kQuantFile, "run `lungnet quantize` first")));
      net = quant::applyQuantized(net, q);
      prefix = "eval_quantized";
    }
    const auto rows = selectPatients(readManifestArtifact(cfg), targetPatients(cfg, o));
    if (rows.empty()) {
      throw InputError("no cycles to evaluate for the selected patients");
    }
    const auto data = featuresFor(cfg, rows);
    preds = train::predict(net, data);
    labels = data.labels();
    predText << "cycle_id\tpatient_id\tlabel\tprediction\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      predText << rows[i].cycleId << '\t' << rows[i].patientId << '\t' << labelName(rows[i].label)
               << '\t' << labelName(static_cast<CycleLabel>(preds[i])) << '\n';
    }
  }
  const auto report = train::evaluateMetrics(preds, labels);
  write(outPath(cfg, prefix + "_metrics.txt"), metricsText(report));
  write(outPath(cfg, prefix + "_metrics.tsv"), metricsTsv(report));
  if (!o.predictions) {
    write(outPath(cfg, prefix + "_predictions.tsv"), predText.str());
  }
  log << prefix << ": " << report.count << " cycles, Se " << fixed(report.se) << ", Sp "
      << fixed(report.sp) << ", score " << fixed(report.score) << "\n";
}

// ---------------------------------------------------------------- tune

void cmdTune(const RunConfig& cfg, const Overrides& o, std::ostream& log) {
  const auto pretrained = loadModel(cfg);
  const auto rows = selectPatients(readManifestArtifact(cfg), targetPatients(cfg, o));
  if (rows.empty()) {
    throw InputError("no cycles for the selected patients");
  }
  const auto data = featuresFor(cfg, rows);

  std::ostringstream report;
  report << "patient_id\tcycles\trecordings\tabnormal_fraction\tverdict\tfolds\tse\tsp\tscore\t"
            "notice\n";
  std::vector<int> tunedPreds, generalPreds, majorityPreds, pooledLabels;
  std::size_t nTuned = 0, nHealthy = 0, nSkipped = 0;
  auto net = pretrained;
  for (const auto& patient : tuning::groupByPatient(data)) {
    const auto screen = tuning::screenPatient(net, patient, cfg.screenThreshold);
    const bool unhealthy = screen.verdict == tuning::Verdict::Unhealthy;
    report << patient.patientId << '\t' << patient.data.size() << '\t'
           << patient.recordings.size() << '\t' << formatReal(screen.abnormalFraction) << '\t'
           << (unhealthy ? "unhealthy" : "healthy") << '\t';
    if (!unhealthy) {
      ++nHealthy;
      report << "0\t\t\t\tscreened healthy; not tuned\n";
      continue;
    }
    const auto loo = tuning::looValidate(pretrained, patient, cfg.tune);
    if (loo.skipped) {
      ++nSkipped;
      report << "0\t\t\t\t" << loo.notice << '\n';
      continue;
    }
    ++nTuned;
    report << loo.folds.size() << '\t';
    if (loo.report) {
      report << formatReal(loo.report->se) << '\t' << formatReal(loo.report->sp) << '\t'
             << formatReal(loo.report->score) << '\t';
    } else {
      report << "\t\t\t";
    }
    report << loo.notice << '\n';
    tunedPreds.insert(tunedPreds.end(), loo.predictions.begin(), loo.predictions.end());
    pooledLabels.insert(pooledLabels.end(), loo.labels.begin(), loo.labels.end());

    // Generalized model and majority-class baseline on the same held-out cycles.
    for (const auto& fold : loo.folds) {
      std::vector<std::size_t> tuneIdx, testIdx;
      for (std::size_t i = 0; i < patient.data.size(); ++i) {
        (patient.data.recordingId(i) == fold.heldOutRecording ? testIdx : tuneIdx).push_back(i);
      }
      const auto test = patient.data.subset(testIdx);
      const auto g = train::predict(net, test);
      generalPreds.insert(generalPreds.end(), g.begin(), g.end());
      const auto onehot = tuning::majorityClassBaseline(patient.data.subset(tuneIdx).classCounts());
      const int majority =
          static_cast<int>(std::max_element(onehot.begin(), onehot.end()) - onehot.begin());
      majorityPreds.insert(majorityPreds.end(), testIdx.size(), majority);
    }

    auto tuned = tuning::fineTune(pretrained, patient.data, cfg.tune);
    for (const auto& w : tuned.warnings) {
      log << "warning: " << w << "\n";
    }
    write(cfg.outputDir / "tuned" / (patient.patientId + ".model"),
          nn::serializeNetwork(tuned.net));
  }

  std::ostringstream summary, summaryTsv;
  summaryTsv << "key\tvalue\n"
             << "patients_tuned\t" << nTuned << "\n"
             << "patients_healthy\t" << nHealthy << "\n"
             << "patients_skipped\t" << nSkipped << "\n";
  summary << "patients tuned " << nTuned << ", screened healthy " << nHealthy
          << ", skipped (fewer than 2 recordings) " << nSkipped << "\n";
  auto pooled = [&](const char* key, const std::vector<int>& preds) {
    try {
      const auto r = train::evaluateMetrics(preds, pooledLabels);
      summaryTsv << key << ".se\t" << formatReal(r.se) << "\n"
                 << key << ".sp\t" << formatReal(r.sp) << "\n"
                 << key << ".score\t" << formatReal(r.score) << "\n";
      summary << key << ": Se " << fixed(r.se) << ", Sp " << fixed(r.sp) << ", score "
              << fixed(r.score) << "\n";
    } catch (const std::exception& e) {
      summary << key << ": " << e.what() << "\n";
    }
  };
  if (!pooledLabels.empty()) {
    pooled("tuned", tunedPreds);
    pooled("generalized", generalPreds);
    pooled("majority", majorityPreds);
  }
  write(outPath(cfg, "tune_report.tsv"), report.str());
  write(outPath(cfg, "tune_summary.tsv"), summaryTsv.str());
  write(outPath(cfg, "tune_summary.txt"), summary.str());
  log << "tune: " << summary.str();
}

// ---------------------------------------------------------------- quantize

void cmdQuantize(const RunConfig& cfg, std::ostream& log) {
  const auto net = loadModel(cfg);
  const auto q = quant::quantizeModel(net, cfg.quantBits, cfg.quantMode, cfg.zeroThreshold);
  for (const auto& w : q.model.warnings) {
    log << "warning: " << w << "\n";
  }
  const auto mem = quant::memoryReport(q.model);
  std::ostringstream memText;
  memText << "key\tvalue\n"
          << "parameters\t" << mem.parameters << "\n"
          << "bits\t" << mem.bits << "\n"
          << "payload_bytes\t" << mem.payloadBytes << "\n"
          << "overhead_bytes\t" << mem.overheadBytes << "\n"
          << "quantized_bytes\t" << mem.quantizedBytes << "\n"
          << "full_precision_bytes\t" << mem.fullPrecisionBytes << "\n"
          << "ratio\t" << formatReal(mem.ratio) << "\n";

  std::ostringstream sweepText;
  sweepText << "bits\tse\tsp\tscore\n";
  if (!cfg.sweepBits.empty()) {
    const auto rows = selectPatients(readManifestArtifact(cfg), readSplit(cfg).test);
    if (rows.empty()) {
      throw InputError("the test split has no cycles for the bit sweep");
    }
    const auto data = featuresFor(cfg, rows);
    auto fpNet = net;
    const auto fp = train::evaluateMetrics(train::predict(fpNet, data), data.labels());
    const auto sweep = quant::bitSweep(net, data, cfg.sweepBits, cfg.quantMode, cfg.zeroThreshold);
    sweepText << "fp\t" << formatReal(fp.se) << '\t' << formatReal(fp.sp) << '\t'
              << formatReal(fp.score) << '\n';
    for (const auto& p : sweep) {
      sweepText << p.bits << '\t' << formatReal(p.report.se) << '\t' << formatReal(p.report.sp)
                << '\t' << formatReal(p.report.score) << '\n';
    }
    const auto best = quant::optimalBits(sweep, fp.score);
    memText << "n_opt\t" << (best ? std::to_string(*best) : std::string("none")) << "\n";
    log << "quantize: full-precision score " << fixed(fp.score) << ", N_opt "
        << (best ? std::to_string(*best) : std::string("not reached")) << "\n";
  }
  write(outPath(cfg, kQuantFile), quant::serializeQuantized(q.model));
  write(outPath(cfg, "memory.tsv"), memText.str());
  write(outPath(cfg, kSweepFile), sweepText.str());
  log << "quantize: " << mem.parameters << " weights at " << cfg.quantBits + 1 << " bits, "
      << mem.quantizedBytes << " bytes vs " << mem.fullPrecisionBytes << " (" << fixed(mem.ratio, 2)
      << "x)\n";
}

// ---------------------------------------------------------------- report

void cmdReport(const RunConfig& cfg, std::ostream& log) {
  const auto rows = readManifestArtifact(cfg);
  const auto cycles = loadCycles(rows, cfg.datasetRoot);
  const auto var = audio::variabilityReport(cycles);
  for (const auto& w : var.warnings) {
    log << "warning: " << w << "\n";
  }
  std::ostringstream box, values;
  box << "feature\tkind\tmin\tq1\tmedian\tq3\tmax\tcount\n";
  values << "feature\tkind\tvalue\n";
  for (const auto& f : var.features) {
    for (const auto& [kind, summary, raw] :
         {std::tuple{"intra", &f.intraSummary, &f.intra}, std::tuple{"inter", &f.interSummary, &f.inter}}) {
      box << f.feature << '\t' << kind << '\t' << formatReal(summary->min) << '\t'
          << formatReal(summary->q1) << '\t' << formatReal(summary->median) << '\t'
          << formatReal(summary->q3) << '\t' << formatReal(summary->max) << '\t' << summary->count
          << '\n';
      for (double v : *raw) {
        values << f.feature << '\t' << kind << '\t' << formatReal(v) << '\n';
      }
    }
  }
  const auto dir = cfg.outputDir / "report";
  write(dir / "variability.tsv", box.str());
  write(dir / "variability_values.tsv", values.str());

  if (fs::exists(outPath(cfg, kSweepFile))) {
    std::istringstream in(nn::readFile(outPath(cfg, kSweepFile)));
    std::ostringstream curve;
    std::string line;
    std::getline(in, line);
    curve << "bits\tscore\n";
    while (std::getline(in, line)) {
      const auto first = line.find('\t');
      const auto last = line.rfind('\t');
      curve << line.substr(0, first) << '\t' << line.substr(last + 1) << '\n';
    }
    write(dir / "sweep_curve.tsv", curve.str());
  }
  if (fs::exists(outPath(cfg, kModelFile))) {
    const auto net = loadModel(cfg);
    const auto flops =
        model::estimateFlops(net, {1, cfg.model.nMels, cfg.model.frames});
    const auto mem = quant::memoryReport(net, cfg.quantBits);
    std::ostringstream c;
    c << "key\tvalue\n"
      << "parameters\t" << model::countParams(net) << "\n";
    for (int s = 1; s <= 3; ++s) {
      c << "parameters.stage" << s << "\t"
        << model::countParams(net, model::ParamFilter::Stage, s) << "\n";
    }
    c << "flops_per_sample\t" << flops << "\n"
      << "gflops_per_sample\t" << formatReal(static_cast<double>(flops) / 1e9) << "\n"
      << "memory_bits\t" << cfg.quantBits << "\n"
      << "memory_quantized_bytes\t" << mem.quantizedBytes << "\n"
      << "memory_full_precision_bytes\t" << mem.fullPrecisionBytes << "\n";
    write(dir / "complexity.tsv", c.str());
  }
  log << "report: " << cycles.size() << " cycles summarised in " << dir.string() << "\n";
}

// ---------------------------------------------------------------- entry

int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lung-sound cycle classification, patient tuning and weight quantization",
               "lungnet"};
  app.require_subcommand(1);
  fs::path configPath;
  Overrides o;
  std::optional<int> bits;
  std::optional<std::uint64_t> seed;
  std::string patients;

  auto addCommon = [&](CLI::App* sub) {
    sub->add_option("--config", configPath, "Run configuration file")->required();
    sub->add_option("--seed", seed, "Override every seed in the config");
  };
  auto* prepare = app.add_subcommand("prepare", "Scan the dataset and write the cycle manifest");
  auto* trainCmd = app.add_subcommand("train", "Split patients and train the network");
  auto* eval = app.add_subcommand("eval", "Evaluate the network (or a prediction file)");
  auto* tune = app.add_subcommand("tune", "Screen patients and fine-tune per patient");
  auto* quantize = app.add_subcommand("quantize", "Log-quantize weights and sweep bit precision");
  auto* report = app.add_subcommand("report", "Write plot-ready variability and sweep data");
  for (auto* sub : {prepare, trainCmd, eval, tune, quantize, report}) {
    addCommon(sub);
  }
  for (auto* sub : {eval, tune}) {
    sub->add_option("--patients", patients, "Comma-separated patient ids");
  }
  std::string predictions;
  eval->add_option("--predictions", predictions, "TSV with label and prediction columns");
  eval->add_flag("--quantized", o.quantized, "Decode the stored quantized model first");
  quantize->add_option("--bits", bits, "Magnitude bits N (each weight takes N + 1 bits)");

  std::vector<std::string> argv = args;
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    o.bits = bits;
    o.seed = seed;
    if (!predictions.empty()) {
      o.predictions = predictions;
    }
    std::stringstream ss(patients);
    for (std::string p; std::getline(ss, p, ',');) {
      if (!p.empty()) {
        o.patients.push_back(p);
      }
    }
    auto cfg = loadConfig(configPath);
    applyOverrides(cfg, o);
    if (*prepare) cmdPrepare(cfg, out);
    if (*trainCmd) cmdTrain(cfg, out);
    if (*eval) cmdEval(cfg, o, out);
    if (*tune) cmdTune(cfg, o, out);
    if (*quantize) cmdQuantize(cfg, out);
    if (*report) cmdReport(cfg, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

} // namespace lungnet::cli
