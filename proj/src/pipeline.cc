#include "hospx/pipeline.h"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hospx/cohort.h"
#include "hospx/explain.h"
#include "hospx/model_io.h"
#include "hospx/records.h"
#include "hospx/stats.h"

namespace hospx {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr Scenario kAllScenarios[] = {Scenario::kAll, Scenario::kGp, Scenario::kOneDayBefore};
const std::vector<std::string> kMethods = {"tree", "sampling", "gradient"};

[[noreturn]] void ConfigError(const std::string& message) { Fail(ErrorKind::kConfig, message); }

const json& Section(const json& doc, const char* name, std::initializer_list<const char*> keys) {
  static const json kEmpty = json::object();
  if (!doc.contains(name)) return kEmpty;
  const json& s = doc.at(name);
  if (!s.is_object()) ConfigError(std::string("section '") + name + "' must be an object");
  for (const auto& [key, value] : s.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end()) {
      ConfigError(std::string("unknown key '") + name + "." + key + "'");
    }
  }
  return s;
}

template <typename T>
void Read(const json& section, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception&) {
    ConfigError(std::string("bad value for '") + key + "': " + section.at(key).dump());
  }
}

template <typename T>
void ReadOptional(const json& section, const char* key, std::optional<T>& out) {
  if (!section.contains(key) || section.at(key).is_null()) return;
  T v{};
  Read(section, key, v);
  out = v;
}

void RequireFile(const std::string& path, const char* what) {
  if (!path.empty() && !fs::exists(path)) ConfigError(std::string(what) + " '" + path + "' does not exist");
}

json ToJson(const PipelineConfig& c) {
  const GeneratorConfig& g = c.generator;
  json gen = {{"n_patients", g.n_patients},
              {"target_prevalence", g.target_prevalence},
              {"seed", g.seed},
              {"signal_strength", g.signal_strength},
              {"temporal_signal_strength", g.temporal_signal_strength ? json(*g.temporal_signal_strength) : json()},
              {"vitals_observed", g.vitals_observed ? json(*g.vitals_observed) : json()},
              {"labs_observed", g.labs_observed ? json(*g.labs_observed) : json()},
              {"noise", g.noise},
              {"suspected_fraction", g.suspected_fraction},
              {"text_only_fraction", g.text_only_fraction},
              {"ineligible_fraction", g.ineligible_fraction},
              {"prior_hospitalization_fraction", g.prior_hospitalization_fraction},
              {"hierarchy_coded_fraction", g.hierarchy_coded_fraction},
              {"planted", g.planted},
              {"final_day_signal", g.final_day_signal},
              {"final_day_quantities", g.final_day_quantities}};
  json scenarios = json::array(), families = json::array(), space = json::object();
  for (Scenario s : c.scenarios) scenarios.push_back(std::string(ToString(s)));
  for (ModelFamily f : c.families) families.push_back(std::string(ToString(f)));
  for (const auto& [f, v] : c.search_space) space[std::string(ToString(f))] = v;
  return {{"paths", {{"work_dir", c.work_dir}, {"records", c.records}}},
          {"generator", gen},
          {"cohort",
           {{"inclusion_patterns", c.inclusion_patterns},
            {"exclusion_patterns", c.exclusion_patterns},
            {"hierarchy", c.hierarchy}}},
          {"features",
           {{"scenarios", scenarios},
            {"train_fraction", c.train_fraction},
            {"stratify", c.stratify},
            {"split_seeds", c.split_seeds}}},
          {"models",
           {{"families", families},
            {"search_budget", c.search_budget},
            {"cv_folds", c.cv_folds},
            {"search_space", space}}},
          {"explain",
           {{"methods", c.explain_methods},
            {"top_k", c.top_k},
            {"background_size", c.background_size},
            {"max_rows", c.max_rows},
            {"n_permutations", c.n_permutations},
            {"n_samples", c.n_samples}}},
          {"stats", {{"alpha", c.alpha}}}};
}

std::string SplitName(std::uint64_t seed, const char* part) {
  return "seed" + std::to_string(seed) + "_" + part + ".bin";
}

std::string Fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string DisplayName(ModelFamily f) {
  switch (f) {
    case ModelFamily::kRf: return "RF";
    case ModelFamily::kEt: return "ET";
    case ModelFamily::kMlp: return "NN";
    case ModelFamily::kFusion: return "T-CNN";
  }
  return "?";
}

bool MethodApplies(const std::string& method, ModelFamily f) {
  if (method == "tree") return IsForest(f);
  if (method == "gradient") return !IsForest(f);
  return true;
}

MatrixD Rows(const MatrixD& x, const std::vector<std::size_t>& rows) {
  MatrixD out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = x.row(rows[i]);
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) Fail(ErrorKind::kIo, "cannot write '" + path + "'");
}

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kMissingArtifact, "'" + path + "' not found");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kIo, "malformed '" + path + "': " + e.what());
  }
}

json MetricsJson(const ClassMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

int StageRank(const std::string& stage) {
  static const char* order[] = {"generate", "cohort", "featurize", "train", "explain", "stats", "report"};
  const std::string head = stage.substr(0, stage.find(':'));
  for (int i = 0; i < 7; ++i) {
    if (head == order[i]) return i;
  }
  return 7;
}

}  // namespace

json LoadConfigDocument(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) ConfigError("config file '" + path + "' not found");
    try {
      doc = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
      ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) ConfigError("config file must hold a JSON object");
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      ConfigError("override '" + o + "' is not of the form section.key=value");
    }
    const std::string section = o.substr(0, dot), key = o.substr(dot + 1, eq - dot - 1);
    const std::string text = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;
    }
    doc[section][key] = value;
  }
  return doc;
}

PipelineConfig ParsePipelineConfig(const json& doc) {
  if (!doc.is_object()) ConfigError("configuration must be a JSON object");
  static const std::set<std::string> kSections = {"paths",  "generator", "cohort", "features",
                                                  "models", "explain",   "stats"};
  for (const auto& [name, value] : doc.items()) {
    if (!kSections.count(name)) ConfigError("unknown section '" + name + "'");
  }
  PipelineConfig c;
  const json& paths = Section(doc, "paths", {"work_dir", "records"});
  Read(paths, "work_dir", c.work_dir);
  Read(paths, "records", c.records);

  const json& gen = Section(doc, "generator",
                            {"n_patients", "target_prevalence", "seed", "signal_strength",
                             "temporal_signal_strength", "vitals_observed", "labs_observed", "noise",
                             "suspected_fraction", "text_only_fraction", "ineligible_fraction",
                             "prior_hospitalization_fraction", "hierarchy_coded_fraction", "planted",
                             "final_day_signal", "final_day_quantities"});
  GeneratorConfig& g = c.generator;
  Read(gen, "n_patients", g.n_patients);
  Read(gen, "target_prevalence", g.target_prevalence);
  Read(gen, "seed", g.seed);
  Read(gen, "signal_strength", g.signal_strength);
  ReadOptional(gen, "temporal_signal_strength", g.temporal_signal_strength);
  ReadOptional(gen, "vitals_observed", g.vitals_observed);
  ReadOptional(gen, "labs_observed", g.labs_observed);
  Read(gen, "noise", g.noise);
  Read(gen, "suspected_fraction", g.suspected_fraction);
  Read(gen, "text_only_fraction", g.text_only_fraction);
  Read(gen, "ineligible_fraction", g.ineligible_fraction);
  Read(gen, "prior_hospitalization_fraction", g.prior_hospitalization_fraction);
  Read(gen, "hierarchy_coded_fraction", g.hierarchy_coded_fraction);
  Read(gen, "planted", g.planted);
  Read(gen, "final_day_signal", g.final_day_signal);
  Read(gen, "final_day_quantities", g.final_day_quantities);
  try {
    ValidateConfig(g);
  } catch (const Error& e) {
    ConfigError(std::string("generator: ") + e.what());
  }

  const json& cohort = Section(doc, "cohort", {"inclusion_patterns", "exclusion_patterns", "hierarchy"});
  Read(cohort, "inclusion_patterns", c.inclusion_patterns);
  Read(cohort, "exclusion_patterns", c.exclusion_patterns);
  Read(cohort, "hierarchy", c.hierarchy);
  if (c.inclusion_patterns.empty() && !c.exclusion_patterns.empty()) {
    ConfigError("cohort.exclusion_patterns needs cohort.inclusion_patterns");
  }

  const json& feat = Section(doc, "features", {"scenarios", "train_fraction", "stratify", "split_seeds"});
  if (feat.contains("scenarios")) {
    std::vector<std::string> names;
    Read(feat, "scenarios", names);
    c.scenarios.clear();
    for (const auto& n : names) {
      try {
        c.scenarios.push_back(ParseScenario(n));
      } catch (const Error& e) {
        ConfigError(e.what());
      }
    }
  }
  Read(feat, "train_fraction", c.train_fraction);
  Read(feat, "stratify", c.stratify);
  Read(feat, "split_seeds", c.split_seeds);
  if (c.scenarios.empty()) ConfigError("features.scenarios is empty");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) ConfigError("features.train_fraction must be in (0,1)");
  if (c.split_seeds.empty()) ConfigError("features.split_seeds is empty");

  const json& models = Section(doc, "models", {"families", "search_budget", "cv_folds", "search_space"});
  if (models.contains("families")) {
    std::vector<std::string> names;
    Read(models, "families", names);
    c.families.clear();
    for (const auto& n : names) {
      try {
        c.families.push_back(ParseModelFamily(n));
      } catch (const Error& e) {
        ConfigError(e.what());
      }
    }
  }
  Read(models, "search_budget", c.search_budget);
  Read(models, "cv_folds", c.cv_folds);
  if (models.contains("search_space")) {
    const json& space = models.at("search_space");
    if (!space.is_object()) ConfigError("models.search_space must be an object");
    for (const auto& [name, value] : space.items()) {
      ModelFamily f;
      try {
        f = ParseModelFamily(name);
      } catch (const Error& e) {
        ConfigError(e.what());
      }
      if (!value.is_object()) ConfigError("models.search_space." + name + " must be an object");
      c.search_space[f] = value;
    }
  }
  if (c.families.empty()) ConfigError("models.families is empty");
  if (c.search_budget < 1) ConfigError("models.search_budget must be >= 1");
  if (c.cv_folds < 2) ConfigError("models.cv_folds must be >= 2");

  const json& ex = Section(doc, "explain",
                           {"methods", "top_k", "background_size", "max_rows", "n_permutations", "n_samples"});
  Read(ex, "methods", c.explain_methods);
  Read(ex, "top_k", c.top_k);
  Read(ex, "background_size", c.background_size);
  Read(ex, "max_rows", c.max_rows);
  Read(ex, "n_permutations", c.n_permutations);
  Read(ex, "n_samples", c.n_samples);
  for (const auto& m : c.explain_methods) {
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
      ConfigError("unknown explain method '" + m + "'");
    }
  }
  if (c.top_k == 0 || c.background_size == 0 || c.max_rows == 0 || c.n_permutations == 0 || c.n_samples == 0) {
    ConfigError("explain sizes must be positive");
  }

  const json& st = Section(doc, "stats", {"alpha"});
  Read(st, "alpha", c.alpha);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) ConfigError("stats.alpha must be in (0,1)");

  RequireFile(c.records, "paths.records");
  RequireFile(c.inclusion_patterns, "cohort.inclusion_patterns");
  RequireFile(c.exclusion_patterns, "cohort.exclusion_patterns");
  RequireFile(c.hierarchy, "cohort.hierarchy");
  c.raw = ToJson(c);
  return c;
}

std::string Sha256Hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    Fail(ErrorKind::kIo, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string Sha256File(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kMissingArtifact, "'" + path + "' not found");
  std::ostringstream buf;
  buf << in.rdbuf();
  return Sha256Hex(buf.str());
}

std::vector<ManifestEntry> ReadManifest(const std::string& path) {
  std::vector<ManifestEntry> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    ManifestEntry e;
    if (!std::getline(row, e.stage, '\t') || !std::getline(row, e.config_hash, '\t') ||
        !std::getline(row, e.seed, '\t') || !std::getline(row, e.output_hash)) {
      Fail(ErrorKind::kIo, "malformed manifest line in '" + path + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void WriteManifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::vector<ManifestEntry> sorted = entries;
  std::stable_sort(sorted.begin(), sorted.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    const int ra = StageRank(a.stage), rb = StageRank(b.stage);
    return ra != rb ? ra < rb : a.stage < b.stage;
  });
  std::ostringstream out;
  out << "# stage\tconfig_hash\tseed\toutput_hash\n";
  for (const auto& e : sorted) out << e.stage << '\t' << e.config_hash << '\t' << e.seed << '\t' << e.output_hash << '\n';
  const std::string tmp = path + ".tmp";
  WriteText(tmp, out.str());
  fs::rename(tmp, path);
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kInvalidArgument: return 2;
    case ErrorKind::kMissingArtifact:
    case ErrorKind::kNotFound: return 3;
    case ErrorKind::kNumerical: return 4;
    case ErrorKind::kIo: return 1;
  }
  return 1;
}

Pipeline::Pipeline(PipelineConfig config, RunOptions options)
    : config_(std::move(config)), options_(options) {
  fs::create_directories(config_.work_dir);
  manifest_ = ReadManifest(Path("manifest.tsv"));
}

std::string Pipeline::Path(const std::string& relative) const { return (fs::path(config_.work_dir) / relative).string(); }

std::string Pipeline::RecordsPath() const { return config_.records.empty() ? Path("records.txt") : config_.records; }

std::string Pipeline::SeedList() const {
  std::string s;
  for (std::uint64_t v : config_.split_seeds) s += (s.empty() ? "" : ",") + std::to_string(v);
  return s;
}

// Hash of the configuration a stage depends on, upstream sections included.
std::string Pipeline::StageHash(const std::string& stage) const {
  const json& raw = config_.raw;
  const std::string head = stage.substr(0, stage.find(':'));
  const int rank = StageRank(stage);
  json deps = {{"stage", stage}, {"generator", raw["generator"]}, {"records", raw["paths"]["records"]}};
  if (rank >= 1) deps["cohort"] = raw["cohort"];
  if (rank >= 2) {
    json f = raw["features"];
    f.erase("scenarios");
    deps["features"] = f;
  }
  if (rank >= 3 && head != "stats") {
    deps["scenarios"] = raw["features"]["scenarios"];
    json m = raw["models"];
    m.erase("families");
    deps["models"] = m;
  }
  if (head == "explain" || head == "report") {
    deps["families"] = raw["models"]["families"];
    deps["explain"] = raw["explain"];
  }
  if (head == "stats" || head == "report") deps["stats"] = raw["stats"];
  return Sha256Hex(deps.dump());
}

namespace {

std::string OutputHash(const std::string& root, const std::vector<std::string>& outputs) {
  std::vector<std::string> sorted = outputs;
  std::sort(sorted.begin(), sorted.end());
  std::string text;
  for (const auto& rel : sorted) {
    const fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : fs::path(root) / rel;
    text += (fs::path(rel).is_absolute() ? p.filename().string() : rel) + '\0' + Sha256File(p.string()) + '\n';
  }
  return Sha256Hex(text);
}

const ManifestEntry* Find(const std::vector<ManifestEntry>& m, const std::string& stage) {
  for (const auto& e : m) {
    if (e.stage == stage) return &e;
  }
  return nullptr;
}

}  // namespace

bool Pipeline::UpToDate(const std::string& stage, const std::vector<std::string>& outputs) const {
  const ManifestEntry* e = Find(manifest_, stage);
  if (!e || e->config_hash != StageHash(stage)) return false;
  for (const auto& rel : outputs) {
    const fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : fs::path(config_.work_dir) / rel;
    if (!fs::exists(p)) return false;
  }
  if (OutputHash(config_.work_dir, outputs) != e->output_hash) return false;
  LogInfo("stage " + stage + " is up to date");
  return true;
}

void Pipeline::RequireUpstream(const std::string& stage, const std::string& hint) const {
  const ManifestEntry* e = Find(manifest_, stage);
  if (!e) Fail(ErrorKind::kMissingArtifact, "missing artifact from stage '" + stage + "'; run `" + hint + "` first");
  if (e->config_hash != StageHash(stage)) {
    if (options_.force) {
      LogWarning("configuration changed since stage '" + stage + "' ran; continuing because of --force");
    } else {
      ConfigError("configuration changed since stage '" + stage + "' ran; rerun `" + hint +
                  "` or pass --force");
    }
  }
}

void Pipeline::Record(const std::string& stage, const std::string& seed, const std::vector<std::string>& outputs) {
  ManifestEntry entry{stage, StageHash(stage), seed, OutputHash(config_.work_dir, outputs)};
  auto it = std::find_if(manifest_.begin(), manifest_.end(), [&](const ManifestEntry& e) { return e.stage == stage; });
  if (it != manifest_.end()) {
    *it = entry;
  } else {
    manifest_.push_back(entry);
  }
  WriteManifest(manifest_, Path("manifest.tsv"));
  executed_.push_back(stage);
}

void Pipeline::Generate() {
  const std::string seed = std::to_string(config_.generator.seed);
  if (!config_.records.empty()) {
    if (UpToDate("generate", {config_.records})) return;
    LogInfo("records supplied in paths.records; nothing to generate");
    Record("generate", "-", {config_.records});
    return;
  }
  const std::vector<std::string> outputs = {"records.txt", "truth.jsonl"};
  if (UpToDate("generate", outputs)) return;
  const GeneratedCohort cohort = GenerateCohort(config_.generator);
  WriteRecords(RecordStore::FromRecords(cohort.records), Path("records.txt"));
  WriteTruth(cohort, config_.generator, Path("truth.jsonl"));
  LogInfo("generated " + std::to_string(cohort.records.size()) + " records for " +
          std::to_string(config_.generator.n_patients) + " patients");
  Record("generate", seed, outputs);
}

namespace {

struct CohortInputs {
  PatternSet patterns;
  CodeHierarchy hierarchy;
};

CohortInputs LoadCohortInputs(const PipelineConfig& c) {
  CohortInputs in;
  in.patterns = c.inclusion_patterns.empty() ? DefaultCovidPatterns()
                                             : LoadPatternSet(c.inclusion_patterns, c.exclusion_patterns);
  in.hierarchy = c.hierarchy.empty() ? DefaultHierarchy() : LoadHierarchy(c.hierarchy);
  return in;
}

}  // namespace

void Pipeline::Cohort() {
  RequireUpstream("generate", "generate");
  const std::vector<std::string> outputs = {"cohort.tsv", "cohort_report.json"};
  if (UpToDate("cohort", outputs)) return;
  IngestReport ingest;
  const RecordStore store = IngestRecords(RecordsPath(), &ingest);
  const CohortInputs in = LoadCohortInputs(config_);
  CohortReport report;
  const auto cohort = BuildCohort(store, in.patterns, in.hierarchy, &report);
  WriteCohort(cohort, Path("cohort.tsv"));
  json r = {{"patients", store.num_patients()},
            {"records", store.num_records()},
            {"rejected_lines", ingest.rejected},
            {"duplicates", ingest.duplicates},
            {"candidates", report.candidates},
            {"excluded_prior_hospitalization", report.excluded_prior_hospitalization},
            {"h0", report.h0},
            {"h1", report.h1}};
  WriteText(Path("cohort_report.json"), r.dump(2) + "\n");
  LogInfo("cohort: " + std::to_string(report.h0) + " H0, " + std::to_string(report.h1) + " H1");
  Record("cohort", "-", outputs);
}

std::vector<std::string> Pipeline::FeatureOutputs(Scenario s) const {
  const std::string dir = "features/" + std::string(ToString(s)) + "/";
  std::vector<std::string> out = {dir + "table.json"};
  for (std::uint64_t seed : config_.split_seeds) {
    out.push_back(dir + SplitName(seed, "train"));
    out.push_back(dir + SplitName(seed, "test"));
  }
  return out;
}

namespace {

FeatureTable BuildAllTable(const std::string& records_path, const std::string& cohort_path) {
  const RecordStore store = IngestRecords(records_path);
  const auto cohort = ReadCohort(cohort_path);
  return BuildFeatureTable(store, cohort, DefaultFeatureSpec(), DefaultIntervalScheme());
}

}  // namespace

void Pipeline::Featurize(std::optional<Scenario> scenario) {
  RequireUpstream("cohort", "cohort");
  std::vector<Scenario> todo;
  for (Scenario s : config_.scenarios) {
    if (scenario && *scenario != s) continue;
    if (!UpToDate("featurize:" + std::string(ToString(s)), FeatureOutputs(s))) todo.push_back(s);
  }
  if (scenario && std::find(config_.scenarios.begin(), config_.scenarios.end(), *scenario) == config_.scenarios.end()) {
    ConfigError("scenario '" + std::string(ToString(*scenario)) + "' is not listed in features.scenarios");
  }
  if (todo.empty()) return;
  const FeatureTable all = BuildAllTable(RecordsPath(), Path("cohort.tsv"));
  for (Scenario s : todo) {
    const std::string name(ToString(s));
    const FeatureTable table = s == Scenario::kAll ? all : ApplyScenario(all, s);
    const std::string dir = "features/" + name + "/";
    fs::create_directories(Path(dir));
    std::size_t violations = 0;
    for (std::uint64_t seed : config_.split_seeds) {
      const TrainTestFeatures tt = FitTransform(table, config_.train_fraction, seed, config_.stratify);
      violations += CountLeakageViolations(tt.train) + CountLeakageViolations(tt.test);
      WriteFeatures(tt.train, Path(dir + SplitName(seed, "train")));
      WriteFeatures(tt.test, Path(dir + SplitName(seed, "test")));
    }
    std::size_t h1 = 0;
    for (auto l : table.labels) h1 += l;
    json info = {{"scenario", name},       {"n", table.n()},
                 {"h1", h1},               {"h", table.h},
                 {"m", table.m},           {"t", table.t},
                 {"k", table.k()},         {"dropped_unknown_age", table.dropped_unknown_age},
                 {"dropped_empty", table.dropped_empty}, {"leakage_violations", violations}};
    WriteText(Path(dir + "table.json"), info.dump(2) + "\n");
    if (violations) Fail(ErrorKind::kNumerical, "leakage guard failed for scenario " + name);
    LogInfo("featurize " + name + ": n=" + std::to_string(table.n()) + " k=" + std::to_string(table.k()));
    Record("featurize:" + name, SeedList(), FeatureOutputs(s));
  }
}

std::vector<std::string> Pipeline::TrainOutputs(ModelFamily f) const {
  std::vector<std::string> out;
  for (Scenario s : config_.scenarios) {
    const std::string dir = "models/" + std::string(ToString(f)) + "/" + std::string(ToString(s)) + "/";
    out.push_back(dir + "eval.json");
    for (std::uint64_t seed : config_.split_seeds) out.push_back(dir + "seed" + std::to_string(seed) + ".model");
  }
  return out;
}

void Pipeline::Train(std::optional<ModelFamily> family) {
  if (family && std::find(config_.families.begin(), config_.families.end(), *family) == config_.families.end()) {
    ConfigError("model '" + std::string(ToString(*family)) + "' is not listed in models.families");
  }
  for (ModelFamily f : config_.families) {
    if (!family || *family == f) TrainOne(f);
  }
}

void Pipeline::TrainOne(ModelFamily family) {
  for (Scenario s : config_.scenarios) {
    RequireUpstream("featurize:" + std::string(ToString(s)), "featurize --scenario " + std::string(ToString(s)));
  }
  const std::string fname(ToString(family));
  const std::string stage = "train:" + fname;
  if (UpToDate(stage, TrainOutputs(family))) return;
  json space = DefaultSearchSpace(family);
  if (auto it = config_.search_space.find(family); it != config_.search_space.end()) {
    for (const auto& [k, v] : it->second.items()) space[k] = v;
  }
  for (Scenario s : config_.scenarios) {
    const std::string sname(ToString(s));
    const std::string dir = "models/" + fname + "/" + sname + "/";
    fs::create_directories(Path(dir));
    json eval = {{"model", fname}, {"scenario", sname}, {"seeds", json::array()}};
    std::vector<EvalReport> reports;
    for (std::uint64_t seed : config_.split_seeds) {
      const FusedFeatures train = ReadFeatures(Path("features/" + sname + "/" + SplitName(seed, "train")));
      const FusedFeatures test = ReadFeatures(Path("features/" + sname + "/" + SplitName(seed, "test")));
      CvResult cv = CrossValidate(family, train.early, train.labels, train.h, train.m, train.t, space,
                                  config_.search_budget, DeriveSeed(seed, "model-" + fname), config_.cv_folds);
      cv.model.scenario = sname;
      cv.model.seed = seed;
      WriteModel(cv.model, Path(dir + "seed" + std::to_string(seed) + ".model"));
      EvalReport r = Evaluate(cv.model.PredictProbaH1(test.early), test.labels);
      r.model = fname;
      r.scenario = sname;
      reports.push_back(r);
      eval["seeds"].push_back({{"seed", seed},
                               {"best_params", cv.best_params},
                               {"cv_f1", cv.best_score},
                               {"h0", MetricsJson(r.h0)},
                               {"h1", MetricsJson(r.h1)}});
      LogInfo(stage + " " + sname + " seed " + std::to_string(seed) + ": F1(H1) " + Fixed(r.h1.f1, 3));
    }
    const AggregateReport agg = AggregateOverSeeds(reports);
    auto stat = [](const std::array<MetricStat, 3>& a) {
      return json{{"precision", {a[0].mean, a[0].stddev}}, {"recall", {a[1].mean, a[1].stddev}},
                  {"f1", {a[2].mean, a[2].stddev}}};
    };
    eval["aggregate"] = {{"h0", stat(agg.h0)}, {"h1", stat(agg.h1)}};
    WriteText(Path(dir + "eval.json"), eval.dump(2) + "\n");
  }
  Record(stage, SeedList(), TrainOutputs(family));
}

std::vector<std::string> Pipeline::ExplainOutputs(const std::string& method) const {
  std::vector<std::string> out;
  for (ModelFamily f : config_.families) {
    if (!MethodApplies(method, f)) continue;
    for (Scenario s : config_.scenarios) {
      const std::string base = "explain/" + method + "/" + std::string(ToString(f)) + "_" + std::string(ToString(s));
      out.push_back(base + "_summary.tsv");
      out.push_back(base + "_plot.tsv");
      out.push_back(base + "_info.json");
    }
  }
  return out;
}

void Pipeline::Explain(std::optional<std::string> method) {
  if (method && std::find(kMethods.begin(), kMethods.end(), *method) == kMethods.end()) {
    ConfigError("unknown explain method '" + *method + "'");
  }
  if (method) {
    ExplainOne(*method);
    return;
  }
  for (const auto& m : config_.explain_methods) ExplainOne(m);
}

void Pipeline::ExplainOne(const std::string& method) {
  const std::vector<std::string> outputs = ExplainOutputs(method);
  if (outputs.empty()) {
    LogWarning("explain method '" + method + "' applies to none of the configured models");
    return;
  }
  for (ModelFamily f : config_.families) {
    if (MethodApplies(method, f)) RequireUpstream("train:" + std::string(ToString(f)), "train --model " + std::string(ToString(f)));
  }
  const std::string stage = "explain:" + method;
  if (UpToDate(stage, outputs)) return;
  fs::create_directories(Path("explain/" + method));
  for (ModelFamily f : config_.families) {
    if (!MethodApplies(method, f)) continue;
    const std::string fname(ToString(f));
    for (Scenario s : config_.scenarios) {
      const std::string sname(ToString(s));
      std::vector<ShapMatrix> matrices;
      double max_residual = 0.0;
      std::size_t rows_total = 0;
      json per_seed = json::array();
      for (std::uint64_t seed : config_.split_seeds) {
        const TrainedModel model = ReadModel(Path("models/" + fname + "/" + sname + "/seed" + std::to_string(seed) + ".model"));
        const FusedFeatures train = ReadFeatures(Path("features/" + sname + "/" + SplitName(seed, "train")));
        const FusedFeatures test = ReadFeatures(Path("features/" + sname + "/" + SplitName(seed, "test")));
        const MatrixD x = Rows(test.early, SampleRows(test.n(), config_.max_rows, DeriveSeed(seed, "explain-rows")));
        const MatrixD bg =
            Rows(train.early, SampleRows(train.n(), config_.background_size, DeriveSeed(seed, "background")));
        ShapMatrix sm;
        if (method == "tree") {
          sm = TreeShapMatrix(*model.forest, x);
        } else if (method == "gradient") {
          sm = GradientShapMatrix(model, x, bg, config_.n_samples, DeriveSeed(seed, "explain"));
        } else {
          PredictFn fn = model.forest ? PredictFn([&model](const MatrixD& m) { return model.PredictProbaH1(m); })
                                      : NetworkLogitFn(model);
          sm = SamplingShapMatrix(fn, x, bg, config_.n_permutations, DeriveSeed(seed, "explain"));
        }
        sm.model = fname;
        sm.scenario = sname;
        sm.feature_names = test.feature_names;
        double residual = 0.0;
        for (std::size_t i = 0; i < sm.values.rows(); ++i) {
          double total = sm.base_value;
          for (double v : sm.values.row(i)) total += v;
          residual = std::max(residual, std::abs(total - sm.outputs[i]));
        }
        max_residual = std::max(max_residual, residual);
        rows_total += sm.values.rows();
        per_seed.push_back({{"seed", seed}, {"rows", sm.values.rows()}, {"base_value", sm.base_value},
                            {"max_efficiency_residual", residual}});
        matrices.push_back(std::move(sm));
      }
      const ShapSummary summary = SummarizeShap(matrices, config_.top_k);
      const std::string base = "explain/" + method + "/" + fname + "_" + sname;
      {
        std::ofstream out(Path(base + "_summary.tsv"), std::ios::binary);
        WriteShapSummary(summary, out);
      }
      {
        std::ofstream out(Path(base + "_plot.tsv"), std::ios::binary);
        WriteShapPlotData(matrices, summary, out);
      }
      json info = {{"method", method},     {"model", fname},
                   {"scenario", sname},    {"rows", rows_total},
                   {"top_k", config_.top_k}, {"top", summary.top},
                   {"max_efficiency_residual", max_residual}, {"seeds", per_seed}};
      WriteText(Path(base + "_info.json"), info.dump(2) + "\n");
      LogInfo(stage + " " + fname + " " + sname + ": top feature " + (summary.top.empty() ? "-" : summary.top[0]));
    }
  }
  Record(stage, SeedList(), outputs);
}

void Pipeline::Stats() {
  RequireUpstream("cohort", "cohort");
  const std::vector<std::string> outputs = {"stats/summary.txt", "stats/summary.tsv"};
  if (UpToDate("stats", outputs)) return;
  const FeatureTable table = BuildAllTable(RecordsPath(), Path("cohort.tsv"));
  const auto rows = CohortSummary(table, config_.alpha);
  fs::create_directories(Path("stats"));
  {
    std::ofstream out(Path("stats/summary.txt"), std::ios::binary);
    WriteSummaryText(rows, out);
  }
  {
    std::ofstream out(Path("stats/summary.tsv"), std::ios::binary);
    WriteSummaryDelimited(rows, out);
  }
  Record("stats", "-", outputs);
}

void Pipeline::Report() {
  for (ModelFamily f : config_.families) {
    RequireUpstream("train:" + std::string(ToString(f)), "train --model " + std::string(ToString(f)));
  }
  for (const auto& m : config_.explain_methods) {
    if (!ExplainOutputs(m).empty()) RequireUpstream("explain:" + m, "explain --method " + m);
  }
  RequireUpstream("stats", "stats");
  const std::vector<std::string> outputs = {"report/metrics.tsv", "report/metrics_std.tsv", "report/overlap.tsv",
                                            "report/sources.tsv"};
  if (UpToDate("report", outputs)) return;
  fs::create_directories(Path("report"));

  // One row per model, one cell per metric holding all/gp/one-day-before.
  std::ostringstream mean, sd;
  const char* header = "model\tP(H0)\tR(H0)\tF1(H0)\tP(H1)\tR(H1)\tF1(H1)\n";
  mean << "# mean over split seeds; cells are all/gp/one-day-before\n" << header;
  sd << "# standard deviation over split seeds; cells are all/gp/one-day-before\n" << header;
  for (ModelFamily f : config_.families) {
    std::array<std::string, 6> cm, cs;
    for (Scenario s : kAllScenarios) {
      const bool have = std::find(config_.scenarios.begin(), config_.scenarios.end(), s) != config_.scenarios.end();
      json agg;
      if (have) {
        agg = ReadJsonFile(Path("models/" + std::string(ToString(f)) + "/" + std::string(ToString(s)) + "/eval.json"))
                  .at("aggregate");
      }
      int col = 0;
      for (const char* cls : {"h0", "h1"}) {
        for (const char* metric : {"precision", "recall", "f1"}) {
          const std::string sep = s == Scenario::kAll ? "" : "/";
          cm[col] += sep + (have ? Fixed(agg[cls][metric][0].get<double>(), 2) : "-");
          cs[col] += sep + (have ? Fixed(agg[cls][metric][1].get<double>(), 2) : "-");
          ++col;
        }
      }
    }
    mean << DisplayName(f);
    sd << DisplayName(f);
    for (int i = 0; i < 6; ++i) {
      mean << '\t' << cm[i];
      sd << '\t' << cs[i];
    }
    mean << '\n';
    sd << '\n';
  }
  WriteText(Path("report/metrics.tsv"), mean.str());
  WriteText(Path("report/metrics_std.tsv"), sd.str());

  // Pairwise top-k overlap between every pair of explained models.
  struct Explained {
    std::string model, method;
  };
  std::ostringstream ov;
  ov << "scenario\tmodel_a\tmethod_a\tmodel_b\tmethod_b\tk\tcount\tfraction\n";
  for (Scenario s : config_.scenarios) {
    const std::string sname(ToString(s));
    std::vector<Explained> have;
    for (ModelFamily f : config_.families) {
      // Exact attributions preferred for forests, gradients for networks.
      for (const std::string m : {"tree", "gradient", "sampling"}) {
        if (!MethodApplies(m, f)) continue;
        if (std::find(config_.explain_methods.begin(), config_.explain_methods.end(), m) == config_.explain_methods.end()) continue;
        have.push_back({std::string(ToString(f)), m});
        break;
      }
    }
    for (std::size_t a = 0; a < have.size(); ++a) {
      for (std::size_t b = a + 1; b < have.size(); ++b) {
        auto load = [&](const Explained& e) {
          std::ifstream in(Path("explain/" + e.method + "/" + e.model + "_" + sname + "_summary.tsv"));
          if (!in) Fail(ErrorKind::kMissingArtifact, "attribution summary for " + e.model + " missing; run `explain`");
          return ReadShapSummary(in, config_.top_k);
        };
        const Overlap o = TopKOverlap(load(have[a]), load(have[b]), config_.top_k);
        ov << sname << '\t' << have[a].model << '\t' << have[a].method << '\t' << have[b].model << '\t'
           << have[b].method << '\t' << config_.top_k << '\t' << o.count << '\t' << Fixed(o.fraction, 3) << '\n';
      }
    }
  }
  WriteText(Path("report/overlap.tsv"), ov.str());

  std::ostringstream src;
  src << "# manifest entries the report was built from\n";
  for (const auto& e : ReadManifest(Path("manifest.tsv"))) {
    if (e.stage != "report") src << e.stage << '\t' << e.config_hash << '\t' << e.seed << '\t' << e.output_hash << '\n';
  }
  WriteText(Path("report/sources.tsv"), src.str());
  Record("report", SeedList(), outputs);
}

void Pipeline::All() {
  Generate();
  Cohort();
  Featurize();
  Train();
  Explain();
  Stats();
  Report();
}

}  // namespace hospx
