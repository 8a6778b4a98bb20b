#ifndef HOSPX_PIPELINE_H_
#define HOSPX_PIPELINE_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hospx/features.h"
#include "hospx/synth.h"
#include "hospx/training.h"
#include "json.hpp"

namespace hospx {

struct PipelineConfig {
  std::string work_dir = "work";
  std::string records;  // external record file; empty means generated
  GeneratorConfig generator;
  // Cohort section; empty paths use the built-in pattern and hierarchy sets.
  std::string inclusion_patterns, exclusion_patterns, hierarchy;
  // Feature section.
  std::vector<Scenario> scenarios = {Scenario::kAll, Scenario::kGp, Scenario::kOneDayBefore};
  double train_fraction = 0.7;
  bool stratify = false;
  std::vector<std::uint64_t> split_seeds = {1, 2, 3, 4, 5};
  // Model section.
  std::vector<ModelFamily> families = {ModelFamily::kRf, ModelFamily::kEt, ModelFamily::kMlp,
                                       ModelFamily::kFusion};
  std::size_t search_budget = 20;
  std::size_t cv_folds = 3;
  std::map<ModelFamily, nlohmann::json> search_space;  // per family, merged over the default space
  // Explain section.
  std::vector<std::string> explain_methods = {"tree", "gradient"};
  std::size_t top_k = 35;
  std::size_t background_size = 100;
  std::size_t max_rows = 300;  // test rows explained per split seed
  std::size_t n_permutations = 200;
  std::size_t n_samples = 200;
  // Stats section.
  double alpha = 0.001;

  nlohmann::json raw;  // effective configuration, canonical form
};

// Parses a sectioned JSON document; unknown keys and bad values raise
// Error(kConfig). Referenced files must exist.
PipelineConfig ParsePipelineConfig(const nlohmann::json& doc);
// Reads `path` (empty for defaults), applies "section.key=value" overrides
// (values parsed as JSON, else taken as strings).
nlohmann::json LoadConfigDocument(const std::string& path, const std::vector<std::string>& overrides);

std::string Sha256Hex(std::string_view data);
std::string Sha256File(const std::string& path);

struct ManifestEntry {
  std::string stage, config_hash, seed, output_hash;
  bool operator==(const ManifestEntry&) const = default;
};
std::vector<ManifestEntry> ReadManifest(const std::string& path);
void WriteManifest(const std::vector<ManifestEntry>& entries, const std::string& path);

struct RunOptions {
  bool force = false;
};

class Pipeline {
 public:
  Pipeline(PipelineConfig config, RunOptions options);

  void Generate();
  void Cohort();
  // nullopt runs every configured scenario.
  void Featurize(std::optional<Scenario> scenario = std::nullopt);
  void Train(std::optional<ModelFamily> family = std::nullopt);
  void Explain(std::optional<std::string> method = std::nullopt);
  void Stats();
  void Report();
  void All();

  // Stages that were actually executed (not up to date) during this run.
  const std::vector<std::string>& executed() const { return executed_; }
  std::string Path(const std::string& relative) const;
  std::string StageHash(const std::string& stage) const;

 private:
  bool UpToDate(const std::string& stage, const std::vector<std::string>& outputs) const;
  void RequireUpstream(const std::string& stage, const std::string& hint) const;
  void Record(const std::string& stage, const std::string& seed, const std::vector<std::string>& outputs);
  std::string RecordsPath() const;
  std::string SeedList() const;
  std::vector<std::string> FeatureOutputs(Scenario s) const;
  std::vector<std::string> TrainOutputs(ModelFamily f) const;
  std::vector<std::string> ExplainOutputs(const std::string& method) const;
  void TrainOne(ModelFamily family);
  void ExplainOne(const std::string& method);

  PipelineConfig config_;
  RunOptions options_;
  std::vector<ManifestEntry> manifest_;
  std::vector<std::string> executed_;
};

// 0 success, 2 configuration error, 3 missing artifact, 4 numerical
// failure, 1 anything else.
int ExitCodeFor(ErrorKind kind);

}  // namespace hospx

#endif  // HOSPX_PIPELINE_H_
