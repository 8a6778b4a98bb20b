// hospx: run the hospitalization-risk pipeline stage by stage or end to end.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hospx/common.h"
#include "hospx/pipeline.h"

namespace {

struct Flags {
  std::string config;
  std::string work_dir;
  std::vector<std::string> overrides;
  int jobs = 0;
  bool force = false;
  bool quiet = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_patients;
};

hospx::PipelineConfig ResolveConfig(const Flags& f) {
  std::vector<std::string> overrides;
  // Environment sits between the file and explicit flags.
  if (const char* env = std::getenv("HOSPX_WORKDIR"); env && *env) {
    overrides.push_back(std::string("paths.work_dir=\"") + env + "\"");
  }
  if (!f.work_dir.empty()) overrides.push_back("paths.work_dir=\"" + f.work_dir + "\"");
  if (f.seed) overrides.push_back("generator.seed=" + std::to_string(*f.seed));
  if (f.n_patients) overrides.push_back("generator.n_patients=" + std::to_string(*f.n_patients));
  overrides.insert(overrides.end(), f.overrides.begin(), f.overrides.end());
  return hospx::ParsePipelineConfig(hospx::LoadConfigDocument(f.config, overrides));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hospx: COVID-19 hospitalization risk pipeline on coded EHR records"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("-c,--config", flags.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("-w,--work-dir", flags.work_dir, "artifact directory (overrides HOSPX_WORKDIR and the config)");
  app.add_option("-s,--set", flags.overrides, "override a config value: section.key=value");
  app.add_option("-j,--jobs", flags.jobs, "worker thread cap")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", flags.seed, "generator seed");
  app.add_option("-n,--n-patients", flags.n_patients, "synthetic cohort size");
  app.add_flag("-f,--force", flags.force, "run even when upstream stages used a different configuration");
  app.add_flag("-q,--quiet", flags.quiet, "suppress progress messages");

  auto* generate = app.add_subcommand("generate", "synthesize records and the ground-truth file");
  auto* cohort = app.add_subcommand("cohort", "ingest records, select and label the cohort");
  auto* featurize = app.add_subcommand("featurize", "build normalized feature splits");
  std::string scenario;
  featurize->add_option("--scenario", scenario, "all, gp or one-day-before (default: every configured one)")
      ->check(CLI::IsMember({"all", "gp", "one-day-before"}));
  auto* train = app.add_subcommand("train", "cross-validate, fit and evaluate models");
  std::string model;
  train->add_option("--model", model, "rf, et, mlp or fusion (default: every configured one)")
      ->check(CLI::IsMember({"rf", "et", "mlp", "fusion"}));
  auto* explain = app.add_subcommand("explain", "attributions on the test splits");
  std::string method;
  explain->add_option("--method", method, "tree, sampling or gradient (default: configured methods)")
      ->check(CLI::IsMember({"tree", "sampling", "gradient"}));
  auto* stats = app.add_subcommand("stats", "cohort summary with significance tests");
  auto* report = app.add_subcommand("report", "metrics and overlap tables");
  auto* all = app.add_subcommand("all", "every stage in order");
  auto* show = app.add_subcommand("config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    hospx::SetLogQuiet(flags.quiet);
    if (flags.jobs > 0) hospx::SetMaxThreads(flags.jobs);
    hospx::PipelineConfig config = ResolveConfig(flags);
    if (show->parsed()) {
      std::cout << config.raw.dump(2) << "\n";
      return 0;
    }
    hospx::Pipeline pipeline(std::move(config), {flags.force});
    if (generate->parsed()) pipeline.Generate();
    if (cohort->parsed()) pipeline.Cohort();
    if (featurize->parsed()) {
      pipeline.Featurize(scenario.empty() ? std::nullopt : std::optional(hospx::ParseScenario(scenario)));
    }
    if (train->parsed()) {
      pipeline.Train(model.empty() ? std::nullopt : std::optional(hospx::ParseModelFamily(model)));
    }
    if (explain->parsed()) pipeline.Explain(method.empty() ? std::nullopt : std::optional(method));
    if (stats->parsed()) pipeline.Stats();
    if (report->parsed()) pipeline.Report();
    if (all->parsed()) pipeline.All();
  } catch (const hospx::Error& e) {
    std::cerr << "hospx: " << e.what() << "\n";
    return hospx::ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "hospx: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
