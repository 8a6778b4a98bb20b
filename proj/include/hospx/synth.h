#ifndef HOSPX_SYNTH_H_
#define HOSPX_SYNTH_H_

// Synthetic EHR cohort generator with a planted, known risk model.
//
// Each patient draws a latent label first; conditions, demographics and
// measurements are then drawn independently given that label. The posterior
// log-odds of such a model is linear in the Boolean features with one
// coefficient per feature equal to its log odds ratio, which is what the
// truth file records. `signal_strength` scales every log odds ratio relative
// to the reference prevalences (0 gives label-independent features), and
// `planted` pins individual coefficients.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hospx/records.h"

namespace hospx {

struct GeneratorConfig {
  std::size_t n_patients = 1000;
  double target_prevalence = 0.125;
  std::uint64_t seed = 1;
  double signal_strength = 1.0;
  // Scale for measurement shifts and observation rates; unset follows
  // signal_strength.
  std::optional<double> temporal_signal_strength;
  // Label-independent observation probabilities per measurement family;
  // unset uses the per-class reference rates.
  std::optional<double> vitals_observed;
  std::optional<double> labs_observed;
  // Probability that a latent-H0 patient still gets a qualifying admission.
  double noise = 0.01;
  // COVID-19 diagnosis mix at the anchor; the remainder is U07.1.
  double suspected_fraction = 0.20;
  double text_only_fraction = 0.10;
  // Patients generated outside the cohort rules.
  double ineligible_fraction = 0.02;
  double prior_hospitalization_fraction = 0.01;
  // Fraction of condition diagnoses coded only through a descendant concept.
  double hierarchy_coded_fraction = 0.2;
  // Coefficient overrides by feature name (condition slug, "male", age bin
  // name, "lab:<slug>" standardized log-shift, "obs:<slug>" observation
  // log odds ratio).
  std::map<std::string, double> planted;
  // Extra adverse measurements on the day before admission for hospitalized
  // patients, in units of the log-scale standard deviation; 0 disables.
  double final_day_signal = 0.0;
  std::vector<std::string> final_day_quantities = {"spo2", "crp", "rr", "ldh"};
};

void ValidateConfig(const GeneratorConfig& config);

struct PlantedCoefficient {
  std::string feature;
  double coefficient = 0.0;
};

struct PlantedRiskModel {
  double latent_prevalence = 0.0;
  // Intercept of the Boolean part of the posterior log-odds.
  double bias = 0.0;
  std::vector<PlantedCoefficient> coefficients;
};

enum class TruthStatus { kCohort, kNotInCohort, kExcludedPriorHosp };

struct TruthEntry {
  std::string patient_id;
  bool hospitalized = false;         // label materialized through encounters
  bool latent_hospitalized = false;  // label features were drawn from
  std::optional<int> admission_offset;
  TruthStatus status = TruthStatus::kCohort;
};

struct GeneratedCohort {
  std::vector<RawRecord> records;
  PlantedRiskModel model;
  std::vector<TruthEntry> truth;
};

// Throws Error(kInvalidArgument) on n_patients == 0 or when the target
// prevalence cannot be reached with the configured noise.
GeneratedCohort GenerateCohort(const GeneratorConfig& config);
PlantedRiskModel BuildPlantedModel(const GeneratorConfig& config);

void WriteTruth(const GeneratedCohort& cohort, const GeneratorConfig& config,
                const std::string& path);
struct TruthFile {
  PlantedRiskModel model;
  std::vector<TruthEntry> entries;
};
TruthFile ReadTruth(const std::string& path);

// Features by |coefficient| descending (name ascending on ties), zero
// coefficients omitted.
std::vector<std::string> GroundTruthRanking(const PlantedRiskModel& model);
std::vector<std::string> GroundTruthRanking(const std::string& truth_path);

// Admission-offset distribution (days 0..28) used for hospitalized patients.
const std::vector<double>& AdmissionOffsetDistribution();

}  // namespace hospx

#endif  // HOSPX_SYNTH_H_
