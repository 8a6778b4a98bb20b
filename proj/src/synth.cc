#include "hospx/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "hospx/catalog.h"
#include "hospx/common.h"
#include "json.hpp"

namespace hospx {
namespace {

constexpr double kQuartileZ = 0.6744897501960817;  // standard normal 75th percentile
constexpr int kFirstAnchorDay = 60;
constexpr int kLastAnchorDay = 360;

double Logit(double p) { return std::log(p / (1.0 - p)); }
double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

bool IsVital(std::string_view slug) {
  return slug == "hr" || slug == "sbp" || slug == "dbp" || slug == "temp" || slug == "rr" ||
         slug == "spo2";
}

struct BooleanParams {
  double p0, p1;
};

struct QuantityParams {
  double mu0, sigma0, mu1, sigma1;
  double observed0, observed1;
};

// All per-class sampling parameters after applying signal strength and
// planted overrides.
struct SamplingModel {
  std::vector<BooleanParams> conditions;
  BooleanParams male;
  std::array<double, 9> age0, age1;
  std::vector<QuantityParams> quantities;
  double latent_prevalence;
};

double TemporalStrength(const GeneratorConfig& c) {
  return c.temporal_signal_strength.value_or(c.signal_strength);
}

double Coefficient(const GeneratorConfig& c, const std::string& name, double reference) {
  auto it = c.planted.find(name);
  if (it != c.planted.end()) return it->second;
  const bool temporal = name.rfind("lab:", 0) == 0 || name.rfind("obs:", 0) == 0;
  return (temporal ? TemporalStrength(c) : c.signal_strength) * reference;
}

BooleanParams TiltBoolean(const GeneratorConfig& c, const std::string& name, double p0,
                          double p1_reference) {
  const double coef = Coefficient(c, name, Logit(p1_reference) - Logit(p0));
  return {p0, Sigmoid(Logit(p0) + coef)};
}

SamplingModel BuildSamplingModel(const GeneratorConfig& c) {
  SamplingModel m;
  m.latent_prevalence = (c.target_prevalence - c.noise) / (1.0 - c.noise);
  for (const auto& info : Conditions()) {
    m.conditions.push_back(
        TiltBoolean(c, std::string(info.slug), info.prevalence_h0, info.prevalence_h1));
  }
  m.male = TiltBoolean(c, "male", kMalePrevalenceH0, kMalePrevalenceH1);
  const auto a0 = AgeBinPrevalence(false);
  const auto a1 = AgeBinPrevalence(true);
  double total = 0.0;
  for (int b = 0; b < 9; ++b) {
    m.age0[b] = a0[b];
    const double coef =
        Coefficient(c, std::string(AgeBinName(b)), std::log(a1[b] / a0[b]));
    m.age1[b] = a0[b] * std::exp(coef);
    total += m.age1[b];
  }
  for (double& v : m.age1) v /= total;
  const double total0 = std::accumulate(m.age0.begin(), m.age0.end(), 0.0);
  for (double& v : m.age0) v /= total0;

  for (const auto& q : Quantities()) {
    QuantityParams p;
    p.mu0 = std::log(q.median_h0);
    p.sigma0 = std::log(q.q3_h0 / q.q1_h0) / (2.0 * kQuartileZ);
    const double mu1_ref = std::log(q.median_h1);
    const double sigma1_ref = std::log(q.q3_h1 / q.q1_h1) / (2.0 * kQuartileZ);
    const std::string slug(q.slug);
    const double shift = Coefficient(c, "lab:" + slug, (mu1_ref - p.mu0) / p.sigma0);
    p.mu1 = p.mu0 + shift * p.sigma0;
    p.sigma1 = p.sigma0 + TemporalStrength(c) * (sigma1_ref - p.sigma0);
    if (p.sigma1 <= 0) p.sigma1 = p.sigma0;
    const std::optional<double> fixed = IsVital(q.slug) ? c.vitals_observed : c.labs_observed;
    if (fixed) {
      p.observed0 = p.observed1 = *fixed;
    } else {
      const double o0 = std::min(0.95, q.count_h0 / kReferenceH0);
      const double o1 = std::min(0.95, q.count_h1 / kReferenceH1);
      const auto tilted = TiltBoolean(c, "obs:" + slug, o0, o1);
      p.observed0 = tilted.p0;
      p.observed1 = tilted.p1;
    }
    m.quantities.push_back(p);
  }
  return m;
}

PlantedRiskModel ModelFromSampling(const GeneratorConfig& c, const SamplingModel& m) {
  PlantedRiskModel out;
  out.latent_prevalence = m.latent_prevalence;
  double bias = Logit(m.latent_prevalence);
  const auto& conditions = Conditions();
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    const auto& p = m.conditions[i];
    out.coefficients.push_back({std::string(conditions[i].slug), Logit(p.p1) - Logit(p.p0)});
    bias += std::log((1.0 - p.p1) / (1.0 - p.p0));
  }
  out.coefficients.push_back({"male", Logit(m.male.p1) - Logit(m.male.p0)});
  bias += std::log((1.0 - m.male.p1) / (1.0 - m.male.p0));
  for (int b = 0; b < 9; ++b) {
    out.coefficients.push_back({std::string(AgeBinName(b)), std::log(m.age1[b] / m.age0[b])});
  }
  const auto& quantities = Quantities();
  for (std::size_t i = 0; i < quantities.size(); ++i) {
    const auto& p = m.quantities[i];
    const std::string slug(quantities[i].slug);
    const bool fixed = IsVital(slug) ? c.vitals_observed.has_value() : c.labs_observed.has_value();
    out.coefficients.push_back(
        {"obs:" + slug, fixed ? 0.0 : Logit(p.observed1) - Logit(p.observed0)});
  }
  for (std::size_t i = 0; i < quantities.size(); ++i) {
    const auto& p = m.quantities[i];
    out.coefficients.push_back(
        {"lab:" + std::string(quantities[i].slug), (p.mu1 - p.mu0) / p.sigma0});
  }
  // Round-off from the logit of tilted probabilities, not signal.
  for (auto& e : out.coefficients) {
    if (std::abs(e.coefficient) < 1e-12) e.coefficient = 0.0;
  }
  out.bias = bias;
  return out;
}

class PatientGenerator {
 public:
  PatientGenerator(const GeneratorConfig& config, const SamplingModel& model,
                   std::size_t index)
      : config_(config), model_(model), rng_(DeriveSeed(config.seed, "patient", index)) {
    char id[32];
    std::snprintf(id, sizeof(id), "P%07zu", index);
    id_ = id;
  }

  TruthEntry Generate(std::vector<RawRecord>& out) {
    TruthEntry truth;
    truth.patient_id = id_;
    truth.latent_hospitalized = Bernoulli(model_.latent_prevalence);
    truth.hospitalized = truth.latent_hospitalized || Bernoulli(config_.noise);
    const bool latent = truth.latent_hospitalized;

    anchor_ = UniformInt(kFirstAnchorDay, kLastAnchorDay);
    // Care end: the admission for hospitalized patients, a pseudo-admission
    // from the same distribution otherwise.
    const int care_end = DrawAdmissionOffset();
    if (truth.hospitalized) truth.admission_offset = care_end;

    EmitDemographics(latent);
    EmitCovidEvidence(truth);
    if (truth.status == TruthStatus::kCohort && Bernoulli(config_.prior_hospitalization_fraction)) {
      truth.status = TruthStatus::kExcludedPriorHosp;
      EmitEncounter(-UniformInt(1, 28), EncounterType::kInpatient, Uniform(36.0, 120.0));
    }
    EmitEncounters(truth, care_end);
    EmitConditions(latent, truth, care_end);
    EmitMeasurements(latent, truth, care_end);

    std::stable_sort(records_.begin(), records_.end(), [](const RawRecord& a, const RawRecord& b) {
      const bool da = a.kind == RecordKind::kDemographic;
      const bool db = b.kind == RecordKind::kDemographic;
      if (da != db) return da;
      if (da) return false;
      return *a.day < *b.day;
    });
    for (auto& r : records_) out.push_back(std::move(r));
    return truth;
  }

 private:
  bool Bernoulli(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
  int UniformInt(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double Uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }

  int DrawAdmissionOffset() {
    const auto& dist = AdmissionOffsetDistribution();
    std::discrete_distribution<int> d(dist.begin(), dist.end());
    return d(rng_);
  }

  RawRecord Base(RecordKind kind, std::optional<int> offset) {
    RawRecord r;
    r.patient_id = id_;
    r.kind = kind;
    if (offset) r.day = anchor_ + *offset;
    return r;
  }

  void EmitDemographics(bool latent) {
    if (!Bernoulli(kUnknownAgeFraction)) {
      const auto& weights = latent ? model_.age1 : model_.age0;
      std::discrete_distribution<int> d(weights.begin(), weights.end());
      const int bin = d(rng_);
      const int age = bin == 8 ? UniformInt(80, 99) : UniformInt(bin * 10, bin * 10 + 9);
      RawRecord r = Base(RecordKind::kDemographic, std::nullopt);
      r.code = "age_years:" + std::to_string(age);
      r.text = "age";
      records_.push_back(std::move(r));
    }
    const auto& male = model_.male;
    const bool is_male = Bernoulli(latent ? male.p1 : male.p0);
    RawRecord g = Base(RecordKind::kDemographic, std::nullopt);
    g.code = is_male ? "gender:M" : (Bernoulli(0.0002) ? "gender:U" : "gender:F");
    g.text = "gender";
    records_.push_back(std::move(g));
  }

  void EmitDiagnosis(int offset, CodeSystem system, std::string code, std::string text) {
    RawRecord r = Base(RecordKind::kDiagnosis, offset);
    r.code_system = system;
    r.code = std::move(code);
    r.text = std::move(text);
    records_.push_back(std::move(r));
  }

  void EmitTest(int offset, ResultFlag flag) {
    RawRecord r = Base(RecordKind::kObservation, offset);
    r.code_system = CodeSystem::kLoinc;
    r.code = std::string(kCovidTestLoinc);
    r.text = "SARS-CoV-2 RNA panel";
    r.result_flag = flag;
    records_.push_back(std::move(r));
  }

  void EmitEncounter(int offset, EncounterType type, double hours) {
    RawRecord r = Base(RecordKind::kEncounter, offset);
    r.text = "encounter";
    r.encounter_type = type;
    r.duration_hours = std::round(hours * 10.0) / 10.0;
    records_.push_back(std::move(r));
  }

  void EmitCovidEvidence(TruthEntry& truth) {
    const double u = Uniform(0.0, 1.0);
    if (u < config_.text_only_fraction) {
      if (Bernoulli(0.5)) {
        EmitDiagnosis(0, CodeSystem::kNone, "", "Suspected COVID-19 infection");
      } else {
        EmitDiagnosis(0, CodeSystem::kSnomed, std::string(kCovidChildConceptId), "Viral syndrome");
      }
    } else if (u < config_.text_only_fraction + config_.suspected_fraction) {
      EmitDiagnosis(0, CodeSystem::kIcd10, std::string(kCovidSuspectedCode), "COVID-19, virus not identified");
    } else {
      EmitDiagnosis(0, CodeSystem::kIcd10, std::string(kCovidConfirmedCode), "COVID-19, virus identified");
    }
    // Follow-up confirmation never moves the anchor.
    if (Bernoulli(0.3)) {
      EmitDiagnosis(UniformInt(1, 20), CodeSystem::kIcd10, std::string(kCovidConfirmedCode),
                    "COVID-19, virus identified");
    }
    // Decoys that exclusion patterns must discard.
    if (Bernoulli(0.05)) {
      static constexpr std::array<const char*, 4> kDecoys = {
          "COVID-19 ruled out", "Screening for COVID-19", "Exposure to COVID-19 virus",
          "COVID-19 test negative"};
      EmitDiagnosis(-UniformInt(1, 60), CodeSystem::kNone, "",
                    kDecoys[UniformInt(0, static_cast<int>(kDecoys.size()) - 1)]);
    }
    if (Bernoulli(0.1)) EmitTest(-UniformInt(30, 90), ResultFlag::kNegative);
    if (Bernoulli(config_.ineligible_fraction)) {
      truth.status = TruthStatus::kNotInCohort;
      if (Bernoulli(0.5)) EmitTest(UniformInt(35, 60), ResultFlag::kPositive);
      return;
    }
    const int test_offset = Bernoulli(0.85) ? UniformInt(-3, 3) : UniformInt(-28, 28);
    EmitTest(test_offset, ResultFlag::kPositive);
  }

  void EmitEncounters(const TruthEntry& truth, int care_end) {
    if (truth.admission_offset) {
      const double u = Uniform(0.0, 1.0);
      const EncounterType type = u < 0.7   ? EncounterType::kInpatient
                                 : u < 0.9 ? EncounterType::kHospitalEncounter
                                           : EncounterType::kHospitalEmergencyRoomVisit;
      EmitEncounter(care_end, type, Uniform(30.0, 300.0));
    }
    // Non-qualifying visits: short emergency visits and long non-hospital stays.
    if (Bernoulli(0.15)) {
      EmitEncounter(UniformInt(0, 28), EncounterType::kHospitalEmergencyRoomVisit,
                    Uniform(1.0, 24.0));
    }
    if (Bernoulli(0.10)) EmitEncounter(UniformInt(-28, 28), EncounterType::kOther, Uniform(25.0, 72.0));
    if (Bernoulli(0.05)) EmitEncounter(-UniformInt(60, 400), EncounterType::kInpatient, Uniform(30.0, 200.0));
  }

  // Day inside the period of interest, before the care end.
  int RecentOffset(int care_end) {
    const int hi = care_end - 1;
    if (Bernoulli(0.6)) return UniformInt(std::max(-14, std::min(-3, hi)), hi);
    return UniformInt(-14, hi);
  }

  void EmitCondition(std::size_t index, int offset) {
    const auto& info = Conditions()[index];
    const std::string child = ConditionChildConceptId(index);
    if (!child.empty() && Bernoulli(config_.hierarchy_coded_fraction)) {
      EmitDiagnosis(offset, CodeSystem::kSnomed, child, "Clinical note entry");
    } else if (Bernoulli(0.8)) {
      EmitDiagnosis(offset, CodeSystem::kSnomed, ConditionConceptId(index), std::string(info.display));
    } else {
      EmitDiagnosis(offset, CodeSystem::kNone, "", std::string(info.display));
    }
  }

  void EmitConditions(bool latent, const TruthEntry& truth, int care_end) {
    const auto& conditions = Conditions();
    for (std::size_t i = 0; i < conditions.size(); ++i) {
      const auto& p = model_.conditions[i];
      if (!Bernoulli(latent ? p.p1 : p.p0)) continue;
      switch (conditions[i].scope) {
        case ConditionScope::kChronic:
          EmitCondition(i, Bernoulli(0.8) ? UniformInt(-720, -15) : RecentOffset(care_end));
          break;
        case ConditionScope::kPast:
          EmitCondition(i, UniformInt(-720, -15));
          break;
        case ConditionScope::kAcute:
        case ConditionScope::kPresent:
          EmitCondition(i, RecentOffset(care_end));
          break;
      }
    }
    if (Bernoulli(0.05)) {
      EmitDiagnosis(UniformInt(-400, -15), CodeSystem::kNone, "", "Family history of diabetes");
    }
    // In-hospital diagnoses; only admissible data before admission may be used.
    if (truth.admission_offset) {
      for (std::size_t i = 0; i < conditions.size(); ++i) {
        if (conditions[i].scope == ConditionScope::kAcute && conditions[i].gp_drop &&
            Bernoulli(0.15)) {
          EmitCondition(i, *truth.admission_offset + UniformInt(0, 3));
        }
      }
    }
  }

  void EmitValue(const QuantityInfo& q, int offset, double value) {
    RawRecord r = Base(RecordKind::kObservation, offset);
    r.code_system = CodeSystem::kLoinc;
    r.code = std::string(q.loinc);
    r.text = std::string(q.display);
    const double scale = std::pow(10.0, q.decimals);
    if (q.slug == "spo2") value = std::min(value, 100.0);
    r.value = std::round(value * scale) / scale;
    r.unit = std::string(q.unit);
    records_.push_back(std::move(r));
  }

  double DrawValue(const QuantityParams& p, bool latent, double extra_sd = 0.0) {
    const double mu = latent ? p.mu1 : p.mu0;
    const double sigma = latent ? p.sigma1 : p.sigma0;
    std::normal_distribution<double> d(mu + extra_sd * sigma, sigma);
    return std::exp(d(rng_));
  }

  void EmitMeasurements(bool latent, const TruthEntry& truth, int care_end) {
    const auto& quantities = Quantities();
    for (std::size_t i = 0; i < quantities.size(); ++i) {
      const auto& q = quantities[i];
      const auto& p = model_.quantities[i];
      if (Bernoulli(latent ? p.observed1 : p.observed0)) {
        const int n = UniformInt(1, 3);
        for (int k = 0; k < n; ++k) EmitValue(q, RecentOffset(care_end), DrawValue(p, latent));
      }
      if (Bernoulli(0.2)) EmitValue(q, -UniformInt(15, 400), DrawValue(p, false));
      if (truth.admission_offset && Bernoulli(0.6)) {
        EmitValue(q, *truth.admission_offset + UniformInt(0, 3), DrawValue(p, true, 0.5));
      }
    }
    if (config_.final_day_signal > 0 && truth.admission_offset) {
      const int day = *truth.admission_offset - 1;
      for (std::size_t i = 0; i < quantities.size(); ++i) {
        const auto& q = quantities[i];
        if (std::find(config_.final_day_quantities.begin(), config_.final_day_quantities.end(),
                      q.slug) == config_.final_day_quantities.end()) {
          continue;
        }
        if (!Bernoulli(0.9)) continue;
        // Adverse direction: oxygen saturation falls, the others rise.
        const double direction = q.slug == "spo2" ? -1.0 : 1.0;
        EmitValue(q, day, DrawValue(model_.quantities[i], true, direction * config_.final_day_signal));
      }
    }
  }

  const GeneratorConfig& config_;
  const SamplingModel& model_;
  std::mt19937_64 rng_;
  std::string id_;
  int anchor_ = 0;
  std::vector<RawRecord> records_;
};

std::string_view StatusName(TruthStatus s) {
  switch (s) {
    case TruthStatus::kCohort: return "Cohort";
    case TruthStatus::kNotInCohort: return "NotInCohort";
    case TruthStatus::kExcludedPriorHosp: return "ExcludedPriorHosp";
  }
  return "?";
}

}  // namespace

const std::vector<double>& AdmissionOffsetDistribution() {
  static const std::vector<double> kDist = [] {
    std::vector<double> d(29, 0.0);
    const double head[] = {0.26, 0.19, 0.14, 0.11, 0.09};
    for (int i = 0; i < 5; ++i) d[i] = head[i];
    double tail = 0.0;
    for (int i = 5; i <= 28; ++i) tail += std::pow(0.85, i - 5);
    for (int i = 5; i <= 28; ++i) d[i] = 0.21 * std::pow(0.85, i - 5) / tail;
    return d;
  }();
  return kDist;
}

void ValidateConfig(const GeneratorConfig& c) {
  if (c.n_patients == 0) Fail(ErrorKind::kInvalidArgument, "n_patients must be positive");
  if (!(c.target_prevalence > 0.0 && c.target_prevalence < 1.0)) {
    Fail(ErrorKind::kInvalidArgument, "target_prevalence must be in (0,1)");
  }
  auto check_prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      Fail(ErrorKind::kInvalidArgument, std::string(name) + " must be in [0,1]");
    }
  };
  check_prob(c.noise, "noise");
  check_prob(c.suspected_fraction, "suspected_fraction");
  check_prob(c.text_only_fraction, "text_only_fraction");
  check_prob(c.ineligible_fraction, "ineligible_fraction");
  check_prob(c.prior_hospitalization_fraction, "prior_hospitalization_fraction");
  check_prob(c.hierarchy_coded_fraction, "hierarchy_coded_fraction");
  if (c.vitals_observed) check_prob(*c.vitals_observed, "vitals_observed");
  if (c.labs_observed) check_prob(*c.labs_observed, "labs_observed");
  if (c.suspected_fraction + c.text_only_fraction > 1.0) {
    Fail(ErrorKind::kInvalidArgument, "suspected_fraction + text_only_fraction exceeds 1");
  }
  if (c.signal_strength < 0.0) Fail(ErrorKind::kInvalidArgument, "signal_strength must be >= 0");
  if (c.temporal_signal_strength && *c.temporal_signal_strength < 0.0) {
    Fail(ErrorKind::kInvalidArgument, "temporal_signal_strength must be >= 0");
  }
  if (c.final_day_signal < 0.0) Fail(ErrorKind::kInvalidArgument, "final_day_signal must be >= 0");
  if (c.noise >= 1.0 || c.target_prevalence <= c.noise) {
    Fail(ErrorKind::kInvalidArgument,
         "target prevalence unachievable: noise alone hospitalizes at least the target rate");
  }
}

PlantedRiskModel BuildPlantedModel(const GeneratorConfig& config) {
  ValidateConfig(config);
  return ModelFromSampling(config, BuildSamplingModel(config));
}

GeneratedCohort GenerateCohort(const GeneratorConfig& config) {
  ValidateConfig(config);
  const SamplingModel model = BuildSamplingModel(config);
  GeneratedCohort out;
  out.model = ModelFromSampling(config, model);
  out.truth.reserve(config.n_patients);
  for (std::size_t i = 0; i < config.n_patients; ++i) {
    PatientGenerator gen(config, model, i);
    out.truth.push_back(gen.Generate(out.records));
  }
  return out;
}

void WriteTruth(const GeneratedCohort& cohort, const GeneratorConfig& config,
                const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write truth file '" + path + "'");
  nlohmann::ordered_json header;
  header["seed"] = config.seed;
  header["n_patients"] = config.n_patients;
  header["target_prevalence"] = config.target_prevalence;
  header["signal_strength"] = config.signal_strength;
  if (config.temporal_signal_strength) header["temporal_signal_strength"] = *config.temporal_signal_strength;
  header["final_day_signal"] = config.final_day_signal;
  header["noise"] = config.noise;
  header["latent_prevalence"] = cohort.model.latent_prevalence;
  header["bias"] = cohort.model.bias;
  auto coefs = nlohmann::ordered_json::array();
  for (const auto& c : cohort.model.coefficients) {
    nlohmann::ordered_json e;
    e["feature"] = c.feature;
    e["coefficient"] = c.coefficient;
    coefs.push_back(e);
  }
  header["coefficients"] = coefs;
  nlohmann::ordered_json top;
  top["header"] = header;
  out << top.dump() << '\n';
  for (const auto& t : cohort.truth) {
    nlohmann::ordered_json j;
    j["patient_id"] = t.patient_id;
    j["label"] = t.hospitalized ? "H1" : "H0";
    j["latent_label"] = t.latent_hospitalized ? "H1" : "H0";
    if (t.admission_offset) j["admission_offset"] = *t.admission_offset;
    j["status"] = StatusName(t.status);
    out << j.dump() << '\n';
  }
}

TruthFile ReadTruth(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot read truth file '" + path + "'");
  TruthFile file;
  std::string line;
  bool have_header = false;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (j.contains("header")) {
        const auto& h = j["header"];
        file.model.latent_prevalence = h.value("latent_prevalence", 0.0);
        file.model.bias = h.value("bias", 0.0);
        for (const auto& c : h.at("coefficients")) {
          file.model.coefficients.push_back(
              {c.at("feature").get<std::string>(), c.at("coefficient").get<double>()});
        }
        have_header = true;
        continue;
      }
      TruthEntry t;
      t.patient_id = j.at("patient_id").get<std::string>();
      t.hospitalized = j.at("label").get<std::string>() == "H1";
      t.latent_hospitalized = j.value("latent_label", std::string("H0")) == "H1";
      if (j.contains("admission_offset")) t.admission_offset = j["admission_offset"].get<int>();
      const std::string status = j.value("status", std::string("Cohort"));
      t.status = status == "NotInCohort"         ? TruthStatus::kNotInCohort
                 : status == "ExcludedPriorHosp" ? TruthStatus::kExcludedPriorHosp
                                                 : TruthStatus::kCohort;
      file.entries.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kInvalidArgument, "bad truth file '" + path + "': " + e.what());
  }
  if (!have_header) Fail(ErrorKind::kInvalidArgument, "truth file '" + path + "' has no header");
  return file;
}

std::vector<std::string> GroundTruthRanking(const PlantedRiskModel& model) {
  std::vector<PlantedCoefficient> nonzero;
  for (const auto& c : model.coefficients) {
    if (c.coefficient != 0.0) nonzero.push_back(c);
  }
  std::sort(nonzero.begin(), nonzero.end(), [](const auto& a, const auto& b) {
    const double fa = std::abs(a.coefficient), fb = std::abs(b.coefficient);
    if (fa != fb) return fa > fb;
    return a.feature < b.feature;
  });
  std::vector<std::string> out;
  for (const auto& c : nonzero) out.push_back(c.feature);
  return out;
}

std::vector<std::string> GroundTruthRanking(const std::string& truth_path) {
  return GroundTruthRanking(ReadTruth(truth_path).model);
}

}  // namespace hospx
