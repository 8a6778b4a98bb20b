#include "hospx/catalog.h"

#include <array>
#include <cstdio>

#include "hospx/common.h"

namespace hospx {
namespace {

using S = ConditionScope;

std::vector<ConditionInfo> BuildConditions() {
  // Prevalences in percent per class (non-hospitalized, hospitalized).
  struct Row {
    std::string_view slug, display;
    S scope;
    double h0, h1;
    bool gp;
    std::vector<std::string_view> excl;
  };
  std::vector<Row> rows = {
      {"hypertension", "Hypertension", S::kChronic, 32.22, 72.78, false, {"pulmonary hypertension"}},
      {"pneumonia", "Pneumonia", S::kAcute, 5.03, 48.83, true, {}},
      {"diabetes", "Diabetes", S::kChronic, 13.95, 43.40, false, {}},
      {"hypoxia", "Hypoxia", S::kAcute, 1.76, 38.42, true, {}},
      {"dyspnea", "Dyspnea", S::kAcute, 10.05, 36.40, false, {}},
      {"heart_disease", "Heart disease", S::kChronic, 5.25, 33.76, true, {"coronary"}},
      {"hypoxemia", "Hypoxemia", S::kAcute, 1.31, 31.36, true, {}},
      {"nicotine_dependence", "Nicotine dependence", S::kChronic, 14.63, 31.04, false, {}},
      {"chronic_kidney_disease", "Chronic kidney disease", S::kChronic, 5.29, 27.17, false, {}},
      {"cough", "Cough", S::kAcute, 25.70, 24.21, false, {"dry cough", "productive cough", "with cough"}},
      {"coronary_heart_disease", "Coronary heart disease", S::kChronic, 6.15, 23.90, false, {}},
      {"cancer", "Cancer", S::kChronic, 10.36, 23.57, false, {}},
      {"arrhythmia", "Arrhythmia", S::kChronic, 3.44, 22.78, false, {}},
      {"chronic_obstructive_lung_disease", "Chronic obstructive lung disease", S::kChronic, 5.01, 22.49, false, {}},
      {"renal_failure_syndrome", "Renal failure syndrome", S::kChronic, 1.60, 20.40, true, {"acute renal failure"}},
      {"asthma", "Asthma", S::kChronic, 12.96, 19.46, false, {}},
      {"fever", "Fever", S::kAcute, 12.32, 18.89, false, {}},
      {"fatigue", "Fatigue", S::kAcute, 7.13, 17.94, false, {}},
      {"cerebrovascular_disease_past", "Cerebrovascular disease", S::kPast, 4.63, 17.65, false, {}},
      {"hyperlipidemia", "Hyperlipidemia", S::kChronic, 5.16, 17.13, false, {}},
      {"acute_renal_failure_syndrome", "Acute renal failure syndrome", S::kAcute, 1.31, 17.08, true, {}},
      {"chest_pain", "Chest pain", S::kAcute, 5.01, 14.52, false, {}},
      {"tachycardia", "Tachycardia", S::kAcute, 1.92, 13.22, false, {}},
      {"acute_disease_of_cardiovascular_system", "Acute disease of cardiovascular system", S::kAcute, 1.60, 11.13, true, {}},
      {"anemia", "Anemia", S::kChronic, 1.79, 10.16, false, {}},
      {"heart_failure", "Heart failure", S::kChronic, 1.07, 9.43, false, {}},
      {"atrial_fibrillation", "Atrial fibrillation", S::kChronic, 1.30, 8.98, false, {}},
      {"nausea", "Nausea", S::kAcute, 4.14, 8.81, false, {}},
      {"diarrhea", "Diarrhea", S::kAcute, 3.54, 8.78, false, {}},
      {"hypokalemia", "Hypokalemia", S::kAcute, 1.06, 8.56, false, {}},
      {"cerebrovascular_accident_past", "Cerebrovascular accident", S::kPast, 1.80, 8.47, false, {}},
      {"chronic_liver_disease", "Chronic liver disease", S::kChronic, 3.83, 7.96, false, {}},
      {"sepsis", "Sepsis", S::kAcute, 0.67, 7.21, true, {"severe sepsis"}},
      {"vomiting", "Vomiting", S::kAcute, 1.88, 6.41, false, {}},
      {"abdominal_pain", "Abdominal pain", S::kAcute, 2.41, 6.06, false, {}},
      {"gastroesophageal_reflux", "Gastroesophageal reflux", S::kChronic, 2.12, 5.94, false, {}},
      {"cerebrovascular_disease_present", "Cerebrovascular disease", S::kPresent, 0.66, 4.76, false, {}},
      {"embolism", "Embolism", S::kAcute, 0.56, 4.71, true, {"pulmonary embolism"}},
      {"dementia", "Dementia", S::kChronic, 0.54, 4.64, false, {}},
      {"headache", "Headache", S::kAcute, 7.15, 4.43, false, {}},
      {"dizziness", "Dizziness", S::kAcute, 1.32, 3.31, false, {}},
      {"acute_respiratory_distress_syndrome", "Acute respiratory distress syndrome", S::kAcute, 0.54, 3.19, true, {}},
      {"syncope", "Syncope", S::kAcute, 0.54, 3.07, false, {}},
      {"cerebrovascular_accident_present", "Cerebrovascular accident", S::kPresent, 0.33, 2.99, false, {}},
      {"pulmonary_embolism", "Pulmonary embolism", S::kAcute, 0.28, 2.68, true, {}},
      {"myalgia", "Myalgia", S::kAcute, 3.43, 2.64, false, {"fibromyalgia"}},
      {"fibromyalgia", "Fibromyalgia", S::kChronic, 1.69, 2.62, false, {}},
      {"pregnancy", "Pregnancy", S::kChronic, 2.26, 2.49, false, {}},
      {"delirium", "Delirium", S::kAcute, 0.14, 2.35, false, {}},
      {"seizure", "Seizure", S::kAcute, 0.42, 2.34, false, {}},
      {"cirrhosis", "Cirrhosis", S::kChronic, 0.62, 2.27, false, {}},
      {"septic_shock", "Septic shock", S::kAcute, 0.17, 1.32, true, {}},
      {"sore_throat", "Sore throat", S::kAcute, 3.97, 1.04, false, {}},
      {"pulmonary_hypertension", "Pulmonary hypertension", S::kChronic, 0.14, 0.86, false, {}},
      {"angina_pectoris", "Angina pectoris", S::kChronic, 0.17, 0.72, false, {}},
      {"hiv", "HIV", S::kChronic, 0.38, 0.66, false, {}},
      {"rhinorrhea", "Rhinorrhea", S::kAcute, 1.35, 0.52, false, {}},
      {"viral_uri_with_cough", "Viral URI with cough", S::kAcute, 0.85, 0.51, false, {}},
      {"hemoptysis", "Hemoptysis", S::kAcute, 0.11, 0.49, false, {}},
      {"pneumothorax", "Pneumothorax", S::kAcute, 0.09, 0.36, true, {}},
      {"dry_cough", "Dry cough", S::kAcute, 0.25, 0.24, false, {}},
      {"thromboembolic_disorder", "Thromboembolic disorder", S::kAcute, 0.05, 0.22, true, {}},
      {"productive_cough", "Productive cough", S::kAcute, 0.18, 0.21, false, {}},
      {"myocarditis", "Myocarditis", S::kAcute, 0.02, 0.16, true, {}},
      {"acute_hepatic_failure", "Acute hepatic failure", S::kAcute, 0.01, 0.07, true, {}},
      {"severe_sepsis", "Severe sepsis", S::kAcute, 0.10, 2.00, true, {}},
  };
  std::vector<ConditionInfo> out;
  out.reserve(rows.size());
  for (auto& r : rows) {
    out.push_back({r.slug, r.display, r.scope, r.h0 / 100.0, r.h1 / 100.0, r.gp,
                   std::move(r.excl)});
  }
  return out;
}

std::vector<QuantityInfo> BuildQuantities() {
  return {
      {"hr", "Heart rate", "8867-4", "beats/min", 85, 75, 96, 84, 73, 95, 49366, 14469, 0, false},
      {"sbp", "Systolic blood pressure", "8480-6", "mmHg", 130, 118, 141, 129, 115, 143, 46500, 14070, 0, false},
      {"dbp", "Diastolic blood pressure", "8462-4", "mmHg", 78, 69, 85, 71, 63, 81, 46494, 14064, 0, false},
      {"temp", "Body temperature", "8310-5", "Cel", 36.9, 36.7, 37.2, 37.0, 36.7, 37.4, 50027, 13696, 1, false},
      {"rr", "Respiratory rate", "9279-1", "breaths/min", 18, 16, 19, 18, 18, 20, 39226, 12809, 0, false},
      {"spo2", "Oxygen saturation", "59408-5", "%", 98, 96, 99, 96, 94, 98, 13798, 7131, 0, false},
      {"hb", "Hemoglobin", "718-7", "g/dL", 13.2, 11.9, 14.4, 12.9, 11.5, 14.2, 12417, 11053, 1, false},
      {"crea", "Creatinine", "2160-0", "mg/dL", 0.95, 0.80, 1.23, 1.05, 0.80, 1.46, 12369, 10898, 2, false},
      {"plt", "Platelets", "777-3", "10*3/uL", 210, 165, 262, 200, 157, 256, 11658, 10662, 0, false},
      {"wbc", "Leukocytes", "6690-2", "10*3/uL", 5.83, 4.50, 7.81, 6.31, 4.74, 8.54, 11566, 10661, 2, false},
      {"k", "Potassium", "2823-3", "mmol/L", 4.0, 3.7, 4.3, 3.9, 3.6, 4.3, 11831, 10481, 1, false},
      {"bun", "Urea nitrogen", "3094-0", "mg/dL", 15, 11, 21, 17, 12, 27, 11682, 10327, 0, false},
      {"alb", "Albumin", "1751-7", "g/dL", 3.8, 3.3, 4.2, 3.6, 3.2, 4.0, 10794, 10075, 1, false},
      {"ast", "Aspartate aminotransferase", "1920-8", "U/L", 30, 21, 45, 34, 24, 50, 10416, 9683, 0, false},
      {"alt", "Alanine aminotransferase", "1742-6", "U/L", 25, 17, 38, 25, 16, 39, 9935, 9306, 0, false},
      {"lymph", "Lymphocytes", "731-0", "10*3/uL", 1.2, 0.8, 1.7, 1.0, 0.7, 1.4, 9769, 9133, 2, false},
      {"na", "Sodium", "2951-2", "mmol/L", 138, 135, 140, 137, 134, 139, 5944, 6414, 0, false},
      {"crp", "C reactive protein", "1988-5", "mg/dL", 5.3, 1.56, 12.6, 7.1, 3.1, 13.3, 3075, 4894, 2, false},
      {"ferritin", "Ferritin", "2276-4", "ng/mL", 386, 160, 917, 475, 213, 964.5, 2528, 4143, 0, false},
      {"ldh", "Lactate dehydrogenase", "2532-0", "U/L", 318, 223, 487.5, 335, 244, 477.25, 2227, 3888, 0, false},
      {"d_dimer", "D-dimer", "48065-7", "ng/mL", 726.5, 410, 1539.25, 870, 520, 1678.5, 2120, 3296, 0, true},
      {"hstnt", "Troponin T high sensitivity", "67151-1", "ng/mL", 0.03, 0.01, 0.07, 0.03, 0.01, 0.06, 2019, 2452, 3, true},
  };
}

// Age bins in percent per class from the cohort statistics; the last bin is
// 80 and above.
constexpr std::array<double, 9> kAgeH0 = {0.0265, 0.0794, 0.1705, 0.1687, 0.1561,
                                          0.1675, 0.1303, 0.0685, 0.0325};
constexpr std::array<double, 9> kAgeH1 = {0.0027, 0.0083, 0.0362, 0.0608, 0.1009,
                                          0.1750, 0.2345, 0.2060, 0.1755};

constexpr std::array<std::string_view, kNumAgeBins> kAgeBinNames = {
    "age_lt_10",  "age_10_20",  "age_20_30", "age_30_40", "age_40_50",
    "age_50_60",  "age_60_70",  "age_70_80", "age_ge_80", "age_unknown"};

bool OverlapsAnotherCondition(std::size_t index) {
  const auto& conditions = Conditions();
  const std::string name = ToLower(conditions[index].display);
  for (std::size_t j = 0; j < conditions.size(); ++j) {
    if (j == index) continue;
    const std::string other = ToLower(conditions[j].display);
    if (other == name) return true;  // past/present pairs share a concept
    if (name.find(other) != std::string::npos) return true;
    if (other.find(name) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

const std::vector<ConditionInfo>& Conditions() {
  static const std::vector<ConditionInfo> kConditions = BuildConditions();
  return kConditions;
}

const std::vector<QuantityInfo>& Quantities() {
  static const std::vector<QuantityInfo> kQuantities = BuildQuantities();
  return kQuantities;
}

std::string_view AgeBinName(int bin) { return kAgeBinNames.at(bin); }

int AgeBin(int age_years) {
  if (age_years < 0) return kNumAgeBins - 1;
  if (age_years >= 80) return 8;
  return age_years / 10;
}

std::span<const double> AgeBinPrevalence(bool hospitalized) {
  return hospitalized ? std::span<const double>(kAgeH1) : std::span<const double>(kAgeH0);
}

std::string ConditionConceptId(std::size_t condition_index) {
  // Past/present pairs share the concept of their first occurrence.
  const auto& conditions = Conditions();
  const std::string_view display = conditions.at(condition_index).display;
  std::size_t first = condition_index;
  for (std::size_t j = 0; j < condition_index; ++j) {
    if (conditions[j].display == display) {
      first = j;
      break;
    }
  }
  return std::to_string(900001000 + 2 * first);
}

std::string ConditionChildConceptId(std::size_t condition_index) {
  if (OverlapsAnotherCondition(condition_index)) return {};
  return std::to_string(900001000 + 2 * condition_index + 1);
}

std::string_view RootConceptName() { return "Clinical finding"; }

std::vector<ConceptEdge> DefaultHierarchyEdges() {
  std::vector<ConceptEdge> edges;
  edges.push_back({std::string(kRootConceptId), "", std::string(RootConceptName())});
  const auto& conditions = Conditions();
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    const std::string id = ConditionConceptId(i);
    if (id == std::to_string(900001000 + 2 * i)) {
      edges.push_back({id, std::string(kRootConceptId), std::string(conditions[i].display)});
    }
    const std::string child = ConditionChildConceptId(i);
    if (!child.empty()) {
      char name[64];
      std::snprintf(name, sizeof(name), "Specified finding %03zu", i);
      edges.push_back({child, id, name});
    }
  }
  edges.push_back({std::string(kCovidConceptId), std::string(kRootConceptId),
                   "Disease caused by SARS-CoV-2"});
  edges.push_back({std::string(kCovidChildConceptId), std::string(kCovidConceptId),
                   "Viral syndrome of 2019 subtype"});
  return edges;
}

std::vector<std::string> DefaultCovidInclusions() {
  return {"covid", "sars-cov-2", "coronavirus disease"};
}

std::vector<std::string> DefaultCovidExclusions() {
  return {"ruled out", "screening", "exposure to", "negative"};
}

std::vector<std::string> DefaultConditionExclusions() {
  return {"ruled out", "screening", "family history"};
}

}  // namespace hospx
