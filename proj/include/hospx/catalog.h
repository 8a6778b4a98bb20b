#ifndef HOSPX_CATALOG_H_
#define HOSPX_CATALOG_H_

// Reference vocabulary shared by the generator and the default feature
// spec: clinical conditions with per-class prevalences, measured quantities
// with per-class medians/IQRs and observation counts, age bins, and the
// synthetic concept hierarchy.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hospx {

inline constexpr std::string_view kCovidConfirmedCode = "U07.1";
inline constexpr std::string_view kCovidSuspectedCode = "U07.2";
inline constexpr std::string_view kCovidTestLoinc = "94500-6";

// How a Boolean condition is aggregated over the patient's intervals.
enum class ConditionScope {
  kChronic,  // any admissible mention at any time
  kAcute,    // mentions inside the period of interest
  kPast,     // mentions before the period of interest
  kPresent,  // mentions inside the period of interest (paired with kPast)
};

struct ConditionInfo {
  std::string_view slug;     // feature/column name
  std::string_view display;  // diagnosis description text
  ConditionScope scope;
  double prevalence_h0;  // fraction
  double prevalence_h1;
  bool gp_drop;  // removed in the general-practitioner scenario
  std::vector<std::string_view> exclusions;
};

struct QuantityInfo {
  std::string_view slug;
  std::string_view display;
  std::string_view loinc;
  std::string_view unit;
  // Median and quartiles per class.
  double median_h0, q1_h0, q3_h0;
  double median_h1, q1_h1, q3_h1;
  // Observation counts per class over the reference class sizes.
  double count_h0, count_h1;
  int decimals;
  bool gp_drop;
};

inline constexpr double kReferenceH0 = 97082;
inline constexpr double kReferenceH1 = 13914;

const std::vector<ConditionInfo>& Conditions();
const std::vector<QuantityInfo>& Quantities();

// Age one-hot bins: <10, [10,20) ... [70,80), >=80, unknown.
inline constexpr int kNumAgeBins = 10;
std::string_view AgeBinName(int bin);
// Bin index for an age in years; kNumAgeBins - 1 means unknown.
int AgeBin(int age_years);
// Per-class age-bin fractions (first 9 bins; unknown handled separately).
std::span<const double> AgeBinPrevalence(bool hospitalized);
inline constexpr double kMalePrevalenceH0 = 0.4382;
inline constexpr double kMalePrevalenceH1 = 0.4955;
inline constexpr double kUnknownAgeFraction = 0.0031;

// Synthetic concept hierarchy: one concept per condition (named after the
// condition), an extra descendant concept for conditions whose name does not
// overlap another condition's pattern, and a small COVID-19 sub-tree.
struct ConceptEdge {
  std::string child;
  std::string parent;
  std::string child_name;
};
std::string ConditionConceptId(std::size_t condition_index);
// Empty when the condition has no descendant concept.
std::string ConditionChildConceptId(std::size_t condition_index);
inline constexpr std::string_view kRootConceptId = "900000001";
inline constexpr std::string_view kCovidConceptId = "900000010";
inline constexpr std::string_view kCovidChildConceptId = "900000011";
std::vector<ConceptEdge> DefaultHierarchyEdges();
std::string_view RootConceptName();

// Default COVID-19 pattern lists (cohort selection).
std::vector<std::string> DefaultCovidInclusions();
std::vector<std::string> DefaultCovidExclusions();
// Generic exclusions applied to every condition pattern set.
std::vector<std::string> DefaultConditionExclusions();

}  // namespace hospx

#endif  // HOSPX_CATALOG_H_
