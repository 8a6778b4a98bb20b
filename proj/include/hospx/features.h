#ifndef HOSPX_FEATURES_H_
#define HOSPX_FEATURES_H_

#include <climits>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hospx/catalog.h"
#include "hospx/cohort.h"
#include "hospx/common.h"
#include "hospx/records.h"

namespace hospx {

// Ordered, contiguous half-open day ranges relative to the anchor day.
struct IntervalScheme {
  struct Range {
    int start;  // INT_MIN for the open-ended first interval
    int end;
  };
  std::vector<Range> ranges;

  std::size_t size() const { return ranges.size(); }
  std::string Label(std::size_t i) const;  // e.g. "[-14,-7)"
  // Throws Error(kInvalidArgument) unless contiguous, non-empty and ordered.
  void Validate() const;
};

IntervalScheme DefaultIntervalScheme();

inline constexpr int kOutOfRange = -1;
// Interval index or kOutOfRange past the last range.
int AssignInterval(int day_offset, const IntervalScheme& scheme);

inline constexpr int kPeriodStart = -14;
inline constexpr int kHorizonEnd = 29;  // exclusive upper bound for H0 rows

// Admissible offsets are [start, end); for H1 rows end is the admission
// offset so admission-day events are excluded.
struct PeriodOfInterest {
  int start = kPeriodStart;
  int end = kHorizonEnd;
  std::vector<bool> intervals;  // range intersects [start, end)

  bool Admits(int day_offset) const { return day_offset >= start && day_offset < end; }
};

// Throws Error(kInvalidArgument) for H1 without an admission offset.
PeriodOfInterest ComputePeriodOfInterest(const IntervalScheme& scheme, Label label,
                                         std::optional<int> admission_offset);

struct ObservedValue {
  int day_offset;
  std::uint64_t seq;  // ingestion order, breaks same-day ties
  double value;
};

struct ObservationAggregate {
  double last, min, max, mean;
  int source_day;  // latest contributing day offset
};

// Missing (nullopt) when `values` is empty.
std::optional<ObservationAggregate> AggregateObservation(const std::vector<ObservedValue>& values);

inline constexpr int kNumAggregates = 4;
inline constexpr std::string_view kAggregateNames[kNumAggregates] = {"last", "min", "max",
                                                                     "mean"};

struct ConditionFeature {
  std::string name;
  ConditionScope scope = ConditionScope::kChronic;
  PatternSet patterns;
  bool gp_drop = false;
};

struct QuantityFeature {
  std::string name;
  std::string loinc;
  bool gp_drop = false;
};

struct FeatureSpec {
  std::vector<ConditionFeature> conditions;
  std::vector<QuantityFeature> quantities;
  CodeHierarchy hierarchy;

  std::size_t h() const { return conditions.size() + kNumAgeBins + 1; }
  std::size_t m() const { return kNumAggregates * quantities.size(); }
  // Tabular: conditions, age bins, "male".
  std::vector<std::string> TabularNames() const;
  // Temporal rows in X2 order: quantity-major, aggregate-minor.
  std::vector<std::string> TemporalNames() const;
};

// Reference conditions and quantities with display-name inclusion patterns,
// per-condition exclusions and the default concept hierarchy.
FeatureSpec DefaultFeatureSpec();

bool MatchesCondition(const RawRecord& record, const ConditionFeature& condition,
                      const CodeHierarchy& hierarchy);

// Admissible events of one patient relative to its anchor day. Everything at
// or after the period end is already removed.
struct PatientEvents {
  std::string patient_id;
  Label label = Label::kH0;
  std::optional<int> admission_offset;
  int age_bin = kNumAgeBins - 1;
  bool male = false;
  struct ConditionEvent {
    std::size_t condition;
    int day_offset;
  };
  std::vector<ConditionEvent> conditions;
  struct QuantityEvent {
    std::size_t quantity;
    int day_offset;
    std::uint64_t seq;
    double value;
  };
  std::vector<QuantityEvent> quantities;
};

PatientEvents ExtractPatientEvents(const std::vector<RawRecord>& timeline, const CohortEntry& entry,
                                   const FeatureSpec& spec, const IntervalScheme& scheme);

// Boolean aggregation by scope: chronic uses every admissible event, past
// uses offsets before the period start, acute/present use the period.
bool AggregateBoolean(const PatientEvents& events, std::size_t condition, ConditionScope scope,
                      const PeriodOfInterest& period);

enum class Scenario { kAll, kGp, kOneDayBefore };
std::string_view ToString(Scenario s);
// Accepts "all", "gp", "one-day-before"; throws Error(kInvalidArgument).
Scenario ParseScenario(std::string_view name);

inline constexpr std::int16_t kNoSourceDay = INT16_MIN;

// Pre-imputation features. Column layout of `values` is
// [flatten(X2) ∥ X1] with temporal column (feature j, interval s) at j*t + s.
struct FeatureTable {
  std::size_t h = 0, m = 0, t = 0;
  Scenario scenario = Scenario::kAll;
  std::vector<std::string> column_names;
  std::vector<std::string> patient_ids;
  std::vector<std::uint8_t> labels;  // 1 = H1
  std::vector<std::optional<int>> admission_offsets;
  MatrixD values;                   // NaN = missing (temporal only)
  Matrix<std::int16_t> source_day;  // n × m·t, kNoSourceDay when missing
  std::vector<PatientEvents> events;
  FeatureSpec spec;
  IntervalScheme scheme;
  std::size_t dropped_unknown_age = 0;
  std::size_t dropped_empty = 0;

  std::size_t n() const { return patient_ids.size(); }
  std::size_t k() const { return m * t + h; }
};

// Per-patient extraction and aggregation. Rows with unknown age or without
// any condition or observation are dropped. Throws Error(kInvalidArgument)
// on an empty cohort.
FeatureTable BuildFeatureTable(const RecordStore& store, const std::vector<CohortEntry>& cohort,
                               const FeatureSpec& spec, const IntervalScheme& scheme,
                               Exec exec = Exec::kParallel);

// Rebuilds the table: GP drops the flagged conditions and quantities,
// OneDayBefore removes H1 events from the day before admission onward.
FeatureTable ApplyScenario(const FeatureTable& table, Scenario scenario,
                           Exec exec = Exec::kParallel);

struct NormalizationStats {
  std::vector<double> median, mean, stddev;  // per column; Boolean columns unused
  std::vector<bool> continuous;
  std::vector<std::size_t> constant_columns;  // continuous columns with zero train std
};

struct FusedFeatures {
  std::size_t h = 0, m = 0, t = 0;
  Scenario scenario = Scenario::kAll;
  std::uint64_t split_seed = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> patient_ids;
  std::vector<std::uint8_t> labels;
  std::vector<std::optional<int>> admission_offsets;
  MatrixD early;                    // n × k
  std::vector<std::uint8_t> mask2;  // n × m × t, 1 where observed
  Matrix<std::int16_t> source_day;  // n × m·t

  std::size_t n() const { return early.rows(); }
  std::size_t k() const { return m * t + h; }
  double X1(std::size_t i, std::size_t j) const { return early(i, m * t + j); }
  double X2(std::size_t i, std::size_t j, std::size_t s) const { return early(i, j * t + s); }
  MatrixD X1Matrix() const;
  MatrixD X2Flat() const;  // n × m·t
  bool Observed(std::size_t i, std::size_t j, std::size_t s) const {
    return mask2[(i * m + j) * t + s] != 0;
  }
};

struct SplitIndices {
  std::vector<std::size_t> train, test;
};
// Random 70/30 (configurable) split; stratified keeps the label ratio.
SplitIndices SplitRows(const std::vector<std::uint8_t>& labels, double train_fraction,
                       std::uint64_t seed, bool stratify = false);

NormalizationStats FitNormalization(const FeatureTable& table,
                                    const std::vector<std::size_t>& train_rows);
// Median imputation of continuous cells and false for Booleans.
MatrixD Impute(const MatrixD& values, const NormalizationStats& stats);
// Imputation then z-scoring; constant columns are only centered.
FusedFeatures Transform(const FeatureTable& table, const std::vector<std::size_t>& rows,
                        const NormalizationStats& stats, std::uint64_t split_seed);

struct TrainTestFeatures {
  FusedFeatures train, test;
  NormalizationStats stats;
};
TrainTestFeatures FitTransform(const FeatureTable& table, double train_fraction,
                               std::uint64_t split_seed, bool stratify = false);

// Temporal cells of H1 rows whose source day is at or after admission.
std::size_t CountLeakageViolations(const FusedFeatures& features);
std::size_t CountLeakageViolations(const FeatureTable& table);

// Binary container: text header, float32 rows, packed mask bits, int16
// source days.
void WriteFeatures(const FusedFeatures& features, const std::string& path);
FusedFeatures ReadFeatures(const std::string& path);

}  // namespace hospx

#endif  // HOSPX_FEATURES_H_
