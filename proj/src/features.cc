#include "hospx/features.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace hospx {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::optional<int> ParseAge(const std::string& code) {
  constexpr std::string_view kPrefix = "age_years:";
  if (code.rfind(kPrefix, 0) != 0) return std::nullopt;
  try {
    return std::stoi(code.substr(kPrefix.size()));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<std::string> ColumnNames(const FeatureSpec& spec, const IntervalScheme& scheme) {
  std::vector<std::string> names;
  const auto temporal = spec.TemporalNames();
  for (const auto& base : temporal) {
    for (std::size_t s = 0; s < scheme.size(); ++s) {
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "_t%02zu", s);
      names.push_back(base + suffix);
    }
  }
  for (auto& n : spec.TabularNames()) names.push_back(std::move(n));
  return names;
}

// Fills one row of `values` and `source_day` from admissible events.
void MaterializeRow(const PatientEvents& ev, const FeatureSpec& spec,
                    const IntervalScheme& scheme, std::span<double> values,
                    std::span<std::int16_t> source_day) {
  const std::size_t t = scheme.size();
  const std::size_t nq = spec.quantities.size();
  const std::size_t mt = spec.m() * t;
  const PeriodOfInterest period = ComputePeriodOfInterest(scheme, ev.label, ev.admission_offset);

  std::vector<std::vector<ObservedValue>> cells(nq * t);
  for (const auto& q : ev.quantities) {
    if (!period.Admits(q.day_offset)) continue;
    const int s = AssignInterval(q.day_offset, scheme);
    if (s == kOutOfRange) continue;
    cells[q.quantity * t + s].push_back({q.day_offset, q.seq, q.value});
  }
  for (std::size_t q = 0; q < nq; ++q) {
    for (std::size_t s = 0; s < t; ++s) {
      const auto agg = AggregateObservation(cells[q * t + s]);
      for (int a = 0; a < kNumAggregates; ++a) {
        const std::size_t col = (q * kNumAggregates + a) * t + s;
        if (!agg) {
          values[col] = kNaN;
          source_day[col] = kNoSourceDay;
          continue;
        }
        const double v = a == 0 ? agg->last : a == 1 ? agg->min : a == 2 ? agg->max : agg->mean;
        values[col] = v;
        source_day[col] = static_cast<std::int16_t>(agg->source_day);
      }
    }
  }
  const std::size_t nc = spec.conditions.size();
  for (std::size_t c = 0; c < nc; ++c) {
    values[mt + c] = AggregateBoolean(ev, c, spec.conditions[c].scope, period) ? 1.0 : 0.0;
  }
  for (int b = 0; b < kNumAgeBins; ++b) values[mt + nc + b] = ev.age_bin == b ? 1.0 : 0.0;
  values[mt + nc + kNumAgeBins] = ev.male ? 1.0 : 0.0;
}

FeatureTable Materialize(std::vector<PatientEvents> events, const FeatureSpec& spec,
                         const IntervalScheme& scheme, Scenario scenario, Exec exec) {
  FeatureTable table;
  table.h = spec.h();
  table.m = spec.m();
  table.t = scheme.size();
  table.scenario = scenario;
  table.column_names = ColumnNames(spec, scheme);
  const std::size_t n = events.size();
  table.values = MatrixD(n, table.k());
  table.source_day = Matrix<std::int16_t>(n, table.m * table.t, kNoSourceDay);
  for (const auto& ev : events) {
    table.patient_ids.push_back(ev.patient_id);
    table.labels.push_back(ev.label == Label::kH1 ? 1 : 0);
    table.admission_offsets.push_back(ev.admission_offset);
  }
  const auto n_signed = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n_signed; ++i) {
      MaterializeRow(events[i], spec, scheme, table.values.row(i), table.source_day.row(i));
    }
  } else {
    for (std::ptrdiff_t i = 0; i < n_signed; ++i) {
      MaterializeRow(events[i], spec, scheme, table.values.row(i), table.source_day.row(i));
    }
  }
  table.events = std::move(events);
  table.spec = spec;
  table.scheme = scheme;
  return table;
}

}  // namespace

std::string IntervalScheme::Label(std::size_t i) const {
  const auto& r = ranges.at(i);
  const std::string lo = r.start == INT_MIN ? "-inf" : std::to_string(r.start);
  return "[" + lo + "," + std::to_string(r.end) + ")";
}

void IntervalScheme::Validate() const {
  if (ranges.empty()) Fail(ErrorKind::kInvalidArgument, "interval scheme is empty");
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (ranges[i].start >= ranges[i].end) {
      Fail(ErrorKind::kInvalidArgument, "interval " + std::to_string(i) + " is empty");
    }
    if (i > 0 && ranges[i].start != ranges[i - 1].end) {
      Fail(ErrorKind::kInvalidArgument, "interval " + std::to_string(i) + " is not contiguous");
    }
  }
}

IntervalScheme DefaultIntervalScheme() {
  IntervalScheme s;
  s.ranges = {{INT_MIN, -28}, {-28, -14}, {-14, -7}, {-7, 0}};
  for (int d = 0; d < 7; ++d) s.ranges.push_back({d, d + 1});
  for (int b : {7, 10, 14, 18, 22}) s.ranges.push_back({b, b == 7 ? 10 : b + 4});
  s.ranges.push_back({26, 29});
  return s;
}

int AssignInterval(int day_offset, const IntervalScheme& scheme) {
  const auto& r = scheme.ranges;
  if (r.empty() || day_offset >= r.back().end || day_offset < r.front().start) return kOutOfRange;
  // First range whose end exceeds the offset.
  const auto it = std::upper_bound(r.begin(), r.end(), day_offset,
                                   [](int d, const IntervalScheme::Range& x) { return d < x.end; });
  return static_cast<int>(it - r.begin());
}

PeriodOfInterest ComputePeriodOfInterest(const IntervalScheme& scheme, Label label,
                                         std::optional<int> admission_offset) {
  PeriodOfInterest p;
  if (label == Label::kH1) {
    if (!admission_offset) {
      Fail(ErrorKind::kInvalidArgument, "hospitalized patient without admission offset");
    }
    p.end = *admission_offset;
  }
  p.intervals.resize(scheme.size());
  for (std::size_t i = 0; i < scheme.size(); ++i) {
    const auto& r = scheme.ranges[i];
    p.intervals[i] = std::max(r.start, p.start) < std::min(r.end, p.end);
  }
  return p;
}

std::optional<ObservationAggregate> AggregateObservation(const std::vector<ObservedValue>& values) {
  if (values.empty()) return std::nullopt;
  ObservationAggregate a;
  const ObservedValue* last = &values.front();
  a.min = a.max = values.front().value;
  double sum = 0.0;
  for (const auto& v : values) {
    if (v.day_offset > last->day_offset ||
        (v.day_offset == last->day_offset && v.seq > last->seq)) {
      last = &v;
    }
    a.min = std::min(a.min, v.value);
    a.max = std::max(a.max, v.value);
    sum += v.value;
  }
  a.last = last->value;
  a.mean = sum / static_cast<double>(values.size());
  a.source_day = last->day_offset;
  return a;
}

std::vector<std::string> FeatureSpec::TabularNames() const {
  std::vector<std::string> names;
  for (const auto& c : conditions) names.push_back(c.name);
  for (int b = 0; b < kNumAgeBins; ++b) names.emplace_back(AgeBinName(b));
  names.emplace_back("male");
  return names;
}

std::vector<std::string> FeatureSpec::TemporalNames() const {
  std::vector<std::string> names;
  for (const auto& q : quantities) {
    for (auto agg : kAggregateNames) names.push_back(q.name + "_" + std::string(agg));
  }
  return names;
}

FeatureSpec DefaultFeatureSpec() {
  FeatureSpec spec;
  const auto generic = DefaultConditionExclusions();
  for (const auto& info : Conditions()) {
    std::vector<std::string> exclusions = generic;
    for (auto e : info.exclusions) exclusions.emplace_back(e);
    spec.conditions.push_back({std::string(info.slug), info.scope,
                               PatternSet({ToLower(info.display)}, exclusions), info.gp_drop});
  }
  for (const auto& q : Quantities()) {
    spec.quantities.push_back({std::string(q.slug), std::string(q.loinc), q.gp_drop});
  }
  spec.hierarchy = DefaultHierarchy();
  return spec;
}

bool MatchesCondition(const RawRecord& record, const ConditionFeature& condition,
                      const CodeHierarchy& hierarchy) {
  if (record.kind != RecordKind::kDiagnosis) return false;
  if (condition.patterns.MatchesExclusion(record.text)) return false;
  if (condition.patterns.MatchesInclusion(record.text)) return true;
  if (record.code_system == CodeSystem::kSnomed && hierarchy.contains(record.code)) {
    return MatchHierarchical(record.code, condition.patterns, hierarchy);
  }
  return false;
}

PatientEvents ExtractPatientEvents(const std::vector<RawRecord>& timeline, const CohortEntry& entry,
                                   const FeatureSpec& spec, const IntervalScheme& scheme) {
  PatientEvents ev;
  ev.patient_id = entry.patient_id;
  ev.label = entry.label;
  ev.admission_offset = entry.admission_offset;
  const PeriodOfInterest period = ComputePeriodOfInterest(scheme, entry.label, entry.admission_offset);
  for (const auto& r : timeline) {
    if (r.kind == RecordKind::kDemographic) {
      if (auto age = ParseAge(r.code)) ev.age_bin = AgeBin(*age);
      if (r.code == "gender:M") ev.male = true;
      continue;
    }
    const int offset = *r.day - entry.anchor_day;
    // Event-level leakage guard.
    if (offset >= period.end) continue;
    if (r.kind == RecordKind::kDiagnosis) {
      for (std::size_t c = 0; c < spec.conditions.size(); ++c) {
        if (MatchesCondition(r, spec.conditions[c], spec.hierarchy)) {
          ev.conditions.push_back({c, offset});
        }
      }
    } else if (r.kind == RecordKind::kObservation && r.value) {
      if (!period.Admits(offset)) continue;
      for (std::size_t q = 0; q < spec.quantities.size(); ++q) {
        if (spec.quantities[q].loinc == r.code) {
          ev.quantities.push_back({q, offset, r.seq, *r.value});
          break;
        }
      }
    }
  }
  return ev;
}

bool AggregateBoolean(const PatientEvents& events, std::size_t condition, ConditionScope scope,
                      const PeriodOfInterest& period) {
  for (const auto& e : events.conditions) {
    if (e.condition != condition || e.day_offset >= period.end) continue;
    switch (scope) {
      case ConditionScope::kChronic:
        return true;
      case ConditionScope::kPast:
        if (e.day_offset < period.start) return true;
        break;
      case ConditionScope::kAcute:
      case ConditionScope::kPresent:
        if (period.Admits(e.day_offset)) return true;
        break;
    }
  }
  return false;
}

std::string_view ToString(Scenario s) {
  switch (s) {
    case Scenario::kAll: return "all";
    case Scenario::kGp: return "gp";
    case Scenario::kOneDayBefore: return "one-day-before";
  }
  return "?";
}

Scenario ParseScenario(std::string_view name) {
  if (name == "all") return Scenario::kAll;
  if (name == "gp") return Scenario::kGp;
  if (name == "one-day-before") return Scenario::kOneDayBefore;
  Fail(ErrorKind::kInvalidArgument, "unknown scenario '" + std::string(name) + "'");
}

FeatureTable BuildFeatureTable(const RecordStore& store, const std::vector<CohortEntry>& cohort,
                               const FeatureSpec& spec, const IntervalScheme& scheme, Exec exec) {
  if (cohort.empty()) Fail(ErrorKind::kInvalidArgument, "empty cohort");
  scheme.Validate();
  std::vector<PatientEvents> all(cohort.size());
  const auto n = static_cast<std::ptrdiff_t>(cohort.size());
  auto extract = [&](std::ptrdiff_t i) {
    all[i] = ExtractPatientEvents(store.Timeline(cohort[i].patient_id), cohort[i], spec, scheme);
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) extract(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) extract(i);
  }
  std::vector<PatientEvents> kept;
  std::size_t unknown_age = 0, empty = 0;
  for (auto& ev : all) {
    if (ev.age_bin == kNumAgeBins - 1) {
      ++unknown_age;
      continue;
    }
    const PeriodOfInterest period = ComputePeriodOfInterest(scheme, ev.label, ev.admission_offset);
    bool any = false;
    for (std::size_t c = 0; c < spec.conditions.size() && !any; ++c) {
      any = AggregateBoolean(ev, c, spec.conditions[c].scope, period);
    }
    for (const auto& q : ev.quantities) {
      if (AssignInterval(q.day_offset, scheme) != kOutOfRange) any = true;
    }
    if (!any) {
      ++empty;
      continue;
    }
    kept.push_back(std::move(ev));
  }
  if (kept.empty()) Fail(ErrorKind::kInvalidArgument, "no patients left after row filtering");
  FeatureTable table = Materialize(std::move(kept), spec, scheme, Scenario::kAll, exec);
  table.dropped_unknown_age = unknown_age;
  table.dropped_empty = empty;
  return table;
}

FeatureTable ApplyScenario(const FeatureTable& table, Scenario scenario, Exec exec) {
  if (table.scenario != Scenario::kAll) {
    Fail(ErrorKind::kInvalidArgument, "scenarios apply to the unfiltered table only");
  }
  if (scenario == Scenario::kAll) return table;
  FeatureSpec spec = table.spec;
  std::vector<PatientEvents> events = table.events;
  if (scenario == Scenario::kGp) {
    std::vector<std::ptrdiff_t> cond_map(spec.conditions.size(), -1), qty_map(spec.quantities.size(), -1);
    FeatureSpec reduced;
    reduced.hierarchy = spec.hierarchy;
    for (std::size_t c = 0; c < spec.conditions.size(); ++c) {
      if (spec.conditions[c].gp_drop) continue;
      cond_map[c] = static_cast<std::ptrdiff_t>(reduced.conditions.size());
      reduced.conditions.push_back(spec.conditions[c]);
    }
    for (std::size_t q = 0; q < spec.quantities.size(); ++q) {
      if (spec.quantities[q].gp_drop) continue;
      qty_map[q] = static_cast<std::ptrdiff_t>(reduced.quantities.size());
      reduced.quantities.push_back(spec.quantities[q]);
    }
    for (auto& ev : events) {
      std::vector<PatientEvents::ConditionEvent> conds;
      for (const auto& e : ev.conditions) {
        if (cond_map[e.condition] >= 0) conds.push_back({static_cast<std::size_t>(cond_map[e.condition]), e.day_offset});
      }
      std::vector<PatientEvents::QuantityEvent> qtys;
      for (const auto& e : ev.quantities) {
        if (qty_map[e.quantity] >= 0) {
          qtys.push_back({static_cast<std::size_t>(qty_map[e.quantity]), e.day_offset, e.seq, e.value});
        }
      }
      ev.conditions = std::move(conds);
      ev.quantities = std::move(qtys);
    }
    spec = std::move(reduced);
  } else {
    for (auto& ev : events) {
      if (ev.label != Label::kH1) continue;
      const int cutoff = *ev.admission_offset - 1;
      std::erase_if(ev.conditions, [&](const auto& e) { return e.day_offset >= cutoff; });
      std::erase_if(ev.quantities, [&](const auto& e) { return e.day_offset >= cutoff; });
    }
  }
  FeatureTable out = Materialize(std::move(events), spec, table.scheme, scenario, exec);
  out.dropped_unknown_age = table.dropped_unknown_age;
  out.dropped_empty = table.dropped_empty;
  return out;
}

MatrixD FusedFeatures::X1Matrix() const {
  MatrixD out(n(), h);
  for (std::size_t i = 0; i < n(); ++i) {
    for (std::size_t j = 0; j < h; ++j) out(i, j) = X1(i, j);
  }
  return out;
}

MatrixD FusedFeatures::X2Flat() const {
  const std::size_t mt = m * t;
  MatrixD out(n(), mt);
  for (std::size_t i = 0; i < n(); ++i) {
    std::copy_n(early.row(i).begin(), mt, out.row(i).begin());
  }
  return out;
}

SplitIndices SplitRows(const std::vector<std::uint8_t>& labels, double train_fraction,
                       std::uint64_t seed, bool stratify) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    Fail(ErrorKind::kInvalidArgument, "train fraction must be in (0,1)");
  }
  std::mt19937_64 rng(DeriveSeed(seed, "split"));
  SplitIndices out;
  auto split_group = [&](std::vector<std::size_t> idx) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * idx.size()));
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + n_train);
    out.test.insert(out.test.end(), idx.begin() + n_train, idx.end());
  };
  if (stratify) {
    for (std::uint8_t cls : {0, 1}) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == cls) idx.push_back(i);
      }
      split_group(std::move(idx));
    }
  } else {
    std::vector<std::size_t> idx(labels.size());
    std::iota(idx.begin(), idx.end(), 0);
    split_group(std::move(idx));
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

NormalizationStats FitNormalization(const FeatureTable& table,
                                    const std::vector<std::size_t>& train_rows) {
  if (train_rows.empty()) Fail(ErrorKind::kInvalidArgument, "empty training split");
  const std::size_t k = table.k();
  const std::size_t mt = table.m * table.t;
  NormalizationStats st;
  st.median.assign(k, 0.0);
  st.mean.assign(k, 0.0);
  st.stddev.assign(k, 0.0);
  st.continuous.assign(k, false);
  std::vector<double> col;
  for (std::size_t j = 0; j < mt; ++j) {
    st.continuous[j] = true;
    col.clear();
    for (auto i : train_rows) {
      const double v = table.values(i, j);
      if (!std::isnan(v)) col.push_back(v);
    }
    double median = 0.0;
    if (!col.empty()) {
      std::sort(col.begin(), col.end());
      const std::size_t c = col.size();
      median = c % 2 ? col[c / 2] : 0.5 * (col[c / 2 - 1] + col[c / 2]);
    }
    st.median[j] = median;
    // Moments of the imputed training column.
    double sum = 0.0;
    for (auto i : train_rows) {
      const double v = table.values(i, j);
      sum += std::isnan(v) ? median : v;
    }
    const double mean = sum / static_cast<double>(train_rows.size());
    double ss = 0.0;
    for (auto i : train_rows) {
      const double v = table.values(i, j);
      const double d = (std::isnan(v) ? median : v) - mean;
      ss += d * d;
    }
    st.mean[j] = mean;
    st.stddev[j] = std::sqrt(ss / static_cast<double>(train_rows.size()));
    if (!(st.stddev[j] > 1e-12 * std::max(1.0, std::abs(mean)))) {
      st.stddev[j] = 0.0;
      st.constant_columns.push_back(j);
    }
  }
  if (!st.constant_columns.empty()) {
    LogWarning(std::to_string(st.constant_columns.size()) +
               " constant temporal columns kept centered but not scaled");
  }
  return st;
}

MatrixD Impute(const MatrixD& values, const NormalizationStats& stats) {
  MatrixD out = values;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) {
      if (std::isnan(row[j])) row[j] = stats.continuous[j] ? stats.median[j] : 0.0;
    }
  }
  return out;
}

FusedFeatures Transform(const FeatureTable& table, const std::vector<std::size_t>& rows,
                        const NormalizationStats& stats, std::uint64_t split_seed) {
  FusedFeatures f;
  f.h = table.h;
  f.m = table.m;
  f.t = table.t;
  f.scenario = table.scenario;
  f.split_seed = split_seed;
  f.feature_names = table.column_names;
  const std::size_t k = table.k();
  const std::size_t mt = table.m * table.t;
  MatrixD raw(rows.size(), k);
  f.source_day = Matrix<std::int16_t>(rows.size(), mt);
  f.mask2.assign(rows.size() * mt, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    f.patient_ids.push_back(table.patient_ids[i]);
    f.labels.push_back(table.labels[i]);
    f.admission_offsets.push_back(table.admission_offsets[i]);
    std::copy_n(table.values.row(i).begin(), k, raw.row(r).begin());
    std::copy_n(table.source_day.row(i).begin(), mt, f.source_day.row(r).begin());
    for (std::size_t j = 0; j < mt; ++j) f.mask2[r * mt + j] = !std::isnan(table.values(i, j));
  }
  f.early = Impute(raw, stats);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto row = f.early.row(r);
    for (std::size_t j = 0; j < k; ++j) {
      if (!stats.continuous[j]) continue;
      row[j] -= stats.mean[j];
      if (stats.stddev[j] > 0.0) row[j] /= stats.stddev[j];
    }
  }
  return f;
}

TrainTestFeatures FitTransform(const FeatureTable& table, double train_fraction,
                               std::uint64_t split_seed, bool stratify) {
  if (table.n() == 0) Fail(ErrorKind::kInvalidArgument, "empty cohort");
  const SplitIndices split = SplitRows(table.labels, train_fraction, split_seed, stratify);
  TrainTestFeatures out;
  out.stats = FitNormalization(table, split.train);
  out.train = Transform(table, split.train, out.stats, split_seed);
  out.test = Transform(table, split.test, out.stats, split_seed);
  return out;
}

std::size_t CountLeakageViolations(const FusedFeatures& f) {
  std::size_t violations = 0;
  const std::size_t mt = f.m * f.t;
  for (std::size_t i = 0; i < f.n(); ++i) {
    if (!f.labels[i]) continue;
    const int admission = f.admission_offsets[i].value_or(INT_MIN);
    for (std::size_t j = 0; j < mt; ++j) {
      if (f.mask2[i * mt + j] && f.source_day(i, j) >= admission) ++violations;
    }
  }
  return violations;
}

std::size_t CountLeakageViolations(const FeatureTable& table) {
  std::size_t violations = 0;
  const std::size_t mt = table.m * table.t;
  for (std::size_t i = 0; i < table.n(); ++i) {
    if (!table.labels[i]) continue;
    const int admission = table.admission_offsets[i].value_or(INT_MIN);
    for (std::size_t j = 0; j < mt; ++j) {
      if (!std::isnan(table.values(i, j)) && table.source_day(i, j) >= admission) ++violations;
    }
  }
  return violations;
}

}  // namespace hospx
