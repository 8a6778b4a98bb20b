#ifndef HOSPX_STATS_H_
#define HOSPX_STATS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hospx/features.h"

namespace hospx {

// Feature present/absent (rows) by H1/H0 (columns).
struct ContingencyTable2x2 {
  std::int64_t a = 0;  // present, H1
  std::int64_t b = 0;  // present, H0
  std::int64_t c = 0;  // absent, H1
  std::int64_t d = 0;  // absent, H0
};

enum class TestMethod { kChi2, kMannWhitneyU };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::kChi2;
  bool degenerate = false;
  bool significant_after_bh = false;
};

// Pearson chi-square without continuity correction, 1 degree of freedom.
// A zero marginal gives a degenerate result with p = 1.
TestResult Chi2Contingency(const ContingencyTable2x2& table);

// Two-sided test; statistic is U for x. Exact null distribution (with ties)
// when the smaller sample has at most kMannWhitneyExactMax values, normal
// approximation with tie and continuity correction otherwise. Throws
// Error(kInvalidArgument) on an empty sample.
inline constexpr std::size_t kMannWhitneyExactMax = 8;
TestResult MannWhitneyU(const std::vector<double>& x, const std::vector<double>& y);
// Both paths are exposed for testing.
double MannWhitneyExactP(const std::vector<double>& x, const std::vector<double>& y);
double MannWhitneyNormalP(const std::vector<double>& x, const std::vector<double>& y);

struct BhResult {
  std::vector<bool> rejected;
  std::vector<double> adjusted;
};
inline constexpr double kDefaultAlpha = 0.001;
// Throws Error(kInvalidArgument) for p outside [0,1] or alpha outside (0,1).
BhResult BenjaminiHochberg(const std::vector<double>& p_values, double alpha = kDefaultAlpha);

struct SummaryRow {
  std::string feature;
  bool numeric = false;
  // Boolean rows: percent present per class. Numeric rows: value counts.
  double h0_percent = 0.0, h1_percent = 0.0;
  std::size_t h0_count = 0, h1_count = 0;
  // Numeric rows: median and quartiles per class.
  double h0_median = 0.0, h0_q1 = 0.0, h0_q3 = 0.0;
  double h1_median = 0.0, h1_q1 = 0.0, h1_q3 = 0.0;
  TestResult test;
  double adjusted_p = 1.0;
};

// Boolean rows (conditions, age bins, gender) by descending overall
// prevalence, then numeric rows (latest admissible value per patient and
// quantity). BH runs over all rows together.
std::vector<SummaryRow> CohortSummary(const FeatureTable& table, double alpha = kDefaultAlpha);

void WriteSummaryText(const std::vector<SummaryRow>& rows, std::ostream& out);
void WriteSummaryDelimited(const std::vector<SummaryRow>& rows, std::ostream& out, char sep = '\t');

// Linear-interpolation quantile of sorted data (q in [0,1]).
double QuantileSorted(const std::vector<double>& sorted, double q);

}  // namespace hospx

#endif  // HOSPX_STATS_H_
