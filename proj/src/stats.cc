#include "hospx/stats.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

#include <boost/math/special_functions/gamma.hpp>

namespace hospx {
namespace {

// Midranks of the pooled sample (x first, then y), doubled so they are
// integers.
std::vector<std::int64_t> DoubledMidranks(const std::vector<double>& x, const std::vector<double>& y,
                                          std::vector<std::int64_t>* tie_sizes = nullptr) {
  const std::size_t n = x.size() + y.size();
  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<std::int64_t> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    // Ranks i+1..j+1 share their mean; doubled: (i+1)+(j+1).
    const auto r2 = static_cast<std::int64_t>(i + j + 2);
    for (std::size_t q = i; q <= j; ++q) ranks[order[q]] = r2;
    if (tie_sizes) tie_sizes->push_back(static_cast<std::int64_t>(j - i + 1));
    i = j + 1;
  }
  return ranks;
}

void CheckSamples(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty()) Fail(ErrorKind::kInvalidArgument, "Mann-Whitney needs two non-empty samples");
}

// 2U for x.
std::int64_t TwiceU(const std::vector<std::int64_t>& ranks2, std::size_t nx) {
  std::int64_t r2 = 0;
  for (std::size_t i = 0; i < nx; ++i) r2 += ranks2[i];
  const auto n = static_cast<std::int64_t>(nx);
  return r2 - n * (n + 1);
}

}  // namespace

TestResult Chi2Contingency(const ContingencyTable2x2& t) {
  TestResult r;
  r.method = TestMethod::kChi2;
  if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0) {
    Fail(ErrorKind::kInvalidArgument, "negative contingency count");
  }
  const double a = t.a, b = t.b, c = t.c, d = t.d;
  const double row1 = a + b, row2 = c + d, col1 = a + c, col2 = b + d;
  if (row1 == 0 || row2 == 0 || col1 == 0 || col2 == 0) {
    r.degenerate = true;
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const double n = row1 + row2;
  const double diff = a * d - b * c;
  r.statistic = n * diff * diff / (row1 * row2 * col1 * col2);
  r.p_value = boost::math::gamma_q(0.5, r.statistic / 2.0);
  return r;
}

double MannWhitneyExactP(const std::vector<double>& x, const std::vector<double>& y) {
  CheckSamples(x, y);
  const auto ranks2 = DoubledMidranks(x, y);
  const std::size_t nx = x.size(), n = ranks2.size();
  // |2U - n1*n2|, twice the distance from the null center.
  const std::int64_t twice_dev = std::abs(TwiceU(ranks2, nx) - static_cast<std::int64_t>(nx * y.size()));
  // Choose the smaller group for the subset-sum DP; |U - mu| is symmetric.
  const std::size_t k = std::min(nx, y.size());
  const auto total = std::accumulate(ranks2.begin(), ranks2.end(), std::int64_t{0});
  // ways[j][s]: subsets of size j with doubled rank sum s.
  std::vector<std::vector<double>> ways(k + 1, std::vector<double>(total + 1, 0.0));
  ways[0][0] = 1.0;
  std::int64_t reach = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t r = ranks2[i];
    reach += r;
    for (std::size_t j = std::min(k, i + 1); j >= 1; --j) {
      auto& dst = ways[j];
      const auto& src = ways[j - 1];
      for (std::int64_t s = reach; s >= r; --s) dst[s] += src[s - r];
    }
  }
  const auto kk = static_cast<std::int64_t>(k);
  const auto other = static_cast<std::int64_t>(n) - kk;
  double hit = 0.0, all = 0.0;
  for (std::int64_t s = 0; s <= total; ++s) {
    const double w = ways[k][s];
    if (w == 0.0) continue;
    all += w;
    const std::int64_t dev = std::abs((s - kk * (kk + 1)) - kk * other);
    if (dev >= twice_dev) hit += w;
  }
  return std::min(1.0, hit / all);
}

double MannWhitneyNormalP(const std::vector<double>& x, const std::vector<double>& y) {
  CheckSamples(x, y);
  std::vector<std::int64_t> ties;
  const auto ranks2 = DoubledMidranks(x, y, &ties);
  const double n1 = x.size(), n2 = y.size(), n = n1 + n2;
  const double u = TwiceU(ranks2, x.size()) / 2.0;
  const double mu = n1 * n2 / 2.0;
  double tie_term = 0.0;
  for (auto t : ties) tie_term += static_cast<double>(t) * t * t - t;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

TestResult MannWhitneyU(const std::vector<double>& x, const std::vector<double>& y) {
  CheckSamples(x, y);
  TestResult r;
  r.method = TestMethod::kMannWhitneyU;
  r.statistic = TwiceU(DoubledMidranks(x, y), x.size()) / 2.0;
  const bool exact = std::min(x.size(), y.size()) <= kMannWhitneyExactMax && x.size() + y.size() <= 400;
  r.p_value = exact ? MannWhitneyExactP(x, y) : MannWhitneyNormalP(x, y);
  return r;
}

BhResult BenjaminiHochberg(const std::vector<double>& p, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) Fail(ErrorKind::kInvalidArgument, "alpha must be in (0,1)");
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) Fail(ErrorKind::kInvalidArgument, "p-value outside [0,1]");
  }
  const std::size_t m = p.size();
  BhResult out{std::vector<bool>(m, false), std::vector<double>(m, 1.0)};
  if (m == 0) return out;
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::size_t cutoff = 0;  // number rejected
  for (std::size_t i = 0; i < m; ++i) {
    if (p[order[i]] <= static_cast<double>(i + 1) * alpha / static_cast<double>(m)) cutoff = i + 1;
  }
  double running = 1.0;
  for (std::size_t i = m; i-- > 0;) {
    running = std::min(running, static_cast<double>(m) * p[order[i]] / static_cast<double>(i + 1));
    out.adjusted[order[i]] = std::min(1.0, running);
    out.rejected[order[i]] = i < cutoff;
  }
  return out;
}

double QuantileSorted(const std::vector<double>& s, double q) {
  if (s.empty()) return 0.0;
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

std::vector<SummaryRow> CohortSummary(const FeatureTable& table, double alpha) {
  const std::size_t n = table.n();
  const std::size_t mt = table.m * table.t;
  std::vector<SummaryRow> bool_rows(table.h);
  const auto n_bool = static_cast<std::ptrdiff_t>(table.h);
  std::size_t n1 = 0;
  for (auto l : table.labels) n1 += l;
  const std::size_t n0 = n - n1;

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j < n_bool; ++j) {
    ContingencyTable2x2 ct;
    for (std::size_t i = 0; i < n; ++i) {
      const bool present = table.values(i, mt + j) > 0.5;
      if (table.labels[i]) {
        (present ? ct.a : ct.c)++;
      } else {
        (present ? ct.b : ct.d)++;
      }
    }
    SummaryRow& row = bool_rows[j];
    row.feature = table.column_names[mt + j];
    row.h1_percent = n1 ? 100.0 * ct.a / n1 : 0.0;
    row.h0_percent = n0 ? 100.0 * ct.b / n0 : 0.0;
    row.h1_count = static_cast<std::size_t>(ct.a);
    row.h0_count = static_cast<std::size_t>(ct.b);
    row.test = Chi2Contingency(ct);
  }
  std::stable_sort(bool_rows.begin(), bool_rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
    if (a.h1_percent != b.h1_percent) return a.h1_percent > b.h1_percent;
    return a.feature < b.feature;
  });

  const std::size_t nq = table.spec.quantities.size();
  std::vector<SummaryRow> num_rows(nq);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(nq); ++q) {
    std::vector<double> v0, v1;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& ev = table.events[i];
      const PeriodOfInterest period =
          ComputePeriodOfInterest(table.scheme, ev.label, ev.admission_offset);
      const PatientEvents::QuantityEvent* latest = nullptr;
      for (const auto& e : ev.quantities) {
        if (e.quantity != static_cast<std::size_t>(q) || !period.Admits(e.day_offset)) continue;
        if (!latest || e.day_offset > latest->day_offset ||
            (e.day_offset == latest->day_offset && e.seq > latest->seq)) {
          latest = &e;
        }
      }
      if (latest) (table.labels[i] ? v1 : v0).push_back(latest->value);
    }
    SummaryRow& row = num_rows[q];
    row.feature = table.spec.quantities[q].name;
    row.numeric = true;
    row.h0_count = v0.size();
    row.h1_count = v1.size();
    std::sort(v0.begin(), v0.end());
    std::sort(v1.begin(), v1.end());
    row.h0_median = QuantileSorted(v0, 0.5);
    row.h0_q1 = QuantileSorted(v0, 0.25);
    row.h0_q3 = QuantileSorted(v0, 0.75);
    row.h1_median = QuantileSorted(v1, 0.5);
    row.h1_q1 = QuantileSorted(v1, 0.25);
    row.h1_q3 = QuantileSorted(v1, 0.75);
    if (v0.empty() || v1.empty()) {
      row.test.method = TestMethod::kMannWhitneyU;
      row.test.degenerate = true;
    } else {
      row.test = MannWhitneyU(v1, v0);
    }
  }

  std::vector<SummaryRow> rows = std::move(bool_rows);
  rows.insert(rows.end(), num_rows.begin(), num_rows.end());
  std::vector<double> p;
  for (const auto& r : rows) p.push_back(r.test.p_value);
  const BhResult bh = BenjaminiHochberg(p, alpha);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].adjusted_p = bh.adjusted[i];
    rows[i].test.significant_after_bh = bh.rejected[i];
  }
  return rows;
}

void WriteSummaryText(const std::vector<SummaryRow>& rows, std::ostream& out) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-40s %22s %22s %12s %11s %11s\n", "feature", "H0", "H1",
                "statistic", "p", "p_adj");
  out << buf;
  for (const auto& r : rows) {
    char h0[64], h1[64];
    if (r.numeric) {
      std::snprintf(h0, sizeof(h0), "%.4g [%.4g-%.4g]", r.h0_median, r.h0_q1, r.h0_q3);
      std::snprintf(h1, sizeof(h1), "%.4g [%.4g-%.4g]", r.h1_median, r.h1_q1, r.h1_q3);
    } else {
      std::snprintf(h0, sizeof(h0), "%.2f", r.h0_percent);
      std::snprintf(h1, sizeof(h1), "%.2f", r.h1_percent);
    }
    std::snprintf(buf, sizeof(buf), "%-40s %22s %22s %12.4g %11.3g %11.3g %s\n", r.feature.c_str(),
                  h0, h1, r.test.statistic, r.test.p_value, r.adjusted_p,
                  r.test.significant_after_bh ? "**" : "");
    out << buf;
  }
}

void WriteSummaryDelimited(const std::vector<SummaryRow>& rows, std::ostream& out, char sep) {
  out << "feature" << sep << "kind" << sep << "h0_count" << sep << "h1_count" << sep << "h0_percent"
      << sep << "h1_percent" << sep << "h0_median" << sep << "h0_q1" << sep << "h0_q3" << sep
      << "h1_median" << sep << "h1_q1" << sep << "h1_q3" << sep << "method" << sep << "statistic"
      << sep << "p" << sep << "p_adjusted" << sep << "star\n";
  char num[32];
  auto fmt = [&](double v) {
    std::snprintf(num, sizeof(num), "%.10g", v);
    return std::string(num);
  };
  for (const auto& r : rows) {
    out << r.feature << sep << (r.numeric ? "numeric" : "boolean") << sep << r.h0_count << sep
        << r.h1_count << sep << fmt(r.h0_percent) << sep << fmt(r.h1_percent) << sep
        << fmt(r.h0_median) << sep << fmt(r.h0_q1) << sep << fmt(r.h0_q3) << sep << fmt(r.h1_median)
        << sep << fmt(r.h1_q1) << sep << fmt(r.h1_q3) << sep
        << (r.test.degenerate ? "degenerate"
                              : r.test.method == TestMethod::kChi2 ? "chi2" : "mann-whitney")
        << sep << fmt(r.test.statistic) << sep << fmt(r.test.p_value) << sep << fmt(r.adjusted_p)
        << sep << (r.test.significant_after_bh ? "**" : "") << '\n';
  }
}

}  // namespace hospx
