#ifndef HOSPX_TESTS_STATS_ORACLE_H_
#define HOSPX_TESTS_STATS_ORACLE_H_

#include <algorithm>
#include <cstdlib>
#include <vector>

namespace hospx::testing {

// Exhaustive enumeration over every assignment of the pooled values to x.
// U is counted pairwise (ties count one half), kept doubled to stay exact.
inline double EnumeratedTwoSidedP(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> pooled = x;
  pooled.insert(pooled.end(), y.begin(), y.end());
  const int n = static_cast<int>(pooled.size()), n1 = static_cast<int>(x.size());
  const long long center = static_cast<long long>(x.size()) * static_cast<long long>(y.size());
  auto twice_u = [&](unsigned mask) {
    long long u2 = 0;
    for (int i = 0; i < n; ++i) {
      if (!(mask >> i & 1)) continue;
      for (int j = 0; j < n; ++j) {
        if (mask >> j & 1) continue;
        u2 += pooled[i] > pooled[j] ? 2 : pooled[i] == pooled[j] ? 1 : 0;
      }
    }
    return u2;
  };
  const long long observed = std::llabs(twice_u((1u << n1) - 1) - center);
  long long hit = 0, all = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != n1) continue;
    ++all;
    hit += std::llabs(twice_u(mask) - center) >= observed;
  }
  return static_cast<double>(hit) / static_cast<double>(all);
}

// The step-up rule applied literally.
inline std::vector<bool> BhByHand(const std::vector<double>& p, double alpha) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
  std::size_t largest = 0;
  for (std::size_t rank = 1; rank <= m; ++rank) {
    if (p[order[rank - 1]] <= static_cast<double>(rank) * alpha / static_cast<double>(m)) largest = rank;
  }
  std::vector<bool> out(m, false);
  for (std::size_t rank = 1; rank <= largest; ++rank) out[order[rank - 1]] = true;
  return out;
}

}  // namespace hospx::testing

#endif  // HOSPX_TESTS_STATS_ORACLE_H_
