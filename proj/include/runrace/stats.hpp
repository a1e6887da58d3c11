#pragma once

#include <span>
#include <vector>

namespace runrace {

// P(N(0,1) >= z) via the complementary error function. Accurate to well below
// 1e-10 absolute over z in [-8, 8].
double normal_upper_tail(double z);

// z such that normal_upper_tail(z) == tail_prob, tail_prob in (0, 1).
double normal_tail_quantile(double tail_prob);

double mean(std::span<const double> xs);

// Nearest-rank quantile: the ceil(level * m)-th smallest sample, index clamped
// to [1, m]. Always returns one of the samples. level in [0, 1].
double nearest_rank_quantile(std::span<const double> xs, double level);

// Pearson correlation; returns 0 when either side is degenerate (fewer than
// two points or zero variance).
double pearson_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace runrace
