#include "runrace/stats.hpp"

#include <algorithm>
#include <cmath>

#include "runrace/errors.hpp"

namespace runrace {

double normal_upper_tail(double z) {
    return 0.5 * std::erfc(z * 0.7071067811865475244008443621048490393);
}

double normal_tail_quantile(double tail_prob) {
    if (!(tail_prob > 0.0 && tail_prob < 1.0)) {
        throw DomainError("normal_tail_quantile: tail probability must be in (0, 1)");
    }
    // Bisection on a monotone decreasing function; 120 halvings of [-40, 40]
    // land far below double resolution around the root.
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 120; ++i) {
        double mid = 0.5 * (lo + hi);
        if (normal_upper_tail(mid) > tail_prob) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double mean(std::span<const double> xs) {
    if (xs.empty()) throw DomainError("mean: empty sample set");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double nearest_rank_quantile(std::span<const double> xs, double level) {
    if (xs.empty()) throw DomainError("nearest_rank_quantile: empty sample set");
    if (!(level >= 0.0 && level <= 1.0)) {
        throw DomainError("nearest_rank_quantile: level must be in [0, 1]");
    }
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    auto m = static_cast<long>(sorted.size());
    long idx = static_cast<long>(std::ceil(level * static_cast<double>(m)));
    idx = std::clamp(idx, 1L, m);
    return sorted[static_cast<std::size_t>(idx - 1)];
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DomainError("pearson_correlation: length mismatch");
    if (a.size() < 2) return 0.0;
    double ma = mean(a), mb = mean(b);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 1e-24 || sbb <= 1e-24) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace runrace
