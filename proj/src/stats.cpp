#include "prosub/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace prosub {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double wilcoxon_one_sided(const std::vector<double>& paired_a,
                          const std::vector<double>& paired_b) {
    if (paired_a.size() != paired_b.size()) {
        throw std::invalid_argument("wilcoxon: paired samples differ in length");
    }
    if (paired_a.size() < 5) {
        throw std::invalid_argument("wilcoxon: need at least 5 pairs");
    }
    std::vector<double> diffs;
    for (size_t i = 0; i < paired_a.size(); ++i) {
        double d = paired_a[i] - paired_b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) {
        throw std::invalid_argument("wilcoxon: all differences are zero, test undefined");
    }
    const size_t n = diffs.size();

    // midranks of |d|
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t x, size_t y) {
        return std::fabs(diffs[x]) < std::fabs(diffs[y]);
    });
    std::vector<double> rank(n, 0.0);
    std::vector<size_t> tie_sizes;
    for (size_t i = 0; i < n;) {
        size_t j = i;
        while (j < n && std::fabs(diffs[order[j]]) == std::fabs(diffs[order[i]])) ++j;
        double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (size_t k = i; k < j; ++k) rank[order[k]] = mid;
        tie_sizes.push_back(j - i);
        i = j;
    }

    double w_plus = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (diffs[i] > 0.0) w_plus += rank[i];
    }

    if (n <= 25) {
        // Exact lower-tail probability. Doubled ranks keep sums integral even
        // with midranks; subset counts stay below 2^25, exact in a double.
        std::vector<long> r2(n);
        long total = 0;
        for (size_t i = 0; i < n; ++i) {
            r2[i] = std::lround(2.0 * rank[i]);
            total += r2[i];
        }
        std::vector<double> count(static_cast<size_t>(total) + 1, 0.0);
        count[0] = 1.0;
        long reach = 0;
        for (size_t i = 0; i < n; ++i) {
            reach += r2[i];
            for (long s = reach; s >= r2[i]; --s) {
                count[static_cast<size_t>(s)] += count[static_cast<size_t>(s - r2[i])];
            }
        }
        long w2 = std::lround(2.0 * w_plus);
        double below = 0.0;
        for (long s = 0; s <= w2; ++s) below += count[static_cast<size_t>(s)];
        return below / std::pow(2.0, static_cast<double>(n));
    }

    double dn = static_cast<double>(n);
    double mean = dn * (dn + 1.0) / 4.0;
    double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0;
    for (size_t t : tie_sizes) {
        double ts = static_cast<double>(t);
        var -= (ts * ts * ts - ts) / 48.0;
    }
    double z = (w_plus + 0.5 - mean) / std::sqrt(var);
    return normal_cdf(z);
}

}  // namespace prosub
