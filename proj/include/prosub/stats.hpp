#pragma once

#include <vector>

namespace prosub {

// One-sided Wilcoxon signed-rank test of H1: a < b on paired samples.
// Zero differences are discarded; all-zero differences are an error.
// Exact signed-rank distribution for n <= 25 retained pairs (midranks under
// ties), normal approximation with tie correction above.
double wilcoxon_one_sided(const std::vector<double>& paired_a,
                          const std::vector<double>& paired_b);

}  // namespace prosub
