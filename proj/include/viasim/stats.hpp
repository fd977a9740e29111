#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace viasim {

/// Percentile with rank position r = p n + 0.5 on the sorted values (1-based),
/// interpolated between neighbours and clamped to the extremes. For p = 0.1
/// and ten values this is the midpoint of the best and second best.
double percentile_midpoint(std::span<const double> values, double p);

double median(std::span<const double> values);

enum class WilcoxonMethod { Exact, NormalApproximation };

std::string_view to_string(WilcoxonMethod method);

struct WilcoxonResult {
    double w = 0.0;        // sum of ranks of positive differences
    double p_value = 1.0;  // two-sided
    WilcoxonMethod method = WilcoxonMethod::Exact;
    int n_effective = 0;   // pairs left after dropping zero differences
    bool degenerate = false; // every difference was zero
};

/// Largest effective sample size handled by the exact null distribution.
inline constexpr int kWilcoxonExactLimit = 25;

/// Signed-rank test on paired differences. Zero differences are dropped,
/// tied magnitudes share their average rank. Exact null distribution up to
/// kWilcoxonExactLimit pairs, normal approximation with tie and continuity
/// correction above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences);

/// Convenience overload on pairs; the differences are a[i] - b[i].
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

/// Two-sided exact p of a signed-rank statistic. `doubled_ranks` are the
/// ranks times two (integers even with average ranks), `doubled_w` likewise.
double wilcoxon_exact_p(std::span<const long> doubled_ranks, long doubled_w);

enum class EffectEstimator { Median, HodgesLehmann };

std::string_view to_string(EffectEstimator estimator);
EffectEstimator parse_effect_estimator(std::string_view text);

struct BootstrapConfig {
    double level = 0.95;
    int resamples = 10000;
    std::uint64_t seed = 1;
    EffectEstimator estimator = EffectEstimator::Median;
};

struct EffectSize {
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double level = 0.95;
    int n = 0;
    EffectEstimator estimator = EffectEstimator::Median;
    bool valid = false; // false: fewer than kMinEffectPairs pairs
};

inline constexpr int kMinEffectPairs = 6;

/// Point estimate of the paired differences with a percentile-bootstrap
/// interval. Differences are sorted before resampling so the result does
/// not depend on participant order. The interval is widened, if needed, to
/// contain the point estimate.
EffectSize median_difference_ci(std::span<const double> differences, const BootstrapConfig& cfg = {});

/// Median of all pairwise (Walsh) averages.
double hodges_lehmann(std::span<const double> differences);

} // namespace viasim
