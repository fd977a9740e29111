#include "viasim/stats.hpp"

#include "viasim/error.hpp"

#include "random_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace viasim {

namespace {

std::vector<double> sorted_copy(std::span<const double> values) {
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    return v;
}

double percentile_sorted(const std::vector<double>& v, double p) {
    const double n = static_cast<double>(v.size());
    const double r = p * n + 0.5;
    if (r <= 1.0) return v.front();
    if (r >= n) return v.back();
    const double lower = std::floor(r);
    const auto i = static_cast<std::size_t>(lower) - 1;
    return v[i] + (r - lower) * (v[i + 1] - v[i]);
}

// Type-7 quantile of sorted data, used for bootstrap interval ends.
double quantile_sorted(const std::vector<double>& v, double q) {
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median_sorted(const std::vector<double>& v) {
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double estimate(std::vector<double>& scratch, EffectEstimator est) {
    if (est == EffectEstimator::HodgesLehmann) return hodges_lehmann(scratch);
    std::sort(scratch.begin(), scratch.end());
    return median_sorted(scratch);
}

} // namespace

double percentile_midpoint(std::span<const double> values, double p) {
    if (values.empty()) throw InvalidArgument("percentile of an empty list");
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("percentile fraction must lie in [0, 1]");
    return percentile_sorted(sorted_copy(values), p);
}

double median(std::span<const double> values) {
    if (values.empty()) throw InvalidArgument("median of an empty list");
    return median_sorted(sorted_copy(values));
}

std::string_view to_string(WilcoxonMethod method) {
    return method == WilcoxonMethod::Exact ? "exact" : "normal-approximation";
}

double wilcoxon_exact_p(std::span<const long> doubled_ranks, long doubled_w) {
    const long total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0L);
    // counts[s]: sign assignments whose positive doubled ranks sum to s.
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    long reach = 0;
    for (long r : doubled_ranks) {
        for (long s = reach; s >= 0; --s)
            if (counts[static_cast<std::size_t>(s)] != 0.0)
                counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
        reach += r;
    }
    double below = 0.0, above = 0.0, all = 0.0;
    for (long s = 0; s <= total; ++s) {
        const double c = counts[static_cast<std::size_t>(s)];
        all += c;
        if (s <= doubled_w) below += c;
        if (s >= doubled_w) above += c;
    }
    return std::min(1.0, 2.0 * std::min(below, above) / all);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences) {
    std::vector<double> d;
    for (double x : differences) {
        if (!std::isfinite(x)) throw InvalidArgument("signed-rank test: non-finite difference");
        if (x != 0.0) d.push_back(x);
    }
    WilcoxonResult res;
    res.n_effective = static_cast<int>(d.size());
    if (d.empty()) {
        res.degenerate = true;
        return res;
    }
    if (d.size() < 2) throw InvalidArgument("signed-rank test needs at least two non-zero differences");

    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });

    // Average ranks, kept doubled so ties stay integral.
    std::vector<long> doubled(d.size());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const long twice_avg = static_cast<long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) doubled[order[k]] = twice_avg;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long doubled_w = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0.0) doubled_w += doubled[i];
    res.w = 0.5 * static_cast<double>(doubled_w);

    const double n = static_cast<double>(d.size());
    if (res.n_effective <= kWilcoxonExactLimit) {
        res.method = WilcoxonMethod::Exact;
        res.p_value = wilcoxon_exact_p(doubled, doubled_w);
        return res;
    }
    res.method = WilcoxonMethod::NormalApproximation;
    const double mean = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    const double dev = std::abs(res.w - mean) - 0.5;
    if (dev <= 0.0 || var <= 0.0) {
        res.p_value = 1.0;
    } else {
        res.p_value = std::min(1.0, std::erfc(dev / std::sqrt(var) / std::sqrt(2.0)));
    }
    return res;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("signed-rank test: samples differ in length");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return wilcoxon_signed_rank(d);
}

std::string_view to_string(EffectEstimator estimator) {
    return estimator == EffectEstimator::Median ? "median" : "hodges-lehmann";
}

EffectEstimator parse_effect_estimator(std::string_view text) {
    if (text == "median") return EffectEstimator::Median;
    if (text == "hodges-lehmann") return EffectEstimator::HodgesLehmann;
    throw InvalidArgument("unknown effect estimator '" + std::string(text) +
                          "' (expected median or hodges-lehmann)");
}

double hodges_lehmann(std::span<const double> differences) {
    if (differences.empty()) throw InvalidArgument("Hodges-Lehmann estimate of an empty list");
    std::vector<double> walsh;
    walsh.reserve(differences.size() * (differences.size() + 1) / 2);
    for (std::size_t i = 0; i < differences.size(); ++i)
        for (std::size_t j = i; j < differences.size(); ++j)
            walsh.push_back(0.5 * (differences[i] + differences[j]));
    std::sort(walsh.begin(), walsh.end());
    return median_sorted(walsh);
}

EffectSize median_difference_ci(std::span<const double> differences, const BootstrapConfig& cfg) {
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw InvalidArgument("CI level must lie in (0, 1)");
    if (cfg.resamples < 1) throw InvalidArgument("bootstrap needs at least one resample");
    EffectSize out;
    out.level = cfg.level;
    out.estimator = cfg.estimator;
    out.n = static_cast<int>(differences.size());
    if (out.n < kMinEffectPairs) return out;

    const std::vector<double> base = sorted_copy(differences);
    std::vector<double> scratch = base;
    out.estimate = estimate(scratch, cfg.estimator);

    std::mt19937_64 rng(cfg.seed);
    std::vector<double> stats(static_cast<std::size_t>(cfg.resamples));
    for (auto& s : stats) {
        for (auto& x : scratch) x = base[detail::uniform_index(rng, base.size())];
        s = estimate(scratch, cfg.estimator);
    }
    std::sort(stats.begin(), stats.end());
    const double alpha = 1.0 - cfg.level;
    out.ci_low = std::min(quantile_sorted(stats, alpha / 2.0), out.estimate);
    out.ci_high = std::max(quantile_sorted(stats, 1.0 - alpha / 2.0), out.estimate);
    out.valid = true;
    return out;
}

} // namespace viasim
