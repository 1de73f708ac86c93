#ifndef MBDA_STATS_HPP
#define MBDA_STATS_HPP

#include <span>
#include <vector>

namespace mbda::stats {

/// Thread-safe log-gamma (std::lgamma writes the global signgam).
[[nodiscard]] double log_gamma(double x);

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7, the R default). `prob` in [0, 1].
[[nodiscard]] double quantile_type7(std::span<const double> values, double prob);

/// Same, but `sorted` must already be ascending.
[[nodiscard]] double quantile_type7_sorted(std::span<const double> sorted,
                                           double prob);

[[nodiscard]] double median(std::span<const double> values);
[[nodiscard]] double mean(std::span<const double> values);
[[nodiscard]] double variance(std::span<const double> values);  // n - 1
[[nodiscard]] double pearson(std::span<const double> x, std::span<const double> y);

/// Ranks starting at 1, ties receive the average of the ranks they span.
[[nodiscard]] std::vector<double> average_ranks(std::span<const double> values);

[[nodiscard]] double log_sum_exp(std::span<const double> values);

/// Geometric mean of strictly positive values.
[[nodiscard]] double geometric_mean(std::span<const double> values);

}  // namespace mbda::stats

#endif
