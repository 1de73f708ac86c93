#ifndef MBDA_LIKELIHOODS_HPP
#define MBDA_LIKELIHOODS_HPP

#include "mbda/data_model.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace mbda {

/// Normal-inverse-gamma hyperparameters of the top-level mixture, index 0
/// for the pooled (gamma = 0) component and 1..K for the groups.
struct TopLevelHyper {
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> h;

  static TopLevelHyper uniform(int num_groups, double a = 2.0, double b = 1.0, double h = 100.0);
  void validate(int num_groups) const;
};

/// Sufficient statistics of one group's log-abundances: count, sum, sum of
/// squares. The normal-inverse-gamma marginal depends on the data only through these.
struct GaussStats {
  double count = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    count += 1.0;
    sum += x;
    sum_sq += x * x;
  }
  void remove(double x) {
    count -= 1.0;
    sum -= x;
    sum_sq -= x * x;
  }
};

/// log NB(y; mean lambda, size phi).
[[nodiscard]] double nb_log_pmf(double y, double lambda, double phi);

/// The lambda-dependent part of nb_log_pmf: y log(lambda) - (y + phi) log(lambda + phi).
[[nodiscard]] inline double nb_lambda_kernel(double y, double lambda, double phi);

/// log ZINB contribution of one entry given its zero-inflation indicator.
[[nodiscard]] double zinb_entry_log_lik(double y, double alpha, bool eta, double phi, double s);

/// Exact Dirichlet-multinomial log pmf of one sample's counts.
[[nodiscard]] double dm_row_log_lik(std::span<const double> y_row, std::span<const double> alpha_row);

/// Log marginal density of n log-abundances under a Normal model whose mean
/// and variance are integrated against N(0, h sigma^2) x IG(a, b).
[[nodiscard]] double nig_log_marginal(const GaussStats &st, double a, double b, double h);

/// Log marginal of one taxon's log-abundance column under the selection
/// model: gamma = 1 multiplies the per-group marginals, gamma = 0 pools all
/// samples.
[[nodiscard]] double marginal_feature_log_lik(std::span<const double> log_alpha_col,
                                              const GroupLabels &labels, bool gamma,
                                              const TopLevelHyper &hyper);

/// Same, from cached statistics: `group_stats[k]` for groups 0..K-1 and
/// `pooled` for all samples.
[[nodiscard]] double marginal_from_stats(std::span<const GaussStats> group_stats,
                                         const GaussStats &pooled, bool gamma,
                                         const TopLevelHyper &hyper);

inline double nb_lambda_kernel(double y, double lambda, double phi) {
  return (y > 0.0 ? y * std::log(lambda) : 0.0) - (y + phi) * std::log(lambda + phi);
}

}  // namespace mbda

#endif
