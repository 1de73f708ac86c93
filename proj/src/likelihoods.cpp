#include "mbda/likelihoods.hpp"

#include "mbda/error.hpp"
#include "mbda/stats.hpp"

#include <cmath>
#include <numbers>

namespace mbda {

using stats::log_gamma;

TopLevelHyper TopLevelHyper::uniform(int num_groups, double a, double b, double h) {
  const auto size = static_cast<std::size_t>(num_groups + 1);
  return TopLevelHyper{std::vector<double>(size, a), std::vector<double>(size, b),
                       std::vector<double>(size, h)};
}

void TopLevelHyper::validate(int num_groups) const {
  const auto size = static_cast<std::size_t>(num_groups + 1);
  if (a.size() != size || b.size() != size || h.size() != size)
    throw Error(ErrorKind::InvalidParameter, "top-level hyperparameters need K + 1 entries");
  for (std::size_t k = 0; k < size; ++k)
    if (!(a[k] > 0.0 && b[k] > 0.0 && h[k] > 0.0))
      throw Error(ErrorKind::InvalidParameter, "top-level hyperparameters must be positive");
}

double nb_log_pmf(double y, double lambda, double phi) {
  if (!std::isfinite(lambda) || !std::isfinite(phi) || !(lambda > 0.0) || !(phi > 0.0) || y < 0.0)
    throw Error(ErrorKind::InvalidParameter, "NB needs finite lambda, phi > 0 and y >= 0");
  return log_gamma(y + phi) - log_gamma(y + 1.0) - log_gamma(phi) + phi * std::log(phi) +
         nb_lambda_kernel(y, lambda, phi);
}

double zinb_entry_log_lik(double y, double alpha, bool eta, double phi, double s) {
  if (eta) {
    if (y > 0.0)
      throw Error(ErrorKind::InconsistentState, "structural zero indicator set on a positive count");
    return 0.0;
  }
  return nb_log_pmf(y, s * alpha, phi);
}

double dm_row_log_lik(std::span<const double> y_row, std::span<const double> alpha_row) {
  if (y_row.size() != alpha_row.size())
    throw Error(ErrorKind::InvalidArgument, "count and abundance rows differ in length");
  double y_tot = 0.0, a_tot = 0.0, acc = 0.0;
  for (std::size_t j = 0; j < y_row.size(); ++j) {
    const double a = alpha_row[j];
    if (!(a > 0.0) || !std::isfinite(a))
      throw Error(ErrorKind::InvalidParameter, "Dirichlet-multinomial needs alpha > 0");
    const double y = y_row[j];
    y_tot += y;
    a_tot += a;
    acc += log_gamma(y + a) - log_gamma(y + 1.0) - log_gamma(a);
  }
  return acc + log_gamma(y_tot + 1.0) + log_gamma(a_tot) - log_gamma(y_tot + a_tot);
}

double nig_log_marginal(const GaussStats &st, double a, double b, double h) {
  const double n = st.count;
  if (n <= 0.0) return 0.0;
  const double quad = st.sum_sq - st.sum * st.sum / (n + 1.0 / h);
  const double half_n = 0.5 * n;
  return -half_n * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(n * h + 1.0) +
         log_gamma(a + half_n) - log_gamma(a) + a * std::log(b) -
         (a + half_n) * std::log(b + 0.5 * quad);
}

double marginal_from_stats(std::span<const GaussStats> group_stats, const GaussStats &pooled,
                           bool gamma, const TopLevelHyper &hyper) {
  if (!gamma) return nig_log_marginal(pooled, hyper.a[0], hyper.b[0], hyper.h[0]);
  double acc = 0.0;
  for (std::size_t k = 0; k < group_stats.size(); ++k)
    acc += nig_log_marginal(group_stats[k], hyper.a[k + 1], hyper.b[k + 1], hyper.h[k + 1]);
  return acc;
}

double marginal_feature_log_lik(std::span<const double> log_alpha_col, const GroupLabels &labels,
                                bool gamma, const TopLevelHyper &hyper) {
  if (log_alpha_col.size() != labels.n())
    throw Error(ErrorKind::InvalidArgument, "column length does not match labels");
  std::vector<GaussStats> groups(static_cast<std::size_t>(labels.num_groups()));
  GaussStats pooled;
  for (std::size_t i = 0; i < log_alpha_col.size(); ++i) {
    if (!std::isfinite(log_alpha_col[i]))
      throw Error(ErrorKind::InvalidParameter, "non-finite log abundance");
    groups[static_cast<std::size_t>(labels.group(i))].add(log_alpha_col[i]);
    pooled.add(log_alpha_col[i]);
  }
  return marginal_from_stats(groups, pooled, gamma, hyper);
}

}  // namespace mbda
