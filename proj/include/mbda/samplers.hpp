#ifndef MBDA_SAMPLERS_HPP
#define MBDA_SAMPLERS_HPP

#include "mbda/model.hpp"
#include "mbda/random.hpp"

#include <span>
#include <utility>

namespace mbda {

/// Acceptance counters, reset by the engine each run.
struct AcceptanceStats {
  std::uint64_t alpha_tried = 0, alpha_accepted = 0;
  std::uint64_t phi_tried = 0, phi_accepted = 0;
  std::uint64_t s_tried = 0, s_accepted = 0;
  std::uint64_t gamma_tried = 0, gamma_accepted = 0;
  std::uint64_t t_tried = 0, t_accepted = 0;
  std::uint64_t scale_tried = 0, scale_accepted = 0;

  bool operator==(const AcceptanceStats &) const = default;
};

/// Starting state: gamma with 5% of taxa switched on, alpha = y / s_TSS + 0.5,
/// s from TSS (or the fixed plug-in factors), phi = 10, eta ~ Bern(0.5) on
/// zeros, DPP components from their priors.
ChainState initialize_state(const ModelData &data, const ModelHyper &hyper, Rng &rng);

/// Recomputes log-abundances, column statistics, DM row sums and upper-level
/// structural-zero indicators from alpha and the bottom-level eta.
void refresh_caches(ChainState &state, const ModelData &data, const ModelHyper &hyper);

// --- bottom level (ZINB) -----------------------------------------------------

void update_eta(ChainState &state, const ModelData &data, Rng &rng);
void update_pi(ChainState &state, const ModelData &data, const ModelHyper &hyper, Rng &rng);
void update_phi(ChainState &state, const ModelData &data, std::size_t level,
                const ModelHyper &hyper, Rng &rng, AcceptanceStats *acc = nullptr);
void update_s(ChainState &state, const ModelData &data, const ModelHyper &hyper, Rng &rng,
              AcceptanceStats *acc = nullptr);

/// Joint shift of every log s_i by +d and every log alpha by -d, which leaves
/// each s_i alpha_ij and so the likelihood unchanged. Accepted on the mixture
/// prior of log s and the selection-model marginals alone. Runs `repeats`
/// random-walk steps on d; a no-op without sampled size factors.
void update_scale(ChainState &state, const ModelData &data, const ModelHyper &hyper, Rng &rng, int repeats,
                  AcceptanceStats *acc = nullptr);

// --- size-factor mixture prior -----------------------------------------------

/// psi_1 = v_1, psi_m = v_m prod_{u<m} (1 - v_u).
[[nodiscard]] std::vector<double> stick_breaking(std::span<const double> v);

/// Mean of the inner component `eps` of outer component `m`.
[[nodiscard]] double dpp_component_mean(const DppState &dpp, const DppHyper &hyper,
                                        std::size_t m, bool eps);

/// Prior mean of log s implied by (psi, t, nu): sum_m psi_m [t_m nu_m +
/// (1 - t_m) (c_s - t_m nu_m) / (1 - t_m)], which equals c_s by construction.
[[nodiscard]] double dpp_prior_mean_log_s(const DppState &dpp, const DppHyper &hyper);

/// (c_m, e_m) of the conjugate nu_m update.
[[nodiscard]] std::pair<double, double> nu_sufficient(const DppState &dpp, const DppHyper &hyper,
                                                      std::span<const double> log_s, std::size_t m);

DppState draw_dpp_prior(std::size_t n, const DppHyper &hyper, Rng &rng);

/// Gibbs block for the assignment variables and component parameters:
/// g (with eps integrated out), eps | g, t (independence MH from its count
/// conditional), nu, v and psi.
void update_dpp(ChainState &state, const ModelData &data, const ModelHyper &hyper, Rng &rng,
                AcceptanceStats *acc = nullptr);
void update_dpp_block(DppState &dpp, std::span<const double> log_s, const DppHyper &hyper, Rng &rng,
                      AcceptanceStats *acc = nullptr);

// --- abundances and selection --------------------------------------------------

/// Log of the alpha(i, j) full conditional up to a constant, evaluated at
/// `value`: bottom-level likelihood terms involving the entry, the column's
/// selection-model marginal, and the 1/alpha Jacobian of the log transform.
[[nodiscard]] double alpha_log_target(const ChainState &state, const ModelData &data,
                                      const ModelHyper &hyper, std::size_t level, std::size_t i,
                                      std::size_t j, double value);

void update_alpha(ChainState &state, const ModelData &data, std::size_t level,
                  const ModelHyper &hyper, Rng &rng, AcceptanceStats *acc = nullptr);

/// DM only: upper-level alpha as sums of children.
void aggregate_alpha(ChainState &state, const ModelData &data, std::size_t level,
                     const ModelHyper &hyper);

/// True when column j at `level` has structural-zero entries (ZINB only).
[[nodiscard]] bool has_structural_entries(const ChainState &state, const ModelHyper &hyper,
                                          std::size_t level, std::size_t j);

/// Exact block draw of the log-abundances of structural-zero entries of
/// column j from their conditional given gamma_j and the remaining entries:
/// (mu, sigma^2) from the normal-inverse-gamma posterior, then fresh normals.
void redraw_structural_alpha(ChainState &state, const ModelData &data, std::size_t level, std::size_t j,
                             const ModelHyper &hyper, Rng &rng);

/// Log prior odds of flipping gamma_j at `level` (proposed over current).
[[nodiscard]] double gamma_log_prior_ratio(const ChainState &state, const ModelData &data,
                                           const SelectionPrior &prior, std::size_t level,
                                           std::size_t j);

/// Add-delete move. Under ZINB the flip is evaluated with the structural-zero
/// log-abundances integrated out, and on acceptance those are redrawn from
/// their conditional under the new gamma_j (a collapsed block move).
void update_gamma(ChainState &state, const ModelData &data, std::size_t level,
                  const ModelHyper &hyper, int repeats, Rng &rng, AcceptanceStats *acc = nullptr);

/// One full iteration in dependency order.
void sweep(ChainState &state, const ModelData &data, const ModelHyper &hyper, Rng &rng,
           AcceptanceStats *acc = nullptr);

/// Bottom-level data log-likelihood (ZINB entries with eta = 0, or DM rows).
[[nodiscard]] double bottom_log_likelihood(const ChainState &state, const ModelData &data,
                                           const ModelHyper &hyper);

}  // namespace mbda

#endif
