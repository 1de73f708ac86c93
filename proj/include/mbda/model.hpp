#ifndef MBDA_MODEL_HPP
#define MBDA_MODEL_HPP

#include "mbda/data_model.hpp"
#include "mbda/likelihoods.hpp"
#include "mbda/matrix.hpp"
#include "mbda/normalization.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mbda {

enum class ModelKind { DM, ZINB };

[[nodiscard]] std::string_view to_string(ModelKind m);
[[nodiscard]] ModelKind parse_model_kind(std::string_view name);

/// Bottom-level ZINB priors: pi_i ~ Be(a_pi, b_pi), phi_j ~ Ga(a_phi, b_phi).
struct BottomHyper {
  double a_pi = 1.0;
  double b_pi = 1.0;
  double a_phi = 0.001;
  double b_phi = 0.001;
};

/// Truncated stick-breaking mixture prior on log s. `components` = 0 means
/// n / 2 (at least 1). tau_nu is the prior standard deviation of nu_m.
struct DppHyper {
  int components = 0;
  double sigma_s = 1.0;
  double c_s = 0.0;
  double tau_nu = 1.0;
  double a_t = 1.0;
  double b_t = 1.0;
  double a_m = 1.0;
  double b_m = 1.0;
};

struct SelectionPrior {
  enum class Kind { BetaBernoulli, Mrf };
  Kind kind = Kind::BetaBernoulli;
  double a_omega = 0.2;
  double b_omega = 1.8;
  double d = -2.2;
  double f = 0.5;
};

/// Random-walk scales. The phi proposal is Ga(phi^2 / tau, phi / tau) with
/// tau = tau_phi * phi (variance proportional to the current value); log s
/// moves with sd tau_s; alpha moves on the linear scale with sd tau_alpha.
struct ProposalScales {
  double tau_phi = 1.0;
  double tau_s = 0.1;
  double tau_alpha = 10.0;
  double tau_scale = 0.1;
};

struct ModelHyper {
  ModelKind model = ModelKind::ZINB;
  TopLevelHyper top;
  BottomHyper bottom;
  DppHyper dpp;
  SelectionPrior prior;
  ProposalScales scales;
  int gamma_repeats = 20;
  int scale_repeats = 10;

  void validate(int num_groups) const;
};

/// Immutable data for one analysis: counts at every level, labels, tree
/// links, and fixed size factors when a plug-in normalization is used.
struct LevelData {
  Matrix<double> y;
  std::vector<std::string> taxon_ids;
  std::vector<double> row_totals;
  std::vector<int> parent;                         // column index at level + 1
  std::vector<std::vector<std::size_t>> children;  // column indices at level - 1
  std::vector<std::vector<std::size_t>> bottom_descendants;
  std::size_t p() const noexcept { return y.cols(); }
};

struct ModelData {
  GroupLabels labels;
  std::vector<std::string> sample_ids;
  std::vector<LevelData> levels;
  NormMethod normalization = NormMethod::DPP;
  std::vector<double> fixed_s;  // empty when s is sampled

  [[nodiscard]] std::size_t n() const noexcept { return labels.n(); }
  [[nodiscard]] int num_groups() const noexcept { return labels.num_groups(); }
  [[nodiscard]] bool sample_s() const noexcept { return fixed_s.empty(); }
  [[nodiscard]] std::size_t total_taxa() const;

  static ModelData build(const std::vector<LevelTable> &levels, GroupLabels labels,
                         NormMethod normalization);
};

struct DppState {
  std::vector<int> g;                // outer component per sample, 0..M-1
  std::vector<std::uint8_t> eps;     // inner component per sample
  std::vector<double> t;
  std::vector<double> nu;
  std::vector<double> v;             // stick fractions, v[M-1] = 1
  std::vector<double> psi;
};

struct LevelState {
  Matrix<double> alpha;
  Matrix<double> log_alpha;
  Matrix<std::uint8_t> eta;          // structural-zero indicators at this level
  std::vector<double> phi;
  std::vector<std::uint8_t> gamma;
  std::size_t selected = 0;          // sum of gamma
  // Per column: K + 1 blocks, [0] pooled and [1 + k] group k.
  std::vector<GaussStats> stats;
  std::vector<double> alpha_row_sum;  // DM only

  [[nodiscard]] std::span<const GaussStats> group_stats(std::size_t j, std::size_t k_groups) const {
    return {stats.data() + j * (k_groups + 1) + 1, k_groups};
  }
};

struct ChainState {
  std::vector<LevelState> levels;
  std::vector<double> s;
  std::vector<double> log_s;
  std::vector<double> pi;
  DppState dpp;
};

}  // namespace mbda

#endif
