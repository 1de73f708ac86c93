#ifndef MBDA_ENGINE_HPP
#define MBDA_ENGINE_HPP

#include "mbda/model.hpp"
#include "mbda/samplers.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mbda {

struct RunConfig {
  ModelKind model = ModelKind::ZINB;
  NormMethod normalization = NormMethod::DPP;
  int iterations = 20000;
  int burn_in = -1;  // -1: iterations / 2
  int thinning = 1;
  int chains = 4;
  int threads = 0;   // 0: one per chain, capped by hardware
  std::uint64_t seed = 1;
  bool use_tree = true;
  double top_a = 2.0;
  double top_b = 1.0;
  double top_h = 100.0;
  BottomHyper bottom;
  DppHyper dpp;
  SelectionPrior prior;
  ProposalScales scales;
  int gamma_repeats = 20;
  int scale_repeats = 10;
  bool record_group_means = true;
  double convergence_threshold = 0.9;
  std::string dump_path;  // state dump on numerical failure; empty: message only

  [[nodiscard]] int effective_burn_in() const { return burn_in < 0 ? iterations / 2 : burn_in; }
  [[nodiscard]] ModelHyper hyper(int num_groups) const;
  void validate() const;
};

/// Post-burn-in draws of one chain. Flat column index runs over levels in
/// order (level 1 first).
struct Trace {
  std::uint64_t seed = 0;
  int thinning = 1;
  int iterations = 0;
  int burn_in = 0;
  std::size_t n = 0;
  int num_groups = 0;
  std::vector<std::size_t> level_sizes;
  bool has_s = false;
  bool has_group_means = false;

  std::vector<std::uint32_t> iteration;
  std::vector<double> loglik;
  std::vector<double> s;                   // records x n
  std::vector<std::uint8_t> gamma;         // records x total taxa
  std::vector<float> group_mean;           // records x total taxa x K
  AcceptanceStats acceptance;

  [[nodiscard]] std::size_t records() const noexcept { return iteration.size(); }
  [[nodiscard]] std::size_t total_taxa() const noexcept;
  [[nodiscard]] bool gamma_at(std::size_t r, std::size_t j) const { return gamma[r * total_taxa() + j] != 0; }
  [[nodiscard]] double s_at(std::size_t r, std::size_t i) const { return s[r * n + i]; }
  [[nodiscard]] double group_mean_at(std::size_t r, std::size_t j, std::size_t k) const {
    return group_mean[(r * total_taxa() + j) * static_cast<std::size_t>(num_groups) + k];
  }
  /// Fraction of draws with gamma = 1, per flat column.
  [[nodiscard]] std::vector<double> ppi() const;

  bool operator==(const Trace &) const = default;
};

struct ChainPair {
  int a = 0;
  int b = 0;
  double correlation = 0.0;
};

struct ConvergenceReport {
  bool applicable = false;
  double threshold = 0.9;
  std::vector<ChainPair> pairs;
  double min_correlation = 0.0;
  bool passed = false;
};

/// Pairwise Pearson correlations of per-chain PPIs. Identical vectors count
/// as 1 even when constant; other constant vectors give 0.
ConvergenceReport convergence_report(const std::vector<Trace> &traces, double threshold);

using ProgressFn = std::function<void(int chain, int iteration)>;

Trace run_chain(const ModelData &data, const RunConfig &config, std::uint64_t chain_seed,
                const ProgressFn &progress = {}, int chain_index = 0);

struct MultiRun {
  std::vector<Trace> traces;
  ConvergenceReport convergence;
};

/// Chain c uses derive_stream_seed(config.seed, c); results do not depend on
/// the thread count.
MultiRun run_multi(const ModelData &data, const RunConfig &config, const ProgressFn &progress = {});

/// Framed binary dump: "MBDATRC1", u32 version, header dims and seed, then one
/// record per recorded iteration (iteration, loglik, s, packed gamma, group
/// means). Little-endian host layout.
void write_trace_binary(const std::string &path, const Trace &trace);
Trace read_trace_binary(const std::string &path);

/// Delimited summary: iteration, loglik, selected count per level, s columns.
void write_trace_tsv(std::ostream &out, const Trace &trace);

}  // namespace mbda

#endif
