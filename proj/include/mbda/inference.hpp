#ifndef MBDA_INFERENCE_HPP
#define MBDA_INFERENCE_HPP

#include "mbda/engine.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mbda {

/// Per-level PPIs: per-chain fractions of draws with gamma = 1, averaged
/// over chains.
std::vector<std::vector<double>> compute_ppi(const std::vector<Trace> &traces);

struct FdrSelection {
  double threshold = 0.0;             // c: select where 1 - PPI < c
  std::vector<std::size_t> selected;  // ascending indices
  double fdr = 0.0;                   // mean of 1 - PPI over the selection
};

/// Largest set {j : 1 - PPI_j < c} whose Bayesian FDR is at most `target`.
/// The search runs over the candidate values {1 - PPI_j}; the reported c is
/// the smallest double strictly above the largest included 1 - PPI.
FdrSelection fdr_select(std::span<const double> ppis, double target);

struct Interval {
  double median = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Equal-tailed 95% interval (type-7 quantiles) of the given draws.
Interval credible_interval(std::vector<double> draws, double mass = 0.95);

/// Per flat taxon: posterior of mean_log_alpha[k2] - mean_log_alpha[k1].
std::vector<Interval> fold_change_summary(const std::vector<Trace> &traces, int k1, int k2);

struct SizeFactorSummary {
  std::vector<double> mean;
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Throws NotApplicable when the traces carry no sampled size factors.
SizeFactorSummary size_factor_summary(const std::vector<Trace> &traces);

struct FoldChange {
  int k1 = 0;
  int k2 = 0;
  Interval ci;
  int direction = 0;  // +1 / -1 when the interval excludes 0
};

struct TaxonResult {
  int level = 1;
  std::string taxon_id;
  double ppi = 0.0;
  bool selected = false;
  std::vector<FoldChange> fold_changes;
  bool operator==(const TaxonResult &) const = default;
};

struct SampleResult {
  std::string sample_id;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool operator==(const SampleResult &) const = default;
};

struct PosteriorReport {
  double target_fdr = 0.05;
  double threshold = 0.0;
  double realized_fdr = 0.0;
  std::vector<TaxonResult> taxa;
  std::vector<SampleResult> samples;  // empty for plug-in normalization
};

bool operator==(const Interval &a, const Interval &b);
bool operator==(const FoldChange &a, const FoldChange &b);

PosteriorReport build_report(const std::vector<Trace> &traces, const ModelData &data, double target_fdr);

/// Re-applies fdr_select to the PPIs already in `report`.
void reselect(PosteriorReport &report, double target_fdr);

void write_taxa_tsv(const std::filesystem::path &path, const PosteriorReport &report);
std::vector<TaxonResult> read_taxa_tsv(const std::filesystem::path &path);
void write_samples_tsv(const std::filesystem::path &path, const PosteriorReport &report);
std::vector<SampleResult> read_samples_tsv(const std::filesystem::path &path);

}  // namespace mbda

#endif
