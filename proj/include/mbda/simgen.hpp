#ifndef MBDA_SIMGEN_HPP
#define MBDA_SIMGEN_HPP

#include "mbda/data_model.hpp"
#include "mbda/matrix.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace mbda {

enum class Scheme { DM, ZINB, Synthetic };

[[nodiscard]] std::string_view to_string(Scheme s);
[[nodiscard]] Scheme parse_scheme(std::string_view name);

struct GeneratorConfig {
  Scheme scheme = Scheme::ZINB;
  int n = 24;
  int p = 200;
  int p_gamma = 10;
  int k = 2;
  double sigma = 2.0;
  std::uint64_t seed = 1;
  // Non-discriminating log alpha ~ N(0, 4) instead of N(d_0j, sigma^2 / 100).
  bool null_from_prose = false;
  int depth_min = 5000;     // DM scheme
  int depth_max = 10000;
  int synthetic_depth = 10000;

  void validate() const;
};

struct LabeledDataset {
  CountTable table;
  GroupLabels labels;
  std::vector<std::uint8_t> truth;   // per column
  std::vector<double> true_s;        // ZINB scheme
  std::vector<double> true_phi;      // ZINB scheme
  Matrix<double> true_alpha;         // DM / ZINB schemes
  Matrix<double> true_group_mean;    // p x K means of log alpha (DM / ZINB)
  std::vector<std::size_t> permutation;  // synthetic: output column c holds layout column permutation[c]
};

/// Balanced contiguous groups: sample i belongs to group floor(i K / n).
[[nodiscard]] GroupLabels contiguous_groups(int n, int k);

LabeledDataset generate_dm(const GeneratorConfig &config);
LabeledDataset generate_zinb(const GeneratorConfig &config);
LabeledDataset generate_synthetic(const GeneratorConfig &config, std::span<const double> base_counts);
LabeledDataset generate(const GeneratorConfig &config, std::span<const double> base_counts = {});

/// Rank AUC with average ranks for ties; Undefined when one class is empty.
[[nodiscard]] double auc(std::span<const double> scores, std::span<const std::uint8_t> truth);

/// Matthews correlation; 0 when any factor of the denominator is 0.
[[nodiscard]] double mcc(std::span<const std::uint8_t> selected, std::span<const std::uint8_t> truth);

/// The `count` highest scores (ties broken by lower index).
[[nodiscard]] std::vector<std::uint8_t> top_k(std::span<const double> scores, std::size_t count);

enum class BaselineMethod { Anova, KruskalWallis };

struct BaselineResult {
  std::vector<double> p_values;
  std::vector<double> adjusted;  // Benjamini-Hochberg
};

/// Per-taxon test across groups on proportions y_ij / Y_i.
BaselineResult baseline_tests(const CountTable &table, const GroupLabels &labels, BaselineMethod method);

[[nodiscard]] double anova_p_value(std::span<const double> values, const GroupLabels &labels);
[[nodiscard]] double kruskal_wallis_p_value(std::span<const double> values, const GroupLabels &labels);
[[nodiscard]] std::vector<double> benjamini_hochberg(std::span<const double> p_values);

}  // namespace mbda

#endif
