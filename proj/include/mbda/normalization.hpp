#ifndef MBDA_NORMALIZATION_HPP
#define MBDA_NORMALIZATION_HPP

#include "mbda/data_model.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mbda {

enum class NormMethod { TSS, Q75, RLE, TMM, CSS, DPP };
enum class SizeConstraint { GeometricMeanOne, StochasticZeroMean };

[[nodiscard]] std::string_view to_string(NormMethod m);
[[nodiscard]] NormMethod parse_norm_method(std::string_view name);

struct SizeFactors {
  std::vector<double> s;
  NormMethod method = NormMethod::TSS;
  SizeConstraint constraint = SizeConstraint::GeometricMeanOne;
};

/// Value below which `fraction * p` of a sample's counts fall: the order
/// statistic at 0-based index floor(fraction * p), capped at p - 1. This is
/// the quantile used by the Q75 and CSS scalings.
[[nodiscard]] double count_quantile(std::span<const Count> row, double fraction);

SizeFactors estimate_tss(const CountTable &table);
SizeFactors estimate_q75(const CountTable &table);
SizeFactors estimate_rle(const CountTable &table);
/// `ref_sample` defaults to the sample whose upper-quartile count is closest
/// to the mean upper-quartile count (lowest index on ties).
SizeFactors estimate_tmm(const CountTable &table, std::optional<std::size_t> ref_sample = {});
SizeFactors estimate_css(const CountTable &table);

/// Dispatch for the plug-in methods; DPP is rejected (it is sampled).
SizeFactors estimate_size_factors(const CountTable &table, NormMethod method);

/// Rescales so that the product of the factors is one.
void normalize_geometric(std::vector<double> &s);

}  // namespace mbda

#endif
