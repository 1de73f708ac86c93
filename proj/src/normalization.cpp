#include "mbda/normalization.hpp"

#include "mbda/error.hpp"
#include "mbda/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mbda {

std::string_view to_string(NormMethod m) {
  switch (m) {
    case NormMethod::TSS: return "tss";
    case NormMethod::Q75: return "q75";
    case NormMethod::RLE: return "rle";
    case NormMethod::TMM: return "tmm";
    case NormMethod::CSS: return "css";
    case NormMethod::DPP: return "dpp";
  }
  return "?";
}

NormMethod parse_norm_method(std::string_view name) {
  for (auto m : {NormMethod::TSS, NormMethod::Q75, NormMethod::RLE, NormMethod::TMM,
                 NormMethod::CSS, NormMethod::DPP})
    if (to_string(m) == name) return m;
  throw Error(ErrorKind::InvalidArgument, "unknown normalization '" + std::string(name) + "'");
}

void normalize_geometric(std::vector<double> &s) {
  double log_sum = 0.0;
  for (double v : s) log_sum += std::log(v);
  const double shift = log_sum / static_cast<double>(s.size());
  for (double &v : s) v = std::exp(std::log(v) - shift);
}

double count_quantile(std::span<const Count> row, double fraction) {
  std::vector<Count> sorted(row.begin(), row.end());
  std::sort(sorted.begin(), sorted.end());
  auto idx = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(sorted.size())));
  idx = std::min(idx, sorted.size() - 1);
  return static_cast<double>(sorted[idx]);
}

namespace {

SizeFactors finish(std::vector<double> raw, NormMethod method) {
  normalize_geometric(raw);
  return SizeFactors{std::move(raw), method, SizeConstraint::GeometricMeanOne};
}

}  // namespace

SizeFactors estimate_tss(const CountTable &table) {
  auto totals = table.row_totals();
  for (std::size_t i = 0; i < totals.size(); ++i)
    if (totals[i] <= 0.0)
      throw Error(ErrorKind::EmptySample, "sample '" + table.sample_ids()[i] + "' has no reads");
  return finish(std::move(totals), NormMethod::TSS);
}

SizeFactors estimate_q75(const CountTable &table) {
  std::vector<double> raw(table.n());
  for (std::size_t i = 0; i < table.n(); ++i) {
    raw[i] = count_quantile(table.counts().row(i), 0.75);
    if (raw[i] <= 0.0)
      throw Error(ErrorKind::DegenerateQuantile,
                  "upper-quartile count is zero in sample '" + table.sample_ids()[i] + "'");
  }
  return finish(std::move(raw), NormMethod::Q75);
}

SizeFactors estimate_rle(const CountTable &table) {
  std::vector<std::size_t> positive;
  for (std::size_t j = 0; j < table.p(); ++j) {
    bool all = true;
    for (std::size_t i = 0; i < table.n() && all; ++i) all = table(i, j) > 0;
    if (all) positive.push_back(j);
  }
  if (positive.empty())
    throw Error(ErrorKind::RleInadmissible,
                "every taxon has a zero count, so the per-taxon geometric means vanish");
  std::vector<double> log_geo(positive.size(), 0.0);
  for (std::size_t c = 0; c < positive.size(); ++c) {
    for (std::size_t i = 0; i < table.n(); ++i)
      log_geo[c] += std::log(static_cast<double>(table(i, positive[c])));
    log_geo[c] /= static_cast<double>(table.n());
  }
  std::vector<double> raw(table.n());
  std::vector<double> ratios(positive.size());
  for (std::size_t i = 0; i < table.n(); ++i) {
    for (std::size_t c = 0; c < positive.size(); ++c)
      ratios[c] = std::exp(std::log(static_cast<double>(table(i, positive[c]))) - log_geo[c]);
    raw[i] = stats::median(ratios);
  }
  return finish(std::move(raw), NormMethod::RLE);
}

SizeFactors estimate_tmm(const CountTable &table, std::optional<std::size_t> ref_sample) {
  const auto totals = table.row_totals();
  for (std::size_t i = 0; i < totals.size(); ++i)
    if (totals[i] <= 0.0)
      throw Error(ErrorKind::EmptySample, "sample '" + table.sample_ids()[i] + "' has no reads");

  std::size_t ref = 0;
  if (ref_sample) {
    if (*ref_sample >= table.n()) throw Error(ErrorKind::InvalidArgument, "reference sample out of range");
    ref = *ref_sample;
  } else {
    std::vector<double> uq(table.n());
    for (std::size_t i = 0; i < table.n(); ++i) {
      std::vector<double> row(table.p());
      for (std::size_t j = 0; j < table.p(); ++j) row[j] = static_cast<double>(table(i, j));
      uq[i] = stats::quantile_type7(row, 0.75);
    }
    const double target = stats::mean(uq);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < table.n(); ++i) {
      if (std::abs(uq[i] - target) < best) {
        best = std::abs(uq[i] - target);
        ref = i;
      }
    }
  }

  std::vector<double> raw(table.n());
  for (std::size_t i = 0; i < table.n(); ++i) {
    if (i == ref) {
      raw[i] = totals[i];
      continue;
    }
    std::vector<double> m_vals, a_vals, var;
    for (std::size_t j = 0; j < table.p(); ++j) {
      const double yi = static_cast<double>(table(i, j));
      const double yr = static_cast<double>(table(ref, j));
      if (yi <= 0.0 || yr <= 0.0) continue;
      const double pi = yi / totals[i];
      const double pr = yr / totals[ref];
      m_vals.push_back(std::log(pi / pr));
      a_vals.push_back(0.5 * std::log(pi * pr));
      var.push_back((totals[i] - yi) / (yi * totals[i]) + (totals[ref] - yr) / (yr * totals[ref]));
    }
    const std::size_t g = m_vals.size();
    if (g == 0)
      throw Error(ErrorKind::TmmDegenerate, "sample '" + table.sample_ids()[i] +
                                                "' shares no positive taxa with the reference");
    // Keep M-ranks inside the central 40% and A-ranks inside the central 90%.
    const auto m_rank = stats::average_ranks(m_vals);
    const auto a_rank = stats::average_ranks(a_vals);
    const double lo_m = std::floor(static_cast<double>(g) * 0.3) + 1.0;
    const double hi_m = static_cast<double>(g) + 1.0 - lo_m;
    const double lo_a = std::floor(static_cast<double>(g) * 0.05) + 1.0;
    const double hi_a = static_cast<double>(g) + 1.0 - lo_a;
    double num = 0.0, den = 0.0;
    std::size_t kept = 0;
    for (std::size_t c = 0; c < g; ++c) {
      if (m_rank[c] < lo_m || m_rank[c] > hi_m || a_rank[c] < lo_a || a_rank[c] > hi_a) continue;
      const double w = var[c] > 0.0 ? 1.0 / var[c] : 0.0;
      num += w * m_vals[c];
      den += w;
      ++kept;
    }
    if (kept == 0 || den <= 0.0)
      throw Error(ErrorKind::TmmDegenerate, "trimming removed every taxon for sample '" +
                                                table.sample_ids()[i] + "'");
    raw[i] = totals[i] * std::exp(num / den);
  }
  return finish(std::move(raw), NormMethod::TMM);
}

SizeFactors estimate_css(const CountTable &table) {
  std::vector<double> raw(table.n());
  for (std::size_t i = 0; i < table.n(); ++i) {
    const auto row = table.counts().row(i);
    const double q = count_quantile(row, 0.5);
    double acc = 0.0;
    for (Count c : row)
      if (static_cast<double>(c) <= q) acc += static_cast<double>(c);
    if (acc <= 0.0)
      throw Error(ErrorKind::DegenerateQuantile,
                  "cumulative sum up to the median is zero in sample '" + table.sample_ids()[i] + "'");
    raw[i] = acc;
  }
  return finish(std::move(raw), NormMethod::CSS);
}

SizeFactors estimate_size_factors(const CountTable &table, NormMethod method) {
  switch (method) {
    case NormMethod::TSS: return estimate_tss(table);
    case NormMethod::Q75: return estimate_q75(table);
    case NormMethod::RLE: return estimate_rle(table);
    case NormMethod::TMM: return estimate_tmm(table);
    case NormMethod::CSS: return estimate_css(table);
    case NormMethod::DPP: break;
  }
  throw Error(ErrorKind::InvalidArgument, "DPP size factors are sampled, not estimated");
}

}  // namespace mbda
