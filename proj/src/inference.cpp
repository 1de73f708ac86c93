#include "mbda/inference.hpp"

#include "mbda/error.hpp"
#include "mbda/io.hpp"
#include "mbda/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace mbda {

std::vector<std::vector<double>> compute_ppi(const std::vector<Trace> &traces) {
  if (traces.empty()) throw Error(ErrorKind::InvalidArgument, "no traces");
  const auto &sizes = traces.front().level_sizes;
  std::vector<double> flat(traces.front().total_taxa(), 0.0);
  for (const auto &t : traces) {
    if (t.level_sizes != sizes) throw Error(ErrorKind::InvalidArgument, "traces differ in shape");
    if (t.records() == 0) throw Error(ErrorKind::InvalidArgument, "trace has no recorded iterations");
    const auto p = t.ppi();
    for (std::size_t j = 0; j < p.size(); ++j) flat[j] += p[j];
  }
  std::vector<std::vector<double>> out;
  std::size_t offset = 0;
  for (auto lp : sizes) {
    std::vector<double> lv(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                           flat.begin() + static_cast<std::ptrdiff_t>(offset + lp));
    for (double &v : lv) v /= static_cast<double>(traces.size());
    out.push_back(std::move(lv));
    offset += lp;
  }
  return out;
}

FdrSelection fdr_select(std::span<const double> ppis, double target) {
  if (!(target > 0.0 && target < 1.0))
    throw Error(ErrorKind::InvalidArgument, "target FDR must lie in (0, 1)");
  std::vector<std::size_t> order(ppis.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    if (!(ppis[j] >= 0.0 && ppis[j] <= 1.0)) throw Error(ErrorKind::InvalidArgument, "PPI outside [0, 1]");
    order[j] = j;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ppis[a] > ppis[b]; });

  // Walk tie blocks in order of increasing 1 - PPI; FDR is nondecreasing.
  FdrSelection best;
  double sum = 0.0;
  std::size_t pos = 0;
  while (pos < order.size()) {
    const double v = 1.0 - ppis[order[pos]];
    std::size_t end = pos;
    double block = 0.0;
    while (end < order.size() && 1.0 - ppis[order[end]] == v) {
      block += v;
      ++end;
    }
    const double fdr = (sum + block) / static_cast<double>(end);
    if (fdr > target) break;
    sum += block;
    pos = end;
    best.fdr = fdr;
    best.threshold = std::nextafter(v, std::numeric_limits<double>::infinity());
  }
  best.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(pos));
  std::sort(best.selected.begin(), best.selected.end());
  return best;
}

Interval credible_interval(std::vector<double> draws, double mass) {
  if (draws.empty()) throw Error(ErrorKind::InvalidArgument, "no draws");
  std::sort(draws.begin(), draws.end());
  const double tail = 0.5 * (1.0 - mass);
  return {stats::quantile_type7_sorted(draws, 0.5), stats::quantile_type7_sorted(draws, tail),
          stats::quantile_type7_sorted(draws, 1.0 - tail)};
}

std::vector<Interval> fold_change_summary(const std::vector<Trace> &traces, int k1, int k2) {
  if (traces.empty()) throw Error(ErrorKind::InvalidArgument, "no traces");
  const int k = traces.front().num_groups;
  if (k1 < 0 || k2 < 0 || k1 >= k || k2 >= k || k1 == k2)
    throw Error(ErrorKind::InvalidArgument, "invalid group pair");
  const std::size_t p = traces.front().total_taxa();
  std::vector<Interval> out(p);
  std::vector<double> draws;
  for (std::size_t j = 0; j < p; ++j) {
    draws.clear();
    for (const auto &t : traces) {
      if (!t.has_group_means) throw Error(ErrorKind::NotApplicable, "trace did not record group means");
      for (std::size_t r = 0; r < t.records(); ++r)
        draws.push_back(static_cast<double>(t.group_mean_at(r, j, static_cast<std::size_t>(k2))) -
                        static_cast<double>(t.group_mean_at(r, j, static_cast<std::size_t>(k1))));
    }
    out[j] = credible_interval(draws);
  }
  return out;
}

SizeFactorSummary size_factor_summary(const std::vector<Trace> &traces) {
  if (traces.empty()) throw Error(ErrorKind::InvalidArgument, "no traces");
  for (const auto &t : traces)
    if (!t.has_s) throw Error(ErrorKind::NotApplicable, "size factors were fixed by a plug-in normalization");
  const std::size_t n = traces.front().n;
  SizeFactorSummary out;
  std::vector<double> draws;
  for (std::size_t i = 0; i < n; ++i) {
    draws.clear();
    for (const auto &t : traces)
      for (std::size_t r = 0; r < t.records(); ++r) draws.push_back(t.s_at(r, i));
    out.mean.push_back(stats::mean(draws));
    const auto ci = credible_interval(draws);
    out.lower.push_back(ci.lower);
    out.upper.push_back(ci.upper);
  }
  return out;
}

bool operator==(const Interval &a, const Interval &b) {
  return a.median == b.median && a.lower == b.lower && a.upper == b.upper;
}

bool operator==(const FoldChange &a, const FoldChange &b) {
  return a.k1 == b.k1 && a.k2 == b.k2 && a.ci == b.ci && a.direction == b.direction;
}

void reselect(PosteriorReport &report, double target_fdr) {
  std::vector<double> ppis;
  for (const auto &t : report.taxa) ppis.push_back(t.ppi);
  const auto sel = fdr_select(ppis, target_fdr);
  for (auto &t : report.taxa) t.selected = false;
  for (auto j : sel.selected) report.taxa[j].selected = true;
  report.target_fdr = target_fdr;
  report.threshold = sel.threshold;
  report.realized_fdr = sel.fdr;
}

PosteriorReport build_report(const std::vector<Trace> &traces, const ModelData &data, double target_fdr) {
  PosteriorReport rep;
  const auto ppi = compute_ppi(traces);
  const int k = data.num_groups();
  std::vector<std::pair<int, std::vector<Interval>>> pairs;
  if (traces.front().has_group_means)
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b) pairs.push_back({a * k + b, fold_change_summary(traces, a, b)});

  std::size_t flat = 0;
  for (std::size_t l = 0; l < ppi.size(); ++l)
    for (std::size_t j = 0; j < ppi[l].size(); ++j, ++flat) {
      TaxonResult t;
      t.level = static_cast<int>(l + 1);
      t.taxon_id = data.levels[l].taxon_ids[j];
      t.ppi = ppi[l][j];
      for (const auto &[code, cis] : pairs) {
        FoldChange fc{code / k, code % k, cis[flat], 0};
        if (fc.ci.lower > 0.0) fc.direction = 1;
        if (fc.ci.upper < 0.0) fc.direction = -1;
        t.fold_changes.push_back(fc);
      }
      rep.taxa.push_back(std::move(t));
    }
  reselect(rep, target_fdr);

  if (traces.front().has_s) {
    const auto sf = size_factor_summary(traces);
    for (std::size_t i = 0; i < sf.mean.size(); ++i)
      rep.samples.push_back({data.sample_ids[i], sf.mean[i], sf.lower[i], sf.upper[i]});
  }
  return rep;
}

void write_taxa_tsv(const std::filesystem::path &path, const PosteriorReport &report) {
  std::ostringstream out;
  out << "level\ttaxon_id\tppi\tselected";
  if (!report.taxa.empty())
    for (const auto &fc : report.taxa.front().fold_changes) {
      const std::string tag = "lfc_" + std::to_string(fc.k1 + 1) + "_" + std::to_string(fc.k2 + 1);
      out << '\t' << tag << "_median\t" << tag << "_lower\t" << tag << "_upper\t" << tag << "_direction";
    }
  out << '\n';
  for (const auto &t : report.taxa) {
    out << t.level << '\t' << t.taxon_id << '\t' << io::format_double(t.ppi) << '\t' << (t.selected ? 1 : 0);
    for (const auto &fc : t.fold_changes)
      out << '\t' << io::format_double(fc.ci.median) << '\t' << io::format_double(fc.ci.lower) << '\t'
          << io::format_double(fc.ci.upper) << '\t' << fc.direction;
    out << '\n';
  }
  io::write_text(path, out.str());
}

std::vector<TaxonResult> read_taxa_tsv(const std::filesystem::path &path) {
  const auto rows = io::read_delimited(path);
  if (rows.empty() || rows.front().size() < 4 || rows.front()[0] != "level")
    throw Error(ErrorKind::Parse, "'" + path.string() + "' is not a taxa report");
  const auto &header = rows.front();
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t c = 4; c + 3 < header.size(); c += 4) {
    int a = 0, b = 0;
    if (std::sscanf(header[c].c_str(), "lfc_%d_%d_median", &a, &b) != 2)
      throw Error(ErrorKind::Parse, "bad fold-change column '" + header[c] + "'");
    pairs.push_back({a - 1, b - 1});
  }
  std::vector<TaxonResult> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto &row = rows[r];
    if (row.size() != header.size()) throw Error(ErrorKind::Parse, "ragged row in taxa report");
    TaxonResult t;
    t.level = static_cast<int>(io::parse_integer(row[0], "level"));
    t.taxon_id = row[1];
    t.ppi = io::parse_double(row[2], "ppi");
    t.selected = io::parse_integer(row[3], "selected") != 0;
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const std::size_t c = 4 + 4 * q;
      FoldChange fc{pairs[q].first, pairs[q].second,
                    {io::parse_double(row[c], "median"), io::parse_double(row[c + 1], "lower"),
                     io::parse_double(row[c + 2], "upper")},
                    static_cast<int>(io::parse_integer(row[c + 3], "direction"))};
      t.fold_changes.push_back(fc);
    }
    out.push_back(std::move(t));
  }
  return out;
}

void write_samples_tsv(const std::filesystem::path &path, const PosteriorReport &report) {
  std::ostringstream out;
  out << "sample_id\ts_mean\ts_lower\ts_upper\n";
  for (const auto &s : report.samples)
    out << s.sample_id << '\t' << io::format_double(s.mean) << '\t' << io::format_double(s.lower) << '\t'
        << io::format_double(s.upper) << '\n';
  io::write_text(path, out.str());
}

std::vector<SampleResult> read_samples_tsv(const std::filesystem::path &path) {
  const auto rows = io::read_delimited(path);
  if (rows.empty() || rows.front().size() != 4 || rows.front()[0] != "sample_id")
    throw Error(ErrorKind::Parse, "'" + path.string() + "' is not a sample report");
  std::vector<SampleResult> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto &row = rows[r];
    if (row.size() != 4) throw Error(ErrorKind::Parse, "ragged row in sample report");
    out.push_back({row[0], io::parse_double(row[1], "s_mean"), io::parse_double(row[2], "s_lower"),
                   io::parse_double(row[3], "s_upper")});
  }
  return out;
}

}  // namespace mbda
