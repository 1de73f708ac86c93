#include "doctest.h"
#include "test_support.hpp"

#include "mbda/engine.hpp"
#include "mbda/error.hpp"
#include "mbda/inference.hpp"
#include "mbda/random.hpp"
#include "mbda/simgen.hpp"

#include <cmath>

using namespace mbda;
using mbda::testing::TempDir;

namespace {

// One-level trace over p taxa, K = 2, with gamma given record by record.
Trace gamma_trace(const std::vector<std::vector<int>> &records) {
  Trace t;
  t.n = 2;
  t.num_groups = 2;
  t.level_sizes = {records.front().size()};
  for (std::size_t r = 0; r < records.size(); ++r) {
    t.iteration.push_back(static_cast<std::uint32_t>(r + 1));
    t.loglik.push_back(0.0);
    for (int g : records[r]) t.gamma.push_back(static_cast<std::uint8_t>(g));
  }
  return t;
}

Trace column_trace(std::size_t records, double share) {
  std::vector<std::vector<int>> rows;
  for (std::size_t r = 0; r < records; ++r)
    rows.push_back({static_cast<double>(r) < share * static_cast<double>(records) ? 1 : 0});
  return gamma_trace(rows);
}

std::vector<double> random_ppis(Rng &rng, std::size_t p) {
  std::vector<double> v(p);
  for (auto &x : v) {
    // Mix of exact ties, certain and uncertain taxa.
    const double u = rnd::uniform(rng);
    x = u < 0.2 ? 1.0 : u < 0.3 ? 0.5 : std::round(rnd::uniform(rng) * 50.0) / 50.0;
  }
  return v;
}

}  // namespace

TEST_CASE("compute_ppi averages per-chain fractions") {
  auto all = gamma_trace({{1}, {1}, {1}});
  CHECK(compute_ppi({all})[0][0] == 1.0);
  auto three = gamma_trace({{1}, {0}, {1}, {1}});
  CHECK(compute_ppi({three})[0][0] == doctest::Approx(0.75));
  CHECK(compute_ppi({column_trace(10, 0.6), column_trace(10, 0.8)})[0][0] == doctest::Approx(0.7));

  auto two_level = gamma_trace({{1, 0, 1}, {0, 0, 1}});
  two_level.level_sizes = {2, 1};
  auto ppi = compute_ppi({two_level});
  REQUIRE(ppi.size() == 2);
  CHECK(ppi[0] == std::vector<double>{0.5, 0.0});
  CHECK(ppi[1] == std::vector<double>{1.0});

  CHECK_THROWS_AS(compute_ppi({}), Error);
  CHECK_THROWS_AS(compute_ppi({two_level, all}), Error);
}

TEST_CASE("fdr_select examples") {
  std::vector<double> ppi{0.99, 0.98, 0.60};
  auto sel = fdr_select(ppi, 0.05);
  CHECK(sel.selected == std::vector<std::size_t>{0, 1});
  CHECK(sel.fdr == doctest::Approx(0.015));
  CHECK(sel.threshold > 0.02);
  CHECK(sel.threshold < 0.4);

  std::vector<double> ones(5, 1.0);
  auto all = fdr_select(ones, 0.05);
  CHECK(all.selected.size() == 5);
  CHECK(all.fdr == 0.0);

  std::vector<double> halves(4, 0.5);
  CHECK(fdr_select(halves, 0.05).selected.empty());

  CHECK_THROWS_AS(fdr_select(ppi, 0.0), Error);
  std::vector<double> bad{1.2};
  CHECK_THROWS_AS(fdr_select(bad, 0.05), Error);
}

TEST_CASE("fdr_select properties on random PPIs") {
  Rng rng(31);
  for (int rep = 0; rep < 300; ++rep) {
    const auto ppi = random_ppis(rng, 1 + static_cast<std::size_t>(rep % 40));
    const double target = 0.01 + 0.2 * rnd::uniform(rng);
    const auto sel = fdr_select(ppi, target);

    // The selection is exactly the strict threshold set.
    std::vector<std::size_t> below;
    for (std::size_t j = 0; j < ppi.size(); ++j)
      if (1.0 - ppi[j] < sel.threshold) below.push_back(j);
    CHECK(below == sel.selected);

    // Realized FDR recomputed from the PPIs never exceeds the target.
    double sum = 0.0;
    for (auto j : sel.selected) sum += 1.0 - ppi[j];
    if (!sel.selected.empty()) {
      CHECK(sum / static_cast<double>(sel.selected.size()) <= target);
      CHECK(sum / static_cast<double>(sel.selected.size()) == doctest::Approx(sel.fdr));
    }

    // Loosening the target never drops a taxon.
    const auto looser = fdr_select(ppi, std::min(0.99, target * 2.0));
    CHECK(std::includes(looser.selected.begin(), looser.selected.end(), sel.selected.begin(), sel.selected.end()));

    // Raising one selected PPI keeps it selected.
    if (!sel.selected.empty()) {
      auto raised = ppi;
      const auto j = sel.selected.front();
      raised[j] = std::min(1.0, raised[j] + 0.05);
      const auto again = fdr_select(raised, target);
      CHECK(std::binary_search(again.selected.begin(), again.selected.end(), j));
    }
  }
}

TEST_CASE("credible intervals") {
  auto flat = credible_interval(std::vector<double>(50, 2.5));
  CHECK(flat.lower == 2.5);
  CHECK(flat.upper == 2.5);
  CHECK(flat.median == 2.5);
  auto one = credible_interval({-1.0});
  CHECK(one.lower == -1.0);
  CHECK(one.upper == -1.0);

  std::vector<double> grid;
  for (int i = 101; i >= 1; --i) grid.push_back(i);
  auto ci = credible_interval(grid);
  CHECK(ci.median == 51.0);
  CHECK(ci.lower == doctest::Approx(3.5));
  CHECK(ci.upper == doctest::Approx(98.5));
  CHECK_THROWS_AS(credible_interval({}), Error);
}

TEST_CASE("fold change of identical groups is centered at zero") {
  Trace t = gamma_trace({{0}, {0}, {0}, {0}});
  t.has_group_means = true;
  // Group means swap between records, so the difference is symmetric.
  for (float d : {1.0f, -1.0f, 0.5f, -0.5f}) {
    t.group_mean.push_back(2.0f);
    t.group_mean.push_back(2.0f + d);
  }
  auto fc = fold_change_summary({t}, 0, 1);
  REQUIRE(fc.size() == 1);
  CHECK(fc[0].median == 0.0);
  CHECK(fc[0].lower == doctest::Approx(-fc[0].upper));
  auto rev = fold_change_summary({t}, 1, 0);
  CHECK(rev[0].lower == doctest::Approx(-fc[0].upper));

  Trace none = gamma_trace({{0}});
  CHECK_THROWS_AS(fold_change_summary({none}, 0, 1), Error);
}

TEST_CASE("size-factor summary needs sampled size factors") {
  Trace plug = gamma_trace({{0}});
  try {
    (void)size_factor_summary({plug});
    FAIL("expected NotApplicable");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::NotApplicable);
  }

  Trace t = gamma_trace({{0}, {1}, {0}});
  t.has_s = true;
  t.s = {1.5, 0.5, 1.5, 0.5, 1.5, 0.5};
  auto sf = size_factor_summary({t});
  CHECK(sf.mean == std::vector<double>{1.5, 0.5});
  CHECK(sf.lower == sf.mean);
  CHECK(sf.upper == sf.mean);
}

TEST_CASE("report tables round-trip and reselect is consistent") {
  GeneratorConfig g;
  g.n = 10;
  g.p = 15;
  g.p_gamma = 3;
  g.seed = 4;
  auto ds = generate(g);
  auto data = ModelData::build(build_hierarchy(ds.table, nullptr), ds.labels, NormMethod::DPP);
  RunConfig rc;
  rc.iterations = 80;
  rc.chains = 2;
  rc.seed = 9;
  auto run = run_multi(data, rc);
  auto rep = build_report(run.traces, data, 0.05);
  REQUIRE(rep.taxa.size() == 15);
  REQUIRE(rep.samples.size() == 10);
  for (const auto &t : rep.taxa) {
    REQUIRE(t.fold_changes.size() == 1);
    CHECK(t.fold_changes[0].ci.lower <= t.fold_changes[0].ci.median);
    CHECK(t.fold_changes[0].ci.median <= t.fold_changes[0].ci.upper);
    CHECK(t.selected == (1.0 - t.ppi < rep.threshold));
  }
  for (const auto &s : rep.samples) {
    CHECK(s.lower <= s.mean);
    CHECK(s.mean <= s.upper);
  }

  TempDir dir("report");
  write_taxa_tsv(dir / "taxa.tsv", rep);
  write_samples_tsv(dir / "samples.tsv", rep);
  CHECK(read_taxa_tsv(dir / "taxa.tsv") == rep.taxa);
  CHECK(read_samples_tsv(dir / "samples.tsv") == rep.samples);

  auto copy = rep;
  reselect(copy, 0.2);
  std::size_t before = 0, after = 0;
  for (std::size_t j = 0; j < rep.taxa.size(); ++j) {
    before += rep.taxa[j].selected;
    after += copy.taxa[j].selected;
    if (rep.taxa[j].selected) CHECK(copy.taxa[j].selected);
  }
  CHECK(after >= before);
  CHECK(copy.realized_fdr <= 0.2);

  mbda::testing::write_file(dir / "bad.tsv", "x\ty\n");
  CHECK_THROWS_AS(read_taxa_tsv(dir / "bad.tsv"), Error);
}

TEST_CASE("fold-change intervals are calibrated on simulated ZINB data") {
  // Coverage of the sample group-mean difference of the true log alpha by the
  // 95% interval, pooled over taxa and datasets.
  int covered = 0, total = 0;
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    GeneratorConfig g;
    g.n = 24;
    g.p = 20;
    g.p_gamma = 4;
    g.sigma = 2.0;
    g.seed = 500 + rep;
    auto ds = generate(g);
    auto data = ModelData::build(build_hierarchy(ds.table, nullptr), ds.labels, NormMethod::DPP);
    RunConfig rc;
    rc.iterations = 1500;
    rc.chains = 1;
    rc.seed = 600 + rep;
    auto run = run_multi(data, rc);
    auto fc = fold_change_summary(run.traces, 0, 1);
    for (std::size_t j = 0; j < 20; ++j) {
      double m[2] = {0.0, 0.0};
      for (std::size_t i = 0; i < 24; ++i)
        m[ds.labels.group(i)] += std::log(ds.true_alpha(i, j)) / 12.0;
      const double truth = m[1] - m[0];
      covered += fc[j].lower <= truth && truth <= fc[j].upper;
      ++total;
    }
  }
  INFO("coverage " << covered << "/" << total);
  CHECK(static_cast<double>(covered) / total >= 0.90);
}
