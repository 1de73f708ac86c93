#include "doctest.h"
#include "test_support.hpp"

#include "mbda/error.hpp"
#include "mbda/normalization.hpp"
#include "mbda/random.hpp"

#include <cmath>
#include <numeric>

using namespace mbda;
using mbda::testing::make_table;

namespace {

ErrorKind kind_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

double log_product(const std::vector<double> &s) {
  double acc = 0.0;
  for (double x : s) acc += std::log(x);
  return acc;
}

CountTable dense_random(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Count> v(n * p);
  std::vector<double> depth(n);
  for (auto &d : depth) d = std::exp(rnd::normal(rng, 0.0, 0.7));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      v[i * p + j] = 1 + rnd::poisson(rng, depth[i] * (5.0 + static_cast<double>(j)));
  return make_table(n, p, v);
}

const std::vector<NormMethod> kPlugIn{NormMethod::TSS, NormMethod::Q75, NormMethod::RLE, NormMethod::TMM,
                                      NormMethod::CSS};

}  // namespace

TEST_CASE("TSS scales by row totals") {
  auto equal = estimate_tss(make_table(3, 2, {50, 50, 60, 40, 99, 1}));
  for (double s : equal.s) CHECK(s == doctest::Approx(1.0));

  auto t = estimate_tss(make_table(3, 1, {100, 200, 400}));
  CHECK(t.s[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.s[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.s[2] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(t.method == NormMethod::TSS);
  CHECK(t.constraint == SizeConstraint::GeometricMeanOne);

  CHECK(kind_of([] { (void)estimate_tss(make_table(2, 2, {0, 0, 1, 1})); }) == ErrorKind::EmptySample);
}

TEST_CASE("Q75 follows the upper-quartile count") {
  auto same = estimate_q75(make_table(2, 4, {1, 2, 3, 4, 1, 2, 3, 4}));
  CHECK(same.s[0] == doctest::Approx(1.0));
  CHECK(same.s[1] == doctest::Approx(1.0));

  auto tripled = estimate_q75(make_table(2, 4, {1, 2, 3, 4, 3, 6, 9, 12}));
  CHECK(tripled.s[0] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(tripled.s[1] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));

  auto sparse = make_table(2, 5, {0, 0, 0, 0, 5, 1, 2, 3, 4, 5});
  CHECK(kind_of([&] { (void)estimate_q75(sparse); }) == ErrorKind::DegenerateQuantile);
}

TEST_CASE("RLE uses median ratios to taxon geometric means") {
  auto same = estimate_rle(make_table(2, 3, {4, 5, 6, 4, 5, 6}));
  CHECK(same.s[0] == doctest::Approx(1.0));

  auto doubled = estimate_rle(make_table(2, 3, {4, 5, 6, 8, 10, 12}));
  CHECK(doubled.s[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(doubled.s[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  auto holes = make_table(3, 3, {0, 1, 1, 1, 0, 1, 1, 1, 0});
  CHECK(kind_of([&] { (void)estimate_rle(holes); }) == ErrorKind::RleInadmissible);
}

TEST_CASE("TMM on scaled rows reduces to library size") {
  auto same = estimate_tmm(make_table(2, 3, {4, 5, 6, 4, 5, 6}));
  CHECK(same.s[0] == doctest::Approx(1.0));

  auto doubled = estimate_tmm(make_table(2, 4, {4, 5, 6, 7, 8, 10, 12, 14}));
  CHECK(doubled.s[1] / doubled.s[0] == doctest::Approx(2.0).epsilon(1e-12));

  auto disjoint = make_table(2, 2, {3, 0, 0, 3});
  CHECK(kind_of([&] { (void)estimate_tmm(disjoint); }) == ErrorKind::TmmDegenerate);
}

TEST_CASE("CSS sums counts at or below the median count") {
  // (1, 2, 3, 100): the cumulative sum up to the median is 1 + 2 + 3 = 6;
  // the second row doubles every count, so its sum is 12.
  auto css = estimate_css(make_table(2, 4, {1, 2, 3, 100, 2, 4, 6, 200}));
  CHECK(css.s[1] / css.s[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(count_quantile(std::vector<Count>{1, 2, 3, 100}, 0.5) == 3.0);

  auto same = estimate_css(make_table(2, 3, {7, 1, 3, 7, 1, 3}));
  CHECK(same.s[0] == doctest::Approx(1.0));

  auto empty = make_table(2, 2, {0, 0, 1, 2});
  CHECK_THROWS_AS((void)estimate_css(empty), Error);
}

TEST_CASE("every plug-in factor set has unit product") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto t = dense_random(7, 12, seed);
    for (auto m : kPlugIn) {
      auto sf = estimate_size_factors(t, m);
      REQUIRE(sf.s.size() == 7);
      for (double s : sf.s) CHECK(s > 0.0);
      CHECK(std::abs(log_product(sf.s)) < 1e-10);
    }
  }
  CHECK_THROWS_AS((void)estimate_size_factors(dense_random(3, 3, 1), NormMethod::DPP), Error);
}

TEST_CASE("TSS is scale equivariant") {
  auto t = dense_random(5, 6, 4);
  auto scaled_values = t.counts().data();
  for (std::size_t j = 0; j < 6; ++j) scaled_values[2 * 6 + j] *= 3;
  auto scaled = make_table(5, 6, scaled_values);
  auto a = estimate_tss(t).s;
  auto b = estimate_tss(scaled).s;
  CHECK((b[2] / b[0]) / (a[2] / a[0]) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(b[1] / b[0] == doctest::Approx(a[1] / a[0]).epsilon(1e-12));
  CHECK(b[4] / b[3] == doctest::Approx(a[4] / a[3]).epsilon(1e-12));
}

TEST_CASE("factors permute with the samples") {
  auto t = dense_random(6, 10, 8);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  auto permuted = t.select_samples(perm);
  for (auto m : kPlugIn) {
    std::vector<double> a, b;
    if (m == NormMethod::TMM) {
      // Pin the reference so tie-breaking on index cannot differ.
      a = estimate_tmm(t, 0).s;
      b = estimate_tmm(permuted, 1).s;
    } else {
      a = estimate_size_factors(t, m).s;
      b = estimate_size_factors(permuted, m).s;
    }
    for (std::size_t r = 0; r < perm.size(); ++r) CHECK(b[r] == doctest::Approx(a[perm[r]]).epsilon(1e-12));
  }
}

TEST_CASE("method names parse") {
  CHECK(parse_norm_method("tmm") == NormMethod::TMM);
  CHECK(to_string(NormMethod::CSS) == "css");
  CHECK_THROWS_AS((void)parse_norm_method("deseq"), Error);
}
