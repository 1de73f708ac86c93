#include "mbda/simgen.hpp"

#include "mbda/error.hpp"
#include "mbda/random.hpp"
#include "mbda/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mbda {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::DM: return "dm";
    case Scheme::ZINB: return "zinb";
    case Scheme::Synthetic: return "synthetic";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  for (auto s : {Scheme::DM, Scheme::ZINB, Scheme::Synthetic})
    if (to_string(s) == name) return s;
  throw Error(ErrorKind::InvalidArgument, "unknown scheme '" + std::string(name) + "'");
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string &m) { throw Error(ErrorKind::Config, m); };
  if (n < 2) fail("n must be >= 2");
  if (p < 1) fail("p must be >= 1");
  if (p_gamma < 0 || p_gamma > p) fail("p_gamma must lie in [0, p]");
  if (!(sigma > 0.0)) fail("sigma must be positive");
  if (scheme == Scheme::Synthetic) {
    if (k != 2) fail("the synthetic scheme has K = 2");
    if (p_gamma % 2 != 0) fail("the synthetic scheme needs an even p_gamma");
    if (synthetic_depth < 1) fail("synthetic depth must be >= 1");
  } else if (k != 2 && k != 3) {
    fail("K must be 2 or 3");
  }
  if (n < k) fail("need at least one sample per group");
  if (depth_min < 1 || depth_max < depth_min) fail("invalid depth range");
}

GroupLabels contiguous_groups(int n, int k) {
  std::vector<int> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = i * k / n + 1;
  return GroupLabels(std::move(g), k);
}

namespace {

std::vector<std::string> make_ids(const char *prefix, std::size_t count) {
  std::vector<std::string> ids(count);
  for (std::size_t i = 0; i < count; ++i) ids[i] = prefix + std::to_string(i + 1);
  return ids;
}

template <class T>
void shuffle(std::vector<T> &v, Rng &rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rnd::uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

// log alpha for the DM and ZINB schemes; discriminating taxa come first.
void draw_log_alpha(const GeneratorConfig &c, const GroupLabels &labels, Rng &rng, LabeledDataset &out,
                    Matrix<double> &log_alpha) {
  const auto n = static_cast<std::size_t>(c.n), p = static_cast<std::size_t>(c.p);
  const auto k = static_cast<std::size_t>(c.k);
  log_alpha = Matrix<double>(n, p);
  out.true_group_mean = Matrix<double>(p, k);
  out.truth.assign(p, 0);
  std::vector<double> levels = c.k == 2 ? std::vector<double>{1.0 - c.sigma / 2.0, 1.0 + c.sigma / 2.0}
                                        : std::vector<double>{1.0 - c.sigma, 1.0, 1.0 + c.sigma};
  for (std::size_t j = 0; j < p; ++j) {
    if (j < static_cast<std::size_t>(c.p_gamma)) {
      out.truth[j] = 1;
      auto d = levels;
      shuffle(d, rng);
      for (std::size_t g = 0; g < k; ++g) out.true_group_mean(j, g) = d[g];
      for (std::size_t i = 0; i < n; ++i)
        log_alpha(i, j) = rnd::normal(rng, d[static_cast<std::size_t>(labels.group(i))], c.sigma / 10.0);
    } else if (c.null_from_prose) {
      for (std::size_t g = 0; g < k; ++g) out.true_group_mean(j, g) = 0.0;
      for (std::size_t i = 0; i < n; ++i) log_alpha(i, j) = rnd::normal(rng, 0.0, 2.0);
    } else {
      const double d0 = 4.0 * rnd::uniform(rng);
      for (std::size_t g = 0; g < k; ++g) out.true_group_mean(j, g) = d0;
      for (std::size_t i = 0; i < n; ++i) log_alpha(i, j) = rnd::normal(rng, d0, c.sigma / 10.0);
    }
  }
  out.true_alpha = Matrix<double>(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) out.true_alpha(i, j) = std::exp(log_alpha(i, j));
}

}  // namespace

LabeledDataset generate_dm(const GeneratorConfig &config) {
  GeneratorConfig c = config;
  c.scheme = Scheme::DM;
  c.validate();
  Rng rng(c.seed);
  const auto n = static_cast<std::size_t>(c.n), p = static_cast<std::size_t>(c.p);
  GroupLabels labels = contiguous_groups(c.n, c.k);
  LabeledDataset out{CountTable(Matrix<Count>(n, p), make_ids("S", n), make_ids("T", p)), labels, {}, {}, {}, {}, {}, {}};
  Matrix<double> log_alpha;
  draw_log_alpha(c, labels, rng, out, log_alpha);
  Matrix<Count> counts(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    const auto depth = static_cast<std::uint64_t>(rnd::uniform_int(rng, c.depth_min, c.depth_max));
    const auto psi = rnd::dirichlet(rng, out.true_alpha.row(i));
    const auto y = rnd::multinomial(rng, depth, psi);
    for (std::size_t j = 0; j < p; ++j) counts(i, j) = y[j];
  }
  out.table = CountTable(std::move(counts), make_ids("S", n), make_ids("T", p));
  return out;
}

LabeledDataset generate_zinb(const GeneratorConfig &config) {
  GeneratorConfig c = config;
  c.scheme = Scheme::ZINB;
  c.validate();
  Rng rng(c.seed);
  const auto n = static_cast<std::size_t>(c.n), p = static_cast<std::size_t>(c.p);
  GroupLabels labels = contiguous_groups(c.n, c.k);
  LabeledDataset out{CountTable(Matrix<Count>(n, p), make_ids("S", n), make_ids("T", p)), labels, {}, {}, {}, {}, {}, {}};
  Matrix<double> log_alpha;
  draw_log_alpha(c, labels, rng, out, log_alpha);
  out.true_s.resize(n);
  for (auto &s : out.true_s) s = 0.5 + 3.5 * rnd::uniform(rng);
  out.true_phi.resize(p);
  for (auto &phi : out.true_phi) phi = rnd::gamma(rng, 1.0, 0.1);
  Matrix<Count> counts(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      counts(i, j) = rnd::negative_binomial(rng, out.true_s[i] * out.true_alpha(i, j), out.true_phi[j]);
  std::vector<std::size_t> cells(n * p);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  shuffle(cells, rng);
  for (std::size_t c2 = 0; c2 < cells.size() / 2; ++c2) counts.data()[cells[c2]] = 0;
  out.table = CountTable(std::move(counts), make_ids("S", n), make_ids("T", p));
  return out;
}

LabeledDataset generate_synthetic(const GeneratorConfig &config, std::span<const double> base_counts) {
  GeneratorConfig c = config;
  c.scheme = Scheme::Synthetic;
  c.validate();
  const auto n = static_cast<std::size_t>(c.n), p = static_cast<std::size_t>(c.p);
  const auto half = static_cast<std::size_t>(c.p_gamma / 2);
  std::vector<double> base;
  for (double v : base_counts)
    if (v > 0.0 && std::isfinite(v)) base.push_back(v);
  if (base.size() < p)
    throw Error(ErrorKind::InvalidArgument, "base abundance vector needs at least p positive entries, got " +
                                                std::to_string(base.size()));
  Rng rng(c.seed);
  shuffle(base, rng);
  std::vector<double> o(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(p));
  for (std::size_t j = 0; j < half; ++j) o[half + j] = o[j];
  std::vector<double> pv(o), qv(o);
  const double boost = std::exp(c.sigma);
  for (std::size_t j = 0; j < half; ++j) pv[j] *= boost;
  for (std::size_t j = half; j < 2 * half; ++j) qv[j] *= boost;
  const double sp = std::accumulate(pv.begin(), pv.end(), 0.0), sq = std::accumulate(qv.begin(), qv.end(), 0.0);
  for (auto &v : pv) v /= sp;
  for (auto &v : qv) v /= sq;

  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  shuffle(perm, rng);
  GroupLabels labels = contiguous_groups(c.n, 2);
  Matrix<Count> counts(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = rnd::multinomial(rng, static_cast<std::uint64_t>(c.synthetic_depth), labels.group(i) == 0 ? pv : qv);
    for (std::size_t col = 0; col < p; ++col) counts(i, col) = y[perm[col]];
  }
  LabeledDataset out{CountTable(std::move(counts), make_ids("S", n), make_ids("T", p)), labels, {}, {}, {}, {}, {}, perm};
  out.truth.assign(p, 0);
  for (std::size_t col = 0; col < p; ++col) out.truth[col] = perm[col] < 2 * half ? 1 : 0;
  out.true_group_mean = Matrix<double>(p, 2);
  for (std::size_t col = 0; col < p; ++col) {
    out.true_group_mean(col, 0) = std::log(pv[perm[col]]);
    out.true_group_mean(col, 1) = std::log(qv[perm[col]]);
  }
  return out;
}

LabeledDataset generate(const GeneratorConfig &config, std::span<const double> base_counts) {
  switch (config.scheme) {
    case Scheme::DM: return generate_dm(config);
    case Scheme::ZINB: return generate_zinb(config);
    case Scheme::Synthetic: return generate_synthetic(config, base_counts);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown scheme");
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw Error(ErrorKind::InvalidArgument, "scores and truth differ in length");
  const auto ranks = stats::average_ranks(scores);
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j)
    if (truth[j]) {
      pos += 1.0;
      rank_sum += ranks[j];
    }
  const double neg = static_cast<double>(truth.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw Error(ErrorKind::Undefined, "AUC needs both classes present");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double mcc(std::span<const std::uint8_t> selected, std::span<const std::uint8_t> truth) {
  if (selected.size() != truth.size()) throw Error(ErrorKind::InvalidArgument, "selection and truth differ in length");
  double tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    if (selected[j] && truth[j]) ++tp;
    else if (selected[j]) ++fp;
    else if (truth[j]) ++fn;
    else ++tn;
  }
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(den);
}

std::vector<std::uint8_t> top_k(std::span<const double> scores, std::size_t count) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::uint8_t> out(scores.size(), 0);
  for (std::size_t c = 0; c < std::min(count, order.size()); ++c) out[order[c]] = 1;
  return out;
}

double anova_p_value(std::span<const double> values, const GroupLabels &labels) {
  const auto k = static_cast<std::size_t>(labels.num_groups());
  const double n = static_cast<double>(values.size());
  std::vector<double> sum(k, 0.0), cnt(k, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto g = static_cast<std::size_t>(labels.group(i));
    sum[g] += values[i];
    cnt[g] += 1.0;
    total += values[i];
  }
  const double grand = total / n;
  double ssb = 0.0, ssw = 0.0;
  for (std::size_t g = 0; g < k; ++g)
    if (cnt[g] > 0) ssb += cnt[g] * std::pow(sum[g] / cnt[g] - grand, 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto g = static_cast<std::size_t>(labels.group(i));
    ssw += std::pow(values[i] - sum[g] / cnt[g], 2);
  }
  const double df1 = static_cast<double>(k) - 1.0, df2 = n - static_cast<double>(k);
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) return 1.0;
  if (ssw <= 0.0) return 0.0;
  if (df2 <= 0.0) return 1.0;
  const double f = (ssb / df1) / (ssw / df2);
  return boost::math::cdf(boost::math::complement(boost::math::fisher_f(df1, df2), f));
}

double kruskal_wallis_p_value(std::span<const double> values, const GroupLabels &labels) {
  const auto k = static_cast<std::size_t>(labels.num_groups());
  const double n = static_cast<double>(values.size());
  const auto ranks = stats::average_ranks(values);
  std::vector<double> rsum(k, 0.0), cnt(k, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto g = static_cast<std::size_t>(labels.group(i));
    rsum[g] += ranks[i];
    cnt[g] += 1.0;
  }
  double h = 0.0;
  for (std::size_t g = 0; g < k; ++g)
    if (cnt[g] > 0) h += rsum[g] * rsum[g] / cnt[g];
  h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t a = 0; a < sorted.size();) {
    std::size_t b = a;
    while (b < sorted.size() && sorted[b] == sorted[a]) ++b;
    const double t = static_cast<double>(b - a);
    ties += t * t * t - t;
    a = b;
  }
  const double corr = 1.0 - ties / (n * n * n - n);
  if (corr <= 0.0) return 1.0;
  h /= corr;
  if (h <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(static_cast<double>(k) - 1.0), h));
}

std::vector<double> benjamini_hochberg(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> adj(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const double v = p_values[order[r]] * static_cast<double>(m) / static_cast<double>(r + 1);
    running = std::min(running, v);
    adj[order[r]] = std::min(1.0, running);
  }
  return adj;
}

BaselineResult baseline_tests(const CountTable &table, const GroupLabels &labels, BaselineMethod method) {
  if (table.n() != labels.n()) throw Error(ErrorKind::InvalidArgument, "labels do not match the table");
  const auto totals = table.row_totals();
  BaselineResult out;
  std::vector<double> col(table.n());
  for (std::size_t j = 0; j < table.p(); ++j) {
    for (std::size_t i = 0; i < table.n(); ++i)
      col[i] = totals[i] > 0.0 ? static_cast<double>(table(i, j)) / totals[i] : 0.0;
    out.p_values.push_back(method == BaselineMethod::Anova ? anova_p_value(col, labels)
                                                           : kruskal_wallis_p_value(col, labels));
  }
  out.adjusted = benjamini_hochberg(out.p_values);
  return out;
}

}  // namespace mbda
