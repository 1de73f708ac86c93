#include "mbda/samplers.hpp"

#include "mbda/error.hpp"
#include "mbda/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mbda {

using stats::log_gamma;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double log_normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
}

double log_gamma_pdf(double x, double shape, double rate) {
  return shape * std::log(rate) - log_gamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

// Value-dependent part of nig_log_marginal for a fixed count.
double nig_kernel(const GaussStats &st, double a, double b, double h) {
  if (st.count <= 0.0) return 0.0;
  const double quad = st.sum_sq - st.sum * st.sum / (st.count + 1.0 / h);
  return -(a + 0.5 * st.count) * std::log(b + 0.5 * quad);
}

std::size_t num_components(std::size_t n, const DppHyper &hyper) {
  if (hyper.components > 0) return static_cast<std::size_t>(hyper.components);
  return std::max<std::size_t>(1, n / 2);
}

bool accept(Rng &rng, double log_ratio) {
  if (std::isnan(log_ratio)) return false;
  return log_ratio >= 0.0 || std::log(rnd::uniform(rng)) < log_ratio;
}

void derive_upper_eta(ChainState &state, const ModelData &data) {
  const auto &bottom_eta = state.levels[0].eta;
  for (std::size_t l = 1; l < data.levels.size(); ++l) {
    const auto &lv = data.levels[l];
    auto &eta = state.levels[l].eta;
    for (std::size_t i = 0; i < data.n(); ++i)
      for (std::size_t j = 0; j < lv.p(); ++j) {
        bool all = !lv.bottom_descendants[j].empty();
        for (std::size_t b : lv.bottom_descendants[j])
          if (!bottom_eta(i, b)) {
            all = false;
            break;
          }
        eta(i, j) = all ? 1 : 0;
      }
  }
}

void rebuild_stats(LevelState &ls, const GroupLabels &labels) {
  const std::size_t k = static_cast<std::size_t>(labels.num_groups());
  const std::size_t p = ls.alpha.cols();
  ls.stats.assign(p * (k + 1), GaussStats{});
  for (std::size_t i = 0; i < ls.alpha.rows(); ++i) {
    const std::size_t g = static_cast<std::size_t>(labels.group(i));
    for (std::size_t j = 0; j < p; ++j) {
      const double x = ls.log_alpha(i, j);
      ls.stats[j * (k + 1)].add(x);
      ls.stats[j * (k + 1) + 1 + g].add(x);
    }
  }
}

}  // namespace

std::vector<double> stick_breaking(std::span<const double> v) {
  std::vector<double> psi(v.size());
  double rest = 1.0;
  for (std::size_t m = 0; m < v.size(); ++m) {
    psi[m] = v[m] * rest;
    rest *= 1.0 - v[m];
  }
  return psi;
}

double dpp_component_mean(const DppState &dpp, const DppHyper &hyper, std::size_t m, bool eps) {
  if (eps) return dpp.nu[m];
  return (hyper.c_s - dpp.t[m] * dpp.nu[m]) / (1.0 - dpp.t[m]);
}

double dpp_prior_mean_log_s(const DppState &dpp, const DppHyper &hyper) {
  double acc = 0.0;
  for (std::size_t m = 0; m < dpp.psi.size(); ++m)
    acc += dpp.psi[m] * (dpp.t[m] * dpp_component_mean(dpp, hyper, m, true) +
                         (1.0 - dpp.t[m]) * dpp_component_mean(dpp, hyper, m, false));
  return acc;
}

std::pair<double, double> nu_sufficient(const DppState &dpp, const DppHyper &hyper,
                                        std::span<const double> log_s, std::size_t m) {
  const double t = dpp.t[m];
  const double r = t / (1.0 - t);
  const double shift = hyper.c_s / (1.0 - t);
  double c = 0.0, e = 0.0;
  for (std::size_t i = 0; i < log_s.size(); ++i) {
    if (static_cast<std::size_t>(dpp.g[i]) != m) continue;
    if (dpp.eps[i]) {
      c += log_s[i];
      e += 1.0;
    } else {
      c -= r * (log_s[i] - shift);
      e += r * r;
    }
  }
  return {c, e};
}

DppState draw_dpp_prior(std::size_t n, const DppHyper &hyper, Rng &rng) {
  const std::size_t m_count = num_components(n, hyper);
  DppState dpp;
  dpp.t.resize(m_count);
  dpp.nu.resize(m_count);
  dpp.v.resize(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    dpp.t[m] = rnd::beta(rng, hyper.a_t, hyper.b_t);
    dpp.nu[m] = rnd::normal(rng, 0.0, hyper.tau_nu);
    dpp.v[m] = m + 1 == m_count ? 1.0 : rnd::beta(rng, hyper.a_m, hyper.b_m);
  }
  dpp.psi = stick_breaking(dpp.v);
  std::vector<double> log_psi(m_count);
  for (std::size_t m = 0; m < m_count; ++m) log_psi[m] = std::log(dpp.psi[m]);
  dpp.g.resize(n);
  dpp.eps.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    dpp.g[i] = static_cast<int>(rnd::categorical_log(rng, log_psi));
    dpp.eps[i] = rnd::bernoulli(rng, dpp.t[static_cast<std::size_t>(dpp.g[i])]) ? 1 : 0;
  }
  return dpp;
}

void refresh_caches(ChainState &state, const ModelData &data, const ModelHyper &hyper) {
  for (std::size_t l = 0; l < data.levels.size(); ++l) {
    auto &ls = state.levels[l];
    for (std::size_t i = 0; i < ls.alpha.rows(); ++i)
      for (std::size_t j = 0; j < ls.alpha.cols(); ++j) ls.log_alpha(i, j) = std::log(ls.alpha(i, j));
    rebuild_stats(ls, data.labels);
    ls.selected = static_cast<std::size_t>(std::count(ls.gamma.begin(), ls.gamma.end(), 1));
    if (hyper.model == ModelKind::DM) {
      ls.alpha_row_sum.assign(ls.alpha.rows(), 0.0);
      for (std::size_t i = 0; i < ls.alpha.rows(); ++i)
        for (std::size_t j = 0; j < ls.alpha.cols(); ++j) ls.alpha_row_sum[i] += ls.alpha(i, j);
    }
  }
  derive_upper_eta(state, data);
}

ChainState initialize_state(const ModelData &data, const ModelHyper &hyper, Rng &rng) {
  hyper.validate(data.num_groups());
  const std::size_t n = data.n();
  ChainState state;

  // Geometric-mean-one TSS factors seed both s and alpha.
  const auto &totals = data.levels[0].row_totals;
  std::vector<double> s_tss(n);
  double log_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s_tss[i] = totals[i] > 0.0 ? totals[i] : 1.0;
    log_sum += std::log(s_tss[i]);
  }
  for (double &v : s_tss) v = std::exp(std::log(v) - log_sum / static_cast<double>(n));

  state.s = data.sample_s() ? s_tss : data.fixed_s;
  state.log_s.resize(n);
  for (std::size_t i = 0; i < n; ++i) state.log_s[i] = std::log(state.s[i]);

  state.levels.resize(data.levels.size());
  for (std::size_t l = 0; l < data.levels.size(); ++l) {
    const auto &lv = data.levels[l];
    auto &ls = state.levels[l];
    const std::size_t p = lv.p();
    ls.alpha = Matrix<double>(n, p);
    ls.log_alpha = Matrix<double>(n, p);
    ls.eta = Matrix<std::uint8_t>(n, p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) ls.alpha(i, j) = lv.y(i, j) / s_tss[i] + 0.5;
    ls.phi.assign(p, 10.0);
    ls.gamma.assign(p, 0);
    const auto on = static_cast<std::size_t>(std::floor(0.05 * static_cast<double>(p) + 0.5));
    std::vector<std::size_t> idx(p);
    for (std::size_t j = 0; j < p; ++j) idx[j] = j;
    for (std::size_t c = 0; c < on; ++c) {
      const auto pick = static_cast<std::size_t>(
          rnd::uniform_int(rng, static_cast<std::int64_t>(c), static_cast<std::int64_t>(p - 1)));
      std::swap(idx[c], idx[pick]);
      ls.gamma[idx[c]] = 1;
    }
  }
  if (hyper.model == ModelKind::DM)
    for (std::size_t l = 1; l < data.levels.size(); ++l) {
      auto &ls = state.levels[l];
      const auto &below = state.levels[l - 1];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < ls.alpha.cols(); ++j) {
          double acc = 0.0;
          for (std::size_t c : data.levels[l].children[j]) acc += below.alpha(i, c);
          ls.alpha(i, j) = acc;
        }
    }

  if (hyper.model == ModelKind::ZINB) {
    const auto &y = data.levels[0].y;
    auto &eta = state.levels[0].eta;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < y.cols(); ++j)
        eta(i, j) = y(i, j) == 0.0 && rnd::bernoulli(rng, 0.5) ? 1 : 0;
    state.pi.assign(n, 0.5);
    update_pi(state, data, hyper, rng);
  }
  if (data.sample_s()) state.dpp = draw_dpp_prior(n, hyper.dpp, rng);
  refresh_caches(state, data, hyper);
  return state;
}

void update_eta(ChainState &state, const ModelData &data, Rng &rng) {
  const auto &y = data.levels[0].y;
  auto &ls = state.levels[0];
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const double log_pi = std::log(state.pi[i]);
    const double log_1m = std::log1p(-state.pi[i]);
    for (std::size_t j = 0; j < y.cols(); ++j) {
      if (y(i, j) > 0.0) {
        ls.eta(i, j) = 0;
        continue;
      }
      const double phi = ls.phi[j];
      const double lambda = state.s[i] * ls.alpha(i, j);
      const double l0 = log_1m + phi * (std::log(phi) - std::log(lambda + phi));
      const double prob1 = 1.0 / (1.0 + std::exp(l0 - log_pi));
      ls.eta(i, j) = rnd::bernoulli(rng, prob1) ? 1 : 0;
    }
  }
  derive_upper_eta(state, data);
}

void update_pi(ChainState &state, const ModelData &data, const ModelHyper &hyper, Rng &rng) {
  const auto &eta = state.levels[0].eta;
  const double p = static_cast<double>(eta.cols());
  for (std::size_t i = 0; i < eta.rows(); ++i) {
    double ones = 0.0;
    for (std::size_t j = 0; j < eta.cols(); ++j) ones += eta(i, j);
    state.pi[i] = rnd::beta(rng, hyper.bottom.a_pi + ones, hyper.bottom.b_pi + p - ones);
  }
  (void)data;
}

void update_phi(ChainState &state, const ModelData &data, std::size_t level, const ModelHyper &hyper,
                Rng &rng, AcceptanceStats *acc) {
  const auto &y = data.levels[level].y;
  auto &ls = state.levels[level];
  const double tau = hyper.scales.tau_phi;
  for (std::size_t j = 0; j < y.cols(); ++j) {
    const double cur = ls.phi[j];
    const double prop = rnd::gamma(rng, cur / tau, 1.0 / tau);
    if (!(prop > 0.0) || !std::isfinite(prop)) continue;
    double delta = 0.0;
    const double lg_cur = log_gamma(cur), lg_prop = log_gamma(prop);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      if (ls.eta(i, j)) continue;
      const double yy = y(i, j);
      const double lambda = state.s[i] * ls.alpha(i, j);
      if (yy > 0.0) delta += log_gamma(yy + prop) - log_gamma(yy + cur) - lg_prop + lg_cur;
      delta += prop * std::log(prop) - cur * std::log(cur) + nb_lambda_kernel(yy, lambda, prop) -
               nb_lambda_kernel(yy, lambda, cur);
    }
    delta += log_gamma_pdf(prop, hyper.bottom.a_phi, hyper.bottom.b_phi) -
             log_gamma_pdf(cur, hyper.bottom.a_phi, hyper.bottom.b_phi);
    delta += log_gamma_pdf(cur, prop / tau, 1.0 / tau) - log_gamma_pdf(prop, cur / tau, 1.0 / tau);
    if (acc) ++acc->phi_tried;
    if (accept(rng, delta)) {
      ls.phi[j] = prop;
      if (acc) ++acc->phi_accepted;
    }
  }
}

void update_s(ChainState &state, const ModelData &data, const ModelHyper &hyper, Rng &rng,
              AcceptanceStats *acc) {
  if (!data.sample_s()) return;
  const auto &y = data.levels[0].y;
  const auto &ls = state.levels[0];
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const double cur = state.log_s[i];
    const double prop = cur + rnd::normal(rng, 0.0, hyper.scales.tau_s);
    const double s_cur = std::exp(cur), s_prop = std::exp(prop);
    double delta = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) {
      if (ls.eta(i, j)) continue;
      const double a = ls.alpha(i, j);
      delta += nb_lambda_kernel(y(i, j), s_prop * a, ls.phi[j]) -
               nb_lambda_kernel(y(i, j), s_cur * a, ls.phi[j]);
    }
    const auto g = static_cast<std::size_t>(state.dpp.g[i]);
    const double mu = dpp_component_mean(state.dpp, hyper.dpp, g, state.dpp.eps[i] != 0);
    delta += log_normal_pdf(prop, mu, hyper.dpp.sigma_s) - log_normal_pdf(cur, mu, hyper.dpp.sigma_s);
    if (acc) ++acc->s_tried;
    if (accept(rng, delta)) {
      state.log_s[i] = prop;
      state.s[i] = s_prop;
      if (acc) ++acc->s_accepted;
    }
  }
}

void update_scale(ChainState &state, const ModelData &data, const ModelHyper &hyper, Rng &rng, int repeats,
                  AcceptanceStats *acc) {
  if (!data.sample_s() || repeats <= 0) return;
  const std::size_t n = state.log_s.size();
  const auto k = static_cast<std::size_t>(data.num_groups());
  std::vector<double> mu(n);
  for (std::size_t i = 0; i < n; ++i)
    mu[i] = dpp_component_mean(state.dpp, hyper.dpp, static_cast<std::size_t>(state.dpp.g[i]), state.dpp.eps[i] != 0);

  // Log target along the ray (log s + d, log alpha - d); the likelihood is constant on it.
  auto log_target = [&](double d) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += log_normal_pdf(state.log_s[i] + d, mu[i], hyper.dpp.sigma_s);
    std::vector<GaussStats> groups(k);
    for (std::size_t l = 0; l < state.levels.size(); ++l) {
      const auto &ls = state.levels[l];
      for (std::size_t j = 0; j < ls.gamma.size(); ++j) {
        const GaussStats *st = ls.stats.data() + j * (k + 1);
        auto shifted = [d](const GaussStats &g) {
          return GaussStats{g.count, g.sum - g.count * d, g.sum_sq - 2.0 * d * g.sum + g.count * d * d};
        };
        for (std::size_t c = 0; c < k; ++c) groups[c] = shifted(st[1 + c]);
        total += marginal_from_stats(groups, shifted(st[0]), ls.gamma[j] != 0, hyper.top);
      }
    }
    return total;
  };

  double shift = 0.0, current = log_target(0.0);
  for (int r = 0; r < repeats; ++r) {
    const double prop = shift + rnd::normal(rng, 0.0, hyper.scales.tau_scale);
    const double target = log_target(prop);
    if (acc) ++acc->scale_tried;
    if (accept(rng, target - current)) {
      shift = prop;
      current = target;
      if (acc) ++acc->scale_accepted;
    }
  }
  if (shift == 0.0) return;
  for (std::size_t i = 0; i < n; ++i) {
    state.log_s[i] += shift;
    state.s[i] = std::exp(state.log_s[i]);
  }
  const double factor = std::exp(-shift);
  for (auto &ls : state.levels)
    for (std::size_t i = 0; i < ls.alpha.rows(); ++i)
      for (std::size_t j = 0; j < ls.alpha.cols(); ++j) ls.alpha(i, j) *= factor;
  refresh_caches(state, data, hyper);
}

void update_dpp_block(DppState &dpp, std::span<const double> log_s, const DppHyper &hyper, Rng &rng,
                      AcceptanceStats *acc) {
  const std::size_t n = log_s.size();
  const std::size_t m_count = dpp.t.size();
  const double sd = hyper.sigma_s;

  // g with eps integrated out, then eps | g.
  std::vector<double> logw(m_count);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = log_s[i];
    for (std::size_t m = 0; m < m_count; ++m) {
      const double t = dpp.t[m];
      const double l1 = std::log(t) + log_normal_pdf(x, dpp_component_mean(dpp, hyper, m, true), sd);
      const double l0 = std::log1p(-t) + log_normal_pdf(x, dpp_component_mean(dpp, hyper, m, false), sd);
      const double pair[2] = {l1, l0};
      logw[m] = std::log(dpp.psi[m]) + stats::log_sum_exp(pair);
    }
    const std::size_t m = rnd::categorical_log(rng, logw);
    dpp.g[i] = static_cast<int>(m);
    const double t = dpp.t[m];
    const double l1 = std::log(t) + log_normal_pdf(x, dpp_component_mean(dpp, hyper, m, true), sd);
    const double l0 = std::log1p(-t) + log_normal_pdf(x, dpp_component_mean(dpp, hyper, m, false), sd);
    dpp.eps[i] = rnd::bernoulli(rng, 1.0 / (1.0 + std::exp(l0 - l1))) ? 1 : 0;
  }

  std::vector<double> n1(m_count, 0.0), n0(m_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) (dpp.eps[i] ? n1 : n0)[static_cast<std::size_t>(dpp.g[i])] += 1.0;

  // t: propose from the count conditional, correct for the eps = 0 means.
  for (std::size_t m = 0; m < m_count; ++m) {
    const double cur = dpp.t[m];
    const double prop = rnd::beta(rng, hyper.a_t + n1[m], hyper.b_t + n0[m]);
    if (n0[m] == 0.0) {
      dpp.t[m] = prop;
      continue;
    }
    const double nu = dpp.nu[m];
    const double mu_cur = (hyper.c_s - cur * nu) / (1.0 - cur);
    const double mu_prop = (hyper.c_s - prop * nu) / (1.0 - prop);
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (static_cast<std::size_t>(dpp.g[i]) == m && !dpp.eps[i])
        delta += log_normal_pdf(log_s[i], mu_prop, sd) - log_normal_pdf(log_s[i], mu_cur, sd);
    if (acc) ++acc->t_tried;
    if (accept(rng, delta)) {
      dpp.t[m] = prop;
      if (acc) ++acc->t_accepted;
    }
  }

  for (std::size_t m = 0; m < m_count; ++m) {
    const auto [c, e] = nu_sufficient(dpp, hyper, log_s, m);
    const double prec = e / (sd * sd) + 1.0 / (hyper.tau_nu * hyper.tau_nu);
    dpp.nu[m] = rnd::normal(rng, (c / (sd * sd)) / prec, 1.0 / std::sqrt(prec));
  }

  std::vector<double> count(m_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) count[static_cast<std::size_t>(dpp.g[i])] += 1.0;
  double above = static_cast<double>(n);
  for (std::size_t m = 0; m < m_count; ++m) {
    above -= count[m];
    dpp.v[m] = m + 1 == m_count ? 1.0 : rnd::beta(rng, hyper.a_m + count[m], hyper.b_m + above);
  }
  dpp.psi = stick_breaking(dpp.v);
}

void update_dpp(ChainState &state, const ModelData &data, const ModelHyper &hyper, Rng &rng,
                AcceptanceStats *acc) {
  if (!data.sample_s()) return;
  update_dpp_block(state.dpp, state.log_s, hyper.dpp, rng, acc);
}

double alpha_log_target(const ChainState &state, const ModelData &data, const ModelHyper &hyper,
                        std::size_t level, std::size_t i, std::size_t j, double value) {
  if (!(value > 0.0)) return -std::numeric_limits<double>::infinity();
  const auto &ls = state.levels[level];
  const double y = data.levels[level].y(i, j);
  double lik = 0.0;
  if (hyper.model == ModelKind::ZINB) {
    if (!ls.eta(i, j)) lik = nb_lambda_kernel(y, state.s[i] * value, ls.phi[j]);
  } else {
    if (level != 0) throw Error(ErrorKind::ModelMismatch, "DM upper-level abundances are aggregated");
    const double a_rest = ls.alpha_row_sum[i] - ls.alpha(i, j);
    const double y_tot = data.levels[0].row_totals[i];
    lik = log_gamma(y + value) - log_gamma(value) + log_gamma(a_rest + value) -
          log_gamma(y_tot + a_rest + value);
  }
  const std::size_t k = static_cast<std::size_t>(data.num_groups());
  const std::size_t g = static_cast<std::size_t>(data.labels.group(i));
  std::vector<GaussStats> groups(ls.stats.begin() + static_cast<std::ptrdiff_t>(j * (k + 1) + 1),
                                 ls.stats.begin() + static_cast<std::ptrdiff_t>((j + 1) * (k + 1)));
  GaussStats pooled = ls.stats[j * (k + 1)];
  const double old = ls.log_alpha(i, j), lv = std::log(value);
  groups[g].remove(old);
  groups[g].add(lv);
  pooled.remove(old);
  pooled.add(lv);
  return lik + marginal_from_stats(groups, pooled, ls.gamma[j] != 0, hyper.top) - lv;
}

void update_alpha(ChainState &state, const ModelData &data, std::size_t level, const ModelHyper &hyper,
                  Rng &rng, AcceptanceStats *acc) {
  const bool dm = hyper.model == ModelKind::DM;
  if (dm && level != 0) throw Error(ErrorKind::ModelMismatch, "DM upper-level abundances are aggregated");
  const auto &y = data.levels[level].y;
  auto &ls = state.levels[level];
  const std::size_t k = static_cast<std::size_t>(data.num_groups());
  const double tau = hyper.scales.tau_alpha;
  for (std::size_t j = 0; j < y.cols(); ++j) {
    const bool sel = ls.gamma[j] != 0;
    GaussStats *block = ls.stats.data() + j * (k + 1);
    const double phi = dm ? 0.0 : ls.phi[j];
    for (std::size_t i = 0; i < y.rows(); ++i) {
      const double cur = ls.alpha(i, j);
      const double prop = cur + rnd::normal(rng, 0.0, tau);
      if (acc) ++acc->alpha_tried;
      if (!(prop > 0.0)) continue;
      const double yy = y(i, j);
      double delta;
      if (!dm) {
        delta = ls.eta(i, j) ? 0.0
                             : nb_lambda_kernel(yy, state.s[i] * prop, phi) -
                                   nb_lambda_kernel(yy, state.s[i] * cur, phi);
      } else {
        const double a_rest = ls.alpha_row_sum[i] - cur;
        const double y_tot = data.levels[0].row_totals[i];
        delta = log_gamma(a_rest + prop) - log_gamma(y_tot + a_rest + prop) - log_gamma(a_rest + cur) +
                log_gamma(y_tot + a_rest + cur);
        if (yy > 0.0)
          delta += log_gamma(yy + prop) - log_gamma(prop) - log_gamma(yy + cur) + log_gamma(cur);
      }
      const double old = ls.log_alpha(i, j), lp = std::log(prop);
      const std::size_t slot = sel ? 1 + static_cast<std::size_t>(data.labels.group(i)) : 0;
      GaussStats st = block[slot];
      const double a = hyper.top.a[sel ? slot : 0], b = hyper.top.b[sel ? slot : 0],
                   h = hyper.top.h[sel ? slot : 0];
      const double before = nig_kernel(st, a, b, h);
      st.remove(old);
      st.add(lp);
      delta += nig_kernel(st, a, b, h) - before + old - lp;
      if (accept(rng, delta)) {
        ls.alpha(i, j) = prop;
        ls.log_alpha(i, j) = lp;
        block[0].remove(old);
        block[0].add(lp);
        const std::size_t gs = 1 + static_cast<std::size_t>(data.labels.group(i));
        block[gs].remove(old);
        block[gs].add(lp);
        if (dm) ls.alpha_row_sum[i] += prop - cur;
        if (acc) ++acc->alpha_accepted;
      }
    }
  }
}

void aggregate_alpha(ChainState &state, const ModelData &data, std::size_t level, const ModelHyper &hyper) {
  if (hyper.model != ModelKind::DM)
    throw Error(ErrorKind::ModelMismatch, "abundance aggregation applies to the DM model only");
  if (level == 0 || level >= data.levels.size())
    throw Error(ErrorKind::InvalidArgument, "aggregation needs an upper level");
  auto &ls = state.levels[level];
  const auto &below = state.levels[level - 1];
  for (std::size_t i = 0; i < ls.alpha.rows(); ++i)
    for (std::size_t j = 0; j < ls.alpha.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t c : data.levels[level].children[j]) acc += below.alpha(i, c);
      ls.alpha(i, j) = acc;
      ls.log_alpha(i, j) = std::log(acc);
    }
  rebuild_stats(ls, data.labels);
  ls.alpha_row_sum.assign(ls.alpha.rows(), 0.0);
  for (std::size_t i = 0; i < ls.alpha.rows(); ++i)
    for (std::size_t j = 0; j < ls.alpha.cols(); ++j) ls.alpha_row_sum[i] += ls.alpha(i, j);
}

double gamma_log_prior_ratio(const ChainState &state, const ModelData &data, const SelectionPrior &prior,
                             std::size_t level, std::size_t j) {
  const auto &ls = state.levels[level];
  const bool on = ls.gamma[j] != 0;
  if (prior.kind == SelectionPrior::Kind::BetaBernoulli) {
    const double p = static_cast<double>(ls.gamma.size());
    const double k = static_cast<double>(ls.selected);
    if (!on) return std::log(prior.a_omega + k) - std::log(prior.b_omega + p - k - 1.0);
    return std::log(prior.b_omega + p - k) - std::log(prior.a_omega + k - 1.0);
  }
  double neigh = 0.0;
  if (level > 0)
    for (std::size_t c : data.levels[level].children[j]) neigh += state.levels[level - 1].gamma[c];
  const int par = data.levels[level].parent[j];
  if (par >= 0 && level + 1 < data.levels.size())
    neigh += state.levels[level + 1].gamma[static_cast<std::size_t>(par)];
  const double logit = prior.d + prior.f * neigh;
  return on ? -logit : logit;
}

namespace {

// Column statistics over entries carrying data (eta = 0); structural zeros
// have no likelihood term, so their log-abundances can be integrated out.
void observed_stats(const LevelState &ls, const GroupLabels &labels, std::size_t j, bool zinb,
                    std::vector<GaussStats> &groups, GaussStats &pooled) {
  std::fill(groups.begin(), groups.end(), GaussStats{});
  pooled = GaussStats{};
  for (std::size_t i = 0; i < ls.alpha.rows(); ++i) {
    if (zinb && ls.eta(i, j)) continue;
    const double x = ls.log_alpha(i, j);
    groups[static_cast<std::size_t>(labels.group(i))].add(x);
    pooled.add(x);
  }
}

}  // namespace

bool has_structural_entries(const ChainState &state, const ModelHyper &hyper, std::size_t level, std::size_t j) {
  if (hyper.model != ModelKind::ZINB) return false;
  const auto &eta = state.levels[level].eta;
  for (std::size_t i = 0; i < eta.rows(); ++i)
    if (eta(i, j)) return true;
  return false;
}

void redraw_structural_alpha(ChainState &state, const ModelData &data, std::size_t level, std::size_t j,
                             const ModelHyper &hyper, Rng &rng) {
  if (!has_structural_entries(state, hyper, level, j)) return;
  auto &ls = state.levels[level];
  const std::size_t k = static_cast<std::size_t>(data.num_groups());
  std::vector<GaussStats> groups(k);
  GaussStats pooled;
  observed_stats(ls, data.labels, j, true, groups, pooled);
  const bool sel = ls.gamma[j] != 0;
  // Normal-inverse-gamma posterior per component, then fresh draws.
  const std::size_t comps = sel ? k : 1;
  std::vector<double> mu(comps), sd(comps);
  for (std::size_t c = 0; c < comps; ++c) {
    const GaussStats &st = sel ? groups[c] : pooled;
    const std::size_t hi = sel ? c + 1 : 0;
    const double a = hyper.top.a[hi], b = hyper.top.b[hi], h = hyper.top.h[hi];
    const double prec = st.count + 1.0 / h;
    const double quad = st.sum_sq - st.sum * st.sum / prec;
    const double var = 1.0 / rnd::gamma(rng, a + 0.5 * st.count, b + 0.5 * quad);
    mu[c] = rnd::normal(rng, st.sum / prec, std::sqrt(var / prec));
    sd[c] = std::sqrt(var);
  }
  GaussStats *block = ls.stats.data() + j * (k + 1);
  for (std::size_t i = 0; i < ls.alpha.rows(); ++i) {
    if (!ls.eta(i, j)) continue;
    const std::size_t g = static_cast<std::size_t>(data.labels.group(i));
    const std::size_t c = sel ? g : 0;
    const double old = ls.log_alpha(i, j);
    const double x = rnd::normal(rng, mu[c], sd[c]);
    ls.log_alpha(i, j) = x;
    ls.alpha(i, j) = std::exp(x);
    block[0].remove(old);
    block[0].add(x);
    block[1 + g].remove(old);
    block[1 + g].add(x);
  }
}

void update_gamma(ChainState &state, const ModelData &data, std::size_t level, const ModelHyper &hyper,
                  int repeats, Rng &rng, AcceptanceStats *acc) {
  auto &ls = state.levels[level];
  const std::size_t p = ls.gamma.size();
  const std::size_t k = static_cast<std::size_t>(data.num_groups());
  std::vector<GaussStats> obs_groups(k);
  GaussStats obs_pooled;
  for (int r = 0; r < repeats; ++r) {
    const auto j = static_cast<std::size_t>(rnd::uniform_int(rng, 0, static_cast<std::int64_t>(p) - 1));
    const bool on = ls.gamma[j] != 0;
    const bool collapse = has_structural_entries(state, hyper, level, j);
    std::span<const GaussStats> groups = ls.group_stats(j, k);
    const GaussStats *pooled = &ls.stats[j * (k + 1)];
    if (collapse) {
      observed_stats(ls, data.labels, j, true, obs_groups, obs_pooled);
      groups = obs_groups;
      pooled = &obs_pooled;
    }
    const double delta = marginal_from_stats(groups, *pooled, !on, hyper.top) -
                         marginal_from_stats(groups, *pooled, on, hyper.top) +
                         gamma_log_prior_ratio(state, data, hyper.prior, level, j);
    if (acc) ++acc->gamma_tried;
    if (accept(rng, delta)) {
      ls.gamma[j] = on ? 0 : 1;
      if (on) --ls.selected; else ++ls.selected;
      if (collapse) redraw_structural_alpha(state, data, level, j, hyper, rng);
      if (acc) ++acc->gamma_accepted;
    }
  }
}

void sweep(ChainState &state, const ModelData &data, const ModelHyper &hyper, Rng &rng, AcceptanceStats *acc) {
  refresh_caches(state, data, hyper);
  const std::size_t levels = data.levels.size();
  if (hyper.model == ModelKind::ZINB) {
    update_eta(state, data, rng);
    update_pi(state, data, hyper, rng);
    update_dpp(state, data, hyper, rng, acc);
    update_s(state, data, hyper, rng, acc);
    update_scale(state, data, hyper, rng, hyper.scale_repeats, acc);
    for (std::size_t l = 0; l < levels; ++l) update_phi(state, data, l, hyper, rng, acc);
    for (std::size_t l = 0; l < levels; ++l) {
      update_alpha(state, data, l, hyper, rng, acc);
      for (std::size_t j = 0; j < data.levels[l].p(); ++j) redraw_structural_alpha(state, data, l, j, hyper, rng);
    }
  } else {
    update_alpha(state, data, 0, hyper, rng, acc);
    for (std::size_t l = 1; l < levels; ++l) aggregate_alpha(state, data, l, hyper);
  }
  for (std::size_t l = 0; l < levels; ++l) update_gamma(state, data, l, hyper, hyper.gamma_repeats, rng, acc);
}

double bottom_log_likelihood(const ChainState &state, const ModelData &data, const ModelHyper &hyper) {
  const auto &y = data.levels[0].y;
  const auto &ls = state.levels[0];
  double total = 0.0;
  if (hyper.model == ModelKind::ZINB) {
    for (std::size_t i = 0; i < y.rows(); ++i)
      for (std::size_t j = 0; j < y.cols(); ++j)
        total += zinb_entry_log_lik(y(i, j), ls.alpha(i, j), ls.eta(i, j) != 0, ls.phi[j], state.s[i]);
  } else {
    for (std::size_t i = 0; i < y.rows(); ++i) total += dm_row_log_lik(y.row(i), ls.alpha.row(i));
  }
  return total;
}

}  // namespace mbda
