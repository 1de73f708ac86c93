#include "mbda/random.hpp"

#include "mbda/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mbda {

std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace rnd {

double uniform(Rng &rng) {
  // 53 random bits, shifted off zero so log(uniform) is always finite.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double normal(Rng &rng, double mean, double sd) {
  std::normal_distribution<double> dist(mean, sd);
  return dist(rng);
}

namespace {

// log of a Gamma(shape, 1) draw; stays finite for shapes far below one where
// the draw itself underflows.
double log_gamma_draw(Rng &rng, double shape) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return std::log(dist(rng));
  }
  std::gamma_distribution<double> dist(shape + 1.0, 1.0);
  return std::log(dist(rng)) + std::log(uniform(rng)) / shape;
}

}  // namespace

double gamma(Rng &rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw Error(ErrorKind::InvalidParameter, "gamma draw needs positive shape and rate");
  return std::exp(log_gamma_draw(rng, shape)) / rate;
}

double beta(Rng &rng, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw Error(ErrorKind::InvalidParameter, "beta draw needs positive parameters");
  const double lx = log_gamma_draw(rng, a);
  const double ly = log_gamma_draw(rng, b);
  const double m = std::max(lx, ly);
  const double x = std::exp(lx - m);
  const double y = std::exp(ly - m);
  double out = x / (x + y);
  // Keep the draw strictly inside (0, 1); the samplers take logs of t and 1-t.
  constexpr double eps = std::numeric_limits<double>::epsilon();
  return std::clamp(out, eps, 1.0 - eps);
}

bool bernoulli(Rng &rng, double p) { return uniform(rng) < p; }

std::uint64_t poisson(Rng &rng, double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(rng);
}

std::uint64_t binomial(Rng &rng, std::uint64_t trials, double p) {
  if (trials == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return trials;
  std::binomial_distribution<std::uint64_t> dist(trials, p);
  return dist(rng);
}

std::uint64_t negative_binomial(Rng &rng, double mean, double size) {
  // Gamma-Poisson mixture: lambda ~ Ga(size, rate = size / mean).
  if (mean <= 0.0) return 0;
  const double lambda = gamma(rng, size, size / mean);
  return poisson(rng, lambda);
}

std::vector<double> dirichlet(Rng &rng, std::span<const double> alpha) {
  std::vector<double> logs(alpha.size());
  for (std::size_t j = 0; j < alpha.size(); ++j) logs[j] = log_gamma_draw(rng, alpha[j]);
  const double m = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  std::vector<double> out(alpha.size());
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    out[j] = std::exp(logs[j] - m);
    total += out[j];
  }
  for (double &v : out) v /= total;
  return out;
}

std::vector<std::uint64_t> multinomial(Rng &rng, std::uint64_t trials,
                                       std::span<const double> probs) {
  std::vector<std::uint64_t> out(probs.size(), 0);
  double remaining_mass = 0.0;
  for (double p : probs) remaining_mass += p;
  std::uint64_t remaining = trials;
  for (std::size_t j = 0; j + 1 < probs.size() && remaining > 0; ++j) {
    const double p = remaining_mass > 0.0 ? std::clamp(probs[j] / remaining_mass, 0.0, 1.0) : 0.0;
    out[j] = binomial(rng, remaining, p);
    remaining -= out[j];
    remaining_mass -= probs[j];
  }
  if (!probs.empty()) out.back() += remaining;
  return out;
}

std::size_t categorical_log(Rng &rng, std::span<const double> log_weights) {
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(m))
    return static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(log_weights.size()) - 1));
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - m);
  double u = uniform(rng) * total;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    u -= std::exp(log_weights[k] - m);
    if (u <= 0.0) return k;
  }
  return log_weights.size() - 1;
}

std::int64_t uniform_int(Rng &rng, std::int64_t lo, std::int64_t hi) {
  std::uniform_int_distribution<std::int64_t> dist(lo, hi);
  return dist(rng);
}

}  // namespace rnd
}  // namespace mbda
