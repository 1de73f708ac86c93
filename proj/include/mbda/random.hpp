#ifndef MBDA_RANDOM_HPP
#define MBDA_RANDOM_HPP

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mbda {

using Rng = std::mt19937_64;

/// Seed for stream `index` of a master seed. Each stream depends only on
/// (master, index), so adding chains or replicates never shifts earlier ones.
/// Rule: splitmix64 applied to master + (index + 1) * 0x9E3779B97F4A7C15.
[[nodiscard]] std::uint64_t derive_stream_seed(std::uint64_t master,
                                               std::uint64_t index);

namespace rnd {

double uniform(Rng &rng);  // (0, 1)
double normal(Rng &rng, double mean, double sd);
double gamma(Rng &rng, double shape, double rate);
double beta(Rng &rng, double a, double b);
bool bernoulli(Rng &rng, double p);
std::uint64_t poisson(Rng &rng, double mean);
std::uint64_t binomial(Rng &rng, std::uint64_t trials, double p);
/// NB with mean `mean` and size `size` (variance mean + mean^2 / size).
std::uint64_t negative_binomial(Rng &rng, double mean, double size);
std::vector<double> dirichlet(Rng &rng, std::span<const double> alpha);
std::vector<std::uint64_t> multinomial(Rng &rng, std::uint64_t trials,
                                       std::span<const double> probs);
/// Index drawn with probability proportional to exp(log_weights).
std::size_t categorical_log(Rng &rng, std::span<const double> log_weights);
std::int64_t uniform_int(Rng &rng, std::int64_t lo, std::int64_t hi);  // inclusive

}  // namespace rnd
}  // namespace mbda

#endif
