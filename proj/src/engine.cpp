#include "mbda/engine.hpp"

#include "mbda/error.hpp"
#include "mbda/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace mbda {

ModelHyper RunConfig::hyper(int num_groups) const {
  ModelHyper h;
  h.model = model;
  h.top = TopLevelHyper::uniform(num_groups, top_a, top_b, top_h);
  h.bottom = bottom;
  h.dpp = dpp;
  h.prior = prior;
  h.scales = scales;
  h.gamma_repeats = gamma_repeats;
  h.scale_repeats = scale_repeats;
  return h;
}

void RunConfig::validate() const {
  auto fail = [](const std::string &msg) { throw Error(ErrorKind::Config, msg); };
  if (iterations < 1) fail("iterations must be >= 1");
  if (effective_burn_in() < 0 || effective_burn_in() >= iterations) fail("burn_in must be in [0, iterations)");
  if (thinning < 1) fail("thinning must be >= 1");
  if (chains < 1) fail("chains must be >= 1");
  if (threads < 0) fail("threads must be >= 0");
  if (!(convergence_threshold >= -1.0 && convergence_threshold <= 1.0))
    fail("convergence threshold must be in [-1, 1]");
  hyper(2).validate(2);
}

std::size_t Trace::total_taxa() const noexcept {
  std::size_t t = 0;
  for (auto p : level_sizes) t += p;
  return t;
}

std::vector<double> Trace::ppi() const {
  const std::size_t p = total_taxa();
  std::vector<double> out(p, 0.0);
  if (records() == 0) return out;
  for (std::size_t r = 0; r < records(); ++r)
    for (std::size_t j = 0; j < p; ++j) out[j] += gamma[r * p + j];
  for (double &v : out) v /= static_cast<double>(records());
  return out;
}

ConvergenceReport convergence_report(const std::vector<Trace> &traces, double threshold) {
  ConvergenceReport rep;
  rep.threshold = threshold;
  if (traces.size() < 2) return rep;
  rep.applicable = true;
  std::vector<std::vector<double>> ppis;
  for (const auto &t : traces) ppis.push_back(t.ppi());
  rep.min_correlation = 1.0;
  for (std::size_t a = 0; a < ppis.size(); ++a)
    for (std::size_t b = a + 1; b < ppis.size(); ++b) {
      double r = ppis[a] == ppis[b] ? 1.0 : stats::pearson(ppis[a], ppis[b]);
      if (std::isnan(r)) r = 0.0;
      rep.pairs.push_back({static_cast<int>(a), static_cast<int>(b), r});
      rep.min_correlation = std::min(rep.min_correlation, r);
    }
  rep.passed = rep.min_correlation >= threshold;
  return rep;
}

namespace {

void dump_state(const std::string &path, const ChainState &state, const ModelData &data, int iteration) {
  std::ofstream out(path);
  if (!out) return;
  out.precision(17);
  out << "iteration\t" << iteration << "\n";
  for (std::size_t i = 0; i < state.s.size(); ++i)
    out << "s\t" << data.sample_ids[i] << "\t" << state.s[i] << "\n";
  for (std::size_t l = 0; l < state.levels.size(); ++l) {
    const auto &ls = state.levels[l];
    for (std::size_t j = 0; j < ls.alpha.cols(); ++j) {
      out << "taxon\t" << (l + 1) << "\t" << data.levels[l].taxon_ids[j] << "\tgamma=" << int(ls.gamma[j]);
      if (!ls.phi.empty()) out << "\tphi=" << ls.phi[j];
      out << "\talpha";
      for (std::size_t i = 0; i < ls.alpha.rows(); ++i) out << ' ' << ls.alpha(i, j);
      out << "\n";
    }
  }
}

[[noreturn]] void numerical_failure(const RunConfig &config, const ChainState &state, const ModelData &data,
                                    int iteration, double loglik) {
  std::ostringstream msg;
  msg << "non-finite log-likelihood (" << loglik << ") at iteration " << iteration;
  double min_s = INFINITY, max_s = -INFINITY;
  for (double v : state.s) {
    min_s = std::min(min_s, v);
    max_s = std::max(max_s, v);
  }
  msg << "; s range [" << min_s << ", " << max_s << "]";
  if (!config.dump_path.empty()) {
    dump_state(config.dump_path, state, data, iteration);
    msg << "; state written to " << config.dump_path;
  }
  throw Error(ErrorKind::NumericalFailure, msg.str());
}

void record(Trace &trace, const ChainState &state, const ModelData &data, std::uint32_t iteration, double loglik) {
  trace.iteration.push_back(iteration);
  trace.loglik.push_back(loglik);
  if (trace.has_s) trace.s.insert(trace.s.end(), state.s.begin(), state.s.end());
  const std::size_t k = static_cast<std::size_t>(data.num_groups());
  for (const auto &ls : state.levels) trace.gamma.insert(trace.gamma.end(), ls.gamma.begin(), ls.gamma.end());
  if (!trace.has_group_means) return;
  for (const auto &ls : state.levels)
    for (std::size_t j = 0; j < ls.gamma.size(); ++j) {
      const auto groups = ls.group_stats(j, k);
      for (std::size_t g = 0; g < k; ++g)
        trace.group_mean.push_back(static_cast<float>(groups[g].sum / groups[g].count));
    }
}

}  // namespace

Trace run_chain(const ModelData &data, const RunConfig &config, std::uint64_t chain_seed,
                const ProgressFn &progress, int chain_index) {
  config.validate();
  const ModelHyper hyper = config.hyper(data.num_groups());
  hyper.validate(data.num_groups());
  if (hyper.prior.kind == SelectionPrior::Kind::Mrf && data.levels.size() < 2)
    throw Error(ErrorKind::Config, "the MRF prior couples taxa through the taxonomy tree, so it requires a tree");

  Rng rng(chain_seed);
  ChainState state = initialize_state(data, hyper, rng);

  Trace trace;
  trace.seed = chain_seed;
  trace.thinning = config.thinning;
  trace.iterations = config.iterations;
  trace.burn_in = config.effective_burn_in();
  trace.n = data.n();
  trace.num_groups = data.num_groups();
  for (const auto &lv : data.levels) trace.level_sizes.push_back(lv.p());
  trace.has_s = config.model == ModelKind::ZINB && data.sample_s();
  trace.has_group_means = config.record_group_means;
  const auto expected = static_cast<std::size_t>((config.iterations - trace.burn_in) / config.thinning);
  trace.iteration.reserve(expected);

  for (int it = 1; it <= config.iterations; ++it) {
    sweep(state, data, hyper, rng, &trace.acceptance);
    const bool keep = it > trace.burn_in && (it - trace.burn_in) % config.thinning == 0;
    if (keep || it % 100 == 0 || it == 1) {
      double ll;
      try {
        ll = bottom_log_likelihood(state, data, hyper);
      } catch (const Error &) {
        ll = NAN;
      }
      if (!std::isfinite(ll)) numerical_failure(config, state, data, it, ll);
      if (keep) record(trace, state, data, static_cast<std::uint32_t>(it), ll);
    }
    if (progress) progress(chain_index, it);
  }
  return trace;
}

MultiRun run_multi(const ModelData &data, const RunConfig &config, const ProgressFn &progress) {
  config.validate();
  const auto chains = static_cast<std::size_t>(config.chains);
  std::size_t workers = config.threads > 0 ? static_cast<std::size_t>(config.threads)
                                           : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, chains);

  MultiRun out;
  out.traces.resize(chains);
  std::vector<std::exception_ptr> errors(chains);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t c = next++; c < chains; c = next++) {
      try {
        out.traces[c] = run_chain(data, config, derive_stream_seed(config.seed, c), progress, static_cast<int>(c));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto &t : pool) t.join();
  }
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
  out.convergence = convergence_report(out.traces, config.convergence_threshold);
  return out;
}

namespace {

constexpr char kMagic[8] = {'M', 'B', 'D', 'A', 'T', 'R', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream &out, const T &v) {
  out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <class T>
T get(std::istream &in) {
  T v{};
  in.read(reinterpret_cast<char *>(&v), sizeof(T));
  if (!in) throw Error(ErrorKind::Parse, "truncated trace file");
  return v;
}

}  // namespace

void write_trace_binary(const std::string &path, const Trace &trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out.write(kMagic, sizeof kMagic);
  put(out, kVersion);
  put(out, static_cast<std::uint64_t>(trace.n));
  put(out, static_cast<std::uint32_t>(trace.level_sizes.size()));
  for (auto p : trace.level_sizes) put(out, static_cast<std::uint64_t>(p));
  put(out, static_cast<std::int32_t>(trace.num_groups));
  put(out, trace.seed);
  put(out, static_cast<std::int32_t>(trace.iterations));
  put(out, static_cast<std::int32_t>(trace.burn_in));
  put(out, static_cast<std::int32_t>(trace.thinning));
  put(out, static_cast<std::uint8_t>(trace.has_s));
  put(out, static_cast<std::uint8_t>(trace.has_group_means));
  put(out, static_cast<std::uint64_t>(trace.records()));
  const AcceptanceStats &a = trace.acceptance;
  for (auto v : {a.alpha_tried, a.alpha_accepted, a.phi_tried, a.phi_accepted, a.s_tried, a.s_accepted,
                 a.gamma_tried, a.gamma_accepted, a.t_tried, a.t_accepted, a.scale_tried, a.scale_accepted})
    put(out, v);

  const std::size_t p = trace.total_taxa();
  const std::size_t gm = p * static_cast<std::size_t>(trace.num_groups);
  std::vector<std::uint8_t> packed((p + 7) / 8);
  for (std::size_t r = 0; r < trace.records(); ++r) {
    put(out, trace.iteration[r]);
    put(out, trace.loglik[r]);
    if (trace.has_s) out.write(reinterpret_cast<const char *>(&trace.s[r * trace.n]), sizeof(double) * trace.n);
    std::fill(packed.begin(), packed.end(), 0);
    for (std::size_t j = 0; j < p; ++j)
      if (trace.gamma[r * p + j]) packed[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
    out.write(reinterpret_cast<const char *>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (trace.has_group_means)
      out.write(reinterpret_cast<const char *>(&trace.group_mean[r * gm]), static_cast<std::streamsize>(sizeof(float) * gm));
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

Trace read_trace_binary(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error(ErrorKind::Parse, "not a trace file");
  if (get<std::uint32_t>(in) != kVersion) throw Error(ErrorKind::Parse, "unsupported trace version");
  Trace t;
  t.n = get<std::uint64_t>(in);
  const auto levels = get<std::uint32_t>(in);
  for (std::uint32_t l = 0; l < levels; ++l) t.level_sizes.push_back(get<std::uint64_t>(in));
  t.num_groups = get<std::int32_t>(in);
  t.seed = get<std::uint64_t>(in);
  t.iterations = get<std::int32_t>(in);
  t.burn_in = get<std::int32_t>(in);
  t.thinning = get<std::int32_t>(in);
  t.has_s = get<std::uint8_t>(in) != 0;
  t.has_group_means = get<std::uint8_t>(in) != 0;
  const auto records = get<std::uint64_t>(in);
  AcceptanceStats &a = t.acceptance;
  for (auto *v : {&a.alpha_tried, &a.alpha_accepted, &a.phi_tried, &a.phi_accepted, &a.s_tried, &a.s_accepted,
                  &a.gamma_tried, &a.gamma_accepted, &a.t_tried, &a.t_accepted, &a.scale_tried,
                  &a.scale_accepted})
    *v = get<std::uint64_t>(in);

  const std::size_t p = t.total_taxa();
  const std::size_t gm = p * static_cast<std::size_t>(t.num_groups);
  std::vector<std::uint8_t> packed((p + 7) / 8);
  for (std::uint64_t r = 0; r < records; ++r) {
    t.iteration.push_back(get<std::uint32_t>(in));
    t.loglik.push_back(get<double>(in));
    if (t.has_s)
      for (std::size_t i = 0; i < t.n; ++i) t.s.push_back(get<double>(in));
    in.read(reinterpret_cast<char *>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (!in) throw Error(ErrorKind::Parse, "truncated trace file");
    for (std::size_t j = 0; j < p; ++j) t.gamma.push_back((packed[j / 8] >> (j % 8)) & 1u);
    if (t.has_group_means)
      for (std::size_t c = 0; c < gm; ++c) t.group_mean.push_back(get<float>(in));
  }
  return t;
}

void write_trace_tsv(std::ostream &out, const Trace &trace) {
  out << "iteration\tloglik";
  for (std::size_t l = 0; l < trace.level_sizes.size(); ++l) out << "\tselected_level" << (l + 1);
  if (trace.has_s)
    for (std::size_t i = 0; i < trace.n; ++i) out << "\ts" << (i + 1);
  out << "\n";
  const std::size_t p = trace.total_taxa();
  auto old = out.precision(10);
  for (std::size_t r = 0; r < trace.records(); ++r) {
    out << trace.iteration[r] << '\t' << trace.loglik[r];
    std::size_t offset = 0;
    for (auto lp : trace.level_sizes) {
      std::size_t count = 0;
      for (std::size_t j = 0; j < lp; ++j) count += trace.gamma[r * p + offset + j];
      out << '\t' << count;
      offset += lp;
    }
    if (trace.has_s)
      for (std::size_t i = 0; i < trace.n; ++i) out << '\t' << trace.s_at(r, i);
    out << "\n";
  }
  out.precision(old);
}

}  // namespace mbda
