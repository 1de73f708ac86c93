#include "mbda/cli.hpp"

#include "mbda/data_model.hpp"
#include "mbda/error.hpp"
#include "mbda/inference.hpp"
#include "mbda/io.hpp"
#include "mbda/normalization.hpp"
#include "mbda/random.hpp"
#include "mbda/stats.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace mbda::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ------------------------------------------------------------ value parsing

[[noreturn]] void bad_value(const std::string &key, const std::string &value, const std::string &why) {
  throw Error(ErrorKind::Config, "invalid value '" + value + "' for '" + key + "': " + why);
}

double to_double(const std::string &key, const std::string &value) {
  try {
    return io::parse_double(value, key);
  } catch (const Error &e) {
    bad_value(key, value, "expected a number");
  }
}

long long to_int(const std::string &key, const std::string &value) {
  try {
    return io::parse_integer(value, key);
  } catch (const Error &e) {
    bad_value(key, value, "expected an integer");
  }
}

int to_int32(const std::string &key, const std::string &value) {
  const long long v = to_int(key, value);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    bad_value(key, value, "out of range");
  return static_cast<int>(v);
}

bool to_bool(const std::string &key, const std::string &value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, value, "expected true or false");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

template <typename Fn>
auto wrap_enum(const std::string &key, const std::string &value, Fn parse) {
  try {
    return parse(value);
  } catch (const Error &e) {
    bad_value(key, value, e.what());
  }
}

struct Field {
  std::function<void(Settings &, const std::string &)> set;
  std::function<std::string(const Settings &)> get;
};

#define MBDA_DOUBLE(name, member)                                                            \
  {name, Field{[](Settings &s, const std::string &v) { s.member = to_double(name, v); },     \
               [](const Settings &s) { return io::format_double(s.member); }}}
#define MBDA_INT(name, member)                                                               \
  {name, Field{[](Settings &s, const std::string &v) { s.member = to_int32(name, v); },      \
               [](const Settings &s) { return std::to_string(s.member); }}}
#define MBDA_BOOL(name, member)                                                              \
  {name, Field{[](Settings &s, const std::string &v) { s.member = to_bool(name, v); },       \
               [](const Settings &s) { return from_bool(s.member); }}}

const std::map<std::string, Field> &fields() {
  static const std::map<std::string, Field> table = {
      {"model", Field{[](Settings &s, const std::string &v) { s.run.model = wrap_enum("model", v, parse_model_kind); },
                      [](const Settings &s) { return std::string(to_string(s.run.model)); }}},
      {"normalization",
       Field{[](Settings &s, const std::string &v) {
               s.run.normalization = wrap_enum("normalization", v, parse_norm_method);
             },
             [](const Settings &s) { return std::string(to_string(s.run.normalization)); }}},
      MBDA_INT("iterations", run.iterations),
      MBDA_INT("burn_in", run.burn_in),
      MBDA_INT("thinning", run.thinning),
      MBDA_INT("chains", run.chains),
      MBDA_INT("threads", run.threads),
      {"seed", Field{[](Settings &s, const std::string &v) {
                       const long long x = to_int("seed", v);
                       if (x < 0) bad_value("seed", v, "must be non-negative");
                       s.run.seed = static_cast<std::uint64_t>(x);
                       s.gen.seed = s.run.seed;
                     },
                     [](const Settings &s) { return std::to_string(s.run.seed); }}},
      MBDA_BOOL("use_tree", run.use_tree),
      MBDA_DOUBLE("a", run.top_a),
      MBDA_DOUBLE("b", run.top_b),
      MBDA_DOUBLE("h", run.top_h),
      MBDA_DOUBLE("a_pi", run.bottom.a_pi),
      MBDA_DOUBLE("b_pi", run.bottom.b_pi),
      MBDA_DOUBLE("a_phi", run.bottom.a_phi),
      MBDA_DOUBLE("b_phi", run.bottom.b_phi),
      MBDA_INT("dpp_components", run.dpp.components),
      MBDA_DOUBLE("sigma_s", run.dpp.sigma_s),
      MBDA_DOUBLE("c_s", run.dpp.c_s),
      MBDA_DOUBLE("tau_nu", run.dpp.tau_nu),
      MBDA_DOUBLE("a_t", run.dpp.a_t),
      MBDA_DOUBLE("b_t", run.dpp.b_t),
      MBDA_DOUBLE("a_m", run.dpp.a_m),
      MBDA_DOUBLE("b_m", run.dpp.b_m),
      {"prior", Field{[](Settings &s, const std::string &v) {
                        if (v == "beta-bernoulli") s.run.prior.kind = SelectionPrior::Kind::BetaBernoulli;
                        else if (v == "mrf") s.run.prior.kind = SelectionPrior::Kind::Mrf;
                        else bad_value("prior", v, "expected beta-bernoulli or mrf");
                      },
                      [](const Settings &s) {
                        return std::string(s.run.prior.kind == SelectionPrior::Kind::Mrf ? "mrf" : "beta-bernoulli");
                      }}},
      MBDA_DOUBLE("a_omega", run.prior.a_omega),
      MBDA_DOUBLE("b_omega", run.prior.b_omega),
      MBDA_DOUBLE("mrf_d", run.prior.d),
      MBDA_DOUBLE("mrf_f", run.prior.f),
      MBDA_DOUBLE("tau_phi", run.scales.tau_phi),
      MBDA_DOUBLE("tau_s", run.scales.tau_s),
      MBDA_DOUBLE("tau_alpha", run.scales.tau_alpha),
      MBDA_INT("gamma_repeats", run.gamma_repeats),
      MBDA_DOUBLE("tau_scale", run.scales.tau_scale),
      MBDA_INT("scale_repeats", run.scale_repeats),
      MBDA_BOOL("record_group_means", run.record_group_means),
      MBDA_DOUBLE("convergence_threshold", run.convergence_threshold),
      {"dump_path", Field{[](Settings &s, const std::string &v) { s.run.dump_path = v; },
                          [](const Settings &s) { return s.run.dump_path; }}},
      {"scheme", Field{[](Settings &s, const std::string &v) { s.gen.scheme = wrap_enum("scheme", v, parse_scheme); },
                       [](const Settings &s) { return std::string(to_string(s.gen.scheme)); }}},
      MBDA_INT("n", gen.n),
      MBDA_INT("p", gen.p),
      MBDA_INT("p_gamma", gen.p_gamma),
      MBDA_INT("k", gen.k),
      MBDA_DOUBLE("sigma", gen.sigma),
      MBDA_BOOL("null_from_prose", gen.null_from_prose),
      MBDA_INT("depth_min", gen.depth_min),
      MBDA_INT("depth_max", gen.depth_max),
      MBDA_INT("synthetic_depth", gen.synthetic_depth),
      MBDA_DOUBLE("fdr", fdr),
      MBDA_BOOL("qc", qc),
      MBDA_INT("min_nonzero", min_nonzero),
      MBDA_BOOL("taxa_in_rows", taxa_in_rows),
      MBDA_INT("replicates", replicates),
      {"methods", Field{[](Settings &s, const std::string &v) {
                          s.methods.clear();
                          for (const auto &m : io::split(v, ','))
                            if (!io::trim(m).empty()) s.methods.push_back(io::trim(m));
                          if (s.methods.empty()) bad_value("methods", v, "empty method list");
                        },
                        [](const Settings &s) {
                          std::string out;
                          for (const auto &m : s.methods) out += (out.empty() ? "" : ",") + m;
                          return out;
                        }}},
      {"base_counts", Field{[](Settings &s, const std::string &v) { s.base_counts = v; },
                            [](const Settings &s) { return s.base_counts; }}},
  };
  return table;
}

#undef MBDA_DOUBLE
#undef MBDA_INT
#undef MBDA_BOOL

// ------------------------------------------------------------ output helpers

void prepare_out_dir(const std::string &out, bool overwrite) {
  if (out.empty()) throw Error(ErrorKind::Config, "--out is required");
  const fs::path dir(out);
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "'" + out + "' exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!overwrite)
        throw Error(ErrorKind::Io, "output directory '" + out + "' is not empty; pass --overwrite to replace it");
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir);
}

void write_json(const fs::path &path, const json &j) { io::write_text(path, j.dump(2) + "\n"); }

json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void require(const std::string &value, const char *flag) {
  if (value.empty()) throw Error(ErrorKind::Config, std::string(flag) + " is required");
}

Orientation orientation(const Settings &s) {
  return s.taxa_in_rows ? Orientation::TaxaInRows : Orientation::SamplesInRows;
}

void warn_singletons(const GroupLabels &labels, std::ostream &log) {
  for (std::size_t k = 0; k < labels.group_sizes().size(); ++k)
    if (labels.group_sizes()[k] == 1)
      log << "warning: group " << k + 1 << " has a single sample; its variance is driven by the prior\n";
}

json acceptance_json(const AcceptanceStats &a) {
  auto rate = [](std::uint64_t acc, std::uint64_t tried) {
    return tried ? json(static_cast<double>(acc) / static_cast<double>(tried)) : json(nullptr);
  };
  return {{"alpha", rate(a.alpha_accepted, a.alpha_tried)}, {"phi", rate(a.phi_accepted, a.phi_tried)},
          {"s", rate(a.s_accepted, a.s_tried)},             {"gamma", rate(a.gamma_accepted, a.gamma_tried)},
          {"t", rate(a.t_accepted, a.t_tried)},             {"scale", rate(a.scale_accepted, a.scale_tried)}};
}

json report_json(const PosteriorReport &rep) {
  json selected = json::array();
  for (const auto &t : rep.taxa)
    if (t.selected) selected.push_back({{"level", t.level}, {"taxon_id", t.taxon_id}, {"ppi", t.ppi}});
  return {{"target_fdr", rep.target_fdr},
          {"threshold", json_number(rep.threshold)},
          {"realized_fdr", rep.realized_fdr},
          {"num_taxa", rep.taxa.size()},
          {"num_selected", selected.size()},
          {"selected", selected}};
}

void write_convergence(const fs::path &path, const ConvergenceReport &conv) {
  std::ostringstream out;
  out << "chain_a\tchain_b\tcorrelation\n";
  for (const auto &pr : conv.pairs)
    out << pr.a + 1 << '\t' << pr.b + 1 << '\t' << io::format_double(pr.correlation) << '\n';
  io::write_text(path, out.str());
}

json convergence_json(const ConvergenceReport &conv) {
  return {{"applicable", conv.applicable},
          {"threshold", conv.threshold},
          {"min_correlation", conv.applicable ? json(conv.min_correlation) : json(nullptr)},
          {"passed", conv.passed}};
}

std::vector<double> read_numbers(const fs::path &path) {
  std::vector<double> out;
  for (const auto &row : io::read_delimited(path, true))
    for (const auto &cell : row) {
      const auto t = io::trim(cell);
      if (t.empty()) continue;
      try {
        out.push_back(io::parse_double(t, "base count"));
      } catch (const Error &) {
        // header cells
      }
    }
  if (out.empty()) throw Error(ErrorKind::Parse, "'" + path.string() + "' holds no numbers");
  return out;
}

std::vector<double> base_counts_for(const Settings &s) {
  if (s.gen.scheme != Scheme::Synthetic) return {};
  if (s.base_counts.empty()) throw Error(ErrorKind::Config, "the synthetic scheme needs base_counts=<file>");
  return read_numbers(s.base_counts);
}

struct Prepared {
  CountTable table;
  GroupLabels labels;
  QcReport qc;
};

Prepared load_and_qc(const Settings &s, const Paths &paths) {
  require(paths.counts, "--counts");
  require(paths.labels, "--labels");
  CountTable table = load_count_table(paths.counts, orientation(s));
  GroupLabels labels = load_group_labels(paths.labels, table);
  QcReport qc;
  if (s.qc) {
    auto [kept, sample_report] = qc_samples(table, &labels);
    labels = restrict_labels(labels, table, kept);
    auto [filtered, feature_report] = qc_features(kept, labels, s.min_nonzero);
    qc = sample_report;
    qc.append(feature_report);
    table = std::move(filtered);
  }
  return {std::move(table), std::move(labels), std::move(qc)};
}

std::mutex progress_mutex;

ProgressFn make_progress(bool enabled, int iterations, std::ostream &log) {
  if (!enabled) return {};
  const int step = std::max(1, iterations / 20);
  return [step, iterations, &log](int chain, int it) {
    if (it % step != 0 && it != iterations) return;
    std::lock_guard lock(progress_mutex);
    log << "chain " << chain + 1 << ": iteration " << it << "/" << iterations << '\n' << std::flush;
  };
}

}  // namespace

// ------------------------------------------------------------------ settings

void Settings::set(const std::string &key, const std::string &value) {
  const auto &table = fields();
  const auto it = table.find(key);
  if (it == table.end()) throw Error(ErrorKind::Config, "unknown configuration key '" + key + "'");
  it->second.set(*this, value);
}

std::map<std::string, std::string> Settings::resolved() const {
  std::map<std::string, std::string> out;
  for (const auto &[key, field] : fields()) out[key] = field.get(*this);
  return out;
}

void apply_config_file(Settings &settings, const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config file '" + path.string() + "'");
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string text = io::trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Config, path.string() + ":" + std::to_string(number) + ": expected key=value");
    settings.set(io::trim(text.substr(0, eq)), io::trim(text.substr(eq + 1)));
  }
}

std::string format_resolved(const Settings &settings) {
  std::ostringstream out;
  out << "# resolved configuration\n";
  for (const auto &[key, value] : settings.resolved()) out << key << '=' << value << '\n';
  return out.str();
}

// ------------------------------------------------------------------ commands

int cmd_qc(const Settings &s, const Paths &paths, std::ostream &log) {
  require(paths.counts, "--counts");
  prepare_out_dir(paths.out, paths.overwrite);
  const fs::path out(paths.out);
  CountTable table = load_count_table(paths.counts, orientation(s));
  std::optional<GroupLabels> labels;
  if (!paths.labels.empty()) labels = load_group_labels(paths.labels, table);

  auto [kept, report] = qc_samples(table, labels ? &*labels : nullptr);
  CountTable result = kept;
  if (labels) {
    GroupLabels kept_labels = restrict_labels(*labels, table, kept);
    auto [filtered, feature_report] = qc_features(kept, kept_labels, s.min_nonzero);
    report.append(feature_report);
    result = filtered;
    write_group_labels(out / "labels.tsv", result, kept_labels);
  }
  write_count_table(out / "counts.tsv", result);
  io::write_text(out / "qc_report.tsv", report.to_tsv());
  io::write_text(out / "config.resolved.txt", format_resolved(s));
  log << "qc: kept " << result.n() << " of " << table.n() << " samples and " << result.p() << " of " << table.p()
      << " taxa\n";
  return kOk;
}

int cmd_normalize(const Settings &s, const Paths &paths, std::ostream &log) {
  require(paths.counts, "--counts");
  if (s.run.normalization == NormMethod::DPP)
    throw Error(ErrorKind::Config, "DPP size factors are sampled jointly with the model; use 'fit'");
  const CountTable table = load_count_table(paths.counts, orientation(s));
  const SizeFactors sf = estimate_size_factors(table, s.run.normalization);
  prepare_out_dir(paths.out, paths.overwrite);
  const fs::path out(paths.out);
  std::ostringstream tsv;
  tsv << "sample_id\ts\n";
  for (std::size_t i = 0; i < table.n(); ++i) tsv << table.sample_ids()[i] << '\t' << io::format_double(sf.s[i]) << '\n';
  io::write_text(out / "size_factors.tsv", tsv.str());
  io::write_text(out / "config.resolved.txt", format_resolved(s));
  log << "normalize: " << to_string(s.run.normalization) << " factors for " << table.n() << " samples\n";
  return kOk;
}

int cmd_simulate(const Settings &s, const Paths &paths, std::ostream &log) {
  const auto base = base_counts_for(s);
  const LabeledDataset ds = generate(s.gen, base);
  prepare_out_dir(paths.out, paths.overwrite);
  const fs::path out(paths.out);
  write_count_table(out / "counts.tsv", ds.table);
  write_group_labels(out / "labels.tsv", ds.table, ds.labels);

  std::ostringstream truth;
  truth << "taxon_id\tdiscriminating";
  const bool means = ds.true_group_mean.rows() == ds.table.p();
  if (means)
    for (int k = 0; k < ds.labels.num_groups(); ++k) truth << "\tlog_alpha_mean_" << k + 1;
  truth << '\n';
  for (std::size_t j = 0; j < ds.table.p(); ++j) {
    truth << ds.table.taxon_ids()[j] << '\t' << static_cast<int>(ds.truth[j]);
    if (means)
      for (std::size_t k = 0; k < static_cast<std::size_t>(ds.labels.num_groups()); ++k)
        truth << '\t' << io::format_double(ds.true_group_mean(j, k));
    truth << '\n';
  }
  io::write_text(out / "truth.tsv", truth.str());
  if (!ds.true_s.empty()) {
    std::ostringstream sf;
    sf << "sample_id\ts\n";
    for (std::size_t i = 0; i < ds.true_s.size(); ++i)
      sf << ds.table.sample_ids()[i] << '\t' << io::format_double(ds.true_s[i]) << '\n';
    io::write_text(out / "true_size_factors.tsv", sf.str());
  }
  io::write_text(out / "config.resolved.txt", format_resolved(s));
  log << "simulate: " << to_string(s.gen.scheme) << " scheme, n=" << ds.table.n() << ", p=" << ds.table.p()
      << ", discriminating=" << s.gen.p_gamma << '\n';
  return kOk;
}

int cmd_fit(const Settings &s, const Paths &paths, std::ostream &log) {
  s.run.validate();
  if (!(s.fdr > 0.0 && s.fdr < 1.0)) throw Error(ErrorKind::Config, "fdr must lie in (0, 1)");
  const bool mrf = s.run.prior.kind == SelectionPrior::Kind::Mrf;
  if (mrf && (paths.tree.empty() || !s.run.use_tree))
    throw Error(ErrorKind::Config, "the MRF prior requires a taxonomy tree (--tree) with use_tree=true");

  Prepared prep = load_and_qc(s, paths);
  warn_singletons(prep.labels, log);
  std::optional<TaxonomyTree> tree;
  if (!paths.tree.empty() && s.run.use_tree) tree = load_taxonomy(paths.tree);
  const auto levels = build_hierarchy(prep.table, tree ? &*tree : nullptr);
  const NormMethod norm = s.run.model == ModelKind::DM ? NormMethod::DPP : s.run.normalization;
  const ModelData data = ModelData::build(levels, prep.labels, norm);

  prepare_out_dir(paths.out, paths.overwrite);
  const fs::path out(paths.out);
  io::write_text(out / "config.resolved.txt", format_resolved(s));
  if (s.qc) io::write_text(out / "qc_report.tsv", prep.qc.to_tsv());

  RunConfig rc = s.run;
  if (!rc.dump_path.empty() && fs::path(rc.dump_path).is_relative()) rc.dump_path = (out / rc.dump_path).string();
  const MultiRun run = run_multi(data, rc, make_progress(paths.progress, rc.iterations, log));

  const PosteriorReport report = build_report(run.traces, data, s.fdr);
  write_taxa_tsv(out / "report_taxa.tsv", report);
  if (!report.samples.empty()) write_samples_tsv(out / "report_samples.tsv", report);
  write_convergence(out / "convergence.tsv", run.convergence);
  fs::create_directories(out / "traces");
  json chains = json::array();
  for (std::size_t c = 0; c < run.traces.size(); ++c) {
    const std::string stem = "chain_" + std::to_string(c + 1);
    write_trace_binary((out / "traces" / (stem + ".bin")).string(), run.traces[c]);
    std::ofstream tsv(out / "traces" / (stem + ".tsv"));
    write_trace_tsv(tsv, run.traces[c]);
    chains.push_back({{"chain", c + 1}, {"seed", run.traces[c].seed}, {"acceptance", acceptance_json(run.traces[c].acceptance)}});
  }

  json summary = report_json(report);
  summary["command"] = "fit";
  summary["model"] = to_string(s.run.model);
  summary["normalization"] = s.run.model == ModelKind::DM ? "none" : std::string(to_string(norm));
  summary["samples"] = data.n();
  summary["levels"] = data.levels.size();
  summary["convergence"] = convergence_json(run.convergence);
  summary["chains"] = chains;
  summary["qc_removed"] = prep.qc.removed.size();
  write_json(out / "summary.json", summary);

  log << "fit: " << report.taxa.size() << " taxa, " << summary["num_selected"].get<std::size_t>()
      << " selected at target FDR " << s.fdr << " (realized " << report.realized_fdr << ")\n";
  if (run.convergence.applicable && !run.convergence.passed) {
    log << "warning: minimum pairwise PPI correlation " << run.convergence.min_correlation << " is below "
        << run.convergence.threshold << "\n";
    return kConvergenceWarning;
  }
  return kOk;
}

int cmd_report(const Settings &s, const Paths &paths, std::ostream &log) {
  require(paths.in, "--in");
  if (!(s.fdr > 0.0 && s.fdr < 1.0)) throw Error(ErrorKind::Config, "fdr must lie in (0, 1)");
  const fs::path in(paths.in);
  PosteriorReport report;
  report.taxa = read_taxa_tsv(in / "report_taxa.tsv");
  if (fs::exists(in / "report_samples.tsv")) report.samples = read_samples_tsv(in / "report_samples.tsv");
  reselect(report, s.fdr);
  prepare_out_dir(paths.out, paths.overwrite);
  const fs::path out(paths.out);
  write_taxa_tsv(out / "report_taxa.tsv", report);
  if (!report.samples.empty()) write_samples_tsv(out / "report_samples.tsv", report);
  io::write_text(out / "config.resolved.txt", format_resolved(s));
  json summary = report_json(report);
  summary["command"] = "report";
  summary["source"] = paths.in;
  write_json(out / "summary.json", summary);
  log << "report: " << summary["num_selected"].get<std::size_t>() << " selected at target FDR " << s.fdr << '\n';
  return kOk;
}

// ----------------------------------------------------------------- benchmark

namespace {

struct Cell {
  double auc = std::numeric_limits<double>::quiet_NaN();
  double mcc = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

std::optional<NormMethod> bayes_norm(const std::string &method) {
  if (method.rfind("zinb-", 0) != 0) return std::nullopt;
  return parse_norm_method(method.substr(5));
}

std::vector<double> method_scores(const std::string &method, const LabeledDataset &ds, const Settings &s,
                                  std::uint64_t fit_seed) {
  if (method == "anova" || method == "kruskal-wallis") {
    const auto res = baseline_tests(ds.table, ds.labels,
                                    method == "anova" ? BaselineMethod::Anova : BaselineMethod::KruskalWallis);
    std::vector<double> scores(res.p_values.size());
    for (std::size_t j = 0; j < scores.size(); ++j) scores[j] = 1.0 - res.p_values[j];
    return scores;
  }
  RunConfig rc = s.run;
  rc.seed = fit_seed;
  rc.threads = 1;
  rc.record_group_means = false;
  if (method == "dm") {
    rc.model = ModelKind::DM;
    rc.normalization = NormMethod::DPP;
  } else {
    rc.model = ModelKind::ZINB;
    rc.normalization = *bayes_norm(method);
  }
  if (rc.prior.kind == SelectionPrior::Kind::Mrf) rc.prior.kind = SelectionPrior::Kind::BetaBernoulli;
  const auto data = ModelData::build(build_hierarchy(ds.table, nullptr), ds.labels, rc.normalization);
  const auto run = run_multi(data, rc);
  return compute_ppi(run.traces).front();
}

void check_method(const std::string &method) {
  if (method == "anova" || method == "kruskal-wallis" || method == "dm") return;
  try {
    if (bayes_norm(method)) return;
  } catch (const Error &) {
  }
  throw Error(ErrorKind::Config, "unknown benchmark method '" + method + "'");
}

std::string na_or(double v) { return std::isfinite(v) ? io::format_double(v) : "NA"; }

}  // namespace

int cmd_benchmark(const Settings &s, const Paths &paths, std::ostream &log) {
  if (s.replicates < 1) throw Error(ErrorKind::Config, "replicates must be at least 1");
  s.gen.validate();
  s.run.validate();
  for (const auto &m : s.methods) check_method(m);
  const auto base = base_counts_for(s);
  prepare_out_dir(paths.out, paths.overwrite);
  const fs::path out(paths.out);
  io::write_text(out / "config.resolved.txt", format_resolved(s));

  const std::size_t reps = static_cast<std::size_t>(s.replicates), methods = s.methods.size();
  std::vector<Cell> cells(reps * methods);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mutex;
  auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      try {
        GeneratorConfig g = s.gen;
        g.seed = derive_stream_seed(s.gen.seed, r);
        const LabeledDataset ds = generate(g, base);
        for (std::size_t m = 0; m < methods; ++m) {
          Cell &cell = cells[r * methods + m];
          try {
            const auto scores = method_scores(s.methods[m], ds, s, derive_stream_seed(g.seed, m + 1));
            try {
              cell.auc = auc(scores, ds.truth);
            } catch (const Error &e) {
              if (e.kind() != ErrorKind::Undefined) throw;
            }
            cell.mcc = mcc(top_k(scores, static_cast<std::size_t>(s.gen.p_gamma)), ds.truth);
          } catch (const Error &e) {
            if (e.kind() == ErrorKind::Config || e.kind() == ErrorKind::InvalidArgument) throw;
            cell = Cell{};
            cell.status = std::string("NA: ") + e.what();
          }
          if (paths.progress) {
            std::lock_guard lock(mutex);
            log << "replicate " << r + 1 << "/" << reps << " " << s.methods[m] << ": " << cell.status << '\n';
          }
        }
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        next = reps;
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t nthreads = std::min<std::size_t>(reps, s.run.threads > 0 ? static_cast<std::size_t>(s.run.threads) : hw);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::ostringstream per_rep, table;
  per_rep << "replicate\tmethod\tauc\tmcc\tstatus\n";
  table << "scheme\tn\tk\tsigma\tmethod\tauc_mean\tauc_se\tmcc_mean\tmcc_se\treplicates\tna\n";
  json summary = {{"command", "benchmark"}, {"replicates", reps}, {"scheme", to_string(s.gen.scheme)}};
  json rows = json::array();
  for (std::size_t m = 0; m < methods; ++m) {
    std::vector<double> aucs, mccs;
    std::size_t na = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const Cell &c = cells[r * methods + m];
      per_rep << r + 1 << '\t' << s.methods[m] << '\t' << na_or(c.auc) << '\t' << na_or(c.mcc) << '\t' << c.status << '\n';
      if (c.status != "ok") {
        ++na;
        continue;
      }
      if (std::isfinite(c.auc)) aucs.push_back(c.auc);
      if (std::isfinite(c.mcc)) mccs.push_back(c.mcc);
    }
    auto mean_se = [](const std::vector<double> &v) -> std::pair<double, double> {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      if (v.empty()) return {nan, nan};
      const double mu = stats::mean(v);
      if (v.size() < 2) return {mu, 0.0};
      return {mu, std::sqrt(stats::variance(v) / static_cast<double>(v.size()))};
    };
    const auto [am, ase] = mean_se(aucs);
    const auto [mm, mse] = mean_se(mccs);
    table << to_string(s.gen.scheme) << '\t' << s.gen.n << '\t' << s.gen.k << '\t' << io::format_double(s.gen.sigma)
          << '\t' << s.methods[m] << '\t' << na_or(am) << '\t' << na_or(ase) << '\t' << na_or(mm) << '\t'
          << na_or(mse) << '\t' << reps - na << '\t' << na << '\n';
    rows.push_back({{"method", s.methods[m]}, {"auc_mean", json_number(am)}, {"auc_se", json_number(ase)},
                    {"mcc_mean", json_number(mm)}, {"mcc_se", json_number(mse)}, {"na", na}});
    log << s.methods[m] << ": AUC " << na_or(am) << " (" << na_or(ase) << "), MCC " << na_or(mm) << " ("
        << na_or(mse) << ")" << (na ? ", NA in " + std::to_string(na) + " replicate(s)" : "") << '\n';
  }
  summary["methods"] = rows;
  io::write_text(out / "benchmark.tsv", table.str());
  io::write_text(out / "benchmark_replicates.tsv", per_rep.str());
  write_json(out / "summary.json", summary);
  return kOk;
}

// ---------------------------------------------------------------------- main

int main(int argc, char **argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Bayesian differential abundance analysis of microbiome counts"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Paths paths;
  std::string config_path;
  std::map<std::string, std::string> flags;
  std::vector<std::string> overrides;

  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", config_path, "Flat key=value configuration file");
    sub->add_option("--out", paths.out, "Output directory")->required();
    sub->add_flag("--overwrite", paths.overwrite, "Replace a non-empty output directory");
    sub->add_option("--set", overrides, "Extra key=value setting (repeatable)");
    sub->add_option_function<std::string>("--seed", [&](const std::string &v) { flags["seed"] = v; }, "Random seed");
    sub->add_option_function<std::string>("--threads", [&](const std::string &v) { flags["threads"] = v; },
                                          "Worker threads (0: one per chain or replicate)");
  };
  auto counts = [&](CLI::App *sub, bool labels_required) {
    sub->add_option("--counts", paths.counts, "Count table (samples in rows)")->required();
    auto *lab = sub->add_option("--labels", paths.labels, "Group labels (sample_id, group 1..K)");
    if (labels_required) lab->required();
    sub->add_flag_function("--taxa-in-rows", [&](std::int64_t) { flags["taxa_in_rows"] = "true"; },
                           "Count table has taxa in rows");
  };
  auto model_flags = [&](CLI::App *sub) {
    sub->add_option_function<std::string>("--model", [&](const std::string &v) { flags["model"] = v; }, "dm or zinb");
    sub->add_option_function<std::string>("--norm", [&](const std::string &v) { flags["normalization"] = v; },
                                          "dpp, tss, q75, rle, tmm or css");
    sub->add_option_function<std::string>("--fdr", [&](const std::string &v) { flags["fdr"] = v; },
                                          "Target Bayesian FDR");
    sub->add_option_function<std::string>("--chains", [&](const std::string &v) { flags["chains"] = v; },
                                          "Number of chains");
    sub->add_option_function<std::string>("--iters", [&](const std::string &v) { flags["iterations"] = v; },
                                          "Iterations per chain");
    sub->add_flag("--progress", paths.progress, "Print a plain iteration counter");
  };

  auto *qc = app.add_subcommand("qc", "Sample and feature quality control");
  common(qc);
  counts(qc, false);

  auto *normalize = app.add_subcommand("normalize", "Plug-in size factors");
  common(normalize);
  counts(normalize, false);
  normalize->add_option_function<std::string>("--norm", [&](const std::string &v) { flags["normalization"] = v; },
                                              "tss, q75, rle, tmm or css");

  auto *simulate = app.add_subcommand("simulate", "Generate a labelled dataset");
  common(simulate);
  simulate->add_option_function<std::string>("--scheme", [&](const std::string &v) { flags["scheme"] = v; },
                                             "dm, zinb or synthetic");

  auto *fit = app.add_subcommand("fit", "Run the sampler and write the posterior report");
  common(fit);
  counts(fit, true);
  fit->add_option("--tree", paths.tree, "Taxonomy file (taxon_id, '|'-delimited lineage)");
  model_flags(fit);

  auto *bench = app.add_subcommand("benchmark", "Simulation grid of methods with AUC and MCC");
  common(bench);
  model_flags(bench);
  bench->add_option_function<std::string>("--scheme", [&](const std::string &v) { flags["scheme"] = v; },
                                          "dm, zinb or synthetic");
  bench->add_option_function<std::string>("--replicates", [&](const std::string &v) { flags["replicates"] = v; },
                                          "Replicates per cell");

  auto *report = app.add_subcommand("report", "Re-select taxa from a fit directory at a new FDR");
  common(report);
  report->add_option("--in", paths.in, "Directory written by 'fit'")->required();
  report->add_option_function<std::string>("--fdr", [&](const std::string &v) { flags["fdr"] = v; },
                                           "Target Bayesian FDR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kError;
  }

  try {
    Settings settings;
    if (!config_path.empty()) apply_config_file(settings, config_path);
    for (const auto &kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::Config, "--set expects key=value, got '" + kv + "'");
      settings.set(io::trim(kv.substr(0, eq)), io::trim(kv.substr(eq + 1)));
    }
    for (const auto &[key, value] : flags) settings.set(key, value);

    if (*qc) return cmd_qc(settings, paths, err);
    if (*normalize) return cmd_normalize(settings, paths, err);
    if (*simulate) return cmd_simulate(settings, paths, err);
    if (*fit) return cmd_fit(settings, paths, err);
    if (*bench) return cmd_benchmark(settings, paths, err);
    if (*report) return cmd_report(settings, paths, err);
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }
  return kError;
}

}  // namespace mbda::cli
