#include "mbda/data_model.hpp"

#include "mbda/error.hpp"
#include "mbda/io.hpp"
#include "mbda/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

namespace mbda {

namespace {

void require_unique(const std::vector<std::string> &ids, const char *what) {
  std::unordered_set<std::string> seen;
  for (const auto &id : ids) {
    if (!seen.insert(id).second)
      throw Error(ErrorKind::DuplicateId, std::string("duplicate ") + what + " id '" + id + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------- CountTable

CountTable::CountTable(Matrix<Count> counts, std::vector<std::string> sample_ids,
                       std::vector<std::string> taxon_ids, int level)
    : counts_(std::move(counts)),
      sample_ids_(std::move(sample_ids)),
      taxon_ids_(std::move(taxon_ids)),
      level_(level) {
  if (sample_ids_.size() != counts_.rows() || taxon_ids_.size() != counts_.cols())
    throw Error(ErrorKind::InvalidArgument, "identifier counts do not match matrix shape");
  if (counts_.rows() < 2) throw Error(ErrorKind::InvalidArgument, "count table needs n >= 2");
  if (counts_.cols() < 1) throw Error(ErrorKind::InvalidArgument, "count table needs p >= 1");
  if (level_ < 1) throw Error(ErrorKind::InvalidArgument, "level must be >= 1");
  require_unique(sample_ids_, "sample");
  require_unique(taxon_ids_, "taxon");
}

std::vector<double> CountTable::row_totals() const {
  std::vector<double> totals(n(), 0.0);
  for (std::size_t i = 0; i < n(); ++i)
    for (Count c : counts_.row(i)) totals[i] += static_cast<double>(c);
  return totals;
}

std::size_t CountTable::nonzero_in_row(std::size_t i) const {
  const auto r = counts_.row(i);
  return static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [](Count c) { return c > 0; }));
}

CountTable CountTable::select_samples(const std::vector<std::size_t> &rows) const {
  Matrix<Count> m(rows.size(), p());
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < p(); ++j) m(r, j) = counts_(rows[r], j);
    ids.push_back(sample_ids_[rows[r]]);
  }
  return CountTable(std::move(m), std::move(ids), taxon_ids_, level_);
}

CountTable CountTable::select_taxa(const std::vector<std::size_t> &cols) const {
  Matrix<Count> m(n(), cols.size());
  std::vector<std::string> ids;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t i = 0; i < n(); ++i) m(i, c) = counts_(i, cols[c]);
    ids.push_back(taxon_ids_[cols[c]]);
  }
  return CountTable(std::move(m), sample_ids_, std::move(ids), level_);
}

// --------------------------------------------------------------- GroupLabels

GroupLabels::GroupLabels(std::vector<int> groups_one_based, int num_groups) : k_(num_groups) {
  if (k_ < 2) throw Error(ErrorKind::InvalidArgument, "need at least two groups");
  sizes_.assign(static_cast<std::size_t>(k_), 0);
  group_.reserve(groups_one_based.size());
  for (int g : groups_one_based) {
    if (g < 1 || g > k_)
      throw Error(ErrorKind::InvalidArgument, "group label " + std::to_string(g) + " outside 1.." +
                                                  std::to_string(k_));
    group_.push_back(g - 1);
    ++sizes_[static_cast<std::size_t>(g - 1)];
  }
  for (int k = 0; k < k_; ++k)
    if (sizes_[static_cast<std::size_t>(k)] == 0)
      throw Error(ErrorKind::InvalidArgument, "group " + std::to_string(k + 1) + " is empty");
}

GroupLabels GroupLabels::select(const std::vector<std::size_t> &rows) const {
  std::vector<int> g;
  g.reserve(rows.size());
  for (auto r : rows) g.push_back(group_[r] + 1);
  return GroupLabels(std::move(g), k_);
}

// -------------------------------------------------------------- TaxonomyTree

TaxonomyTree TaxonomyTree::from_lineages(
    const std::vector<std::pair<std::string, std::string>> &lineages, char delimiter) {
  TaxonomyTree tree;
  if (lineages.empty()) throw Error(ErrorKind::InvalidArgument, "empty taxonomy");
  std::size_t depth = 0;
  for (const auto &[taxon, lineage] : lineages) {
    auto parts = io::split(lineage, delimiter);
    if (parts.empty() || std::any_of(parts.begin(), parts.end(), [](auto &s) { return s.empty(); }))
      throw Error(ErrorKind::Parse, "malformed lineage for taxon '" + taxon + "'");
    if (depth == 0) {
      depth = parts.size();
      tree.levels_ = static_cast<int>(depth);
      tree.index_.resize(depth);
    } else if (parts.size() != depth) {
      throw Error(ErrorKind::TreeMismatch, "lineage depth differs for taxon '" + taxon + "'");
    }
    // Walk from the top rank down; level = depth - position.
    int parent = -1;
    std::string prefix;
    for (std::size_t pos = 0; pos < depth; ++pos) {
      const int level = static_cast<int>(depth - pos);
      prefix = pos == 0 ? parts[pos] : prefix + delimiter + parts[pos];
      const std::string id = level == 1 ? taxon : prefix;
      auto &idx = tree.index_[static_cast<std::size_t>(level - 1)];
      auto it = idx.find(id);
      int node = 0;
      if (it == idx.end()) {
        node = static_cast<int>(tree.nodes_.size());
        tree.nodes_.push_back(TaxonNode{id, parts[pos], level, parent, {}});
        idx.emplace(id, node);
        if (parent >= 0) tree.nodes_[static_cast<std::size_t>(parent)].children.push_back(node);
      } else {
        node = it->second;
        if (level == 1)
          throw Error(ErrorKind::DuplicateId, "taxon '" + taxon + "' listed twice in taxonomy");
        if (tree.nodes_[static_cast<std::size_t>(node)].parent != parent)
          throw Error(ErrorKind::TreeMismatch, "node '" + id + "' has two parents");
      }
      parent = node;
    }
  }
  return tree;
}

std::optional<int> TaxonomyTree::find(int level, const std::string &id) const {
  if (level < 1 || level > levels_) return std::nullopt;
  const auto &idx = index_[static_cast<std::size_t>(level - 1)];
  auto it = idx.find(id);
  if (it == idx.end()) return std::nullopt;
  return it->second;
}

std::vector<int> TaxonomyTree::nodes_at(int level) const {
  std::vector<int> out;
  for (std::size_t k = 0; k < nodes_.size(); ++k)
    if (nodes_[k].level == level) out.push_back(static_cast<int>(k));
  return out;
}

int TaxonomyTree::ancestor(int node, int target_level) const {
  int cur = node;
  while (nodes_[static_cast<std::size_t>(cur)].level < target_level) {
    cur = nodes_[static_cast<std::size_t>(cur)].parent;
    if (cur < 0) throw Error(ErrorKind::TreeMismatch, "node has no ancestor at requested level");
  }
  return cur;
}

// ------------------------------------------------------------------ QcReport

std::vector<std::string> QcReport::removed_ids(const std::string &kind) const {
  std::vector<std::string> out;
  for (const auto &e : removed)
    if (e.kind == kind) out.push_back(e.id);
  return out;
}

void QcReport::append(const QcReport &other) {
  removed.insert(removed.end(), other.removed.begin(), other.removed.end());
  if (other.min_nonzero != 0) min_nonzero = other.min_nonzero;
  if (other.cooks_pass_run || other.depth_upper_fence != 0.0) {
    depth_lower_fence = other.depth_lower_fence;
    depth_upper_fence = other.depth_upper_fence;
    cooks_threshold = other.cooks_threshold;
    cooks_pass_run = other.cooks_pass_run;
  }
}

std::string QcReport::to_tsv() const {
  std::ostringstream out;
  out << "id\tkind\treason\tstatistic\tthreshold\n";
  for (const auto &e : removed)
    out << e.id << '\t' << e.kind << '\t' << e.reason << '\t' << io::format_double(e.statistic)
        << '\t' << io::format_double(e.threshold) << '\n';
  return out.str();
}

// ----------------------------------------------------------------------- I/O

CountTable load_count_table(const std::filesystem::path &path, Orientation orientation) {
  const auto rows = io::read_delimited(path);
  if (rows.size() < 2) throw Error(ErrorKind::Parse, path.string() + ": need header and data rows");
  const auto &header = rows.front();
  const std::size_t width = header.size();
  if (width < 2) throw Error(ErrorKind::Parse, path.string() + ": need an id column and data");
  std::vector<std::string> col_ids(header.begin() + 1, header.end());
  std::vector<std::string> row_ids;
  Matrix<Count> m(rows.size() - 1, width - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto &row = rows[r];
    if (row.size() != width)
      throw Error(ErrorKind::Parse, path.string() + ": row " + std::to_string(r + 1) +
                                        " has " + std::to_string(row.size()) + " cells, expected " +
                                        std::to_string(width));
    row_ids.push_back(row[0]);
    for (std::size_t c = 1; c < width; ++c) {
      const long long v = io::parse_integer(row[c], path.string() + " row " + std::to_string(r + 1));
      if (v < 0)
        throw Error(ErrorKind::NegativeCount,
                    path.string() + ": negative count " + std::to_string(v) + " at row " +
                        std::to_string(r + 1));
      m(r - 1, c - 1) = static_cast<Count>(v);
    }
  }
  if (orientation == Orientation::SamplesInRows)
    return CountTable(std::move(m), std::move(row_ids), std::move(col_ids));
  Matrix<Count> t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return CountTable(std::move(t), std::move(col_ids), std::move(row_ids));
}

void write_count_table(const std::filesystem::path &path, const CountTable &table) {
  std::ostringstream out;
  out << "sample_id";
  for (const auto &t : table.taxon_ids()) out << '\t' << t;
  out << '\n';
  for (std::size_t i = 0; i < table.n(); ++i) {
    out << table.sample_ids()[i];
    for (Count c : table.counts().row(i)) out << '\t' << c;
    out << '\n';
  }
  io::write_text(path, out.str());
}

GroupLabels load_group_labels(const std::filesystem::path &path, const CountTable &table) {
  auto rows = io::read_delimited(path, true);
  std::unordered_map<std::string, int> by_id;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto &row = rows[r];
    if (row.size() < 2) throw Error(ErrorKind::Parse, path.string() + ": label rows need 2 columns");
    long long g = 0;
    try {
      g = io::parse_integer(row[1], path.string());
    } catch (const Error &) {
      if (r == 0) continue;  // header line
      throw;
    }
    if (!by_id.emplace(row[0], static_cast<int>(g)).second)
      throw Error(ErrorKind::DuplicateId, "sample '" + row[0] + "' labelled twice");
  }
  std::vector<int> groups;
  int k = 0;
  for (const auto &id : table.sample_ids()) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorKind::InvalidArgument, "no group label for sample '" + id + "'");
    groups.push_back(it->second);
    k = std::max(k, it->second);
  }
  return GroupLabels(std::move(groups), k);
}

void write_group_labels(const std::filesystem::path &path, const CountTable &table,
                        const GroupLabels &labels) {
  std::ostringstream out;
  out << "sample_id\tgroup\n";
  for (std::size_t i = 0; i < table.n(); ++i)
    out << table.sample_ids()[i] << '\t' << labels.group(i) + 1 << '\n';
  io::write_text(path, out.str());
}

TaxonomyTree load_taxonomy(const std::filesystem::path &path) {
  auto rows = io::read_delimited(path, true);
  std::vector<std::pair<std::string, std::string>> lineages;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() < 2) throw Error(ErrorKind::Parse, path.string() + ": taxonomy rows need 2 columns");
    if (r == 0 && rows[r][0] == "taxon_id") continue;
    lineages.emplace_back(rows[r][0], rows[r][1]);
  }
  return TaxonomyTree::from_lineages(lineages);
}

// ------------------------------------------------------------------------ QC

std::pair<CountTable, QcReport> qc_samples(const CountTable &table, const GroupLabels *labels) {
  if (table.n() < 4)
    throw Error(ErrorKind::DegenerateDataset, "sample QC needs n >= 4 (quartiles and regression)");
  QcReport report;
  const auto totals = table.row_totals();
  const double q1 = stats::quantile_type7(totals, 0.25);
  const double q3 = stats::quantile_type7(totals, 0.75);
  const double iqr = q3 - q1;
  report.depth_lower_fence = q1 - 3.0 * iqr;
  report.depth_upper_fence = q3 + 3.0 * iqr;

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < table.n(); ++i) {
    const bool outlier = totals[i] < report.depth_lower_fence || totals[i] > report.depth_upper_fence;
    if (outlier || table.nonzero_in_row(i) == 0) {
      report.removed.push_back({table.sample_ids()[i], "sample", "depth-outlier", totals[i],
                                totals[i] < report.depth_lower_fence || totals[i] == 0.0
                                    ? report.depth_lower_fence
                                    : report.depth_upper_fence});
    } else {
      kept.push_back(i);
    }
  }

  // Cook's distance of log(#taxa observed) regressed on total reads.
  const std::size_t m = kept.size();
  std::vector<std::size_t> final_rows;
  if (m >= 3) {
    std::vector<double> x(m), y(m);
    for (std::size_t r = 0; r < m; ++r) {
      x[r] = totals[kept[r]];
      y[r] = std::log(static_cast<double>(table.nonzero_in_row(kept[r])));
    }
    const double mx = stats::mean(x);
    const double my = stats::mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      sxx += (x[r] - mx) * (x[r] - mx);
      sxy += (x[r] - mx) * (y[r] - my);
    }
    if (sxx > 0.0) {
      report.cooks_pass_run = true;
      report.cooks_threshold = 4.0 / static_cast<double>(m - 2);
      const double slope = sxy / sxx;
      const double intercept = my - slope * mx;
      std::vector<double> resid(m);
      double sse = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        resid[r] = y[r] - (intercept + slope * x[r]);
        sse += resid[r] * resid[r];
      }
      const double mse = sse / static_cast<double>(m - 2);
      for (std::size_t r = 0; r < m; ++r) {
        const double lev = 1.0 / static_cast<double>(m) + (x[r] - mx) * (x[r] - mx) / sxx;
        double d = 0.0;
        if (mse > 0.0 && lev < 1.0)
          d = resid[r] * resid[r] / (2.0 * mse) * lev / ((1.0 - lev) * (1.0 - lev));
        if (d > report.cooks_threshold) {
          report.removed.push_back(
              {table.sample_ids()[kept[r]], "sample", "cooks-distance", d, report.cooks_threshold});
        } else {
          final_rows.push_back(kept[r]);
        }
      }
    } else {
      final_rows = kept;
    }
  } else {
    final_rows = kept;
  }

  if (final_rows.size() < 2)
    throw Error(ErrorKind::DegenerateDataset, "fewer than two samples survive sample QC");
  if (labels != nullptr) {
    std::vector<std::size_t> per_group(static_cast<std::size_t>(labels->num_groups()), 0);
    for (auto r : final_rows) ++per_group[static_cast<std::size_t>(labels->group(r))];
    for (std::size_t k = 0; k < per_group.size(); ++k)
      if (per_group[k] < 2)
        throw Error(ErrorKind::DegenerateDataset,
                    "group " + std::to_string(k + 1) + " keeps fewer than two samples after QC");
  }
  return {table.select_samples(final_rows), std::move(report)};
}

std::pair<CountTable, QcReport> qc_features(const CountTable &table, const GroupLabels &labels,
                                            int min_nonzero) {
  if (min_nonzero < 1) throw Error(ErrorKind::InvalidArgument, "min_nonzero must be >= 1");
  if (labels.n() != table.n()) throw Error(ErrorKind::InvalidArgument, "labels do not match table");
  QcReport report;
  report.min_nonzero = min_nonzero;
  const auto k = static_cast<std::size_t>(labels.num_groups());
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < table.p(); ++j) {
    std::vector<std::size_t> nz(k, 0);
    for (std::size_t i = 0; i < table.n(); ++i)
      if (table(i, j) > 0) ++nz[static_cast<std::size_t>(labels.group(i))];
    const auto worst = *std::min_element(nz.begin(), nz.end());
    if (worst < static_cast<std::size_t>(min_nonzero)) {
      report.removed.push_back({table.taxon_ids()[j], "taxon", "low-prevalence",
                                static_cast<double>(worst), static_cast<double>(min_nonzero)});
    } else {
      kept.push_back(j);
    }
  }
  if (kept.empty()) throw Error(ErrorKind::DegenerateDataset, "feature QC removed every taxon");
  return {table.select_taxa(kept), std::move(report)};
}

GroupLabels restrict_labels(const GroupLabels &labels, const CountTable &original,
                            const CountTable &filtered) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < original.n(); ++i) pos.emplace(original.sample_ids()[i], i);
  std::vector<std::size_t> rows;
  for (const auto &id : filtered.sample_ids()) rows.push_back(pos.at(id));
  return labels.select(rows);
}

// --------------------------------------------------------------- Aggregation

CountTable aggregate_counts(const CountTable &table, const TaxonomyTree &tree, int target_level) {
  if (!(table.level() < target_level && target_level <= tree.num_levels()))
    throw Error(ErrorKind::InvalidArgument, "target level must exceed the table level and be <= L");
  std::vector<int> column_ancestor(table.p());
  std::vector<int> order;  // target nodes with at least one present descendant
  std::unordered_map<int, std::size_t> col_of;
  for (std::size_t j = 0; j < table.p(); ++j) {
    auto node = tree.find(table.level(), table.taxon_ids()[j]);
    if (!node) throw Error(ErrorKind::TreeMismatch, "taxon '" + table.taxon_ids()[j] + "' not in tree");
    column_ancestor[j] = tree.ancestor(*node, target_level);
  }
  for (int node : tree.nodes_at(target_level)) {
    if (std::find(column_ancestor.begin(), column_ancestor.end(), node) != column_ancestor.end()) {
      col_of.emplace(node, order.size());
      order.push_back(node);
    }
  }
  Matrix<Count> m(table.n(), order.size(), 0);
  for (std::size_t j = 0; j < table.p(); ++j) {
    const std::size_t c = col_of.at(column_ancestor[j]);
    for (std::size_t i = 0; i < table.n(); ++i) m(i, c) += table(i, j);
  }
  std::vector<std::string> ids;
  for (int node : order) ids.push_back(tree.nodes()[static_cast<std::size_t>(node)].id);
  return CountTable(std::move(m), table.sample_ids(), std::move(ids), target_level);
}

std::vector<LevelTable> build_hierarchy(const CountTable &bottom, const TaxonomyTree *tree) {
  std::vector<LevelTable> levels;
  const int num_levels = tree ? tree->num_levels() : 1;
  std::vector<std::vector<std::size_t>> bottom_desc(bottom.p());
  for (std::size_t j = 0; j < bottom.p(); ++j) bottom_desc[j] = {j};
  levels.push_back(LevelTable{bottom, std::vector<int>(bottom.p(), -1), bottom_desc});
  for (int l = 2; l <= num_levels; ++l) {
    CountTable up = aggregate_counts(bottom, *tree, l);
    std::vector<std::vector<std::size_t>> desc(up.p());
    for (std::size_t j = 0; j < bottom.p(); ++j) {
      const int node = tree->ancestor(*tree->find(1, bottom.taxon_ids()[j]), l);
      const auto &id = tree->nodes()[static_cast<std::size_t>(node)].id;
      const auto pos = std::find(up.taxon_ids().begin(), up.taxon_ids().end(), id);
      desc[static_cast<std::size_t>(pos - up.taxon_ids().begin())].push_back(j);
    }
    // Parent links from the previous level into this one.
    auto &prev = levels.back();
    for (std::size_t j = 0; j < prev.table.p(); ++j) {
      const std::size_t some_bottom = prev.bottom_descendants[j].front();
      for (std::size_t c = 0; c < up.p(); ++c) {
        if (std::find(desc[c].begin(), desc[c].end(), some_bottom) != desc[c].end()) {
          prev.parent[j] = static_cast<int>(c);
          break;
        }
      }
    }
    levels.push_back(LevelTable{std::move(up), std::vector<int>(desc.size(), -1), std::move(desc)});
  }
  return levels;
}

}  // namespace mbda
