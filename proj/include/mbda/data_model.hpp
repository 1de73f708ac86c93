#ifndef MBDA_DATA_MODEL_HPP
#define MBDA_DATA_MODEL_HPP

#include "mbda/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mbda {

using Count = std::uint64_t;

/// Samples x taxa count matrix with identifiers. `level` is the taxonomic
/// level of the columns, 1 being the bottom-most.
class CountTable {
public:
  CountTable(Matrix<Count> counts, std::vector<std::string> sample_ids,
             std::vector<std::string> taxon_ids, int level = 1);

  [[nodiscard]] std::size_t n() const noexcept { return counts_.rows(); }
  [[nodiscard]] std::size_t p() const noexcept { return counts_.cols(); }
  [[nodiscard]] int level() const noexcept { return level_; }
  [[nodiscard]] const Matrix<Count> &counts() const noexcept { return counts_; }
  [[nodiscard]] Count operator()(std::size_t i, std::size_t j) const { return counts_(i, j); }
  [[nodiscard]] const std::vector<std::string> &sample_ids() const noexcept { return sample_ids_; }
  [[nodiscard]] const std::vector<std::string> &taxon_ids() const noexcept { return taxon_ids_; }

  [[nodiscard]] std::vector<double> row_totals() const;
  [[nodiscard]] std::size_t nonzero_in_row(std::size_t i) const;

  [[nodiscard]] CountTable select_samples(const std::vector<std::size_t> &rows) const;
  [[nodiscard]] CountTable select_taxa(const std::vector<std::size_t> &cols) const;

  friend bool operator==(const CountTable &, const CountTable &) = default;

private:
  Matrix<Count> counts_;
  std::vector<std::string> sample_ids_;
  std::vector<std::string> taxon_ids_;
  int level_ = 1;
};

/// Group membership, stored 0-based internally (file format is 1..K).
class GroupLabels {
public:
  GroupLabels(std::vector<int> groups_one_based, int num_groups);

  [[nodiscard]] std::size_t n() const noexcept { return group_.size(); }
  [[nodiscard]] int num_groups() const noexcept { return k_; }
  [[nodiscard]] int group(std::size_t i) const { return group_[i]; }
  [[nodiscard]] const std::vector<int> &groups() const noexcept { return group_; }
  [[nodiscard]] const std::vector<std::size_t> &group_sizes() const noexcept { return sizes_; }

  [[nodiscard]] GroupLabels select(const std::vector<std::size_t> &rows) const;

private:
  std::vector<int> group_;
  std::vector<std::size_t> sizes_;
  int k_ = 0;
};

struct TaxonNode {
  std::string id;
  std::string name;  // last lineage component
  int level = 1;
  int parent = -1;   // node index at level + 1
  std::vector<int> children;
};

/// Multi-level taxonomy. Level 1 nodes are the bottom-level taxa (their ids
/// match count-table columns); upper-level node ids are lineage prefixes so
/// equal rank names on different branches stay distinct.
class TaxonomyTree {
public:
  /// `lineages` pairs a bottom-level taxon id with a '|'-delimited lineage
  /// ordered from the top rank down to the taxon itself. All lineages must
  /// have the same depth, which becomes the number of levels.
  static TaxonomyTree from_lineages(
      const std::vector<std::pair<std::string, std::string>> &lineages,
      char delimiter = '|');

  [[nodiscard]] int num_levels() const noexcept { return levels_; }
  [[nodiscard]] const std::vector<TaxonNode> &nodes() const noexcept { return nodes_; }
  [[nodiscard]] std::optional<int> find(int level, const std::string &id) const;
  /// Nodes at a level in insertion (first-appearance) order.
  [[nodiscard]] std::vector<int> nodes_at(int level) const;
  /// Ancestor of `node` at `target_level` (>= the node's level).
  [[nodiscard]] int ancestor(int node, int target_level) const;

private:
  std::vector<TaxonNode> nodes_;
  std::vector<std::unordered_map<std::string, int>> index_;  // per level
  int levels_ = 0;
};

struct QcEntry {
  std::string id;
  std::string kind;    // "sample" | "taxon"
  std::string reason;  // depth-outlier | cooks-distance | low-prevalence
  double statistic = 0.0;
  double threshold = 0.0;
};

struct QcReport {
  std::vector<QcEntry> removed;
  double depth_lower_fence = 0.0;
  double depth_upper_fence = 0.0;
  double cooks_threshold = 0.0;
  bool cooks_pass_run = false;
  int min_nonzero = 0;

  [[nodiscard]] std::vector<std::string> removed_ids(const std::string &kind) const;
  void append(const QcReport &other);
  [[nodiscard]] std::string to_tsv() const;
};

enum class Orientation { SamplesInRows, TaxaInRows };

CountTable load_count_table(const std::filesystem::path &path,
                            Orientation orientation = Orientation::SamplesInRows);
void write_count_table(const std::filesystem::path &path, const CountTable &table);

/// Reads (sample_id, group) pairs and aligns them to the table's samples.
GroupLabels load_group_labels(const std::filesystem::path &path, const CountTable &table);
void write_group_labels(const std::filesystem::path &path, const CountTable &table,
                        const GroupLabels &labels);

TaxonomyTree load_taxonomy(const std::filesystem::path &path);

/// Depth fences then Cook's distance on log(#taxa observed) ~ total reads.
/// With `labels`, also requires two retained samples per group.
std::pair<CountTable, QcReport> qc_samples(const CountTable &table,
                                           const GroupLabels *labels = nullptr);

/// Drops taxa with fewer than `min_nonzero` nonzero counts in any group.
std::pair<CountTable, QcReport> qc_features(const CountTable &table,
                                            const GroupLabels &labels, int min_nonzero = 3);

/// Labels restricted to the samples remaining in `filtered`.
GroupLabels restrict_labels(const GroupLabels &labels, const CountTable &original,
                            const CountTable &filtered);

CountTable aggregate_counts(const CountTable &table, const TaxonomyTree &tree,
                            int target_level);

/// One analysis level: its count table, and for each column the index of
/// its parent column at the next level (-1 on the top level) plus the
/// bottom-level columns below it.
struct LevelTable {
  CountTable table;
  std::vector<int> parent;
  std::vector<std::vector<std::size_t>> bottom_descendants;
};

/// Level 1 is `bottom`; with a tree, levels 2..L are aggregated from it.
std::vector<LevelTable> build_hierarchy(const CountTable &bottom, const TaxonomyTree *tree);

}  // namespace mbda

#endif
