#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "sar/embedding.hpp"
#include "sar/pipeline.hpp"
#include "sar/query.hpp"
#include "sar/seeding.hpp"

namespace sar {

/// Expected mappings. A source may list several acceptable targets; any of
/// them counts as a hit.
class GroundTruth {
 public:
  struct Entry {
    std::string source;
    std::vector<std::string> targets;
    std::optional<std::string> package;
  };

  void add(std::string source, std::string target, std::optional<std::string> package = {});

  /// TSV `source<TAB>target[<TAB>package]`.
  static GroundTruth load(const std::filesystem::path& path);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<std::string> sources() const;
  const Entry* find(std::string_view source) const;
  bool expects(std::string_view source, std::string_view target) const;

  /// Same truth minus every pair that also appears in `seeds`.
  GroundTruth without(const SeedDictionary& seeds) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct HitCounts {
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t oov = 0;  ///< included in misses
  double accuracy() const {
    const auto n = hits + misses;
    return n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
  }
};

/// Hit iff an expected target is among the first k neighbours of the
/// source's result. Every truth source must have a result (InputError
/// otherwise, and for empty truth). OOV queries are misses.
HitCounts topk_hits(std::span<const QueryResult> results, const GroundTruth& truth, std::size_t k);
double topk_accuracy(std::span<const QueryResult> results, const GroundTruth& truth, std::size_t k);

struct PrecisionRecall {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f_score = 0;
};

/// P = TP/(TP+FP), R = TP/(TP+FN), F = 2PR/(P+R); each is 0 when undefined.
PrecisionRecall precision_recall_f(std::size_t tp, std::size_t fp, std::size_t fn);

/// F-score from precision and recall alone.
double f_score(double precision, double recall);

/// Emitted mappings are the top-1 neighbours of truth sources with
/// similarity >= threshold (all top-1s without a threshold). TP: emitted
/// pairs in the truth; FP: emitted pairs not in it; FN: truth pairs not
/// emitted.
PrecisionRecall precision_recall_f(std::span<const QueryResult> results, const GroundTruth& truth,
                                   std::optional<double> threshold = std::nullopt);

struct CoverageRow {
  double threshold = 0;
  double coverage = 0;
  std::vector<double> accuracy_covered;  ///< per k, over covered queries only
  std::vector<double> accuracy_all;      ///< per k, over every truth source
};

/// For each threshold: coverage is the fraction of truth sources left with
/// at least one neighbour at or above it.
std::vector<CoverageRow> coverage_accuracy_table(const Eigen::MatrixXd& w,
                                                 const EmbeddingSpace& source,
                                                 const EmbeddingSpace& target,
                                                 const GroundTruth& truth,
                                                 std::span<const double> thresholds,
                                                 std::span<const std::size_t> ks);

struct GroupScore {
  std::string source_prefix;
  std::string target_prefix;
  std::size_t source_members = 0;
  std::size_t target_members = 0;
  std::optional<double> mean_cosine;  ///< unset when either side is empty
};

/// Tokens equal to `prefix` or starting with `prefix.`.
std::vector<std::size_t> package_members(const Vocabulary& vocab, std::string_view prefix);

/// Mean cos(W x, y) over every (x, y) in source-package x target-package.
std::vector<GroupScore> group_similarity(
    const Eigen::MatrixXd& w, const EmbeddingSpace& source, const EmbeddingSpace& target,
    std::span<const std::pair<std::string, std::string>> package_pairs);

/// Top-k accuracy of W for each k in `ks` (queries all truth sources).
std::vector<HitCounts> evaluate_mapping(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                                        const EmbeddingSpace& target, const GroundTruth& truth,
                                        std::span<const std::size_t> ks);

struct EvalReport {
  std::string configuration;
  std::vector<std::size_t> ks;
  std::vector<double> accuracy;
  std::size_t oov = 0;
  std::optional<PrecisionRecall> prf;
  std::vector<CoverageRow> coverage;
};

/// Every combination in `grid`; stages without seeding start from a random
/// orthogonal matrix.
std::vector<EvalReport> run_ablation(const EmbeddingSpace& source, const EmbeddingSpace& target,
                                     const SeedDictionary& seeds, const GroundTruth& truth,
                                     std::span<const Stages> grid, const PipelineConfig& cfg,
                                     std::span<const std::size_t> ks);

/// Every ablation combination: S, S+A, S+R, S+A+R, A, A+R, R.
std::vector<Stages> full_ablation_grid();

/// Splits the truth into `folds` deterministic folds; the first
/// `train_folds` folds (after rotating by `offset`) become seeds and the
/// rest the test truth.
std::pair<SeedDictionary, GroundTruth> kfold_split(const GroundTruth& truth, int folds,
                                                   int train_folds, int offset,
                                                   std::uint64_t shuffle_seed);

/// `# config: ...` line, then `configuration,k,accuracy` rows.
void write_accuracy_csv(std::ostream& out, std::string_view config,
                        std::span<const EvalReport> reports);
/// `# config: ...` line, then `threshold,coverage,k,accuracy_covered,accuracy_all`.
void write_coverage_csv(std::ostream& out, std::string_view config,
                        std::span<const CoverageRow> rows, std::span<const std::size_t> ks);
void write_prf_csv(std::ostream& out, std::string_view config, const PrecisionRecall& prf);
void write_group_csv(std::ostream& out, std::string_view config, std::span<const GroupScore> rows);

}  // namespace sar
