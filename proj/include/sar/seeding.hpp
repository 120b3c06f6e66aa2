#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "sar/embedding.hpp"

namespace sar {

struct SeedPair {
  std::string source;
  std::string target;
  /// Cosine similarity for induced candidates; unset for mined or file seeds.
  std::optional<double> score;

  friend bool operator==(const SeedPair& a, const SeedPair& b) {
    return a.source == b.source && a.target == b.target;
  }
};

/// Ordered (source, target) pairs without duplicates. A source token may
/// appear in several pairs.
class SeedDictionary {
 public:
  SeedDictionary() = default;

  /// Returns false (and keeps the first occurrence) on a duplicate pair.
  bool add(SeedPair pair);
  bool contains(std::string_view source, std::string_view target) const;

  const std::vector<SeedPair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  auto begin() const { return pairs_.begin(); }
  auto end() const { return pairs_.end(); }

  /// TSV `source<TAB>target`, one pair per line.
  static SeedDictionary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  static std::string key(std::string_view source, std::string_view target);

  std::vector<SeedPair> pairs_;
  std::unordered_set<std::string> keys_;
};

enum class Stage { seeded, adversarial, refined };

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view s);

/// A d x d map from source to target space, applied as y = W x.
struct MappingMatrix {
  Eigen::MatrixXd weights;
  Stage stage = Stage::seeded;
  bool orthogonal = false;

  std::size_t dim() const { return static_cast<std::size_t>(weights.rows()); }
};

/// ||W^T W - I||_F.
double orthogonality_error(const Eigen::MatrixXd& w);

/// Text file: first line `<d>`, d rows of d numbers, then `# stage: <name>`.
void save_mapping(const MappingMatrix& m, const std::filesystem::path& path);
MappingMatrix load_mapping(const std::filesystem::path& path);

/// Which dotted suffix must coincide for two signatures to be paired.
enum class SeedKey {
  class_method,  ///< last two segments, `String.equals`
  class_only,    ///< last segment, for class-level vocabularies
};

/// Pairs tokens whose case-folded suffix agrees and is unique on both sides.
/// Tokens with too few segments (keywords, AST labels) never match.
SeedDictionary mine_signature_seeds(const Vocabulary& source, const Vocabulary& target,
                                    SeedKey key = SeedKey::class_method);

/// Case-folded matching key of `token`, or nullopt if it cannot match.
std::optional<std::string> seed_key(std::string_view token, SeedKey key);

/// Orthogonal W minimizing ||W X^T - Y^T||_F, where row i of `xs` and `ys`
/// is the i-th pair. W = U V^T from the SVD of Y^T X.
MappingMatrix solve_procrustes(const RowMatrix& xs, const RowMatrix& ys);

struct GradientDescentResult {
  MappingMatrix mapping;
  /// Mean squared residual per pair, one entry per iteration (before update).
  std::vector<double> losses;
  double final_loss = 0;
};

/// Unconstrained least squares by plain gradient descent on
/// (1/|S|) ||W X^T - Y^T||_F^2, starting from `init` (zero when absent).
/// Throws NumericError when the loss grows for 10 consecutive iterations.
GradientDescentResult solve_gradient_descent(const RowMatrix& xs, const RowMatrix& ys, double lr,
                                             int iters,
                                             const std::optional<Eigen::MatrixXd>& init = {});

/// Stacked unit-length rows for the dictionary pairs present in both spaces.
/// Pairs with an unknown token are skipped.
std::pair<RowMatrix, RowMatrix> gather_pairs(const SeedDictionary& dict,
                                             const EmbeddingSpace& source,
                                             const EmbeddingSpace& target);

/// The seeding step: Procrustes over the dictionary. Throws InputError when
/// no pair is usable.
MappingMatrix seeded_mapping(const SeedDictionary& dict, const EmbeddingSpace& source,
                             const EmbeddingSpace& target);

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix).
Eigen::MatrixXd random_orthogonal(std::size_t dim, std::uint64_t seed);

}  // namespace sar
