#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sar/embedding.hpp"

namespace sar {

struct Neighbor {
  std::size_t index;
  std::string token;
  double similarity;
};

/// Ranked neighbors of one query, similarities non-increasing. An
/// out-of-vocabulary query carries `oov = true` and no neighbors.
struct QueryResult {
  std::string query;
  std::vector<Neighbor> neighbors;
  bool oov = false;
};

/// Returns W x. Throws InputError on a dimension mismatch.
Eigen::VectorXd map_vector(const Eigen::MatrixXd& mapping, const Eigen::VectorXd& x);

/// Exact cosine search over a target space. Rows are normalized once at
/// construction so that each query is a single matrix-vector product.
class NeighborIndex {
 public:
  explicit NeighborIndex(const EmbeddingSpace& target);

  /// Top-k by cosine, ties ordered by vocabulary index. With a threshold,
  /// neighbors below it are dropped (the result may be empty). Throws
  /// InputError for a zero query vector.
  std::vector<Neighbor> search(const Eigen::VectorXd& query, std::size_t k,
                               std::optional<double> threshold = std::nullopt) const;

  /// Index and cosine of the single best neighbor for each row of `queries`.
  /// Zero rows get index npos and similarity -inf.
  std::vector<std::pair<std::size_t, double>> best_matches(const RowMatrix& queries) const;

  const EmbeddingSpace& space() const { return *space_; }
  const RowMatrix& unit_rows() const { return unit_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  const EmbeddingSpace* space_;
  RowMatrix unit_;
};

std::vector<Neighbor> nearest_neighbors(const Eigen::VectorXd& query, const EmbeddingSpace& target,
                                        std::size_t k,
                                        std::optional<double> threshold = std::nullopt);

/// Rows `indices` of `source`, mapped through W (returned as rows of W x).
RowMatrix map_rows(const Eigen::MatrixXd& mapping, const EmbeddingSpace& source,
                   std::span<const std::size_t> indices);

/// One QueryResult per token, in order. Unknown tokens yield `oov = true`.
std::vector<QueryResult> batch_query(std::span<const std::string> tokens,
                                     const Eigen::MatrixXd& mapping, const EmbeddingSpace& source,
                                     const NeighborIndex& target, std::size_t k,
                                     std::optional<double> threshold = std::nullopt);

/// TSV `query<TAB>rank<TAB>target<TAB>similarity`; OOV queries print
/// `query<TAB>0<TAB><OOV><TAB>nan`.
void write_query_results(std::ostream& out, std::span<const QueryResult> results);

}  // namespace sar
