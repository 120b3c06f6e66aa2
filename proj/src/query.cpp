#include "sar/query.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "sar/error.hpp"

namespace sar {

Eigen::VectorXd map_vector(const Eigen::MatrixXd& mapping, const Eigen::VectorXd& x) {
  if (mapping.cols() != x.size()) {
    throw InputError("dimension mismatch: mapping is " + std::to_string(mapping.rows()) + "x" +
                     std::to_string(mapping.cols()) + ", vector has " + std::to_string(x.size()));
  }
  return mapping * x;
}

NeighborIndex::NeighborIndex(const EmbeddingSpace& target)
    : space_(&target), unit_(target.normalized().vectors()) {}

std::vector<Neighbor> NeighborIndex::search(const Eigen::VectorXd& query, std::size_t k,
                                            std::optional<double> threshold) const {
  if (k == 0) throw InputError("k must be >= 1");
  if (static_cast<std::size_t>(query.size()) != space_->dim()) {
    throw InputError("query dimension " + std::to_string(query.size()) + " != space dimension " +
                     std::to_string(space_->dim()));
  }
  const double norm = query.norm();
  if (!(norm > 0)) throw InputError("undefined cosine: zero query vector");

  const Eigen::VectorXd sims = unit_ * (query / norm);
  std::vector<std::size_t> order(static_cast<std::size_t>(sims.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, order.size());
  auto before = [&](std::size_t a, std::size_t b) {
    const double sa = sims(static_cast<Eigen::Index>(a));
    const double sb = sims(static_cast<Eigen::Index>(b));
    if (sa != sb) return sa > sb;
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    before);

  std::vector<Neighbor> out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    const auto idx = order[r];
    const double s = std::clamp(sims(static_cast<Eigen::Index>(idx)), -1.0, 1.0);
    if (threshold && s < *threshold) break;
    out.push_back({idx, space_->vocab().token(idx), s});
  }
  return out;
}

std::vector<std::pair<std::size_t, double>> NeighborIndex::best_matches(
    const RowMatrix& queries) const {
  RowMatrix q = queries;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const double n = q.row(i).norm();
    if (n > 0) q.row(i) /= n;
  }
  const RowMatrix sims = q * unit_.transpose();
  std::vector<std::pair<std::size_t, double>> out(static_cast<std::size_t>(q.rows()),
                                                  {npos, -std::numeric_limits<double>::infinity()});
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    if (q.row(i).squaredNorm() == 0) continue;
    Eigen::Index best = 0;
    double best_sim = sims(i, 0);
    for (Eigen::Index j = 1; j < sims.cols(); ++j) {
      if (sims(i, j) > best_sim) {
        best_sim = sims(i, j);
        best = j;
      }
    }
    out[static_cast<std::size_t>(i)] = {static_cast<std::size_t>(best),
                                        std::clamp(best_sim, -1.0, 1.0)};
  }
  return out;
}

std::vector<Neighbor> nearest_neighbors(const Eigen::VectorXd& query, const EmbeddingSpace& target,
                                        std::size_t k, std::optional<double> threshold) {
  return NeighborIndex(target).search(query, k, threshold);
}

RowMatrix map_rows(const Eigen::MatrixXd& mapping, const EmbeddingSpace& source,
                   std::span<const std::size_t> indices) {
  if (static_cast<std::size_t>(mapping.cols()) != source.dim()) {
    throw InputError("mapping dimension " + std::to_string(mapping.cols()) +
                     " != source dimension " + std::to_string(source.dim()));
  }
  RowMatrix rows(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(source.dim()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) =
        source.vectors().row(static_cast<Eigen::Index>(indices[i]));
  }
  return rows * mapping.transpose();
}

std::vector<QueryResult> batch_query(std::span<const std::string> tokens,
                                     const Eigen::MatrixXd& mapping, const EmbeddingSpace& source,
                                     const NeighborIndex& target, std::size_t k,
                                     std::optional<double> threshold) {
  std::vector<QueryResult> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) {
    QueryResult r{tok, {}, false};
    const auto idx = source.vocab().index_of(tok);
    if (!idx) {
      r.oov = true;
    } else {
      const Eigen::VectorXd x = source.vectors().row(static_cast<Eigen::Index>(*idx)).transpose();
      const Eigen::VectorXd y = map_vector(mapping, x);
      // A zero source vector has no direction; report no neighbors.
      if (y.squaredNorm() > 0) r.neighbors = target.search(y, k, threshold);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_query_results(std::ostream& out, std::span<const QueryResult> results) {
  char buf[32];
  for (const auto& r : results) {
    if (r.oov) {
      out << r.query << "\t0\t<OOV>\tnan\n";
      continue;
    }
    for (std::size_t i = 0; i < r.neighbors.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6f", r.neighbors[i].similarity);
      out << r.query << '\t' << (i + 1) << '\t' << r.neighbors[i].token << '\t' << buf << '\n';
    }
  }
}

}  // namespace sar
