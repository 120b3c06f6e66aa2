#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sar/embedding.hpp"
#include "sar/query.hpp"
#include "sar/seeding.hpp"

namespace sar {

/// Pairs each of the K most frequent source tokens with its nearest target
/// under W. With `mutual_nn`, a pair survives only if the source is also the
/// nearest mapped source of that target.
SeedDictionary candidates_topk_frequency(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                                         const NeighborIndex& target, std::size_t k,
                                         bool mutual_nn = true);

/// Every source token whose nearest target under W has cosine >= tau.
SeedDictionary candidates_cosine_threshold(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                                           const NeighborIndex& target, double tau);

enum class CombineMode { union_, intersection, topk_only, cosine_only };

CombineMode combine_mode_from_string(std::string_view s);
std::string_view to_string(CombineMode mode);

/// Set semantics on (source, target). Union keeps `a`'s order followed by
/// the pairs of `b` not in `a`; intersection keeps `a`'s order.
SeedDictionary combine_candidates(const SeedDictionary& a, const SeedDictionary& b,
                                  CombineMode mode);

/// One pair per source token, the highest-scoring one; first-seen order.
SeedDictionary dedup_by_source(const SeedDictionary& dict);

struct RefineConfig {
  std::size_t topk = 500;
  double threshold = 0.7;
  CombineMode mode = CombineMode::intersection;
  bool mutual_nn = true;
  int max_iters = 5;
  int patience = 1;
  std::size_t selection_k = 1000;

  void validate() const;
};

struct RefineIteration {
  int iter = 0;
  std::size_t candidates = 0;
  double criterion = 0;
};

struct RefineResult {
  MappingMatrix mapping;
  std::vector<RefineIteration> history;  ///< iteration 0 is the input matrix
  int best_iter = 0;
  bool stopped_on_empty = false;
};

/// Alternates candidate induction and Procrustes until the criterion stops
/// improving for `patience` iterations or `max_iters` is reached, then
/// returns the best snapshot. The input matrix competes only if it is
/// orthogonal, so the result is orthogonal whenever max_iters > 0.
RefineResult refine(const MappingMatrix& start, const EmbeddingSpace& source,
                    const EmbeddingSpace& target, const RefineConfig& cfg);

/// Candidate dictionary for one refinement iteration under `cfg`.
SeedDictionary induce_candidates(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                                 const NeighborIndex& target, const RefineConfig& cfg);

/// CSV `iter,candidates,criterion`.
void write_refine_report(std::ostream& out, std::span<const RefineIteration> history);

}  // namespace sar
