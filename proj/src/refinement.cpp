#include "sar/refinement.hpp"

#include <cstdio>
#include <iostream>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "sar/adversarial.hpp"
#include "sar/error.hpp"

namespace sar {

SeedDictionary candidates_topk_frequency(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                                         const NeighborIndex& target, std::size_t k,
                                         bool mutual_nn) {
  if (k < 1) throw InputError("top-K heuristic needs K >= 1");
  const auto top = source.most_frequent(k);
  const auto forward = target.best_matches(map_rows(w, source, top));

  RowMatrix mapped_all;
  if (mutual_nn) {
    std::vector<std::size_t> all(source.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    mapped_all = map_rows(w, source, all);
    for (Eigen::Index i = 0; i < mapped_all.rows(); ++i) {
      const double n = mapped_all.row(i).norm();
      if (n > 0) mapped_all.row(i) /= n;
    }
  }

  SeedDictionary out;
  for (std::size_t i = 0; i < top.size(); ++i) {
    const auto [t, sim] = forward[i];
    if (t == NeighborIndex::npos) continue;
    if (mutual_nn) {
      const Eigen::VectorXd sims =
          mapped_all * target.unit_rows().row(static_cast<Eigen::Index>(t)).transpose();
      Eigen::Index back = 0;
      sims.maxCoeff(&back);
      if (static_cast<std::size_t>(back) != top[i]) continue;
    }
    out.add({source.vocab().token(top[i]), target.space().vocab().token(t), sim});
  }
  return out;
}

SeedDictionary candidates_cosine_threshold(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                                           const NeighborIndex& target, double tau) {
  if (!(tau > 0 && tau < 1)) throw InputError("cosine threshold must be in (0, 1)");
  std::vector<std::size_t> all(source.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto best = target.best_matches(map_rows(w, source, all));
  SeedDictionary out;
  for (std::size_t i = 0; i < best.size(); ++i) {
    const auto [t, sim] = best[i];
    if (t == NeighborIndex::npos || sim < tau) continue;
    out.add({source.vocab().token(i), target.space().vocab().token(t), sim});
  }
  return out;
}

CombineMode combine_mode_from_string(std::string_view s) {
  if (s == "union") return CombineMode::union_;
  if (s == "intersection") return CombineMode::intersection;
  if (s == "topk") return CombineMode::topk_only;
  if (s == "cosine") return CombineMode::cosine_only;
  throw InputError("unknown combination mode '" + std::string(s) +
                   "' (expected union, intersection, topk or cosine)");
}

std::string_view to_string(CombineMode mode) {
  switch (mode) {
    case CombineMode::union_:
      return "union";
    case CombineMode::intersection:
      return "intersection";
    case CombineMode::topk_only:
      return "topk";
    case CombineMode::cosine_only:
      return "cosine";
  }
  return "intersection";
}

SeedDictionary combine_candidates(const SeedDictionary& a, const SeedDictionary& b,
                                  CombineMode mode) {
  SeedDictionary out;
  switch (mode) {
    case CombineMode::topk_only:
      return a;
    case CombineMode::cosine_only:
      return b;
    case CombineMode::intersection: {
      for (const auto& p : a) {
        if (b.contains(p.source, p.target)) out.add(p);
      }
      return out;
    }
    case CombineMode::union_:
      for (const auto& p : a) out.add(p);
      for (const auto& p : b) out.add(p);
      return out;
  }
  return out;
}

SeedDictionary dedup_by_source(const SeedDictionary& dict) {
  std::unordered_map<std::string_view, std::size_t> best;
  std::vector<const SeedPair*> order;
  for (const auto& p : dict) {
    auto [it, fresh] = best.emplace(p.source, order.size());
    if (fresh) {
      order.push_back(&p);
    } else if (p.score.value_or(-2.0) > order[it->second]->score.value_or(-2.0)) {
      order[it->second] = &p;
    }
  }
  SeedDictionary out;
  for (const auto* p : order) out.add(*p);
  return out;
}

void RefineConfig::validate() const {
  if (topk < 1) throw InputError("refinement top-K must be >= 1");
  if (!(threshold > 0 && threshold < 1)) throw InputError("refinement threshold must be in (0, 1)");
  if (max_iters < 0) throw InputError("max_iters must be >= 0");
  if (patience < 1) throw InputError("patience must be >= 1");
  if (selection_k < 1) throw InputError("selection K must be >= 1");
}

SeedDictionary induce_candidates(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                                 const NeighborIndex& target, const RefineConfig& cfg) {
  SeedDictionary topk, cosine;
  if (cfg.mode != CombineMode::cosine_only) {
    topk = candidates_topk_frequency(w, source, target, cfg.topk, cfg.mutual_nn);
  }
  if (cfg.mode != CombineMode::topk_only) {
    cosine = candidates_cosine_threshold(w, source, target, cfg.threshold);
  }
  return dedup_by_source(combine_candidates(topk, cosine, cfg.mode));
}

RefineResult refine(const MappingMatrix& start, const EmbeddingSpace& source,
                    const EmbeddingSpace& target, const RefineConfig& cfg) {
  cfg.validate();
  if (source.dim() != target.dim() || start.dim() != source.dim()) {
    throw InputError("refinement: dimension mismatch between mapping and spaces");
  }
  const std::size_t k = std::min(cfg.selection_k, source.size());
  const NeighborIndex index(target);

  RefineResult result;
  result.mapping = start;
  const double start_criterion = selection_criterion(start.weights, source, index, k);
  result.history.push_back({0, 0, start_criterion});
  if (cfg.max_iters == 0) return result;

  const bool start_competes = orthogonality_error(start.weights) < 1e-6;
  std::optional<double> best;
  if (start_competes) best = start_criterion;

  Eigen::MatrixXd w = start.weights;
  int stale = 0;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const auto dict = induce_candidates(w, source, index, cfg);
    if (dict.empty()) {
      std::cerr << "warning: refinement iteration " << iter
                << " induced no candidates; keeping the best matrix so far\n";
      result.stopped_on_empty = true;
      break;
    }
    auto [xs, ys] = gather_pairs(dict, source, target);
    w = solve_procrustes(xs, ys).weights;
    const double c = selection_criterion(w, source, index, k);
    result.history.push_back({iter, dict.size(), c});
    if (!best || c > *best) {
      best = c;
      result.best_iter = iter;
      result.mapping = MappingMatrix{w, Stage::refined, true};
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (result.best_iter == 0) {
    result.mapping.stage = Stage::refined;
    result.mapping.orthogonal = start_competes;
  }
  return result;
}

void write_refine_report(std::ostream& out, std::span<const RefineIteration> history) {
  out << "iter,candidates,criterion\n";
  char buf[96];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%.6f\n", r.iter, r.candidates, r.criterion);
    out << buf;
  }
}

}  // namespace sar
