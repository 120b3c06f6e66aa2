#include "sar/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <ostream>
#include <random>

#include "sar/error.hpp"

namespace sar {

// ---------------------------------------------------------------------------
// GroundTruth

void GroundTruth::add(std::string source, std::string target, std::optional<std::string> package) {
  auto it = index_.find(source);
  if (it == index_.end()) {
    index_.emplace(source, entries_.size());
    entries_.push_back({std::move(source), {std::move(target)}, std::move(package)});
    return;
  }
  auto& e = entries_[it->second];
  if (std::find(e.targets.begin(), e.targets.end(), target) == e.targets.end()) {
    e.targets.push_back(std::move(target));
  }
  if (!e.package && package) e.package = std::move(package);
}

GroundTruth GroundTruth::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  GroundTruth truth;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty()) {
      throw InputError(path.string() + ":" + std::to_string(lineno) +
                       ": expected source<TAB>target[<TAB>package]");
    }
    std::optional<std::string> pkg;
    if (fields.size() == 3 && !fields[2].empty()) pkg = fields[2];
    truth.add(fields[0], fields[1], pkg);
  }
  return truth;
}

std::vector<std::string> GroundTruth::sources() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.source);
  return out;
}

const GroundTruth::Entry* GroundTruth::find(std::string_view source) const {
  auto it = index_.find(std::string(source));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

bool GroundTruth::expects(std::string_view source, std::string_view target) const {
  const auto* e = find(source);
  return e && std::find(e->targets.begin(), e->targets.end(), target) != e->targets.end();
}

GroundTruth GroundTruth::without(const SeedDictionary& seeds) const {
  GroundTruth out;
  for (const auto& e : entries_) {
    for (const auto& t : e.targets) {
      if (!seeds.contains(e.source, t)) out.add(e.source, t, e.package);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// accuracy and P/R/F

namespace {

std::unordered_map<std::string_view, const QueryResult*> by_query(std::span<const QueryResult> results) {
  std::unordered_map<std::string_view, const QueryResult*> map;
  for (const auto& r : results) map.emplace(r.query, &r);
  return map;
}

}  // namespace

HitCounts topk_hits(std::span<const QueryResult> results, const GroundTruth& truth, std::size_t k) {
  if (truth.empty()) throw InputError("empty ground truth");
  if (k == 0) throw InputError("k must be >= 1");
  const auto map = by_query(results);
  HitCounts c;
  for (const auto& e : truth.entries()) {
    auto it = map.find(e.source);
    if (it == map.end()) throw InputError("ground-truth source '" + e.source + "' was not queried");
    const auto& r = *it->second;
    if (r.oov) {
      ++c.misses;
      ++c.oov;
      continue;
    }
    const std::size_t n = std::min(k, r.neighbors.size());
    const bool hit = std::any_of(r.neighbors.begin(), r.neighbors.begin() + static_cast<std::ptrdiff_t>(n),
                                 [&](const Neighbor& nb) {
                                   return std::find(e.targets.begin(), e.targets.end(), nb.token) !=
                                          e.targets.end();
                                 });
    if (hit) ++c.hits; else ++c.misses;
  }
  return c;
}

double topk_accuracy(std::span<const QueryResult> results, const GroundTruth& truth, std::size_t k) {
  return topk_hits(results, truth, k).accuracy();
}

double f_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0 ? 2.0 * precision * recall / s : 0.0;
}

PrecisionRecall precision_recall_f(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrecisionRecall out{tp, fp, fn, 0, 0, 0};
  if (tp + fp) out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn) out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  out.f_score = f_score(out.precision, out.recall);
  return out;
}

PrecisionRecall precision_recall_f(std::span<const QueryResult> results, const GroundTruth& truth,
                                   std::optional<double> threshold) {
  const auto map = by_query(results);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& e : truth.entries()) {
    const QueryResult* r = nullptr;
    if (auto it = map.find(e.source); it != map.end()) r = it->second;
    std::optional<std::string_view> emitted;
    if (r && !r->oov && !r->neighbors.empty() &&
        (!threshold || r->neighbors.front().similarity >= *threshold)) {
      emitted = r->neighbors.front().token;
    }
    bool matched = false;
    if (emitted) {
      matched = std::find(e.targets.begin(), e.targets.end(), *emitted) != e.targets.end();
      if (matched) ++tp; else ++fp;
    }
    fn += e.targets.size() - (matched ? 1 : 0);
  }
  return precision_recall_f(tp, fp, fn);
}

// ---------------------------------------------------------------------------
// coverage, groups

std::vector<CoverageRow> coverage_accuracy_table(const Eigen::MatrixXd& w,
                                                 const EmbeddingSpace& source,
                                                 const EmbeddingSpace& target,
                                                 const GroundTruth& truth,
                                                 std::span<const double> thresholds,
                                                 std::span<const std::size_t> ks) {
  if (truth.empty()) throw InputError("empty ground truth");
  if (ks.empty()) throw InputError("no k values given");
  for (double t : thresholds) {
    if (!(t >= -1.0 && t <= 1.0)) throw InputError("thresholds must lie in [-1, 1]");
  }
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  const NeighborIndex index(target);
  const auto sources = truth.sources();
  const auto results = batch_query(sources, w, source, index, kmax);

  std::vector<CoverageRow> rows;
  for (double tau : thresholds) {
    CoverageRow row;
    row.threshold = tau;
    std::size_t covered = 0;
    std::vector<std::size_t> hits(ks.size(), 0);
    for (std::size_t q = 0; q < results.size(); ++q) {
      const auto& r = results[q];
      if (r.oov || r.neighbors.empty() || r.neighbors.front().similarity < tau) continue;
      ++covered;
      const auto& targets = truth.entries()[q].targets;
      for (std::size_t j = 0; j < ks.size(); ++j) {
        for (std::size_t n = 0; n < std::min(ks[j], r.neighbors.size()); ++n) {
          if (r.neighbors[n].similarity < tau) break;
          if (std::find(targets.begin(), targets.end(), r.neighbors[n].token) != targets.end()) {
            ++hits[j];
            break;
          }
        }
      }
    }
    const double total = static_cast<double>(results.size());
    row.coverage = static_cast<double>(covered) / total;
    for (std::size_t j = 0; j < ks.size(); ++j) {
      row.accuracy_covered.push_back(covered ? static_cast<double>(hits[j]) / static_cast<double>(covered) : 0.0);
      row.accuracy_all.push_back(static_cast<double>(hits[j]) / total);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::size_t> package_members(const Vocabulary& vocab, std::string_view prefix) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& t = vocab.token(i);
    if (t == prefix || (t.size() > prefix.size() && t.compare(0, prefix.size(), prefix) == 0 &&
                        t[prefix.size()] == '.')) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<GroupScore> group_similarity(
    const Eigen::MatrixXd& w, const EmbeddingSpace& source, const EmbeddingSpace& target,
    std::span<const std::pair<std::string, std::string>> package_pairs) {
  const EmbeddingSpace tgt_unit = target.normalized();
  std::vector<GroupScore> out;
  for (const auto& [sp, tp] : package_pairs) {
    if (sp.empty() || tp.empty()) throw InputError("package prefixes must be non-empty");
    GroupScore g{sp, tp, 0, 0, std::nullopt};
    const auto sm = package_members(source.vocab(), sp);
    const auto tm = package_members(target.vocab(), tp);
    g.source_members = sm.size();
    g.target_members = tm.size();
    if (sm.empty() || tm.empty()) {
      std::cerr << "warning: package pair " << sp << " / " << tp << " has no members on "
                << (sm.empty() ? "the source" : "the target") << " side; skipped\n";
      out.push_back(std::move(g));
      continue;
    }
    RowMatrix mapped = map_rows(w, source, sm);
    for (Eigen::Index i = 0; i < mapped.rows(); ++i) {
      const double n = mapped.row(i).norm();
      if (n > 0) mapped.row(i) /= n;
    }
    RowMatrix ys(static_cast<Eigen::Index>(tm.size()), static_cast<Eigen::Index>(target.dim()));
    for (std::size_t j = 0; j < tm.size(); ++j) {
      ys.row(static_cast<Eigen::Index>(j)) = tgt_unit.vectors().row(static_cast<Eigen::Index>(tm[j]));
    }
    g.mean_cosine = (mapped * ys.transpose()).mean();
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// ablation

std::vector<HitCounts> evaluate_mapping(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                                        const EmbeddingSpace& target, const GroundTruth& truth,
                                        std::span<const std::size_t> ks) {
  if (ks.empty()) throw InputError("no k values given");
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  const NeighborIndex index(target);
  const auto sources = truth.sources();
  const auto results = batch_query(sources, w, source, index, kmax);
  std::vector<HitCounts> out;
  for (auto k : ks) out.push_back(topk_hits(results, truth, k));
  return out;
}

std::vector<Stages> full_ablation_grid() {
  return {Stages::parse("s"),   Stages::parse("s,a"), Stages::parse("s,r"), Stages::parse("s,a,r"),
          Stages::parse("a"),   Stages::parse("a,r"), Stages::parse("r")};
}

std::vector<EvalReport> run_ablation(const EmbeddingSpace& source, const EmbeddingSpace& target,
                                     const SeedDictionary& seeds, const GroundTruth& truth,
                                     std::span<const Stages> grid, const PipelineConfig& cfg,
                                     std::span<const std::size_t> ks) {
  std::vector<EvalReport> reports;
  for (const auto& stages : grid) {
    const auto result = run_pipeline(source, target, seeds, stages, cfg);
    const auto counts = evaluate_mapping(result.mapping.weights, source, target, truth, ks);
    EvalReport r;
    r.configuration = stages.name();
    r.ks.assign(ks.begin(), ks.end());
    for (const auto& c : counts) r.accuracy.push_back(c.accuracy());
    r.oov = counts.front().oov;
    reports.push_back(std::move(r));
  }
  return reports;
}

std::pair<SeedDictionary, GroundTruth> kfold_split(const GroundTruth& truth, int folds,
                                                   int train_folds, int offset,
                                                   std::uint64_t shuffle_seed) {
  if (folds < 2) throw InputError("need at least 2 folds");
  if (train_folds < 1 || train_folds >= folds) throw InputError("train folds must be in [1, folds)");
  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);
  SeedDictionary train;
  GroundTruth test;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int fold = static_cast<int>(i % static_cast<std::size_t>(folds));
    const int rotated = ((fold - offset) % folds + folds) % folds;
    const auto& e = truth.entries()[order[i]];
    if (rotated < train_folds) {
      for (const auto& t : e.targets) train.add({e.source, t, std::nullopt});
    } else {
      for (const auto& t : e.targets) test.add(e.source, t, e.package);
    }
  }
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// CSV writers

void write_accuracy_csv(std::ostream& out, std::string_view config,
                        std::span<const EvalReport> reports) {
  out << "# config: " << config << '\n' << "configuration,k,accuracy\n";
  char buf[32];
  for (const auto& r : reports) {
    for (std::size_t j = 0; j < r.ks.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.6f", r.accuracy[j]);
      out << r.configuration << ',' << r.ks[j] << ',' << buf << '\n';
    }
  }
}

void write_coverage_csv(std::ostream& out, std::string_view config,
                        std::span<const CoverageRow> rows, std::span<const std::size_t> ks) {
  out << "# config: " << config << '\n'
      << "threshold,coverage,k,accuracy_covered,accuracy_all\n";
  char buf[128];
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < ks.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.4f,%.6f,%zu,%.6f,%.6f\n", r.threshold, r.coverage, ks[j],
                    r.accuracy_covered[j], r.accuracy_all[j]);
      out << buf;
    }
  }
}

void write_prf_csv(std::ostream& out, std::string_view config, const PrecisionRecall& prf) {
  out << "# config: " << config << '\n' << "tp,fp,fn,precision,recall,f_score\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.6f,%.6f,%.6f\n", prf.tp, prf.fp, prf.fn,
                prf.precision, prf.recall, prf.f_score);
  out << buf;
}

void write_group_csv(std::ostream& out, std::string_view config, std::span<const GroupScore> rows) {
  out << "# config: " << config << '\n'
      << "source_package,target_package,source_members,target_members,mean_cosine\n";
  char buf[32];
  for (const auto& g : rows) {
    out << g.source_prefix << ',' << g.target_prefix << ',' << g.source_members << ','
        << g.target_members << ',';
    if (g.mean_cosine) {
      std::snprintf(buf, sizeof buf, "%.6f", *g.mean_cosine);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace sar
