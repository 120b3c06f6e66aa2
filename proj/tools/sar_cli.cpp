// sar: command-line front end. Exit codes: 0 success, 1 runtime or numeric
// failure, 2 usage or input-format error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sar/adversarial.hpp"
#include "sar/corpus.hpp"
#include "sar/embedding.hpp"
#include "sar/error.hpp"
#include "sar/eval.hpp"
#include "sar/pipeline.hpp"
#include "sar/query.hpp"
#include "sar/refinement.hpp"
#include "sar/seeding.hpp"

namespace fs = std::filesystem;
using namespace sar;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

void require_same_dim(const EmbeddingSpace& a, const EmbeddingSpace& b) {
  if (a.dim() != b.dim()) {
    throw InputError("embedding dimensions differ: source " + std::to_string(a.dim()) + ", target " +
                     std::to_string(b.dim()));
  }
}

void require_matrix_dim(const MappingMatrix& m, const EmbeddingSpace& s) {
  if (m.dim() != s.dim()) {
    throw InputError("mapping is " + std::to_string(m.dim()) + "x" + std::to_string(m.dim()) +
                     " but embeddings have dimension " + std::to_string(s.dim()));
  }
}

// ---------------------------------------------------------------------------
// normalize

struct NormalizeArgs {
  fs::path in, table, out;
  std::optional<fs::path> keywords;
  bool class_level = false;
};

void run_normalize(const NormalizeArgs& a) {
  const auto mode = a.class_level ? SignatureTable::Mode::class_level : SignatureTable::Mode::method;
  const auto table = SignatureTable::load(a.table, a.keywords, mode);
  std::ifstream in(a.in);
  if (!in) throw InputError("cannot open " + a.in.string());
  auto out = open_out(a.out);

  NormalizeStats stats;
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) {
    auto seq = normalize_sequence(split_tokens(line), table, &stats);
    if (a.class_level) seq = to_class_level(seq);
    write_corpus(out, std::span(&seq, 1));
    ++lines;
  }
  const auto total = stats.kept + stats.dropped;
  std::printf("sequences %zu, tokens kept %zu, dropped %zu (%.2f%%)\n", lines, stats.kept,
              stats.dropped, total ? 100.0 * static_cast<double>(stats.dropped) / static_cast<double>(total) : 0.0);
}

// ---------------------------------------------------------------------------
// embed

struct EmbedArgs {
  fs::path corpus, out;
  TrainConfig cfg;
};

void run_embed(const EmbedArgs& a) {
  a.cfg.validate();
  const auto& c = a.cfg;
  std::printf("embed: dim=%d epochs=%d lr=%g negatives=%d window=%d subsample=%g min_count=%llu workers=%d seed=%llu\n",
              c.dim, c.epochs, c.learning_rate, c.negatives, c.window, c.subsample,
              static_cast<unsigned long long>(c.min_count), c.workers,
              static_cast<unsigned long long>(c.rng_seed));
  const auto corpus = read_corpus(a.corpus);
  const auto space = train_skipgram(corpus, a.cfg);
  save_space(space, a.out);
  std::printf("wrote %zu vectors to %s\n", space.size(), a.out.string().c_str());
}

// ---------------------------------------------------------------------------
// seeds

struct SeedsArgs {
  fs::path src, tgt, out;
  std::string key = "method";
};

void run_seeds(const SeedsArgs& a) {
  const auto src = load_space(a.src);
  const auto tgt = load_space(a.tgt);
  const auto key = a.key == "class" ? SeedKey::class_only : SeedKey::class_method;
  const auto seeds = mine_signature_seeds(src.vocab(), tgt.vocab(), key);
  seeds.save(a.out);
  std::printf("mined %zu seed pairs\n", seeds.size());
}

// ---------------------------------------------------------------------------
// align and eval share the pipeline flags

struct PipelineFlags {
  PipelineConfig cfg;
  std::string refine_mode = "intersection";
  bool no_mutual = false;
  std::uint64_t seed = 1;

  void add(CLI::App& app) {
    auto& adv = cfg.adversarial;
    auto& ref = cfg.refinement;
    app.add_option("--adv-epochs", adv.epochs, "adversarial epochs")->capture_default_str();
    app.add_option("--adv-iters", adv.iterations_per_epoch, "mapping updates per epoch")->capture_default_str();
    app.add_option("--batch", adv.batch_size, "batch size per side")->capture_default_str();
    app.add_option("--disc-steps", adv.disc_steps_per_map_step, "discriminator steps per mapping step")
        ->capture_default_str();
    app.add_option("--adv-lr", adv.learning_rate, "learning rate")->capture_default_str();
    app.add_option("--momentum", adv.momentum, "momentum coefficient")->capture_default_str();
    app.add_option("--lr-decay", adv.lr_decay, "learning-rate factor per epoch")->capture_default_str();
    app.add_option("--smoothing", adv.label_smoothing, "label smoothing")->capture_default_str();
    app.add_option("--dropout", adv.input_dropout, "discriminator input dropout")->capture_default_str();
    app.add_option("--hidden", adv.hidden, "discriminator hidden widths")->capture_default_str();
    app.add_option("--orthogonalize", adv.orthogonalize, "orthogonality retraction strength (0 = off)")
        ->capture_default_str();
    app.add_option("--sample-top", adv.sample_top, "batches drawn from this many frequent tokens")
        ->capture_default_str();
    app.add_option("--selection-k", adv.selection_k, "frequent tokens scored by the selection criterion")
        ->capture_default_str();
    app.add_option("--refine-topk", ref.topk, "top-K frequency candidates")->capture_default_str();
    app.add_option("--refine-threshold", ref.threshold, "cosine threshold candidates")->capture_default_str();
    app.add_option("--refine-mode", refine_mode, "union, intersection, topk or cosine")->capture_default_str();
    app.add_flag("--no-mutual-nn", no_mutual, "disable the mutual nearest-neighbour filter");
    app.add_option("--refine-iters", ref.max_iters, "maximum refinement iterations")->capture_default_str();
    app.add_option("--patience", ref.patience, "iterations without improvement before stopping")
        ->capture_default_str();
    app.add_option("--seed", seed, "random seed")->capture_default_str();
  }

  PipelineConfig resolve() const {
    PipelineConfig c = cfg;
    c.refinement.mode = combine_mode_from_string(refine_mode);
    c.refinement.mutual_nn = !no_mutual;
    c.refinement.selection_k = c.adversarial.selection_k;
    c.adversarial.rng_seed = seed;
    c.init_seed = seed;
    c.adversarial.validate();
    c.refinement.validate();
    return c;
  }
};

struct AlignArgs {
  fs::path src, tgt, out_matrix;
  std::optional<fs::path> seeds, log, refine_report;
  std::string stages = "s,a,r";
  PipelineFlags flags;
};

void run_align(const AlignArgs& a) {
  const auto stages = Stages::parse(a.stages);
  const auto cfg = a.flags.resolve();
  const auto src = load_space(a.src);
  const auto tgt = load_space(a.tgt);
  require_same_dim(src, tgt);
  SeedDictionary seeds;
  if (stages.seed) {
    if (!a.seeds) throw InputError("the seeding stage needs --seeds");
    seeds = SeedDictionary::load(*a.seeds);
  }
  const auto result = run_pipeline(src, tgt, seeds, stages, cfg);
  save_mapping(result.mapping, a.out_matrix);
  if (a.log) {
    auto out = open_out(*a.log);
    if (result.adversarial) write_training_log(out, result.adversarial->history);
    else write_training_log(out, {});
  }
  if (a.refine_report) {
    auto out = open_out(*a.refine_report);
    if (result.refinement) write_refine_report(out, result.refinement->history);
    else write_refine_report(out, {});
  }
  std::printf("stages %s, stage reached %s, orthogonality error %.3g\n", stages.name().c_str(),
              std::string(to_string(result.mapping.stage)).c_str(),
              orthogonality_error(result.mapping.weights));
}

// ---------------------------------------------------------------------------
// query

struct QueryArgs {
  fs::path matrix, src, tgt;
  std::optional<fs::path> file, out;
  std::vector<std::string> tokens;
  std::size_t k = 10;
  std::optional<double> threshold;
};

void run_query(const QueryArgs& a) {
  const auto mapping = load_mapping(a.matrix);
  const auto src = load_space(a.src);
  const auto tgt = load_space(a.tgt);
  require_same_dim(src, tgt);
  require_matrix_dim(mapping, src);
  std::vector<std::string> tokens = a.tokens;
  if (a.file) {
    std::ifstream in(*a.file);
    if (!in) throw InputError("cannot open " + a.file->string());
    std::string line;
    while (std::getline(in, line)) {
      for (auto& t : split_tokens(line)) tokens.push_back(std::move(t));
    }
  }
  if (tokens.empty()) throw InputError("no query tokens (give tokens or --file)");
  const NeighborIndex index(tgt);
  const auto results = batch_query(tokens, mapping.weights, src, index, a.k, a.threshold);
  if (a.out) {
    auto out = open_out(*a.out);
    write_query_results(out, results);
  } else {
    write_query_results(std::cout, results);
  }
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  fs::path src, tgt, truth, out_dir = ".";
  std::optional<fs::path> matrix, seeds, groups;
  std::vector<std::size_t> ks = {1, 5, 10};
  std::vector<double> thresholds;
  std::optional<double> prf_threshold;
  bool ablation = false;
  std::vector<std::string> grid;
  bool keep_seed_overlap = false;
  PipelineFlags flags;
};

std::vector<std::pair<std::string, std::string>> load_package_pairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected source<TAB>target prefixes");
    }
    pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return pairs;
}

void run_eval(const EvalArgs& a) {
  const auto src = load_space(a.src);
  const auto tgt = load_space(a.tgt);
  require_same_dim(src, tgt);
  auto truth = GroundTruth::load(a.truth);
  SeedDictionary seeds;
  if (a.seeds) {
    seeds = SeedDictionary::load(*a.seeds);
    if (!a.keep_seed_overlap) truth = truth.without(seeds);
  }
  if (truth.empty()) throw InputError("ground truth is empty after removing seeds");

  std::ostringstream config;
  config << "truth=" << a.truth.filename().string() << " pairs=" << truth.size()
         << " seeds=" << seeds.size();
  fs::create_directories(a.out_dir);
  std::vector<EvalReport> reports;

  if (a.ablation) {
    const auto cfg = a.flags.resolve();
    std::vector<Stages> grid;
    if (a.grid.empty()) grid = full_ablation_grid();
    for (const auto& g : a.grid) grid.push_back(Stages::parse(g));
    config << " ablation seed=" << a.flags.seed;
    reports = run_ablation(src, tgt, seeds, truth, grid, cfg, a.ks);
  } else {
    if (!a.matrix) throw InputError("eval needs --matrix unless --ablation is given");
    const auto mapping = load_mapping(*a.matrix);
    require_matrix_dim(mapping, src);
    config << " matrix=" << a.matrix->filename().string() << " stage=" << to_string(mapping.stage);

    const auto nsrc = src.normalized();
    const auto ntgt = tgt.normalized();
    const NeighborIndex index(ntgt);
    const auto sources = truth.sources();
    std::size_t kmax = 1;
    for (auto k : a.ks) kmax = std::max(kmax, k);
    const auto results = batch_query(sources, mapping.weights, nsrc, index, kmax);

    EvalReport r;
    r.configuration = std::string(to_string(mapping.stage));
    r.ks = a.ks;
    for (auto k : a.ks) {
      const auto h = topk_hits(results, truth, k);
      r.accuracy.push_back(h.accuracy());
      r.oov = h.oov;
    }
    r.prf = precision_recall_f(results, truth, a.prf_threshold);
    reports.push_back(std::move(r));

    {
      auto out = open_out(a.out_dir / "prf.csv");
      write_prf_csv(out, config.str(), *reports.front().prf);
    }
    if (!a.thresholds.empty()) {
      const auto rows = coverage_accuracy_table(mapping.weights, nsrc, ntgt, truth, a.thresholds, a.ks);
      auto out = open_out(a.out_dir / "coverage.csv");
      write_coverage_csv(out, config.str(), rows, a.ks);
    }
    if (a.groups) {
      const auto pairs = load_package_pairs(*a.groups);
      const auto rows = group_similarity(mapping.weights, nsrc, ntgt, pairs);
      auto out = open_out(a.out_dir / "groups.csv");
      write_group_csv(out, config.str(), rows);
    }
  }

  auto out = open_out(a.out_dir / "accuracy.csv");
  write_accuracy_csv(out, config.str(), reports);
  write_accuracy_csv(std::cout, config.str(), reports);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised alignment of code-token embedding spaces for API mapping"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  NormalizeArgs norm;
  auto* normalize = app.add_subcommand("normalize", "replace raw API tokens with signatures, drop noise");
  normalize->add_option("--in", norm.in, "raw corpus, one code sequence per line")->required();
  normalize->add_option("--table", norm.table, "TSV raw<TAB>signature")->required();
  normalize->add_option("--keywords", norm.keywords, "keywords and AST labels to keep, one per line");
  normalize->add_option("--out", norm.out, "normalized corpus")->required();
  normalize->add_flag("--class-level", norm.class_level, "drop the method part of every signature");

  EmbedArgs emb;
  auto* embed = app.add_subcommand("embed", "train skip-gram embeddings with negative sampling");
  embed->add_option("--corpus", emb.corpus, "normalized corpus")->required();
  embed->add_option("--out", emb.out, "vector file (a .freq sidecar is written next to it)")->required();
  embed->add_option("--dim", emb.cfg.dim, "vector dimension")->capture_default_str();
  embed->add_option("--epochs", emb.cfg.epochs, "passes over the corpus")->capture_default_str();
  embed->add_option("--lr", emb.cfg.learning_rate, "initial learning rate")->capture_default_str();
  embed->add_option("--negatives", emb.cfg.negatives, "negative samples per pair")->capture_default_str();
  embed->add_option("--window", emb.cfg.window, "maximum context window")->capture_default_str();
  embed->add_option("--subsample", emb.cfg.subsample, "frequent-token subsampling threshold")
      ->capture_default_str();
  embed->add_option("--min-count", emb.cfg.min_count, "minimum token count")->capture_default_str();
  embed->add_option("--workers", emb.cfg.workers, "training threads (1 is deterministic)")
      ->capture_default_str();
  embed->add_option("--seed", emb.cfg.rng_seed, "random seed")->capture_default_str();

  SeedsArgs sd;
  auto* seeds = app.add_subcommand("seeds", "mine seed pairs from matching class and method names");
  seeds->add_option("--src-emb", sd.src, "source vectors")->required();
  seeds->add_option("--tgt-emb", sd.tgt, "target vectors")->required();
  seeds->add_option("--out", sd.out, "seed TSV")->required();
  seeds->add_option("--key", sd.key, "match on class.method (method) or class (class)")
      ->check(CLI::IsMember({"method", "class"}))
      ->capture_default_str();

  AlignArgs al;
  auto* align = app.add_subcommand("align", "learn the mapping matrix");
  align->add_option("--src-emb", al.src, "source vectors")->required();
  align->add_option("--tgt-emb", al.tgt, "target vectors")->required();
  align->add_option("--seeds", al.seeds, "seed TSV (needed by the s stage)");
  align->add_option("--stages", al.stages, "ordered subset of s,a,r")->capture_default_str();
  align->add_option("--out-matrix", al.out_matrix, "mapping matrix file")->required();
  align->add_option("--log", al.log, "adversarial training CSV");
  align->add_option("--refine-report", al.refine_report, "refinement CSV");
  al.flags.add(*align);

  QueryArgs qa;
  auto* query = app.add_subcommand("query", "nearest target tokens for mapped source tokens");
  query->add_option("--matrix", qa.matrix, "mapping matrix file")->required();
  query->add_option("--src-emb", qa.src, "source vectors")->required();
  query->add_option("--tgt-emb", qa.tgt, "target vectors")->required();
  query->add_option("--k", qa.k, "neighbours per query")->capture_default_str()->check(CLI::PositiveNumber);
  query->add_option("--threshold", qa.threshold, "drop neighbours below this cosine");
  query->add_option("--file", qa.file, "file of query tokens");
  query->add_option("--out", qa.out, "TSV output (default stdout)");
  query->add_option("tokens", qa.tokens, "query tokens");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "accuracy, P/R/F, coverage and ablation reports");
  eval->add_option("--src-emb", ev.src, "source vectors")->required();
  eval->add_option("--tgt-emb", ev.tgt, "target vectors")->required();
  eval->add_option("--truth", ev.truth, "ground truth TSV source<TAB>target[<TAB>package]")->required();
  eval->add_option("--matrix", ev.matrix, "mapping matrix to evaluate");
  eval->add_option("--seeds", ev.seeds, "seed TSV; seed pairs are removed from the truth");
  eval->add_flag("--keep-seed-overlap", ev.keep_seed_overlap, "evaluate on seed pairs too");
  eval->add_option("--k-list", ev.ks, "k values for top-k accuracy")->capture_default_str()->delimiter(',');
  eval->add_option("--thresholds", ev.thresholds, "cosine thresholds for the coverage table")->delimiter(',');
  eval->add_option("--prf-threshold", ev.prf_threshold, "top-1 similarity needed to emit a mapping");
  eval->add_option("--groups", ev.groups, "TSV of source<TAB>target package prefixes");
  eval->add_flag("--ablation", ev.ablation, "run stage combinations instead of one matrix");
  eval->add_option("--grid", ev.grid, "combinations for --ablation, e.g. S S+A S+A+R (default: all)");
  eval->add_option("--out-dir", ev.out_dir, "directory for the CSV reports")->capture_default_str();
  ev.flags.add(*eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*normalize) run_normalize(norm);
    else if (*embed) run_embed(emb);
    else if (*seeds) run_seeds(sd);
    else if (*align) run_align(al);
    else if (*query) run_query(qa);
    else if (*eval) run_eval(ev);
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
