#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "sar/error.hpp"
#include "sar/eval.hpp"
#include "synthetic.hpp"

using namespace sar;

namespace {

// Ten neighbours; the expected target `<q>_ok` sits at `rank` (1-based) or nowhere.
QueryResult ranked(const std::string& q, std::optional<std::size_t> rank) {
  QueryResult r{q, {}, false};
  for (std::size_t i = 1; i <= 10; ++i) {
    const std::string tok = rank && *rank == i ? q + "_ok" : q + "_n" + std::to_string(i);
    r.neighbors.push_back({i, tok, 1.0 - 0.05 * static_cast<double>(i)});
  }
  return r;
}

EmbeddingSpace space_from(const RowMatrix& rows, const std::string& prefix) {
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    tokens.push_back(prefix + std::to_string(i));
    counts.push_back(static_cast<std::uint64_t>(rows.rows() - i));
  }
  return EmbeddingSpace(Vocabulary::from_tokens(tokens, counts), rows);
}

}  // namespace

TEST_CASE("top-k accuracy counts hits within k") {
  std::vector<QueryResult> results = {ranked("a", 1), ranked("b", 7), ranked("c", 2),
                                      ranked("d", std::nullopt)};
  GroundTruth truth;
  for (std::string q : {"a", "b", "c", "d"}) truth.add(q, q + "_ok");
  CHECK(topk_accuracy(results, truth, 5) == doctest::Approx(0.5));
  CHECK(topk_accuracy(results, truth, 1) == doctest::Approx(0.25));
  CHECK(topk_accuracy(results, truth, 10) == doctest::Approx(0.75));
  double prev = 0;
  for (std::size_t k = 1; k <= 10; ++k) {
    const double acc = topk_accuracy(results, truth, k);
    CHECK(acc >= prev);
    prev = acc;
  }

  CHECK_THROWS_AS(topk_accuracy(results, GroundTruth{}, 5), InputError);
  GroundTruth extra = truth;
  extra.add("never_queried", "x");
  CHECK_THROWS_AS(topk_accuracy(results, extra, 5), InputError);

  // OOV queries are misses and counted separately.
  results[3] = QueryResult{"d", {}, true};
  const auto h = topk_hits(results, truth, 5);
  CHECK(h.oov == 1);
  CHECK(h.hits + h.misses == 4);
}

TEST_CASE("multi-target truth accepts any listed target") {
  GroundTruth truth;
  truth.add("a", "a_x");
  truth.add("a", "a_ok");
  std::vector<QueryResult> results = {ranked("a", 3)};
  CHECK(topk_accuracy(results, truth, 3) == 1.0);
  CHECK(truth.size() == 1);
  CHECK(truth.expects("a", "a_x"));
}

TEST_CASE("k equal to the vocabulary size finds every in-vocabulary target") {
  testing::SyntheticConfig sc;
  sc.vocab = 300;
  sc.truth_pool = 100;
  sc.truth_pairs = 50;
  const auto task = testing::make_synthetic_task(sc);
  const auto w = random_orthogonal(sc.dim, 3);
  const std::size_t ks[] = {task.target.size()};
  CHECK(evaluate_mapping(w, task.source, task.target, task.truth, ks)[0].accuracy() == 1.0);
}

TEST_CASE("precision, recall and F") {
  CHECK(f_score(0.840, 0.813) == doctest::Approx(0.826).epsilon(0.001 / 0.826));
  const auto p = precision_recall_f(2, 1, 3);
  CHECK(p.precision == doctest::Approx(2.0 / 3.0));
  CHECK(p.recall == doctest::Approx(0.4));
  CHECK(p.f_score == doctest::Approx(0.5));
  const auto perfect = precision_recall_f(5, 0, 0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f_score == 1.0);
  CHECK(precision_recall_f(0, 0, 0).f_score == 0.0);
  CHECK(f_score(0, 0) == 0.0);

  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> n(0, 50);
  for (int i = 0; i < 200; ++i) {
    const auto r = precision_recall_f(n(rng), n(rng), n(rng));
    CHECK(std::abs(f_score(r.precision, r.recall) - r.f_score) < 1e-12);
  }
}

TEST_CASE("precision and recall from query results") {
  GroundTruth truth;
  for (std::string q : {"a", "b", "c", "d"}) truth.add(q, q + "_ok");
  std::vector<QueryResult> results = {ranked("a", 1), ranked("b", 1), ranked("c", 2),
                                      ranked("d", 1)};
  results[3].neighbors[0].similarity = 0.1;  // below the threshold: not emitted
  const auto all = precision_recall_f(results, truth);
  CHECK(all.tp == 3);
  CHECK(all.fp == 1);
  const auto cut = precision_recall_f(results, truth, 0.5);
  CHECK(cut.tp == 2);
  CHECK(cut.fp == 1);
  CHECK(cut.fn == 2);
}

TEST_CASE("coverage table on a half-covered construction") {
  RowMatrix src = RowMatrix::Zero(8, 8), tgt = RowMatrix::Zero(4, 8);
  for (int i = 0; i < 8; ++i) src(i, i) = 1;
  for (int i = 0; i < 4; ++i) tgt(i, i) = 1;
  const auto s = space_from(src, "s");
  const auto t = space_from(tgt, "t");
  GroundTruth truth;
  for (int i = 0; i < 8; ++i) truth.add("s" + std::to_string(i), "t" + std::to_string(i % 4));
  const double thresholds[] = {0.5};
  const std::size_t ks[] = {1};
  const auto rows = coverage_accuracy_table(Eigen::MatrixXd::Identity(8, 8), s, t, truth, thresholds, ks);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].coverage == 0.5);
  CHECK(rows[0].accuracy_covered[0] == 1.0);
}

TEST_CASE("coverage is non-increasing in the threshold") {
  testing::SyntheticConfig sc;
  sc.vocab = 600;
  sc.truth_pool = 300;
  sc.noise = 0.15;
  const auto task = testing::make_synthetic_task(sc);
  const auto src = task.source.normalized();
  const auto tgt = task.target.normalized();
  const auto w = seeded_mapping(task.seeds, src, tgt).weights;
  const double thresholds[] = {0.0, 0.3, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99};
  const std::size_t ks[] = {1, 5};
  const auto rows = coverage_accuracy_table(w, src, tgt, task.truth, thresholds, ks);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].coverage == 1.0);
  const auto plain = evaluate_mapping(w, src, tgt, task.truth, ks);
  CHECK(rows[0].accuracy_covered[0] == doctest::Approx(plain[0].accuracy()));
  CHECK(rows[0].accuracy_covered[1] == doctest::Approx(plain[1].accuracy()));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].coverage <= rows[i - 1].coverage);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(rows[i].accuracy_all[j] <= rows[i].accuracy_covered[j] + 1e-12);
    }
  }
}

TEST_CASE("group similarity is the mean over the package cross product") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  RowMatrix rows(6, 4);
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = normal(rng);
  const std::vector<std::string> tokens = {"java.math.A", "java.math.B", "java.io.C",
                                           "java.mathx.D", "java.math", "x.y"};
  const EmbeddingSpace space(Vocabulary::from_tokens(tokens, {6, 5, 4, 3, 2, 1}), rows);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);

  const auto members = package_members(space.vocab(), "java.math");
  CHECK(members == std::vector<std::size_t>{0, 1, 4});

  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"java.math", "java.math"}, {"x.y", "java.io.C"}, {"nothing", "java.io"}};
  const auto scores = group_similarity(eye, space, space, pairs);
  REQUIRE(scores.size() == 3);
  auto cosine = [&](std::size_t a, std::size_t b) {
    const Eigen::VectorXd u = rows.row(static_cast<Eigen::Index>(a)).transpose();
    const Eigen::VectorXd v = rows.row(static_cast<Eigen::Index>(b)).transpose();
    return u.dot(v) / (u.norm() * v.norm());
  };
  double sum = 0;
  for (auto a : members)
    for (auto b : members) sum += cosine(a, b);
  CHECK(scores[0].mean_cosine.value() == doctest::Approx(sum / 9.0).epsilon(1e-12));
  CHECK(scores[1].mean_cosine.value() == doctest::Approx(cosine(5, 2)).epsilon(1e-12));
  CHECK_FALSE(scores[2].mean_cosine.has_value());
}

TEST_CASE("seed-only ablation equals a plain Procrustes solve") {
  testing::SyntheticConfig sc;
  sc.vocab = 500;
  sc.truth_pool = 200;
  const auto task = testing::make_synthetic_task(sc);
  const std::size_t ks[] = {1, 5, 10};
  const Stages grid[] = {Stages::parse("S")};
  const auto reports = run_ablation(task.source, task.target, task.seeds, task.truth, grid,
                                    PipelineConfig{}, ks);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].configuration == "S");
  const auto src = task.source.normalized();
  const auto tgt = task.target.normalized();
  const auto [xs, ys] = gather_pairs(task.seeds, src, tgt);
  const auto direct = evaluate_mapping(solve_procrustes(xs, ys).weights, src, tgt, task.truth, ks);
  for (std::size_t j = 0; j < 3; ++j) CHECK(reports[0].accuracy[j] == direct[j].accuracy());
}

TEST_CASE("evaluating without the seeds changes only the seed entries") {
  testing::SyntheticConfig sc;
  sc.vocab = 500;
  sc.truth_pool = 200;
  const auto task = testing::make_synthetic_task(sc);
  const auto w = seeded_mapping(task.seeds, task.source, task.target).weights;
  const std::size_t ks[] = {1};
  GroundTruth seed_truth;
  for (const auto& p : task.seeds) seed_truth.add(p.source, p.target);
  const auto full = evaluate_mapping(w, task.source, task.target, task.full_truth, ks)[0];
  const auto rest = evaluate_mapping(w, task.source, task.target, task.truth, ks)[0];
  const auto seeds = evaluate_mapping(w, task.source, task.target, seed_truth, ks)[0];
  CHECK(task.truth.size() + seed_truth.size() == task.full_truth.size());
  CHECK(full.hits == rest.hits + seeds.hits);
  CHECK(full.misses == rest.misses + seeds.misses);
  for (const auto& p : task.seeds) CHECK(task.truth.find(p.source) == nullptr);
}

TEST_CASE("k-fold splits partition the truth") {
  GroundTruth truth;
  for (int i = 0; i < 23; ++i) truth.add("s" + std::to_string(i), "t" + std::to_string(i));
  std::set<std::string> tested;
  for (int offset = 0; offset < 5; ++offset) {
    const auto [train, test] = kfold_split(truth, 5, 4, offset, 7);
    CHECK(train.size() + test.size() == 23);
    for (const auto& e : test.entries()) {
      CHECK_FALSE(train.contains(e.source, e.targets[0]));
      tested.insert(e.source);
    }
  }
  CHECK(tested.size() == 23);  // every pair is held out exactly once
  const auto a = kfold_split(truth, 5, 2, 0, 7);
  const auto b = kfold_split(truth, 5, 2, 0, 7);
  CHECK(a.first.pairs() == b.first.pairs());
  CHECK_THROWS_AS(kfold_split(truth, 5, 5, 0, 7), InputError);
}

TEST_CASE("ground truth files") {
  const auto path = std::filesystem::temp_directory_path() / "sar_truth.tsv";
  std::ofstream(path) << "a.B.c\tx.B.c\tpkg\na.B.d\tx.B.d\n";
  const auto truth = GroundTruth::load(path);
  CHECK(truth.size() == 2);
  CHECK(truth.find("a.B.c")->package == "pkg");
  std::ofstream(path) << "a\tb\tc\td\n";
  CHECK_THROWS_AS(GroundTruth::load(path), InputError);
}

TEST_CASE("stage lists") {
  CHECK(Stages::parse("s,a,r") == Stages{true, true, true});
  CHECK(Stages::parse("S+R") == Stages{true, false, true});
  CHECK(Stages::parse("adversarial,refine").name() == "A+R");
  CHECK_THROWS_AS(Stages::parse("r,s"), InputError);
  CHECK_THROWS_AS(Stages::parse(""), InputError);
  CHECK(full_ablation_grid().size() == 7);
}

TEST_CASE("report CSVs start with the configuration") {
  EvalReport r{"S+A", {1, 5}, {0.25, 0.5}, 0, std::nullopt, {}};
  std::ostringstream out;
  write_accuracy_csv(out, "seeds=30", std::span(&r, 1));
  CHECK(out.str() == "# config: seeds=30\nconfiguration,k,accuracy\nS+A,1,0.250000\nS+A,5,0.500000\n");
}
