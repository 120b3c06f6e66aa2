#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "sar/error.hpp"
#include "sar/seeding.hpp"

using namespace sar;

namespace {

// Independent of random_orthogonal(): Gram-Schmidt through Eigen's QR.
Eigen::MatrixXd test_rotation(Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  return Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
}

RowMatrix random_rows(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

Vocabulary vocab(std::vector<std::string> tokens) {
  std::vector<std::uint64_t> counts(tokens.size(), 1);
  return Vocabulary::from_tokens(std::move(tokens), std::move(counts));
}

}  // namespace

TEST_CASE("procrustes on the standard basis is the identity") {
  const RowMatrix eye = RowMatrix::Identity(3, 3);
  const auto m = solve_procrustes(eye, eye);
  CHECK((m.weights - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-12);
  CHECK(m.orthogonal);
  CHECK(m.stage == Stage::seeded);
}

TEST_CASE("procrustes recovers a 90 degree rotation") {
  RowMatrix xs(2, 2), ys(2, 2);
  xs << 1, 0, 0, 1;
  ys << 0, 1, -1, 0;
  Eigen::MatrixXd expected(2, 2);
  expected << 0, -1, 1, 0;
  CHECK((solve_procrustes(xs, ys).weights - expected).norm() < 1e-12);
}

TEST_CASE("procrustes recovers a random orthogonal map from exact seeds") {
  std::mt19937_64 rng(42);
  const auto r = test_rotation(20, rng);
  const RowMatrix xs = random_rows(50, 20, rng);
  const RowMatrix ys = xs * r.transpose();
  const auto m = solve_procrustes(xs, ys);
  CHECK((m.weights - r).norm() < 1e-8);
  CHECK(orthogonality_error(m.weights) < 1e-6);
}

TEST_CASE("procrustes is optimal among orthogonal maps") {
  std::mt19937_64 rng(9);
  const Eigen::Index d = 6;
  const RowMatrix xs = random_rows(15, d, rng);
  const RowMatrix ys = random_rows(15, d, rng);  // unrelated: no exact solution
  const auto w = solve_procrustes(xs, ys).weights;
  const double best = (xs * w.transpose() - ys).norm();
  for (int i = 0; i < 100; ++i) {
    const auto q = test_rotation(d, rng);
    CHECK(best <= (xs * q.transpose() - ys).norm() + 1e-8);
  }
}

TEST_CASE("procrustes stays orthogonal on rank-deficient input") {
  std::mt19937_64 rng(3);
  RowMatrix xs = random_rows(2, 5, rng);  // rank 2 in d = 5
  RowMatrix ys = random_rows(2, 5, rng);
  const auto m = solve_procrustes(xs, ys);
  CHECK(orthogonality_error(m.weights) < 1e-6);
  CHECK(m.weights.allFinite());

  const RowMatrix zeros = RowMatrix::Zero(3, 4);
  CHECK(orthogonality_error(solve_procrustes(zeros, zeros).weights) < 1e-6);
  CHECK_THROWS_AS(solve_procrustes(RowMatrix(0, 3), RowMatrix(0, 3)), InputError);
  CHECK_THROWS_AS(solve_procrustes(RowMatrix::Zero(2, 3), RowMatrix::Zero(2, 4)), InputError);
}

TEST_CASE("gradient descent converges to the identity") {
  const RowMatrix eye = RowMatrix::Identity(2, 2);
  const auto r = solve_gradient_descent(eye, eye, 0.1, 1000);
  CHECK((r.mapping.weights - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-3);
  for (std::size_t i = 1; i < r.losses.size(); ++i) CHECK(r.losses[i] <= r.losses[i - 1]);
}

TEST_CASE("gradient descent fits a single constraint") {
  RowMatrix x(1, 2), y(1, 2);
  x << 1, 0;
  y << 0, 1;
  const auto r = solve_gradient_descent(x, y, 0.1, 1000);
  const Eigen::Vector2d mapped = r.mapping.weights * Eigen::Vector2d(1, 0);
  CHECK(mapped(0) == doctest::Approx(0).epsilon(1e-6));
  CHECK(mapped(1) == doctest::Approx(1).epsilon(1e-6));
}

TEST_CASE("gradient descent fits exact seeds but is not held orthogonal") {
  std::mt19937_64 rng(17);
  const auto rot = test_rotation(10, rng);
  const RowMatrix xs = random_rows(40, 10, rng);
  const RowMatrix ys = xs * rot.transpose();
  const auto gd = solve_gradient_descent(xs, ys, 0.05, 2000);
  CHECK(gd.final_loss < 1e-4);
  const auto exact = solve_procrustes(xs, ys);
  CHECK(orthogonality_error(gd.mapping.weights) >= orthogonality_error(exact.weights));
  CHECK((xs * exact.weights.transpose() - ys).norm() <= (xs * gd.mapping.weights.transpose() - ys).norm() + 1e-10);
}

TEST_CASE("gradient descent reports divergence") {
  std::mt19937_64 rng(1);
  const RowMatrix xs = random_rows(10, 4, rng);
  const RowMatrix ys = random_rows(10, 4, rng);
  CHECK_THROWS_AS(solve_gradient_descent(xs, ys, 50.0, 100), NumericError);
  CHECK_THROWS_AS(solve_gradient_descent(xs, ys, 0.0, 100), InputError);
}

TEST_CASE("signature seeds match the case-folded class and method") {
  const auto src = vocab({"java.lang.String.equals", "java.util.Random.nextDouble", "if",
                          "java.lang.Math.round"});
  const auto tgt = vocab({"System.String.Equals", "System.Random.NextDouble", "if"});
  const auto seeds = mine_signature_seeds(src, tgt);
  REQUIRE(seeds.size() == 2);
  CHECK(seeds.contains("java.lang.String.equals", "System.String.Equals"));
  CHECK(seeds.contains("java.util.Random.nextDouble", "System.Random.NextDouble"));
}

TEST_CASE("signature seeds keep only unique matches") {
  const auto one = mine_signature_seeds(vocab({"a.B.c", "a.B.d"}), vocab({"z.B.c"}));
  REQUIRE(one.size() == 1);
  CHECK(one.pairs()[0] == SeedPair{"a.B.c", "z.B.c", std::nullopt});

  // Two sources share the key: discarded.
  CHECK(mine_signature_seeds(vocab({"a.B.c", "x.B.c"}), vocab({"z.B.c"})).empty());
  CHECK(mine_signature_seeds(vocab({"a.B.c"}), vocab({"z.B.c", "y.b.C"})).empty());

  const auto cls = mine_signature_seeds(vocab({"java.util.Random"}), vocab({"System.Random"}),
                                        SeedKey::class_only);
  CHECK(cls.size() == 1);
}

TEST_CASE("signature seed mining is symmetric") {
  std::mt19937_64 rng(4);
  const std::vector<std::string> classes = {"List", "Map", "String", "File", "Math"};
  const std::vector<std::string> methods = {"add", "get", "put", "exists", "round", "equals"};
  for (int trial = 0; trial < 20; ++trial) {
    auto make = [&](const std::string& prefix) {
      std::set<std::string> toks;
      for (int i = 0; i < 12; ++i) {
        std::string m = methods[rng() % methods.size()];
        if (rng() % 2) m[0] = static_cast<char>(std::toupper(m[0]));
        toks.insert(prefix + std::to_string(rng() % 3) + "." + classes[rng() % classes.size()] + "." + m);
      }
      return vocab(std::vector<std::string>(toks.begin(), toks.end()));
    };
    const auto a = make("java.p");
    const auto b = make("System.q");
    std::set<std::pair<std::string, std::string>> ab, ba;
    for (const auto& p : mine_signature_seeds(a, b)) ab.emplace(p.source, p.target);
    for (const auto& p : mine_signature_seeds(b, a)) ba.emplace(p.target, p.source);
    CHECK(ab == ba);
  }
}

TEST_CASE("seed dictionary rejects duplicate pairs and round-trips through TSV") {
  SeedDictionary d;
  CHECK(d.add({"a.B.c", "x.B.c", std::nullopt}));
  CHECK_FALSE(d.add({"a.B.c", "x.B.c", std::nullopt}));
  CHECK(d.add({"a.B.c", "y.B.c", std::nullopt}));
  const auto path = std::filesystem::temp_directory_path() / "sar_seeds.tsv";
  d.save(path);
  const auto back = SeedDictionary::load(path);
  REQUIRE(back.size() == 2);
  CHECK(back.pairs()[1].target == "y.B.c");

  std::ofstream(path) << "only-one-column\n";
  CHECK_THROWS_AS(SeedDictionary::load(path), InputError);
}

TEST_CASE("mapping matrix files keep every bit and the stage") {
  std::mt19937_64 rng(8);
  MappingMatrix m{test_rotation(7, rng), Stage::adversarial, true};
  const auto path = std::filesystem::temp_directory_path() / "sar_matrix.txt";
  save_mapping(m, path);
  {
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(first == "7");
  }
  const auto back = load_mapping(path);
  CHECK(back.weights == m.weights);
  CHECK(back.stage == Stage::adversarial);
  CHECK(back.orthogonal);

  std::ofstream(path) << "2\n1 0\n";
  CHECK_THROWS_AS(load_mapping(path), InputError);
}

TEST_CASE("seeded mapping uses unit-length rows of known pairs") {
  RowMatrix sx(3, 2), ty(3, 2);
  sx << 2, 0, 0, 3, 1, 1;
  ty << 0, 5, -4, 0, 7, 7;
  const EmbeddingSpace src(vocab({"s.A.a", "s.A.b", "s.A.c"}), sx);
  const EmbeddingSpace tgt(vocab({"t.A.a", "t.A.b", "t.A.c"}), ty);
  SeedDictionary d;
  d.add({"s.A.a", "t.A.a", std::nullopt});
  d.add({"s.A.b", "t.A.b", std::nullopt});
  d.add({"s.A.zzz", "t.A.c", std::nullopt});  // unknown source: skipped
  Eigen::MatrixXd expected(2, 2);
  expected << 0, -1, 1, 0;
  CHECK((seeded_mapping(d, src, tgt).weights - expected).norm() < 1e-12);

  SeedDictionary none;
  none.add({"nope", "nada", std::nullopt});
  CHECK_THROWS_AS(seeded_mapping(none, src, tgt), InputError);
}

TEST_CASE("random_orthogonal is orthogonal and seed-determined") {
  const auto a = random_orthogonal(30, 5);
  CHECK(orthogonality_error(a) < 1e-10);
  CHECK(a == random_orthogonal(30, 5));
  CHECK_FALSE(a == random_orthogonal(30, 6));
}
