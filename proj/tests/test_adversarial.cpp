#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "gradcheck.hpp"
#include "sar/adversarial.hpp"
#include "sar/error.hpp"
#include "synthetic.hpp"

using namespace sar;

namespace {

EmbeddingSpace random_space(std::size_t n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    tokens.push_back("w" + std::to_string(i));
    counts.push_back(n - i);
  }
  RowMatrix v(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = normal(rng);
  return EmbeddingSpace(Vocabulary::from_tokens(tokens, counts), v).normalized();
}

AdvConfig small_config() {
  AdvConfig cfg;
  cfg.hidden = {128, 128};
  cfg.epochs = 4;
  cfg.iterations_per_epoch = 200;
  return cfg;
}

}  // namespace

TEST_CASE("loss values from fixed probabilities") {
  const std::vector<double> half = {0.5, 0.5, 0.5};
  // discriminator labels: source 1, target 0; mapping labels flipped
  CHECK(loss_from_probabilities(half, half, 1, 0) == doctest::Approx(2 * std::log(2.0)));
  CHECK(loss_from_probabilities(half, half, 0, 1) == doctest::Approx(2 * std::log(2.0)));

  const std::vector<double> ps = {0.8}, pt = {0.3};
  CHECK(loss_from_probabilities(ps, pt, 1, 0) == doctest::Approx(0.5798).epsilon(1e-4));
  CHECK(loss_from_probabilities(ps, pt, 0, 1) == doctest::Approx(2.8134).epsilon(1e-4));

  const std::vector<double> one = {1.0}, zero = {0.0};
  CHECK(loss_from_probabilities(one, zero, 1, 0) < 1e-6);
  CHECK(loss_from_probabilities(zero, one, 0, 1) < 1e-6);
  // clamping keeps the worst case finite
  CHECK(std::isfinite(loss_from_probabilities(zero, one, 1, 0)));
}

TEST_CASE("a discriminator with zero output weights is maximally uncertain") {
  const std::vector<std::size_t> hidden = {4};
  auto disc = DiscriminatorParams::init(3, hidden, 1);
  disc.layers.back().weight.setZero();
  const RowMatrix x = RowMatrix::Random(5, 3), y = RowMatrix::Random(7, 3);
  const Eigen::MatrixXd w = Eigen::MatrixXd::Identity(3, 3);
  CHECK(discriminator_loss(disc, w, x, y) == doctest::Approx(2 * std::log(2.0)));
  CHECK(mapping_loss(disc, w, x, y) == doctest::Approx(2 * std::log(2.0)));
  CHECK_THROWS_AS(discriminator_loss(disc, w, RowMatrix(0, 3), y), InputError);
}

TEST_CASE("analytic gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (double smoothing : {0.0, 0.2}) {
      for (bool mapping : {false, true}) {
        const auto r = testing::check_adversarial_gradients(seed, smoothing, mapping);
        CAPTURE(seed);
        CAPTURE(mapping);
        CHECK(r.checked > 25);
        CHECK(r.discriminator_rel < 1e-4);
        CHECK(r.mapping_rel < 1e-4);
      }
    }
  }
}

TEST_CASE("a small mapping step lowers the mapping loss against a frozen discriminator") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  const std::vector<std::size_t> hidden = {16, 16};
  const auto disc = DiscriminatorParams::init(8, hidden, 5);
  RowMatrix x(32, 8), y(32, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);
  const Eigen::MatrixXd w = Eigen::MatrixXd::Identity(8, 8);
  const auto g = mapping_loss_gradient(disc, w, x, y, 0.2);
  const double base = g.loss;
  bool decreased = false;
  for (double lr : {0.1, 0.01, 0.001}) {
    decreased = decreased || mapping_loss(disc, w - lr * g.mapping, x, y, 0.2) < base;
  }
  CHECK(decreased);
  CHECK(mapping_loss(disc, w - 0.001 * g.mapping, x, y, 0.2) < base);
}

TEST_CASE("selection criterion on aligned and unrelated spaces") {
  const auto space = random_space(300, 10, 1);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(10, 10);
  CHECK(selection_criterion(eye, space, space, 100) == doctest::Approx(1.0));

  const auto r = random_orthogonal(10, 7);
  const EmbeddingSpace rotated(space.vocab(), space.vectors() * r.transpose());
  CHECK(selection_criterion(r, space, rotated, 300) == doctest::Approx(1.0));

  CHECK_THROWS_AS(selection_criterion(eye, space, space, 0), InputError);
  CHECK_THROWS_AS(selection_criterion(eye, space, space, 301), InputError);

  int below = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = random_space(500, 50, 100 + seed);
    const auto b = random_space(500, 50, 200 + seed);
    if (selection_criterion(random_orthogonal(50, seed), a, b, 500) < 0.5) ++below;
  }
  CHECK(below == 20);
}

TEST_CASE("zero epochs returns the initial mapping") {
  const auto space = random_space(100, 6, 2);
  const MappingMatrix init{random_orthogonal(6, 3), Stage::seeded, true};
  AdvConfig cfg = small_config();
  cfg.epochs = 0;
  const auto r = train_adversarial(init, space, space, cfg);
  CHECK(r.mapping.weights == init.weights);
  CHECK(r.history.size() == 1);
  CHECK(r.best_epoch == 0);
}

TEST_CASE("adversarial config validation") {
  AdvConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = AdvConfig{};
  cfg.label_smoothing = 0.5;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = AdvConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("adversarial training improves a weakly seeded mapping") {
  testing::SyntheticConfig sc;
  sc.seeds = 10;
  std::vector<double> seeded, random;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    sc.seed = seed;
    const auto task = testing::make_synthetic_task(sc);
    const auto w1 = seeded_mapping(task.seeds, task.source, task.target);
    AdvConfig cfg = small_config();
    cfg.rng_seed = seed;
    const auto r = train_adversarial(w1, task.source, task.target, cfg);

    REQUIRE(r.history.size() == 5);
    const double best = r.history[static_cast<std::size_t>(r.best_epoch)].criterion;
    for (const auto& rec : r.history) CHECK(best >= rec.criterion);
    CHECK(best > r.history.front().criterion);
    CHECK(r.mapping.stage == Stage::adversarial);
    seeded.push_back(best);

    const MappingMatrix rnd{random_orthogonal(sc.dim, seed), Stage::seeded, true};
    const auto rr = train_adversarial(rnd, task.source, task.target, cfg);
    random.push_back(rr.history[static_cast<std::size_t>(rr.best_epoch)].criterion);
  }
  CHECK(testing::median(seeded) >= testing::median(random));
}

TEST_CASE("training log format") {
  std::vector<EpochRecord> h(2);
  h[1].epoch = 1;
  h[1].disc_loss = 1.25;
  h[1].criterion = 0.5;
  std::ostringstream out;
  write_training_log(out, h);
  CHECK(out.str() ==
        "epoch,L_D,L_W,disc_accuracy,criterion\n"
        "0,0.000000,0.000000,0.000000,0.000000\n"
        "1,1.250000,0.000000,0.000000,0.500000\n");
}
