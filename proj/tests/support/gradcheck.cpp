#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sar/adversarial.hpp"

namespace sar::testing {

namespace {

double rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace

GradCheck check_adversarial_gradients(std::uint64_t seed, double smoothing, bool mapping_objective) {
  constexpr std::size_t d = 5;
  constexpr double h = 1e-5;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const std::vector<std::size_t> hidden = {6, 4};
  DiscriminatorParams disc = DiscriminatorParams::init(d, hidden, rng());
  Eigen::MatrixXd w(d, d);
  RowMatrix xs(2, d), ys(2, d);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < ys.size(); ++i) ys.data()[i] = normal(rng);

  auto loss = [&](const DiscriminatorParams& p, const Eigen::MatrixXd& m) {
    return mapping_objective ? mapping_loss(p, m, xs, ys, smoothing)
                             : discriminator_loss(p, m, xs, ys, smoothing);
  };
  const LossGradient g = mapping_objective ? mapping_loss_gradient(disc, w, xs, ys, smoothing)
                                           : discriminator_loss_gradient(disc, w, xs, ys, smoothing);
  GradCheck out;
  for (std::size_t l = 0; l < disc.layers.size(); ++l) {
    auto probe = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = loss(disc, w);
      param = saved - h;
      const double down = loss(disc, w);
      param = saved;
      out.discriminator_rel = std::max(out.discriminator_rel, rel_error(analytic, (up - down) / (2 * h)));
      ++out.checked;
    };
    auto& layer = disc.layers[l];
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      probe(layer.weight.data()[i], g.discriminator.layers[l].weight.data()[i]);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      probe(layer.bias.data()[i], g.discriminator.layers[l].bias.data()[i]);
    }
  }
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double saved = w.data()[i];
    w.data()[i] = saved + h;
    const double up = loss(disc, w);
    w.data()[i] = saved - h;
    const double down = loss(disc, w);
    w.data()[i] = saved;
    out.mapping_rel = std::max(out.mapping_rel, rel_error(g.mapping.data()[i], (up - down) / (2 * h)));
    ++out.checked;
  }
  return out;
}

}  // namespace sar::testing
