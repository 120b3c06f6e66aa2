#include "sar/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "sar/error.hpp"

namespace sar {

DiscriminatorParams DiscriminatorParams::init(std::size_t input_dim,
                                              std::span<const std::size_t> hidden,
                                              std::uint64_t seed, double leak) {
  DiscriminatorParams p;
  p.leak = leak;
  std::mt19937_64 rng(seed);
  std::size_t in = input_dim;
  auto add_layer = [&](std::size_t out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer{Eigen::MatrixXd(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
                     Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = u(rng);
    p.layers.push_back(std::move(layer));
    in = out;
  };
  for (auto h : hidden) add_layer(h);
  add_layer(1);
  return p;
}

DiscriminatorParams DiscriminatorParams::zeros_like() const {
  DiscriminatorParams z;
  z.leak = leak;
  for (const auto& l : layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return z;
}

bool DiscriminatorParams::all_finite() const {
  return std::all_of(layers.begin(), layers.end(), [](const DenseLayer& l) {
    return l.weight.allFinite() && l.bias.allFinite();
  });
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce(double p, double label) {
  const double q = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  return -(label * std::log(q) + (1.0 - label) * std::log(1.0 - q));
}

struct Forward {
  std::vector<RowMatrix> pre;   // pre-activations per layer
  std::vector<RowMatrix> post;  // inputs to each layer (post[0] = network input)
  Eigen::VectorXd prob;
};

Forward forward(const DiscriminatorParams& disc, const RowMatrix& input) {
  Forward f;
  f.post.push_back(input);
  for (std::size_t l = 0; l < disc.layers.size(); ++l) {
    const auto& layer = disc.layers[l];
    RowMatrix z = f.post.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    f.pre.push_back(z);
    if (l + 1 < disc.layers.size()) {
      f.post.push_back(z.unaryExpr([leak = disc.leak](double v) { return v > 0 ? v : leak * v; }));
    }
  }
  const auto& logits = f.pre.back();
  f.prob.resize(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) f.prob(i) = sigmoid(logits(i, 0));
  return f;
}

// Shared objective: source rows carry `source_label`, target rows `target_label`.
LossGradient objective(const DiscriminatorParams& disc, const Eigen::MatrixXd& w,
                       const RowMatrix& source_batch, const RowMatrix& target_batch,
                       double source_label, double target_label, Dropout dropout) {
  if (source_batch.rows() == 0 || target_batch.rows() == 0) {
    throw InputError("adversarial loss needs non-empty batches");
  }
  const auto d = static_cast<Eigen::Index>(disc.input_dim());
  if (w.rows() != d || w.cols() != d || source_batch.cols() != d || target_batch.cols() != d) {
    throw InputError("adversarial loss: dimension mismatch");
  }
  const Eigen::Index ns = source_batch.rows();
  const Eigen::Index nt = target_batch.rows();

  RowMatrix input(ns + nt, d);
  input.topRows(ns) = source_batch * w.transpose();
  input.bottomRows(nt) = target_batch;

  RowMatrix mask;
  if (dropout.rate > 0 && dropout.rng) {
    std::bernoulli_distribution keep(1.0 - dropout.rate);
    const double scale = 1.0 / (1.0 - dropout.rate);
    mask.resize(input.rows(), input.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      mask.data()[i] = keep(*dropout.rng) ? scale : 0.0;
    }
    input = input.cwiseProduct(mask);
  }

  const Forward f = forward(disc, input);
  LossGradient out;
  out.discriminator = disc.zeros_like();

  RowMatrix grad(ns + nt, 1);
  double loss_s = 0, loss_t = 0;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < ns + nt; ++i) {
    const bool is_source = i < ns;
    const double label = is_source ? source_label : target_label;
    const double p = f.prob(i);
    const double l = bce(p, label);
    if (is_source) loss_s += l; else loss_t += l;
    if ((p > 0.5) == is_source) ++correct;
    const bool clamped = p < kProbabilityEpsilon || p > 1.0 - kProbabilityEpsilon;
    const double n = static_cast<double>(is_source ? ns : nt);
    grad(i, 0) = clamped ? 0.0 : (p - label) / n;
  }
  out.loss = loss_s / static_cast<double>(ns) + loss_t / static_cast<double>(nt);
  out.accuracy = static_cast<double>(correct) / static_cast<double>(ns + nt);

  for (std::size_t l = disc.layers.size(); l-- > 0;) {
    auto& g = out.discriminator.layers[l];
    g.weight = grad.transpose() * f.post[l];
    g.bias = grad.colwise().sum().transpose();
    RowMatrix below = grad * disc.layers[l].weight;
    if (l > 0) {
      const auto& z = f.pre[l - 1];
      for (Eigen::Index i = 0; i < below.size(); ++i) {
        if (!(z.data()[i] > 0)) below.data()[i] *= disc.leak;
      }
    }
    grad = std::move(below);
  }
  if (mask.size()) grad = grad.cwiseProduct(mask);
  out.mapping = grad.topRows(ns).transpose() * source_batch;
  return out;
}

}  // namespace

Eigen::VectorXd DiscriminatorParams::probabilities(const RowMatrix& inputs) const {
  return forward(*this, inputs).prob;
}

double loss_from_probabilities(std::span<const double> p_source, std::span<const double> p_target,
                               double source_label, double target_label) {
  if (p_source.empty() || p_target.empty()) throw InputError("adversarial loss needs non-empty batches");
  double ls = 0, lt = 0;
  for (double p : p_source) ls += bce(p, source_label);
  for (double p : p_target) lt += bce(p, target_label);
  return ls / static_cast<double>(p_source.size()) + lt / static_cast<double>(p_target.size());
}

LossGradient discriminator_loss_gradient(const DiscriminatorParams& disc, const Eigen::MatrixXd& w,
                                         const RowMatrix& source_batch,
                                         const RowMatrix& target_batch, double smoothing,
                                         Dropout dropout) {
  return objective(disc, w, source_batch, target_batch, 1.0 - smoothing, smoothing, dropout);
}

LossGradient mapping_loss_gradient(const DiscriminatorParams& disc, const Eigen::MatrixXd& w,
                                   const RowMatrix& source_batch, const RowMatrix& target_batch,
                                   double smoothing, Dropout dropout) {
  return objective(disc, w, source_batch, target_batch, smoothing, 1.0 - smoothing, dropout);
}

double discriminator_loss(const DiscriminatorParams& disc, const Eigen::MatrixXd& w,
                          const RowMatrix& source_batch, const RowMatrix& target_batch,
                          double smoothing) {
  return discriminator_loss_gradient(disc, w, source_batch, target_batch, smoothing).loss;
}

double mapping_loss(const DiscriminatorParams& disc, const Eigen::MatrixXd& w,
                    const RowMatrix& source_batch, const RowMatrix& target_batch,
                    double smoothing) {
  return mapping_loss_gradient(disc, w, source_batch, target_batch, smoothing).loss;
}

// ---------------------------------------------------------------------------
// model selection

double selection_criterion(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                           const NeighborIndex& target, std::size_t k) {
  if (k == 0) throw InputError("selection criterion needs K >= 1");
  if (k > source.size()) {
    throw InputError("selection criterion K (" + std::to_string(k) + ") exceeds source vocabulary (" +
                     std::to_string(source.size()) + ")");
  }
  const auto top = source.most_frequent(k);
  const auto best = target.best_matches(map_rows(w, source, top));
  double sum = 0;
  for (const auto& [idx, sim] : best) sum += idx == NeighborIndex::npos ? 0.0 : sim;
  return sum / static_cast<double>(best.size());
}

double selection_criterion(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                           const EmbeddingSpace& target, std::size_t k) {
  return selection_criterion(w, source, NeighborIndex(target), k);
}

double frequency_rank_similarity(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                                 const EmbeddingSpace& target, std::size_t k) {
  const auto src = source.most_frequent(k);
  const auto tgt = target.most_frequent(k);
  const std::size_t n = std::min(src.size(), tgt.size());
  if (n == 0) return 0;
  const RowMatrix mapped = map_rows(w, source, std::span(src).first(n));
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd a = mapped.row(static_cast<Eigen::Index>(i)).transpose();
    const Eigen::VectorXd b = target.vectors().row(static_cast<Eigen::Index>(tgt[i])).transpose();
    const double denom = a.norm() * b.norm();
    sum += denom > 0 ? a.dot(b) / denom : 0.0;
  }
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// training

void AdvConfig::validate() const {
  if (epochs < 0) throw InputError("epochs must be >= 0");
  if (iterations_per_epoch < 1) throw InputError("iterations per epoch must be >= 1");
  if (batch_size < 1) throw InputError("batch size must be >= 1");
  if (disc_steps_per_map_step < 0) throw InputError("discriminator steps must be >= 0");
  if (!(learning_rate > 0)) throw InputError("learning rate must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw InputError("momentum must be in [0, 1)");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw InputError("lr decay must be in (0, 1]");
  if (!(label_smoothing >= 0 && label_smoothing < 0.5)) throw InputError("label smoothing must be in [0, 0.5)");
  if (!(input_dropout >= 0 && input_dropout < 1)) throw InputError("input dropout must be in [0, 1)");
  if (selection_k < 1) throw InputError("selection K must be >= 1");
  if (sample_top < 1) throw InputError("sample_top must be >= 1");
  if (!(orthogonalize >= 0 && orthogonalize < 0.5)) throw InputError("orthogonalize must be in [0, 0.5)");
}

namespace {

class Momentum {
 public:
  explicit Momentum(const DiscriminatorParams& like) : velocity_(like.zeros_like()) {}

  void step(DiscriminatorParams& params, const DiscriminatorParams& grad, double lr, double mu) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      auto& v = velocity_.layers[l];
      v.weight = mu * v.weight - lr * grad.layers[l].weight;
      v.bias = mu * v.bias - lr * grad.layers[l].bias;
      params.layers[l].weight += v.weight;
      params.layers[l].bias += v.bias;
    }
  }

 private:
  DiscriminatorParams velocity_;
};

RowMatrix sample_rows(const EmbeddingSpace& space, std::span<const std::size_t> pool,
                      int count, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  RowMatrix out(count, static_cast<Eigen::Index>(space.dim()));
  for (int i = 0; i < count; ++i) {
    out.row(i) = space.vectors().row(static_cast<Eigen::Index>(pool[pick(rng)]));
  }
  return out;
}

}  // namespace

AdversarialResult train_adversarial(const MappingMatrix& init, const EmbeddingSpace& source,
                                    const EmbeddingSpace& target, const AdvConfig& cfg,
                                    const EpochObserver& observer) {
  cfg.validate();
  if (source.dim() != target.dim() || init.dim() != source.dim()) {
    throw InputError("adversarial training: dimension mismatch between mapping and spaces");
  }
  if (source.empty() || target.empty()) throw InputError("adversarial training: empty space");

  const std::size_t k = std::min(cfg.selection_k, source.size());
  const NeighborIndex index(target);

  AdversarialResult result;
  result.mapping = init;
  EpochRecord first;
  first.criterion = selection_criterion(init.weights, source, index, k);
  first.rank_similarity = frequency_rank_similarity(init.weights, source, target, k);
  result.history.push_back(first);
  if (observer) observer(first, init.weights);
  double best = first.criterion;
  if (cfg.epochs == 0) return result;

  std::mt19937_64 rng(cfg.rng_seed);
  DiscriminatorParams disc = DiscriminatorParams::init(source.dim(), cfg.hidden, rng(), cfg.leak);
  Momentum disc_opt(disc);
  Eigen::MatrixXd w = init.weights;
  Eigen::MatrixXd w_velocity = Eigen::MatrixXd::Zero(w.rows(), w.cols());

  const auto src_pool = source.most_frequent(cfg.sample_top);
  const auto tgt_pool = target.most_frequent(cfg.sample_top);
  double lr = cfg.learning_rate;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double sum_d = 0, sum_w = 0, sum_acc = 0;
    int n_d = 0, n_w = 0;
    for (int it = 0; it < cfg.iterations_per_epoch; ++it) {
      for (int s = 0; s < cfg.disc_steps_per_map_step; ++s) {
        const RowMatrix xb = sample_rows(source, src_pool, cfg.batch_size, rng);
        const RowMatrix yb = sample_rows(target, tgt_pool, cfg.batch_size, rng);
        const auto g = discriminator_loss_gradient(disc, w, xb, yb, cfg.label_smoothing,
                                                   {cfg.input_dropout, &rng});
        if (!std::isfinite(g.loss)) {
          throw NumericError("discriminator loss is non-finite at epoch " + std::to_string(epoch));
        }
        disc_opt.step(disc, g.discriminator, lr, cfg.momentum);
        sum_d += g.loss;
        sum_acc += g.accuracy;
        ++n_d;
      }
      const RowMatrix xb = sample_rows(source, src_pool, cfg.batch_size, rng);
      const RowMatrix yb = sample_rows(target, tgt_pool, cfg.batch_size, rng);
      const auto g = mapping_loss_gradient(disc, w, xb, yb, cfg.label_smoothing,
                                           {cfg.input_dropout, &rng});
      if (!std::isfinite(g.loss) || !g.mapping.allFinite()) {
        throw NumericError("mapping loss is non-finite at epoch " + std::to_string(epoch));
      }
      w_velocity = cfg.momentum * w_velocity - lr * g.mapping;
      w += w_velocity;
      if (cfg.orthogonalize > 0) {
        w = (1.0 + cfg.orthogonalize) * w - cfg.orthogonalize * (w * w.transpose()) * w;
      }
      sum_w += g.loss;
      ++n_w;
    }
    if (!disc.all_finite() || !w.allFinite()) {
      throw NumericError("adversarial parameters became non-finite at epoch " + std::to_string(epoch));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.disc_loss = n_d ? sum_d / n_d : 0.0;
    rec.map_loss = sum_w / n_w;
    rec.disc_accuracy = n_d ? sum_acc / n_d : 0.0;
    rec.criterion = selection_criterion(w, source, index, k);
    rec.rank_similarity = frequency_rank_similarity(w, source, target, k);
    result.history.push_back(rec);
    if (observer) observer(rec, w);
    if (rec.criterion > best) {
      best = rec.criterion;
      result.best_epoch = epoch;
      result.mapping = MappingMatrix{w, Stage::adversarial, orthogonality_error(w) < 1e-6};
    }
    lr *= cfg.lr_decay;
  }
  if (result.best_epoch == 0) result.mapping.stage = Stage::adversarial;
  return result;
}

void write_training_log(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,L_D,L_W,disc_accuracy,criterion\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.disc_loss, r.map_loss,
                  r.disc_accuracy, r.criterion);
    out << buf;
  }
}

}  // namespace sar
