#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sar/embedding.hpp"
#include "sar/query.hpp"
#include "sar/seeding.hpp"

namespace sar {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Feed-forward binary classifier: hidden layers with leaky rectifiers, one
/// sigmoid output giving P(source = 1 | v).
struct DiscriminatorParams {
  std::vector<DenseLayer> layers;
  double leak = 0.2;

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero biases.
  static DiscriminatorParams init(std::size_t input_dim, std::span<const std::size_t> hidden,
                                  std::uint64_t seed, double leak = 0.2);

  /// A copy with every weight and bias zeroed (same shapes).
  DiscriminatorParams zeros_like() const;

  std::size_t input_dim() const { return static_cast<std::size_t>(layers.front().weight.cols()); }

  /// P(source = 1 | row) for each row, no dropout.
  Eigen::VectorXd probabilities(const RowMatrix& inputs) const;

  bool all_finite() const;
};

/// Clamping applied to probabilities before taking logs.
inline constexpr double kProbabilityEpsilon = 1e-7;

/// mean_i BCE(p_src_i, src_label) + mean_j BCE(p_tgt_j, tgt_label), with
/// probabilities clamped to [eps, 1 - eps].
double loss_from_probabilities(std::span<const double> p_source, std::span<const double> p_target,
                               double source_label, double target_label);

struct LossGradient {
  double loss = 0;
  DiscriminatorParams discriminator;  ///< dL / d(theta_D)
  Eigen::MatrixXd mapping;            ///< dL / dW
  double accuracy = 0;                ///< fraction classified on the right side
};

/// Optional input dropout for the gradient routines.
struct Dropout {
  double rate = 0;
  std::mt19937_64* rng = nullptr;
};

/// Discriminator objective: mapped source rows (W x) labelled source = 1,
/// target rows labelled source = 0. `smoothing` moves both labels toward 0.5.
LossGradient discriminator_loss_gradient(const DiscriminatorParams& disc, const Eigen::MatrixXd& w,
                                         const RowMatrix& source_batch,
                                         const RowMatrix& target_batch, double smoothing = 0,
                                         Dropout dropout = {});

/// Mapping objective: the same terms with flipped labels.
LossGradient mapping_loss_gradient(const DiscriminatorParams& disc, const Eigen::MatrixXd& w,
                                   const RowMatrix& source_batch, const RowMatrix& target_batch,
                                   double smoothing = 0, Dropout dropout = {});

double discriminator_loss(const DiscriminatorParams& disc, const Eigen::MatrixXd& w,
                          const RowMatrix& source_batch, const RowMatrix& target_batch,
                          double smoothing = 0);
double mapping_loss(const DiscriminatorParams& disc, const Eigen::MatrixXd& w,
                    const RowMatrix& source_batch, const RowMatrix& target_batch,
                    double smoothing = 0);

/// Mean cosine between W x and its nearest target neighbour over the K most
/// frequent source tokens. Throws InputError for K = 0.
double selection_criterion(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                           const NeighborIndex& target, std::size_t k);
double selection_criterion(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                           const EmbeddingSpace& target, std::size_t k);

/// Mean cos(W x_r, y_r) where x_r, y_r are the r-th most frequent tokens of
/// each space, r < K. Logged alongside the criterion.
double frequency_rank_similarity(const Eigen::MatrixXd& w, const EmbeddingSpace& source,
                                 const EmbeddingSpace& target, std::size_t k);

struct AdvConfig {
  int epochs = 5;
  int iterations_per_epoch = 1000;  ///< mapping updates per epoch
  int batch_size = 32;
  int disc_steps_per_map_step = 5;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double lr_decay = 0.95;  ///< multiplied into the learning rate after each epoch
  double label_smoothing = 0.2;
  double input_dropout = 0.1;
  std::size_t selection_k = 1000;
  std::size_t sample_top = 75000;  ///< batches drawn from this many most frequent tokens
  std::vector<std::size_t> hidden = {2048, 2048};
  double leak = 0.2;
  /// After each mapping update W <- (1 + b) W - b (W W^T) W; 0 leaves W
  /// unconstrained.
  double orthogonalize = 0.01;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  ///< 0 is the initial matrix
  double disc_loss = 0;
  double map_loss = 0;
  double disc_accuracy = 0;
  double criterion = 0;
  double rank_similarity = 0;
};

struct AdversarialResult {
  MappingMatrix mapping;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Called after each epoch's criterion evaluation with that epoch's W.
using EpochObserver = std::function<void(const EpochRecord&, const Eigen::MatrixXd&)>;

/// Alternates discriminator and mapping updates starting from `init`, and
/// returns the snapshot (initial matrix included) with the best criterion.
/// Throws NumericError on a non-finite loss.
AdversarialResult train_adversarial(const MappingMatrix& init, const EmbeddingSpace& source,
                                    const EmbeddingSpace& target, const AdvConfig& cfg,
                                    const EpochObserver& observer = {});

/// CSV `epoch,L_D,L_W,disc_accuracy,criterion`.
void write_training_log(std::ostream& out, std::span<const EpochRecord> history);

}  // namespace sar
