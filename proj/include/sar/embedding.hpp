#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sar/corpus.hpp"

namespace sar {

/// Row-major so that one token's vector is contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A vocabulary with one d-dimensional vector per token; row i belongs to
/// vocabulary index i.
class EmbeddingSpace {
 public:
  EmbeddingSpace() = default;
  EmbeddingSpace(Vocabulary vocab, RowMatrix vectors);

  const Vocabulary& vocab() const { return vocab_; }
  const RowMatrix& vectors() const { return vectors_; }
  std::size_t size() const { return vocab_.size(); }
  bool empty() const { return vocab_.empty(); }
  std::size_t dim() const { return static_cast<std::size_t>(vectors_.cols()); }

  /// Copy with every row scaled to unit length (zero rows stay zero).
  EmbeddingSpace normalized() const;

  /// The `k` most frequent token indices (all of them when k exceeds size).
  std::vector<std::size_t> most_frequent(std::size_t k) const;

 private:
  Vocabulary vocab_;
  RowMatrix vectors_;
};

/// word2vec text format: `<n> <d>` header then `<token> v1 .. vd` rows.
/// Counts go to the `<path>.freq` sidecar (`token<TAB>count`).
void save_space(const EmbeddingSpace& space, const std::filesystem::path& path);

/// Missing sidecar: counts fall back to descending file order.
EmbeddingSpace load_space(const std::filesystem::path& path);

std::filesystem::path frequency_sidecar(const std::filesystem::path& path);

struct TrainConfig {
  double learning_rate = 0.025;
  int negatives = 30;
  int window = 10;
  double subsample = 1e-4;
  int dim = 300;
  int epochs = 5;
  std::uint64_t min_count = 1;
  int workers = 1;
  std::uint64_t rng_seed = 1;

  /// Throws InputError on out-of-range values.
  void validate() const;
};

/// word2vec-style probability of keeping one occurrence of a token with
/// `count` occurrences among `total`; clamped to [0, 1].
double keep_probability(std::uint64_t count, std::uint64_t total, double subsample);

/// Loss of one skip-gram negative-sampling example:
/// -log s(c.o0) - sum_k log s(-c.ok), where outputs[0] is the true context.
/// Gradients are written (not accumulated) into the grad spans.
double sgns_loss_and_gradient(std::span<const double> center,
                              std::span<const std::span<const double>> outputs,
                              std::span<double> center_grad,
                              std::span<const std::span<double>> output_grads);

/// Skip-gram with negative sampling over `corpus`. With workers == 1 the
/// result is a pure function of (corpus, cfg).
EmbeddingSpace train_skipgram(std::span<const CodeSequence> corpus, const TrainConfig& cfg);

}  // namespace sar
