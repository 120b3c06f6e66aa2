#include "sar/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "sar/error.hpp"

namespace sar {

EmbeddingSpace::EmbeddingSpace(Vocabulary vocab, RowMatrix vectors)
    : vocab_(std::move(vocab)), vectors_(std::move(vectors)) {
  if (static_cast<std::size_t>(vectors_.rows()) != vocab_.size()) {
    throw InputError("embedding rows (" + std::to_string(vectors_.rows()) +
                     ") do not match vocabulary size (" + std::to_string(vocab_.size()) + ")");
  }
  if (!vectors_.allFinite()) throw InputError("embedding contains non-finite values");
}

EmbeddingSpace EmbeddingSpace::normalized() const {
  RowMatrix out = vectors_;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0) out.row(i) /= n;
  }
  return EmbeddingSpace(vocab_, std::move(out));
}

std::vector<std::size_t> EmbeddingSpace::most_frequent(std::size_t k) const {
  auto order = vocab_.frequency_order();
  if (k < order.size()) order.resize(k);
  return order;
}

// ---------------------------------------------------------------------------
// text format

std::filesystem::path frequency_sidecar(const std::filesystem::path& path) {
  auto p = path;
  p += ".freq";
  return p;
}

void save_space(const EmbeddingSpace& space, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << space.size() << ' ' << space.dim() << '\n';
  char buf[64];
  const auto& vec = space.vectors();
  for (std::size_t i = 0; i < space.size(); ++i) {
    out << space.vocab().token(i);
    for (std::size_t j = 0; j < space.dim(); ++j) {
      std::snprintf(buf, sizeof buf, " %.9g", vec(static_cast<Eigen::Index>(i),
                                                   static_cast<Eigen::Index>(j)));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw InputError("write failed: " + path.string());

  std::ofstream freq(frequency_sidecar(path));
  if (!freq) throw InputError("cannot write " + frequency_sidecar(path).string());
  for (std::size_t i = 0; i < space.size(); ++i) {
    freq << space.vocab().token(i) << '\t' << space.vocab().count(i) << '\n';
  }
}

namespace {

double parse_double(std::string_view s, const std::string& where) {
  double v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw InputError(where + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_count(std::string_view s, const std::string& where) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw InputError(where + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

EmbeddingSpace load_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + ": malformed header (empty file)");
  const auto header = split_tokens(line);
  if (header.size() != 2) throw InputError(path.string() + ": malformed header '" + line + "'");
  const auto rows = parse_count(header[0], path.string() + ":1");
  const auto dim = parse_count(header[1], path.string() + ":1");
  if (dim == 0) throw InputError(path.string() + ": malformed header (zero dimension)");

  std::vector<std::string> tokens;
  tokens.reserve(rows);
  std::vector<std::vector<double>> body;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_tokens(line);
    if (fields.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() != dim + 1) {
      throw InputError(where + ": dimension mismatch (expected " + std::to_string(dim) +
                       " values, got " + std::to_string(fields.size() - 1) + ")");
    }
    tokens.push_back(fields[0]);
    std::vector<double> row(dim);
    for (std::size_t j = 0; j < dim; ++j) row[j] = parse_double(fields[j + 1], where);
    body.push_back(std::move(row));
  }
  if (body.size() != rows) {
    throw InputError(path.string() + ": row count mismatch (header " + std::to_string(rows) +
                     ", body " + std::to_string(body.size()) + ")");
  }

  RowMatrix vectors(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = body[i][j];
    }
  }

  std::vector<std::uint64_t> counts(rows);
  const auto sidecar = frequency_sidecar(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream fin(sidecar);
    std::unordered_map<std::string, std::uint64_t> freq;
    std::size_t fl = 0;
    while (std::getline(fin, line)) {
      ++fl;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      const std::string where = sidecar.string() + ":" + std::to_string(fl);
      if (tab == std::string::npos) throw InputError(where + ": expected token<TAB>count");
      freq[line.substr(0, tab)] = parse_count(std::string_view(line).substr(tab + 1), where);
    }
    for (std::size_t i = 0; i < rows; ++i) {
      auto it = freq.find(tokens[i]);
      if (it == freq.end()) {
        throw InputError(sidecar.string() + ": missing count for '" + tokens[i] + "'");
      }
      counts[i] = it->second;
    }
  } else {
    for (std::size_t i = 0; i < rows; ++i) counts[i] = rows - i;
  }
  return EmbeddingSpace(Vocabulary::from_tokens(std::move(tokens), std::move(counts)),
                        std::move(vectors));
}

// ---------------------------------------------------------------------------
// skip-gram training

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw InputError("learning rate must be > 0");
  if (negatives < 1) throw InputError("negatives must be >= 1");
  if (window < 1) throw InputError("window must be >= 1");
  if (!(subsample > 0 && subsample <= 1)) throw InputError("subsample must be in (0, 1]");
  if (dim < 1) throw InputError("dim must be >= 1");
  if (epochs < 1) throw InputError("epochs must be >= 1");
  if (min_count < 1) throw InputError("min_count must be >= 1");
  if (workers < 1) throw InputError("workers must be >= 1");
}

double keep_probability(std::uint64_t count, std::uint64_t total, double subsample) {
  if (count == 0 || total == 0) return 1.0;
  const double threshold = subsample * static_cast<double>(total);
  const double c = static_cast<double>(count);
  const double p = (std::sqrt(c / threshold) + 1.0) * threshold / c;
  return std::clamp(p, 0.0, 1.0);
}

namespace {

double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double sgns_loss_and_gradient(std::span<const double> center,
                              std::span<const std::span<const double>> outputs,
                              std::span<double> center_grad,
                              std::span<const std::span<double>> output_grads) {
  std::fill(center_grad.begin(), center_grad.end(), 0.0);
  double loss = 0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    const double f = dot(center, outputs[k]);
    // d/df of -log s(f) is s(f) - 1; of -log s(-f) is s(f).
    double g;
    if (k == 0) {
      loss -= log_sigmoid(f);
      g = sigmoid(f) - 1.0;
    } else {
      loss -= log_sigmoid(-f);
      g = sigmoid(f);
    }
    for (std::size_t j = 0; j < center.size(); ++j) {
      center_grad[j] += g * outputs[k][j];
      output_grads[k][j] = g * center[j];
    }
  }
  return loss;
}

namespace {

class UnigramSampler {
 public:
  explicit UnigramSampler(const Vocabulary& vocab) : cumulative_(vocab.size()) {
    double acc = 0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      acc += std::pow(static_cast<double>(vocab.count(i)), 0.75);
      cumulative_[i] = acc;
    }
  }

  template <class Rng>
  std::size_t operator()(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, cumulative_.back());
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u(rng));
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                 cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

struct SharedWeights {
  std::vector<double> input;
  std::vector<double> output;
  std::size_t dim;
  bool concurrent;

  void load(const std::vector<double>& src, std::size_t row, std::span<double> dst) const {
    const double* p = src.data() + row * dim;
    if (!concurrent) {
      std::copy(p, p + dim, dst.begin());
      return;
    }
    for (std::size_t j = 0; j < dim; ++j) {
      dst[j] = std::atomic_ref<double>(const_cast<double&>(p[j])).load(std::memory_order_relaxed);
    }
  }

  void add(std::vector<double>& dstv, std::size_t row, std::span<const double> delta,
           double scale) {
    double* p = dstv.data() + row * dim;
    if (!concurrent) {
      for (std::size_t j = 0; j < dim; ++j) p[j] += scale * delta[j];
      return;
    }
    for (std::size_t j = 0; j < dim; ++j) {
      std::atomic_ref<double>(p[j]).fetch_add(scale * delta[j], std::memory_order_relaxed);
    }
  }
};

}  // namespace

EmbeddingSpace train_skipgram(std::span<const CodeSequence> corpus, const TrainConfig& cfg) {
  cfg.validate();
  Vocabulary vocab = build_vocabulary(corpus, cfg.min_count);
  if (vocab.empty()) throw InputError("empty vocabulary after min_count filtering");

  std::vector<std::vector<std::uint32_t>> lines;
  lines.reserve(corpus.size());
  bool has_pair = false;
  std::uint64_t total = 0;
  for (const auto& seq : corpus) {
    std::vector<std::uint32_t> ids;
    ids.reserve(seq.size());
    for (const auto& tok : seq) {
      if (auto idx = vocab.index_of(tok)) ids.push_back(static_cast<std::uint32_t>(*idx));
    }
    total += ids.size();
    if (ids.size() >= 2) has_pair = true;
    lines.push_back(std::move(ids));
  }
  if (!has_pair) throw InputError("corpus has no context pairs (every sequence shorter than 2)");

  const std::size_t dim = static_cast<std::size_t>(cfg.dim);
  const std::size_t n = vocab.size();
  SharedWeights w{std::vector<double>(n * dim), std::vector<double>(n * dim, 0.0), dim,
                  cfg.workers > 1};
  {
    std::mt19937_64 init_rng(cfg.rng_seed);
    std::uniform_real_distribution<double> u(-0.5 / static_cast<double>(dim),
                                             0.5 / static_cast<double>(dim));
    for (auto& x : w.input) x = u(init_rng);
  }

  std::vector<double> keep(n);
  for (std::size_t i = 0; i < n; ++i) keep[i] = keep_probability(vocab.count(i), total, cfg.subsample);

  const UnigramSampler sampler(vocab);
  const double planned = static_cast<double>(cfg.epochs) * static_cast<double>(total) + 1.0;
  std::atomic<std::uint64_t> processed{0};

  auto worker = [&](int id) {
    std::mt19937_64 rng(cfg.rng_seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(id) + 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> span_dist(1, cfg.window);
    const std::size_t max_out = static_cast<std::size_t>(cfg.negatives) + 1;

    std::vector<double> center(dim), center_grad(dim);
    std::vector<std::vector<double>> outs(max_out, std::vector<double>(dim));
    std::vector<std::vector<double>> out_grads(max_out, std::vector<double>(dim));
    std::vector<std::size_t> out_ids(max_out);
    std::vector<std::span<const double>> out_views;
    std::vector<std::span<double>> grad_views;
    std::vector<std::uint32_t> kept;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (std::size_t li = static_cast<std::size_t>(id); li < lines.size();
           li += static_cast<std::size_t>(cfg.workers)) {
        const auto& line = lines[li];
        processed.fetch_add(line.size(), std::memory_order_relaxed);
        const double progress = static_cast<double>(processed.load(std::memory_order_relaxed)) / planned;
        const double lr = cfg.learning_rate * std::max(1e-4, 1.0 - progress);

        kept.clear();
        for (auto t : line) {
          if (keep[t] >= 1.0 || unit(rng) < keep[t]) kept.push_back(t);
        }
        for (std::size_t pos = 0; pos < kept.size(); ++pos) {
          const std::size_t reach = static_cast<std::size_t>(span_dist(rng));
          const std::size_t lo = pos >= reach ? pos - reach : 0;
          const std::size_t hi = std::min(kept.size() - 1, pos + reach);
          for (std::size_t c = lo; c <= hi; ++c) {
            if (c == pos) continue;
            const std::size_t centre_id = kept[pos];
            std::size_t m = 0;
            out_ids[m++] = kept[c];
            for (int k = 0; k < cfg.negatives; ++k) {
              const std::size_t neg = sampler(rng);
              if (neg == kept[c]) continue;
              out_ids[m++] = neg;
            }
            w.load(w.input, centre_id, center);
            out_views.clear();
            grad_views.clear();
            for (std::size_t k = 0; k < m; ++k) {
              w.load(w.output, out_ids[k], outs[k]);
              out_views.emplace_back(outs[k]);
              grad_views.emplace_back(out_grads[k]);
            }
            sgns_loss_and_gradient(center, out_views, center_grad, grad_views);
            for (std::size_t k = 0; k < m; ++k) w.add(w.output, out_ids[k], out_grads[k], -lr);
            w.add(w.input, centre_id, center_grad, -lr);
          }
        }
      }
    }
  };

  if (cfg.workers == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < cfg.workers; ++i) pool.emplace_back(worker, i);
  }

  RowMatrix vectors(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w.input[i * dim + j];
    }
  }
  return EmbeddingSpace(std::move(vocab), std::move(vectors));
}

}  // namespace sar
