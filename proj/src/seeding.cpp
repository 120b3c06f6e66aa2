#include "sar/seeding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_map>

#include "sar/error.hpp"

namespace sar {

// ---------------------------------------------------------------------------
// SeedDictionary

std::string SeedDictionary::key(std::string_view source, std::string_view target) {
  std::string k;
  k.reserve(source.size() + target.size() + 1);
  k.append(source).push_back('\t');
  k.append(target);
  return k;
}

bool SeedDictionary::add(SeedPair pair) {
  if (!keys_.insert(key(pair.source, pair.target)).second) return false;
  pairs_.push_back(std::move(pair));
  return true;
}

bool SeedDictionary::contains(std::string_view source, std::string_view target) const {
  return keys_.count(key(source, target)) > 0;
}

SeedDictionary SeedDictionary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  SeedDictionary out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tokens(line);
    if (fields.size() != 2 || line.find('\t') == std::string::npos) {
      throw InputError(path.string() + ":" + std::to_string(lineno) +
                       ": expected source<TAB>target");
    }
    out.add({fields[0], fields[1], std::nullopt});
  }
  return out;
}

void SeedDictionary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& p : pairs_) out << p.source << '\t' << p.target << '\n';
}

// ---------------------------------------------------------------------------
// MappingMatrix

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::seeded:
      return "seeded";
    case Stage::adversarial:
      return "adversarial";
    case Stage::refined:
      return "refined";
  }
  return "seeded";
}

Stage stage_from_string(std::string_view s) {
  if (s == "seeded") return Stage::seeded;
  if (s == "adversarial") return Stage::adversarial;
  if (s == "refined") return Stage::refined;
  throw InputError("unknown stage '" + std::string(s) + "'");
}

double orthogonality_error(const Eigen::MatrixXd& w) {
  return (w.transpose() * w - Eigen::MatrixXd::Identity(w.cols(), w.cols())).norm();
}

void save_mapping(const MappingMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << m.weights.rows() << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < m.weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.weights.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m.weights(i, j));
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  out << "# stage: " << to_string(m.stage) << '\n';
}

MappingMatrix load_mapping(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  MappingMatrix m;
  std::string line;
  std::optional<std::size_t> dim;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (line.rfind("#", 0) == 0) {
      const auto pos = line.find("stage:");
      if (pos != std::string::npos) {
        const auto toks = split_tokens(std::string_view(line).substr(pos + 6));
        if (toks.size() != 1) throw InputError(where + ": malformed stage line");
        m.stage = stage_from_string(toks[0]);
      }
      continue;
    }
    const auto fields = split_tokens(line);
    if (fields.empty()) continue;
    if (!dim) {
      if (fields.size() != 1) throw InputError(where + ": expected dimension header");
      try {
        dim = std::stoul(fields[0]);
      } catch (const std::exception&) {
        throw InputError(where + ": bad dimension '" + fields[0] + "'");
      }
      if (*dim == 0) throw InputError(where + ": zero dimension");
      continue;
    }
    if (fields.size() != *dim) throw InputError(where + ": expected " + std::to_string(*dim) + " values");
    std::vector<double> row;
    for (const auto& f : fields) {
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (end != f.c_str() + f.size() || !std::isfinite(v)) {
        throw InputError(where + ": bad number '" + f + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (!dim) throw InputError(path.string() + ": missing dimension header");
  if (rows.size() != *dim) {
    throw InputError(path.string() + ": row count mismatch (expected " + std::to_string(*dim) +
                     ", got " + std::to_string(rows.size()) + ")");
  }
  const auto d = static_cast<Eigen::Index>(*dim);
  m.weights.resize(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m.weights(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  m.orthogonal = orthogonality_error(m.weights) < 1e-6;
  return m;
}

// ---------------------------------------------------------------------------
// signature seeds

std::optional<std::string> seed_key(std::string_view token, SeedKey key) {
  const std::size_t need = key == SeedKey::class_method ? 3 : 2;
  if (segment_count(token) < need) return std::nullopt;
  std::size_t cut = token.rfind('.');
  if (key == SeedKey::class_method) cut = token.rfind('.', cut - 1);
  std::string out(token.substr(cut + 1));
  if (out.empty() || out.front() == '.' || out.back() == '.') return std::nullopt;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

SeedDictionary mine_signature_seeds(const Vocabulary& source, const Vocabulary& target,
                                    SeedKey key) {
  auto index = [key](const Vocabulary& v) {
    std::unordered_map<std::string, std::vector<std::size_t>> by_key;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (auto k = seed_key(v.token(i), key)) by_key[*k].push_back(i);
    }
    return by_key;
  };
  const auto tgt = index(target);
  const auto src = index(source);
  SeedDictionary out;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto k = seed_key(source.token(i), key);
    if (!k) continue;
    if (src.at(*k).size() != 1) continue;
    const auto it = tgt.find(*k);
    if (it == tgt.end() || it->second.size() != 1) continue;
    out.add({source.token(i), target.token(it->second.front()), std::nullopt});
  }
  return out;
}

// ---------------------------------------------------------------------------
// solvers

MappingMatrix solve_procrustes(const RowMatrix& xs, const RowMatrix& ys) {
  if (xs.rows() < 1) throw InputError("procrustes needs at least one pair");
  if (xs.rows() != ys.rows() || xs.cols() != ys.cols()) {
    throw InputError("procrustes: source and target pair matrices differ in shape");
  }
  const Eigen::MatrixXd cross = ys.transpose() * xs;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd u = svd.matrixU();
  Eigen::MatrixXd v = svd.matrixV();
  // Sign convention: first nonzero entry of each left singular vector >= 0.
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      if (std::abs(u(r, c)) > 1e-12) {
        if (u(r, c) < 0) {
          u.col(c) *= -1;
          v.col(c) *= -1;
        }
        break;
      }
    }
  }
  MappingMatrix m{u * v.transpose(), Stage::seeded, true};
  if (!m.weights.allFinite()) throw NumericError("procrustes produced non-finite values");
  return m;
}

GradientDescentResult solve_gradient_descent(const RowMatrix& xs, const RowMatrix& ys, double lr,
                                             int iters, const std::optional<Eigen::MatrixXd>& init) {
  if (!(lr > 0)) throw InputError("learning rate must be > 0");
  if (iters < 0) throw InputError("iterations must be >= 0");
  if (xs.rows() < 1) throw InputError("gradient descent needs at least one pair");
  if (xs.rows() != ys.rows() || xs.cols() != ys.cols()) {
    throw InputError("gradient descent: source and target pair matrices differ in shape");
  }
  const auto d = xs.cols();
  const double inv_n = 1.0 / static_cast<double>(xs.rows());
  Eigen::MatrixXd w = init ? *init : Eigen::MatrixXd::Zero(d, d);
  if (w.rows() != d || w.cols() != d) throw InputError("initial matrix has wrong shape");

  const Eigen::MatrixXd xt = xs.transpose();
  const Eigen::MatrixXd yt = ys.transpose();
  GradientDescentResult out;
  out.losses.reserve(static_cast<std::size_t>(iters));
  int rising = 0;
  for (int it = 0; it < iters; ++it) {
    const Eigen::MatrixXd residual = w * xt - yt;
    const double loss = residual.squaredNorm() * inv_n;
    if (!std::isfinite(loss)) throw NumericError("gradient descent diverged: non-finite loss");
    if (!out.losses.empty() && loss > out.losses.back()) {
      if (++rising >= 10) {
        throw NumericError("gradient descent diverged: loss rose 10 iterations in a row, last loss " +
                           std::to_string(loss));
      }
    } else {
      rising = 0;
    }
    out.losses.push_back(loss);
    w -= lr * (2.0 * inv_n) * residual * xs;
  }
  out.final_loss = (w * xt - yt).squaredNorm() * inv_n;
  out.mapping = MappingMatrix{std::move(w), Stage::seeded, false};
  out.mapping.orthogonal = orthogonality_error(out.mapping.weights) < 1e-6;
  return out;
}

std::pair<RowMatrix, RowMatrix> gather_pairs(const SeedDictionary& dict,
                                             const EmbeddingSpace& source,
                                             const EmbeddingSpace& target) {
  if (source.dim() != target.dim()) {
    throw InputError("embedding dimensions differ: " + std::to_string(source.dim()) + " vs " +
                     std::to_string(target.dim()));
  }
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  for (const auto& p : dict) {
    const auto s = source.vocab().index_of(p.source);
    const auto t = target.vocab().index_of(p.target);
    if (s && t) idx.emplace_back(*s, *t);
  }
  const auto d = static_cast<Eigen::Index>(source.dim());
  RowMatrix xs(static_cast<Eigen::Index>(idx.size()), d);
  RowMatrix ys(static_cast<Eigen::Index>(idx.size()), d);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    xs.row(r) = source.vectors().row(static_cast<Eigen::Index>(idx[i].first));
    ys.row(r) = target.vectors().row(static_cast<Eigen::Index>(idx[i].second));
    const double nx = xs.row(r).norm();
    const double ny = ys.row(r).norm();
    if (nx > 0) xs.row(r) /= nx;
    if (ny > 0) ys.row(r) /= ny;
  }
  return {std::move(xs), std::move(ys)};
}

MappingMatrix seeded_mapping(const SeedDictionary& dict, const EmbeddingSpace& source,
                             const EmbeddingSpace& target) {
  auto [xs, ys] = gather_pairs(dict, source, target);
  if (xs.rows() == 0) throw InputError("no seed pair has both tokens in the vocabularies");
  return solve_procrustes(xs, ys);
}

Eigen::MatrixXd random_orthogonal(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (r(i, i) < 0) q.col(i) *= -1;
  }
  return q;
}

}  // namespace sar
