#include "sar/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>

#include "sar/error.hpp"

namespace sar {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), is_space);
}

std::vector<std::string_view> split_dots(std::string_view token) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = token.find('.', start);
    if (dot == std::string_view::npos) {
      parts.push_back(token.substr(start));
      return parts;
    }
    parts.push_back(token.substr(start, dot - start));
    start = dot + 1;
  }
}

bool well_formed_signature(std::string_view sig, std::size_t min_segments) {
  if (sig.empty() || has_whitespace(sig)) return false;
  const auto parts = split_dots(sig);
  if (parts.size() < min_segments) return false;
  return std::none_of(parts.begin(), parts.end(), [](std::string_view p) { return p.empty(); });
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

}  // namespace

CodeSequence split_tokens(std::string_view line) {
  CodeSequence out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<CodeSequence> read_corpus(std::istream& in) {
  std::vector<CodeSequence> corpus;
  std::string line;
  while (std::getline(in, line)) corpus.push_back(split_tokens(line));
  return corpus;
}

std::vector<CodeSequence> read_corpus(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_corpus(in);
}

void write_corpus(std::ostream& out, std::span<const CodeSequence> corpus) {
  for (const auto& seq : corpus) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ' ';
      out << seq[i];
    }
    out << '\n';
  }
}

std::size_t segment_count(std::string_view token) {
  return 1 + static_cast<std::size_t>(std::count(token.begin(), token.end(), '.'));
}

// ---------------------------------------------------------------------------
// SignatureTable

SignatureTable SignatureTable::load(const std::filesystem::path& table,
                                    const std::optional<std::filesystem::path>& keywords,
                                    Mode mode) {
  SignatureTable out(mode);
  auto in = open_or_throw(table);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw InputError(table.string() + ":" + std::to_string(lineno) +
                       ": expected raw_token<TAB>qualified_signature");
    }
    try {
      out.add_mapping(line.substr(0, tab), line.substr(tab + 1));
    } catch (const InputError& e) {
      throw InputError(table.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (keywords) {
    auto kin = open_or_throw(*keywords);
    lineno = 0;
    while (std::getline(kin, line)) {
      ++lineno;
      const auto toks = split_tokens(line);
      if (toks.empty()) continue;
      if (toks.size() != 1) {
        throw InputError(keywords->string() + ":" + std::to_string(lineno) +
                         ": expected one keyword per line");
      }
      out.add_keyword(toks.front());
    }
  }
  return out;
}

void SignatureTable::add_mapping(std::string raw, std::string signature) {
  if (raw.empty() || has_whitespace(raw)) throw InputError("malformed raw token '" + raw + "'");
  const std::size_t min_segments = mode_ == Mode::method ? 3 : 2;
  if (!well_formed_signature(signature, min_segments)) {
    throw InputError("malformed signature '" + signature + "' (need " +
                     std::to_string(min_segments) + " dotted segments)");
  }
  if (auto it = entries_.find(raw); it != entries_.end()) {
    if (it->second != signature) {
      throw InputError("ambiguous raw token '" + raw + "': '" + it->second + "' vs '" +
                       signature + "'");
    }
    return;
  }
  signatures_.insert(signature);
  entries_.emplace(std::move(raw), std::move(signature));
}

void SignatureTable::add_keyword(std::string keyword) {
  if (keyword.empty() || has_whitespace(keyword)) {
    throw InputError("malformed keyword '" + keyword + "'");
  }
  keywords_.insert(std::move(keyword));
}

bool SignatureTable::is_keyword(std::string_view token) const {
  return keywords_.find(token) != keywords_.end();
}

std::optional<std::string_view> SignatureTable::resolve(std::string_view token) const {
  if (auto it = entries_.find(token); it != entries_.end()) return std::string_view(it->second);
  if (auto it = keywords_.find(token); it != keywords_.end()) return std::string_view(*it);
  if (auto it = signatures_.find(token); it != signatures_.end()) return std::string_view(*it);
  return std::nullopt;
}

CodeSequence normalize_sequence(const CodeSequence& seq, const SignatureTable& table,
                                NormalizeStats* stats) {
  CodeSequence out;
  out.reserve(seq.size());
  NormalizeStats local;
  for (const auto& tok : seq) {
    if (auto resolved = table.resolve(tok)) {
      out.emplace_back(*resolved);
      ++local.kept;
    } else {
      ++local.dropped;
    }
  }
  if (stats) *stats += local;
  return out;
}

std::string class_level_token(std::string_view token) {
  const auto parts = split_dots(token);
  if (parts.size() < 3) return std::string(token);
  auto upper = [](std::string_view s) {
    return !s.empty() && std::isupper(static_cast<unsigned char>(s.front()));
  };
  std::size_t class_pos = parts.size();
  for (std::size_t i = parts.size() - 1; i-- > 0;) {
    if (upper(parts[i])) {
      class_pos = i;
      break;
    }
  }
  std::size_t keep;
  if (class_pos != parts.size()) {
    keep = class_pos + 1;
  } else if (upper(parts.back())) {
    // `java.util.List`: already class level.
    return std::string(token);
  } else {
    keep = parts.size() - 1;
  }
  std::string out(parts[0]);
  for (std::size_t i = 1; i < keep; ++i) {
    out += '.';
    out += parts[i];
  }
  return out;
}

CodeSequence to_class_level(const CodeSequence& seq) {
  CodeSequence out;
  out.reserve(seq.size());
  for (const auto& tok : seq) out.push_back(class_level_token(tok));
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens,
                                   std::vector<std::uint64_t> counts) {
  if (tokens.size() != counts.size()) throw InputError("token/count length mismatch");
  Vocabulary v;
  v.index_.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].empty() || has_whitespace(tokens[i])) {
      throw InputError("malformed token '" + tokens[i] + "'");
    }
    if (!v.index_.emplace(tokens[i], i).second) {
      throw InputError("duplicate token '" + tokens[i] + "'");
    }
  }
  v.tokens_ = std::move(tokens);
  v.counts_ = std::move(counts);
  return v;
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view token) const {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  return std::nullopt;
}

std::uint64_t Vocabulary::total_count() const {
  std::uint64_t sum = 0;
  for (auto c : counts_) sum += c;
  return sum;
}

std::vector<std::size_t> Vocabulary::frequency_order() const {
  std::vector<std::size_t> order(size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts_[a] > counts_[b]; });
  return order;
}

void TokenCounter::add(const CodeSequence& seq) {
  for (const auto& tok : seq) ++counts_[tok];
  total_ += seq.size();
}

void TokenCounter::merge(const TokenCounter& other) {
  for (const auto& [tok, c] : other.counts_) counts_[tok] += c;
  total_ += other.total_;
}

Vocabulary TokenCounter::finish(std::uint64_t min_count) const {
  if (min_count < 1) throw InputError("min_count must be >= 1");
  if (total_ == 0) throw InputError("empty corpus");
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [tok, c] : counts_) {
    if (c >= min_count) kept.emplace_back(tok, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  tokens.reserve(kept.size());
  counts.reserve(kept.size());
  for (auto& [tok, c] : kept) {
    tokens.push_back(std::move(tok));
    counts.push_back(c);
  }
  return Vocabulary::from_tokens(std::move(tokens), std::move(counts));
}

Vocabulary build_vocabulary(std::span<const CodeSequence> corpus, std::uint64_t min_count) {
  TokenCounter counter;
  for (const auto& seq : corpus) counter.add(seq);
  return counter.finish(min_count);
}

}  // namespace sar
