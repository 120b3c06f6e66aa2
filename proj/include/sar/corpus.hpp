#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace sar {

/// One function's token sequence: API signatures, keywords, AST node labels.
using CodeSequence = std::vector<std::string>;

/// Splits a corpus line on ASCII whitespace. Empty tokens are never produced.
CodeSequence split_tokens(std::string_view line);

/// Reads one CodeSequence per line. Blank lines yield empty sequences.
std::vector<CodeSequence> read_corpus(std::istream& in);
std::vector<CodeSequence> read_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, std::span<const CodeSequence> corpus);

/// Number of dot-separated segments in a token (1 for undotted tokens).
std::size_t segment_count(std::string_view token);

/// Maps raw API tokens (`List.add`) to qualified signatures
/// (`java.util.List.add`) and holds the set of pass-through keywords and AST
/// node labels. Anything else is noise.
class SignatureTable {
 public:
  enum class Mode { method, class_level };

  explicit SignatureTable(Mode mode = Mode::method) : mode_(mode) {}

  /// TSV `raw<TAB>signature` plus an optional keyword list (one per line).
  /// Throws InputError naming the offending line on malformed rows and on
  /// raw tokens mapped to two different signatures.
  static SignatureTable load(const std::filesystem::path& table,
                             const std::optional<std::filesystem::path>& keywords,
                             Mode mode = Mode::method);

  void add_mapping(std::string raw, std::string signature);
  void add_keyword(std::string keyword);

  /// Qualified form of `token`, the token itself for keywords and already
  /// qualified signatures, nullopt for noise.
  std::optional<std::string_view> resolve(std::string_view token) const;

  bool is_keyword(std::string_view token) const;
  Mode mode() const { return mode_; }
  std::size_t mapping_count() const { return entries_.size(); }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  Mode mode_;
  std::unordered_map<std::string, std::string, Hash, std::equal_to<>> entries_;
  std::unordered_set<std::string, Hash, std::equal_to<>> keywords_;
  std::unordered_set<std::string, Hash, std::equal_to<>> signatures_;
};

struct NormalizeStats {
  std::size_t kept = 0;
  std::size_t dropped = 0;

  NormalizeStats& operator+=(const NormalizeStats& o) {
    kept += o.kept;
    dropped += o.dropped;
    return *this;
  }
};

/// Replaces raw API tokens with their signatures and drops noise tokens.
/// Order of survivors is preserved.
CodeSequence normalize_sequence(const CodeSequence& seq, const SignatureTable& table,
                                NormalizeStats* stats = nullptr);

/// `java.util.List.add` -> `java.util.List`. The class is the last segment
/// starting with an uppercase letter before the method segment.
std::string class_level_token(std::string_view token);
CodeSequence to_class_level(const CodeSequence& seq);

/// Token -> (dense index, corpus count). Indices built by build_vocabulary
/// follow descending count, ties broken lexicographically.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Keeps the given order. Throws InputError on duplicate tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens,
                                std::vector<std::uint64_t> counts);

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  const std::string& token(std::size_t index) const { return tokens_[index]; }
  std::uint64_t count(std::size_t index) const { return counts_[index]; }
  std::optional<std::size_t> index_of(std::string_view token) const;
  bool contains(std::string_view token) const { return index_of(token).has_value(); }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total_count() const;

  /// Indices sorted by descending count; equal counts keep index order.
  std::vector<std::size_t> frequency_order() const;

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
};

/// Mergeable token counts, so corpus shards can be counted independently.
class TokenCounter {
 public:
  void add(const CodeSequence& seq);
  void merge(const TokenCounter& other);
  std::uint64_t total() const { return total_; }

  /// Throws InputError("empty corpus") when nothing was counted.
  Vocabulary finish(std::uint64_t min_count) const;

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

Vocabulary build_vocabulary(std::span<const CodeSequence> corpus, std::uint64_t min_count);

}  // namespace sar
