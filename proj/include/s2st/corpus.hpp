#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace s2st {

using TokenId = int;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kSegStart = 3;
inline constexpr int kNumReserved = 4;

// Half-open token range [begin, end) that segmentation must keep intact.
struct Span {
  int begin = 0;
  int end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};
using ProtectedSpans = std::vector<Span>;

struct PairedExample {
  TokenSeq message;
  TokenSeq response;
  ProtectedSpans response_spans;
  friend bool operator==(const PairedExample&, const PairedExample&) = default;
};

struct UnpairedExample {
  TokenSeq text;
  ProtectedSpans spans;
  friend bool operator==(const UnpairedExample&, const UnpairedExample&) = default;
};

// Raw (surface-string) forms, as they appear in the data files.
struct RawPaired {
  std::string message;
  std::string response;
  ProtectedSpans response_spans;
  friend bool operator==(const RawPaired&, const RawPaired&) = default;
};

struct RawUnpaired {
  std::string text;
  ProtectedSpans spans;
  friend bool operator==(const RawUnpaired&, const RawUnpaired&) = default;
};

class Vocab {
 public:
  Vocab();
  // Non-reserved tokens in id order (ids start at kNumReserved).
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  TokenId id(std::string_view token) const;  // kUnk when absent
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<std::string> non_reserved() const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> lookup_;
};

std::vector<std::string> split_tokens(std::string_view sentence);

// Sorted by descending frequency, ties by first occurrence; at most
// `max_size` non-reserved entries.
Vocab build_vocab(const std::vector<std::string>& texts, int max_size);

TokenSeq encode(std::string_view sentence, const Vocab& vocab);
std::string decode(const TokenSeq& ids, const Vocab& vocab);

// Validates span invariants against a sentence length; throws ParseError.
void validate_spans(const ProtectedSpans& spans, int length);

std::vector<RawPaired> read_paired(const std::filesystem::path& path);
std::vector<RawUnpaired> read_unpaired(const std::filesystem::path& path);
void write_paired(const std::filesystem::path& path, const std::vector<RawPaired>& rows);
void write_unpaired(const std::filesystem::path& path,
                    const std::vector<RawUnpaired>& rows);

std::vector<PairedExample> encode_paired(const std::vector<RawPaired>& rows,
                                         const Vocab& vocab);
std::vector<UnpairedExample> encode_unpaired(const std::vector<RawUnpaired>& rows,
                                             const Vocab& vocab);

std::vector<PairedExample> load_paired(const std::filesystem::path& path,
                                       const Vocab& vocab);
std::vector<UnpairedExample> load_unpaired(const std::filesystem::path& path,
                                           const Vocab& vocab);

// One token per line; line n holds token id n + kNumReserved.
void save_vocab(const std::filesystem::path& path, const Vocab& vocab);
Vocab load_vocab(const std::filesystem::path& path);

}  // namespace s2st
