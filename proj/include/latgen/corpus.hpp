#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace latgen {

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One raw record: zero-based label and the joined text fields.
struct LabeledText {
  int label = 0;
  std::string text;

  bool operator==(const LabeledText&) const = default;
};

/// Parses CSV content in the Zhang et al. layout: a quoted 1-based class index
/// followed by one or more quoted text fields.
std::vector<LabeledText> parse_csv(std::string_view content, bool has_header = false);
std::vector<LabeledText> load_csv(const std::filesystem::path& path, bool has_header = false);
/// Writes records back in the same layout (label + 1, single text field).
void write_csv(const std::filesystem::path& path, std::span<const LabeledText> records);

/// Lowercases ASCII, detaches each punctuation character as its own token and
/// splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

inline constexpr int kUnkId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kReservedIds = 3;
inline constexpr std::size_t kMaxContentTokens = 80;

class Vocabulary {
public:
  Vocabulary();

  /// Counts tokens over `texts` and keeps those seen at least min_count times,
  /// numbered from 3 in order of first occurrence.
  static Vocabulary build(std::span<const std::string> texts, int min_count = 2);
  /// Rebuilds a vocabulary from its id -> token list (reserved entries included).
  static Vocabulary from_tokens(std::vector<std::string> tokens, int min_count);

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  int min_count() const { return min_count_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_ && min_count_ == other.min_count_; }

private:
  int add(std::string token);

  std::unordered_map<std::string, int> index_;
  std::vector<std::string> tokens_;
  int min_count_ = 1;
};

Vocabulary build_vocab(std::span<const std::string> texts, int min_count = 2);

struct EncodedDocument {
  std::vector<int> ids;
  int label = 0;

  bool operator==(const EncodedDocument&) const = default;
};

/// Tokenizes, keeps the first 80 tokens, maps OOV to UNK and wraps in BOS/EOS.
std::vector<int> encode(std::string_view text, const Vocabulary& vocab);
EncodedDocument encode(const LabeledText& record, const Vocabulary& vocab);
std::vector<EncodedDocument> encode_all(std::span<const LabeledText> records, const Vocabulary& vocab);
/// Ids to tokens, dropping BOS/EOS.
std::vector<std::string> decode(std::span<const int> ids, const Vocabulary& vocab);

/// Number of labels implied by a pool (max label + 1); throws DataError if any
/// label in [0, n) is missing.
int count_labels(std::span<const LabeledText> pool);
std::vector<int> label_counts(std::span<const LabeledText> pool, int num_labels);

/// Exactly n_per_class records per label, drawn uniformly without replacement.
/// Output keeps pool order. Deterministic for a given seed.
std::vector<LabeledText> subsample_per_class(std::span<const LabeledText> pool, int n_per_class, int num_labels,
                                             std::uint64_t seed);

struct DevSplit {
  std::vector<LabeledText> train_pool;
  std::vector<LabeledText> dev;
  std::optional<std::string> warning;
};

/// Holds out dev_size records uniformly at random. When the pool is not larger
/// than dev_size, 10% of the pool is used instead and a warning is returned.
DevSplit split_dev(std::span<const LabeledText> pool, std::size_t dev_size, std::uint64_t seed);

struct DatasetSplit {
  std::vector<EncodedDocument> train;
  std::vector<EncodedDocument> dev;
  std::vector<EncodedDocument> test;
  int num_labels = 0;
  std::vector<int> label_counts;  // over train
};

}  // namespace latgen
