#include "latgen/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace latgen {

namespace {

std::string unescape_text(std::string s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
      out.push_back(' ');
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

LabeledText make_record(std::vector<std::string>& fields, std::size_t line) {
  if (fields.size() < 2)
    throw ParseError("line " + std::to_string(line) + ": expected class and text fields, got " +
                     std::to_string(fields.size()) + " field(s)");
  const std::string& cls = fields[0];
  int value = 0;
  auto [ptr, ec] = std::from_chars(cls.data(), cls.data() + cls.size(), value);
  if (ec != std::errc() || ptr != cls.data() + cls.size() || cls.empty())
    throw ParseError("line " + std::to_string(line) + ": class field '" + cls + "' is not an integer");
  if (value < 1) throw ParseError("line " + std::to_string(line) + ": class index " + cls + " is below 1");
  LabeledText rec;
  rec.label = value - 1;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    if (i > 1) rec.text.push_back(' ');
    rec.text += unescape_text(std::move(fields[i]));
  }
  return rec;
}

}  // namespace

std::vector<LabeledText> parse_csv(std::string_view content, bool has_header) {
  std::vector<LabeledText> out;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t record_line = 1;
  bool skip = has_header;

  auto end_record = [&] {
    if (field_started || !fields.empty()) {
      fields.push_back(std::move(field));
      if (skip) {
        skip = false;
      } else {
        out.push_back(make_record(fields, record_line));
      }
    }
    fields.clear();
    field.clear();
    field_started = false;
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char ch = content[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        if (!field_started && fields.empty() && field.empty()) record_line = line;
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) throw ParseError("line " + std::to_string(record_line) + ": unterminated quoted field");
  end_record();
  return out;
}

std::vector<LabeledText> load_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_csv(ss.str(), has_header);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_csv(const std::filesystem::path& path, std::span<const LabeledText> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) {
    out << '"' << (r.label + 1) << "\",\"";
    for (char ch : r.text) {
      if (ch == '"') out << '"';
      out << ch;
    }
    out << "\"\n";
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (std::isspace(ch)) {
      flush();
    } else if (ch < 128 && std::ispunct(ch)) {
      flush();
      tokens.emplace_back(1, raw);
    } else {
      cur.push_back(ch < 128 ? static_cast<char>(std::tolower(ch)) : raw);
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() {
  add("<unk>");
  add("<s>");
  add("</s>");
}

int Vocabulary::add(std::string token) {
  const int id = static_cast<int>(tokens_.size());
  index_.emplace(token, id);
  tokens_.push_back(std::move(token));
  return id;
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, int min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  if (texts.empty()) throw DataError("build_vocab: empty corpus");
  std::unordered_map<std::string, int> counts;
  std::vector<std::string> order;
  for (const auto& text : texts) {
    for (auto& tok : tokenize(text)) {
      auto [it, inserted] = counts.try_emplace(tok, 0);
      if (inserted) order.push_back(tok);
      ++it->second;
    }
  }
  Vocabulary v;
  v.min_count_ = min_count;
  for (auto& tok : order)
    if (counts[tok] >= min_count && !v.index_.contains(tok)) v.add(std::move(tok));
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, int min_count) {
  if (tokens.size() < kReservedIds || tokens[0] != "<unk>" || tokens[1] != "<s>" || tokens[2] != "</s>")
    throw DataError("vocabulary: reserved tokens missing");
  Vocabulary v;
  v.min_count_ = min_count;
  for (std::size_t i = kReservedIds; i < tokens.size(); ++i) v.add(std::move(tokens[i]));
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

Vocabulary build_vocab(std::span<const std::string> texts, int min_count) { return Vocabulary::build(texts, min_count); }

std::vector<int> encode(std::string_view text, const Vocabulary& vocab) {
  auto tokens = tokenize(text);
  if (tokens.size() > kMaxContentTokens) tokens.resize(kMaxContentTokens);
  std::vector<int> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(kBosId);
  for (const auto& t : tokens) {
    const int id = vocab.id(t);
    // Tokens spelled like reserved markers are ordinary OOV text.
    ids.push_back(id < kReservedIds ? kUnkId : id);
  }
  ids.push_back(kEosId);
  return ids;
}

EncodedDocument encode(const LabeledText& record, const Vocabulary& vocab) {
  return {encode(record.text, vocab), record.label};
}

std::vector<EncodedDocument> encode_all(std::span<const LabeledText> records, const Vocabulary& vocab) {
  std::vector<EncodedDocument> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(encode(r, vocab));
  return out;
}

std::vector<std::string> decode(std::span<const int> ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : ids)
    if (id != kBosId && id != kEosId) out.push_back(vocab.token(id));
  return out;
}

int count_labels(std::span<const LabeledText> pool) {
  if (pool.empty()) throw DataError("count_labels: empty pool");
  int max_label = 0;
  for (const auto& r : pool) max_label = std::max(max_label, r.label);
  const int n = max_label + 1;
  auto counts = label_counts(pool, n);
  for (int y = 0; y < n; ++y)
    if (counts[static_cast<std::size_t>(y)] == 0)
      throw DataError("label " + std::to_string(y) + " never appears in the training pool");
  return n;
}

std::vector<int> label_counts(std::span<const LabeledText> pool, int num_labels) {
  std::vector<int> counts(static_cast<std::size_t>(num_labels), 0);
  for (const auto& r : pool) {
    if (r.label < 0 || r.label >= num_labels)
      throw DataError("label " + std::to_string(r.label) + " outside [0, " + std::to_string(num_labels) + ")");
    ++counts[static_cast<std::size_t>(r.label)];
  }
  return counts;
}

std::vector<LabeledText> subsample_per_class(std::span<const LabeledText> pool, int n_per_class, int num_labels,
                                             std::uint64_t seed) {
  if (n_per_class < 0) throw std::invalid_argument("subsample_per_class: negative size");
  std::vector<std::vector<std::size_t>> by_label(static_cast<std::size_t>(num_labels));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int y = pool[i].label;
    if (y < 0 || y >= num_labels) throw DataError("subsample_per_class: label out of range");
    by_label[static_cast<std::size_t>(y)].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  for (int y = 0; y < num_labels; ++y) {
    auto& idx = by_label[static_cast<std::size_t>(y)];
    if (static_cast<int>(idx.size()) < n_per_class)
      throw DataError("class " + std::to_string(y) + " has only " + std::to_string(idx.size()) +
                      " instances, " + std::to_string(n_per_class) + " requested");
    std::shuffle(idx.begin(), idx.end(), rng);
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + n_per_class);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<LabeledText> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(pool[i]);
  return out;
}

DevSplit split_dev(std::span<const LabeledText> pool, std::size_t dev_size, std::uint64_t seed) {
  DevSplit split;
  if (pool.size() <= dev_size) {
    const std::size_t scaled = pool.size() / 10;
    split.warning = "pool of " + std::to_string(pool.size()) + " is not larger than dev size " +
                    std::to_string(dev_size) + "; using " + std::to_string(scaled) + " (10%) for dev";
    dev_size = scaled;
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_dev(pool.size(), false);
  for (std::size_t i = 0; i < dev_size; ++i) is_dev[order[i]] = true;
  for (std::size_t i = 0; i < pool.size(); ++i) (is_dev[i] ? split.dev : split.train_pool).push_back(pool[i]);
  return split;
}

}  // namespace latgen
