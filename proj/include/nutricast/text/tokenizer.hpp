#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nutricast/core/error.hpp"

namespace nutricast {

/// Lowercases ASCII and splits on runs of non-alphanumeric bytes. Bytes
/// >= 0x80 are kept inside words so UTF-8 letters are not split apart.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char ch : text) {
    const bool word_char = (ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || ch >= 0x80;
    if (word_char) {
      cur.push_back(static_cast<char>(ch >= 'A' && ch <= 'Z' ? ch - 'A' + 'a' : ch));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kBos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kSpecialCount = 4;

  Vocabulary() { reset({}); }

  /// Words seen at least `min_frequency` times, most frequent first, ties by
  /// byte order.
  static Vocabulary build(const std::vector<std::string>& texts, std::size_t min_frequency = 2) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : texts)
      for (auto& w : split_words(t)) ++counts[w];
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [w, c] : counts)
      if (c >= min_frequency) kept.emplace_back(w, c);
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> words;
    for (auto& [w, _] : kept) words.push_back(w);
    Vocabulary v;
    v.reset(words);
    v.min_frequency_ = min_frequency;
    return v;
  }

  /// Rebuild from an id-ordered token list that includes the specials.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens, std::size_t min_frequency) {
    if (tokens.size() < kSpecialCount || tokens[kPad] != "<pad>" || tokens[kUnk] != "<unk>" ||
        tokens[kBos] != "<bos>" || tokens[kEos] != "<eos>") {
      throw ConfigError("vocabulary token list must start with <pad> <unk> <bos> <eos>");
    }
    Vocabulary v;
    v.reset(std::vector<std::string>(tokens.begin() + kSpecialCount, tokens.end()));
    v.min_frequency_ = min_frequency;
    return v;
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t min_frequency() const noexcept { return min_frequency_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  std::size_t id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
  }

  static bool is_special(std::size_t id) noexcept { return id < kSpecialCount && id != kUnk; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.min_frequency_ == b.min_frequency_;
  }

 private:
  void reset(const std::vector<std::string>& words) {
    tokens_ = {"<pad>", "<unk>", "<bos>", "<eos>"};
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = i;
    for (const auto& w : words) {
      if (index_.count(w)) throw ConfigError("duplicate vocabulary token '" + w + "'");
      index_[w] = tokens_.size();
      tokens_.push_back(w);
    }
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t min_frequency_ = 2;
};

/// BOS + word ids + EOS, truncated so EOS stays in the last slot, then PAD.
inline std::vector<std::size_t> tokenize(std::string_view text, const Vocabulary& vocab, std::size_t context_length) {
  if (context_length < 3) throw ConfigError("context_length must be at least 3");
  const auto words = split_words(text);
  std::vector<std::size_t> ids;
  ids.reserve(context_length);
  ids.push_back(Vocabulary::kBos);
  const std::size_t room = context_length - 2;
  for (std::size_t i = 0; i < words.size() && i < room; ++i) ids.push_back(vocab.id(words[i]));
  ids.push_back(Vocabulary::kEos);
  ids.resize(context_length, Vocabulary::kPad);
  return ids;
}

/// Index of the EOS token in a tokenized sequence.
inline std::size_t eos_position(const std::vector<std::size_t>& ids) {
  auto it = std::find(ids.begin(), ids.end(), Vocabulary::kEos);
  if (it == ids.end()) throw ContractError("token sequence has no EOS");
  return static_cast<std::size_t>(it - ids.begin());
}

}  // namespace nutricast
