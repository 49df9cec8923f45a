#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ktlab::seq {

using TokenId = std::int32_t;

/// Ordered token inventory. Ids 0..2 are reserved for PAD, BOS and EOS.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kFirstContent = 3;

  /// Content tokens follow the reserved ids in the given order.
  explicit Vocab(std::vector<std::string> content_tokens);

  int size() const noexcept { return static_cast<int>(tokens_.size()); }
  int content_size() const noexcept { return size() - kFirstContent; }
  const std::string& token(TokenId id) const;
  TokenId id(std::string_view token) const;
  bool is_special(TokenId id) const noexcept { return id >= 0 && id < kFirstContent; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// Space-separated tokens to ids (no EOS appended).
  std::vector<TokenId> encode(std::string_view text) const;
  /// Ids to space-separated tokens, stopping before the first EOS.
  std::string decode(std::span<const TokenId> ids) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// One translation example. The target ends with EOS and contains no PAD.
struct SentencePair {
  std::vector<TokenId> source;
  std::vector<TokenId> target;

  std::size_t target_length() const noexcept { return target.size(); }
  void validate(int source_vocab, int target_vocab) const;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

/// Drop everything from the first EOS on, and any PAD / BOS.
std::vector<TokenId> strip_specials(std::span<const TokenId> ids);

}  // namespace ktlab::seq
