#include "ktlab/seq/vocab.hpp"

#include <sstream>

#include "ktlab/error.hpp"

namespace ktlab::seq {

Vocab::Vocab(std::vector<std::string> content_tokens) {
  tokens_ = {"<pad>", "<s>", "</s>"};
  for (auto& t : content_tokens) tokens_.push_back(std::move(t));
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty() || t.find_first_of(" \t\n") != std::string::npos) {
      throw InvalidArgument("vocab: token '" + t + "' is empty or contains whitespace");
    }
    if (!index_.emplace(t, static_cast<TokenId>(i)).second) {
      throw InvalidArgument("vocab: duplicate token '" + t + "'");
    }
  }
  if (tokens_.size() < 4) throw InvalidArgument("vocab: needs at least one content token");
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || id >= size()) throw InvalidArgument("vocab: id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) throw InvalidArgument("vocab: unknown token '" + std::string(token) + "'");
  return it->second;
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
  std::vector<TokenId> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(id(tok));
  return out;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

void SentencePair::validate(int source_vocab, int target_vocab) const {
  if (source.empty()) throw InvalidArgument("sentence pair: empty source");
  if (target.empty() || target.back() != Vocab::kEos) {
    throw InvalidArgument("sentence pair: target must end with EOS");
  }
  for (TokenId t : source) {
    if (t < Vocab::kFirstContent || t >= source_vocab) {
      throw InvalidArgument("sentence pair: source token " + std::to_string(t) + " invalid");
    }
  }
  for (std::size_t i = 0; i + 1 < target.size(); ++i) {
    const TokenId t = target[i];
    if (t < Vocab::kFirstContent || t >= target_vocab) {
      throw InvalidArgument("sentence pair: target token " + std::to_string(t) + " at position " +
                            std::to_string(i) + " invalid");
    }
  }
}

std::vector<TokenId> strip_specials(std::span<const TokenId> ids) {
  std::vector<TokenId> out;
  for (TokenId id : ids) {
    if (id == Vocab::kEos) break;
    if (id == Vocab::kPad || id == Vocab::kBos) continue;
    out.push_back(id);
  }
  return out;
}

}  // namespace ktlab::seq
