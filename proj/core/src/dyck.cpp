#include "countlab/dyck.hpp"

#include <algorithm>
#include <cmath>

#include "countlab/errors.hpp"

namespace countlab::dyck {

std::vector<int> depth_profile(std::span<const Token> tokens) {
  if (tokens.empty()) throw InvalidArgument("depth_profile: empty token list");
  std::vector<int> depths;
  depths.reserve(tokens.size());
  int depth = 0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] == Token::Open) {
      ++depth;
    } else {
      if (depth == 0) throw NegativeDepth(t);
      --depth;
    }
    depths.push_back(depth);
  }
  return depths;
}

DyckWord DyckWord::from_tokens(std::vector<Token> tokens) {
  auto depths = depth_profile(tokens);
  if (depths.back() != 0) throw UnbalancedWord(depths.back());
  return DyckWord(std::move(tokens), std::move(depths));
}

DyckWord DyckWord::parse(std::string_view text) {
  std::vector<Token> tokens;
  tokens.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    switch (text[i]) {
      case '(': tokens.push_back(Token::Open); break;
      case ')': tokens.push_back(Token::Close); break;
      default:
        throw InvalidArgument("unknown symbol at column " + std::to_string(i + 1));
    }
  }
  return from_tokens(std::move(tokens));
}

int DyckWord::max_depth() const {
  return *std::max_element(depths_.begin(), depths_.end());
}

std::string DyckWord::str() const {
  std::string s;
  s.reserve(tokens_.size());
  for (Token t : tokens_) s.push_back(to_char(t));
  return s;
}

TargetSeq next_targets(const DyckWord& word) {
  TargetSeq out;
  out.reserve(word.size());
  for (int d : word.depths()) out.push_back({true, d > 0});
  return out;
}

void GenSpec::validate() const {
  if (count == 0) throw InvalidArgument("GenSpec: count must be positive");
  if (min_len < 2 || min_len > max_len)
    throw InvalidArgument("GenSpec: need 2 <= minLen <= maxLen");
  if (min_len % 2 != 0 || max_len % 2 != 0)
    throw InvalidArgument("GenSpec: minLen and maxLen must be even");
  if (!(pcfg_p > 0.0 && pcfg_p < 1.0) || !(pcfg_q > 0.0 && pcfg_q < 1.0) ||
      !(pcfg_p + pcfg_q < 1.0))
    throw InvalidArgument("GenSpec: need pcfgP, pcfgQ in (0,1) with pcfgP + pcfgQ < 1");
}

std::optional<DyckWord> sample_once(const GenSpec& spec, Rng& rng) {
  // Pending work as a stack: a nonterminal S or a deferred ')'.
  enum class Item : std::uint8_t { S, Close };
  std::vector<Item> stack{Item::S};
  std::vector<Token> out;
  std::size_t pending_close = 0;
  std::size_t expansions = 0;
  const std::size_t max_expansions = 64 * spec.max_len + 1024;

  while (!stack.empty()) {
    const Item item = stack.back();
    stack.pop_back();
    if (item == Item::Close) {
      out.push_back(Token::Close);
      --pending_close;
      continue;
    }
    if (++expansions > max_expansions) return std::nullopt;
    const double u = rng.uniform();
    if (u < spec.pcfg_p) {
      out.push_back(Token::Open);
      ++pending_close;
      stack.push_back(Item::Close);
      stack.push_back(Item::S);
      // Every pending ')' will be emitted, so this bound is final.
      if (out.size() + pending_close > spec.max_len) return std::nullopt;
    } else if (u < spec.pcfg_p + spec.pcfg_q) {
      stack.push_back(Item::S);
      stack.push_back(Item::S);
    }
  }
  if (out.size() < spec.min_len) return std::nullopt;
  return DyckWord::from_tokens(std::move(out));
}

DyckWord generate_word(const GenSpec& spec, Rng& rng) {
  spec.validate();
  for (std::size_t attempt = 0; attempt < kMaxConsecutiveRejections; ++attempt) {
    if (auto w = sample_once(spec, rng)) return std::move(*w);
  }
  throw GenerationStalled("no word in length window after " +
                          std::to_string(kMaxConsecutiveRejections) + " draws");
}

std::string to_string(SplitName name) {
  switch (name) {
    case SplitName::Train: return "TRAIN";
    case SplitName::Validation: return "VALIDATION";
    case SplitName::Long: return "LONG";
    case SplitName::VeryLong: return "VERYLONG";
    case SplitName::Zigzag: return "ZIGZAG";
  }
  return "?";
}

SplitName split_from_string(std::string_view name) {
  for (auto s : {SplitName::Train, SplitName::Validation, SplitName::Long,
                 SplitName::VeryLong, SplitName::Zigzag}) {
    if (to_string(s) == name) return s;
  }
  throw InvalidArgument("unknown split name '" + std::string(name) + "'");
}

WordSet token_strings(const DatasetSplit& split) {
  WordSet set;
  set.reserve(split.words.size());
  for (const auto& w : split.words) set.insert(w.str());
  return set;
}

DatasetSplit generate_split(SplitName name, const GenSpec& spec, const WordSet& exclude) {
  spec.validate();
  Rng rng(spec.seed);
  DatasetSplit split{name, {}};
  split.words.reserve(spec.count);
  WordSet seen;
  std::size_t rejections = 0;
  while (split.words.size() < spec.count) {
    auto w = sample_once(spec, rng);
    if (w) {
      auto s = w->str();
      if (!exclude.contains(s) && seen.insert(std::move(s)).second) {
        split.words.push_back(std::move(*w));
        rejections = 0;
        continue;
      }
    }
    if (++rejections >= kMaxConsecutiveRejections) {
      throw GenerationStalled(to_string(name) + ": stalled after " +
                              std::to_string(split.words.size()) + " of " +
                              std::to_string(spec.count) + " distinct words");
    }
  }
  return split;
}

DyckWord generate_zigzag(const ZigzagSpec& spec) {
  if (spec.j == 0 || spec.total_len == 0 || spec.total_len % (2 * spec.j) != 0) {
    throw IndivisibleLength("zigzag: total length " + std::to_string(spec.total_len) +
                            " is not a multiple of 2j = " + std::to_string(2 * spec.j));
  }
  std::vector<Token> tokens;
  tokens.reserve(spec.total_len);
  for (std::size_t rep = 0; rep < spec.total_len / (2 * spec.j); ++rep) {
    tokens.insert(tokens.end(), spec.j, Token::Open);
    tokens.insert(tokens.end(), spec.j, Token::Close);
  }
  return DyckWord::from_tokens(std::move(tokens));
}

DatasetSplit zigzag_split(std::span<const std::size_t> js, std::size_t total_len) {
  DatasetSplit split{SplitName::Zigzag, {}};
  for (std::size_t i = 0; i < js.size(); ++i) {
    if (std::find(js.begin(), js.begin() + i, js[i]) != js.begin() + i)
      throw InvalidArgument("zigzag: duplicate j = " + std::to_string(js[i]));
    split.words.push_back(generate_zigzag({js[i], total_len}));
  }
  return split;
}

}  // namespace countlab::dyck
