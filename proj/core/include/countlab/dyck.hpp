#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "countlab/random.hpp"

namespace countlab::dyck {

enum class Token : std::uint8_t { Open = 0, Close = 1 };

inline char to_char(Token t) { return t == Token::Open ? '(' : ')'; }

// Running depth after each token. Throws NegativeDepth on the first closing
// bracket that would take the depth below zero.
std::vector<int> depth_profile(std::span<const Token> tokens);

// A complete Dyck-1 word: non-empty, every prefix depth >= 0, final depth 0.
// Instances can only be obtained through the validating factories.
class DyckWord {
 public:
  static DyckWord from_tokens(std::vector<Token> tokens);
  // Accepts only '(' and ')'; throws InvalidArgument on other characters.
  static DyckWord parse(std::string_view text);

  std::span<const Token> tokens() const { return tokens_; }
  std::span<const int> depths() const { return depths_; }
  std::size_t size() const { return tokens_.size(); }
  int max_depth() const;
  std::string str() const;

  friend bool operator==(const DyckWord& a, const DyckWord& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  DyckWord(std::vector<Token> tokens, std::vector<int> depths)
      : tokens_(std::move(tokens)), depths_(std::move(depths)) {}

  std::vector<Token> tokens_;
  std::vector<int> depths_;
};

// Next-token validity labels for one position.
struct Target {
  bool open_valid = true;
  bool close_valid = false;

  friend bool operator==(const Target&, const Target&) = default;
};

using TargetSeq = std::vector<Target>;

TargetSeq next_targets(const DyckWord& word);

// Parameters of the bracket PCFG  S -> ( S ) [p] | S S [q] | eps [1-p-q],
// rejection-sampled into the even length window [min_len, max_len].
struct GenSpec {
  std::size_t count = 1;
  std::size_t min_len = 2;
  std::size_t max_len = 50;
  double pcfg_p = 0.5;
  double pcfg_q = 0.25;
  std::uint64_t seed = 0;

  // Throws InvalidArgument on violated invariants.
  void validate() const;
};

// Consecutive rejected draws tolerated before GenerationStalled.
inline constexpr std::size_t kMaxConsecutiveRejections = 1'000'000;

// One PCFG derivation; nullopt if it leaves the length window.
std::optional<DyckWord> sample_once(const GenSpec& spec, Rng& rng);

DyckWord generate_word(const GenSpec& spec, Rng& rng);

enum class SplitName { Train, Validation, Long, VeryLong, Zigzag };

std::string to_string(SplitName name);
SplitName split_from_string(std::string_view name);

struct DatasetSplit {
  SplitName name = SplitName::Train;
  std::vector<DyckWord> words;
};

using WordSet = std::unordered_set<std::string>;

WordSet token_strings(const DatasetSplit& split);

// Draws spec.count pairwise-distinct words, none of which is in `exclude`.
// Duplicates count as rejections toward the stall limit.
DatasetSplit generate_split(SplitName name, const GenSpec& spec,
                            const WordSet& exclude = {});

struct ZigzagSpec {
  std::size_t j = 1;
  std::size_t total_len = 2;
};

// (OPEN^j CLOSE^j) repeated total_len / 2j times.
DyckWord generate_zigzag(const ZigzagSpec& spec);

DatasetSplit zigzag_split(std::span<const std::size_t> js, std::size_t total_len);

}  // namespace countlab::dyck
