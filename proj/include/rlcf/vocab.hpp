#ifndef RLCF_VOCAB_HPP
#define RLCF_VOCAB_HPP

#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rlcf {

using TokenId = std::uint16_t;
using TokenSeq = std::vector<TokenId>;

/// Thrown by tokenize() when the input contains a lexeme outside the vocabulary.
class UnknownLexeme : public std::runtime_error {
 public:
  UnknownLexeme(std::size_t position, std::string lexeme)
      : std::runtime_error("unknown lexeme '" + lexeme + "' at position " +
                           std::to_string(position)),
        position_(position),
        lexeme_(std::move(lexeme)) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& lexeme() const noexcept { return lexeme_; }

 private:
  std::size_t position_;
  std::string lexeme_;
};

/// Closed token vocabulary of the mini-language.
///
/// Ids are fixed: the four control tokens come first, then identifiers,
/// the `return` keyword, the ten digits and the punctuation/operators.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kSep = 3;

  static constexpr std::array<std::string_view, 31> kSurface = {
      "<pad>", "<bos>", "<eos>", "<sep>",                       // control
      "x0",    "x1",    "x2",    "x3",    "a", "b", "c", "t",   // identifiers
      "return",                                                 // keyword
      "0",     "1",     "2",     "3",     "4", "5", "6", "7", "8", "9",
      "+",     "-",     "*",     "/",     "=", ";", "(", ")"};

  static constexpr TokenId kFirstIdent = 4;
  static constexpr TokenId kLastIdent = 11;
  static constexpr TokenId kReturn = 12;
  static constexpr TokenId kDigit0 = 13;
  static constexpr TokenId kPlus = 23;
  static constexpr TokenId kMinus = 24;
  static constexpr TokenId kStar = 25;
  static constexpr TokenId kSlash = 26;
  static constexpr TokenId kAssign = 27;
  static constexpr TokenId kSemi = 28;
  static constexpr TokenId kLParen = 29;
  static constexpr TokenId kRParen = 30;

  static constexpr std::size_t size() noexcept { return kSurface.size(); }

  static constexpr std::string_view surface(TokenId id) { return kSurface.at(id); }

  static std::optional<TokenId> lookup(std::string_view lexeme) noexcept {
    for (std::size_t i = 0; i < kSurface.size(); ++i)
      if (kSurface[i] == lexeme) return static_cast<TokenId>(i);
    return std::nullopt;
  }

  static constexpr bool is_control(TokenId id) noexcept { return id <= kSep; }
  static constexpr bool is_ident(TokenId id) noexcept {
    return id >= kFirstIdent && id <= kLastIdent;
  }
  static constexpr bool is_input(TokenId id) noexcept {
    return id >= kFirstIdent && id < kFirstIdent + 4;
  }
  static constexpr bool is_digit(TokenId id) noexcept {
    return id >= kDigit0 && id < kDigit0 + 10;
  }
  static constexpr int digit_value(TokenId id) noexcept { return id - kDigit0; }
  static constexpr TokenId digit(int value) noexcept {
    return static_cast<TokenId>(kDigit0 + value);
  }
  static constexpr TokenId input(int index) noexcept {
    return static_cast<TokenId>(kFirstIdent + index);
  }

  /// FNV-1a over the surface strings, used to tag checkpoints.
  static std::uint64_t hash() noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto s : kSurface) {
      for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
      }
      h ^= 0xff;
      h *= 1099511628211ULL;
    }
    return h;
  }
};

/// Splits surface text into tokens. Whitespace separates lexemes but is
/// never required between punctuation; each digit is its own token.
inline TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char ch = text[i];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
      continue;
    }
    if (ch == '<') {
      const auto close = text.find('>', i);
      const auto lexeme = close == std::string_view::npos
                              ? text.substr(i, 1)
                              : text.substr(i, close - i + 1);
      auto id = Vocabulary::lookup(lexeme);
      if (!id) throw UnknownLexeme(i, std::string(lexeme));
      out.push_back(*id);
      i += lexeme.size();
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(ch))) {
      std::size_t j = i;
      while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
      const auto word = text.substr(i, j - i);
      auto id = Vocabulary::lookup(word);
      if (!id) throw UnknownLexeme(i, std::string(word));
      out.push_back(*id);
      i = j;
      continue;
    }
    auto id = Vocabulary::lookup(text.substr(i, 1));
    if (!id) throw UnknownLexeme(i, std::string(1, ch));
    out.push_back(*id);
    ++i;
  }
  return out;
}

/// Joins token surfaces with single spaces.
inline std::string detokenize(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += Vocabulary::surface(tokens[i]);
  }
  return out;
}

}  // namespace rlcf

#endif  // RLCF_VOCAB_HPP
