#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace stance::text {

struct Token {
  std::string text;
  std::string lower;
  std::size_t length = 0;  ///< code points
  bool alphabetic = false; ///< every code point is a letter
  bool word = false;       ///< run of letters/digits/apostrophes (false for punctuation)
};

using TokenSeq = std::vector<Token>;
using SentenceSeq = std::vector<TokenSeq>;

/// Word lists used by the text primitives. Defaults are pinned; both lists
/// can be replaced from one-entry-per-line files.
struct Lexicons {
  std::unordered_set<std::string> negation;
  std::unordered_set<std::string> abbreviations;

  static const Lexicons& defaults();
};

std::vector<std::string> default_negation_keywords();
std::vector<std::string> default_abbreviations();

/// One entry per line; blank lines and lines starting with '#' are skipped.
std::vector<std::string> load_word_list(const std::string& path);

std::string to_lower(std::string_view utf8);

/// Maximal runs of letters, digits and apostrophes form word tokens; every
/// other non-space code point becomes a one-character token.
TokenSeq tokenize(std::string_view text);

/// Splits after '.', '!' or '?' when followed by whitespace or end of text,
/// unless the word ending there is a known abbreviation.
SentenceSeq split_sentences(std::string_view text, const Lexicons& lex = Lexicons::defaults());

std::size_t count_syllables(std::string_view word);

inline constexpr std::string_view kNegPrefix = "_NEG";

bool is_negation_keyword(const Token& tok, const Lexicons& lex = Lexicons::defaults());

/// Prefixes "_NEG" to every token between a negation keyword and the next
/// punctuation token. Already-tagged tokens are left alone.
TokenSeq tag_negation(const TokenSeq& tokens, const Lexicons& lex = Lexicons::defaults());

/// Space-joined n-grams over the lowercase forms.
std::vector<std::string> ngrams(const TokenSeq& tokens, std::size_t n);

/// Lowercases, collapses whitespace runs to one space, trims.
std::string normalize_for_chars(std::string_view text);

/// Character n-grams over normalize_for_chars(text), by code point.
std::vector<std::string> char_ngrams(std::string_view text, std::size_t n);

/// First `count` code points of a UTF-8 string.
std::string utf8_prefix(std::string_view text, std::size_t count);
std::size_t utf8_length(std::string_view text);

std::size_t count_words(const TokenSeq& tokens);

}  // namespace stance::text
