#include "stance/textproc.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <fstream>
#include <stdexcept>

namespace stance::text {
namespace {

// Decodes one code point; malformed bytes come back as U+FFFD.
UChar32 next_cp(std::string_view s, std::size_t& i) {
  int32_t idx = static_cast<int32_t>(i);
  UChar32 c;
  U8_NEXT(s.data(), idx, static_cast<int32_t>(s.size()), c);
  i = static_cast<std::size_t>(idx);
  return c < 0 ? 0xFFFD : c;
}

void append_cp(std::string& out, UChar32 c) {
  char buf[4];
  int32_t len = 0;
  UBool err = false;
  U8_APPEND(buf, len, 4, c, err);
  if (err) {
    out += "\xEF\xBF\xBD";
    return;
  }
  out.append(buf, static_cast<std::size_t>(len));
}

bool is_apostrophe(UChar32 c) { return c == '\'' || c == 0x2019; }
bool is_word_cp(UChar32 c) { return u_isalpha(c) || u_isdigit(c) || is_apostrophe(c); }
bool is_space_cp(UChar32 c) { return u_isUWhiteSpace(c) || c == 0xFEFF || c == 0x200B; }

Token make_token(std::string text) {
  Token t;
  t.lower = to_lower(text);
  std::size_t i = 0;
  bool alpha = true;
  bool word = true;
  while (i < text.size()) {
    UChar32 c = next_cp(text, i);
    ++t.length;
    if (!u_isalpha(c)) alpha = false;
    if (!is_word_cp(c)) word = false;
  }
  t.alphabetic = alpha && t.length > 0;
  t.word = word && t.length > 0;
  t.text = std::move(text);
  return t;
}

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

}  // namespace

std::vector<std::string> default_negation_keywords() {
  return {"no",      "not",     "never", "none",    "nobody", "nothing",
          "neither", "nor",     "nowhere", "n't",   "cannot", "without"};
}

std::vector<std::string> default_abbreviations() {
  return {"mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "u.s.", "u.k.", "etc.",
          "e.g.", "i.e.", "vs.", "inc.", "ltd.", "co.", "corp.", "gen.", "sen.", "rep.", "gov.",
          "jan.", "feb.", "mar.", "apr.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.", "no."};
}

const Lexicons& Lexicons::defaults() {
  static const Lexicons lex = [] {
    Lexicons l;
    for (auto& w : default_negation_keywords()) l.negation.insert(w);
    for (auto& w : default_abbreviations()) l.abbreviations.insert(w);
    return l;
  }();
  return lex;
}

std::vector<std::string> load_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word list " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    std::size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    line = line.substr(b);
    if (line[0] == '#') continue;
    out.push_back(to_lower(line));
  }
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    UChar32 c = next_cp(s, i);
    if (c < 0x80) {
      out.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c));
    } else {
      append_cp(out, u_tolower(c));
    }
  }
  return out;
}

std::size_t utf8_length(std::string_view s) {
  std::size_t i = 0, n = 0;
  while (i < s.size()) {
    next_cp(s, i);
    ++n;
  }
  return n;
}

std::string utf8_prefix(std::string_view s, std::size_t count) {
  std::size_t i = 0, n = 0;
  while (i < s.size() && n < count) {
    next_cp(s, i);
    ++n;
  }
  return std::string(s.substr(0, i));
}

TokenSeq tokenize(std::string_view s) {
  TokenSeq out;
  std::size_t i = 0;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(make_token(std::move(current)));
      current.clear();
    }
  };
  while (i < s.size()) {
    const std::size_t start = i;
    UChar32 c = next_cp(s, i);
    if (is_word_cp(c)) {
      if (c == 0xFFFD) append_cp(current, c);
      else current.append(s.substr(start, i - start));
    } else {
      flush();
      if (is_space_cp(c)) continue;
      std::string p;
      append_cp(p, c);
      out.push_back(make_token(std::move(p)));
    }
  }
  flush();
  return out;
}

SentenceSeq split_sentences(std::string_view s, const Lexicons& lex) {
  SentenceSeq out;
  std::size_t seg_start = 0;
  std::size_t i = 0;
  auto emit = [&](std::size_t end) {
    TokenSeq toks = tokenize(s.substr(seg_start, end - seg_start));
    if (!toks.empty()) out.push_back(std::move(toks));
    seg_start = end;
  };
  while (i < s.size()) {
    const std::size_t at = i;
    UChar32 c = next_cp(s, i);
    if (c != '.' && c != '!' && c != '?') continue;
    bool boundary = i >= s.size();
    if (!boundary) {
      std::size_t j = i;
      boundary = is_space_cp(next_cp(s, j));
    }
    if (!boundary) continue;
    if (c == '.') {
      // Whitespace-delimited word that ends at this period.
      std::size_t w = at;
      while (w > seg_start && s[w - 1] != ' ' && s[w - 1] != '\n' && s[w - 1] != '\t' &&
             s[w - 1] != '\r')
        --w;
      std::string word = to_lower(s.substr(w, i - w));
      while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\''))
        word.erase(word.begin());
      if (lex.abbreviations.count(word)) continue;
    }
    emit(i);
  }
  emit(s.size());
  if (out.empty() && !s.empty()) out.emplace_back();
  return out;
}

std::size_t count_syllables(std::string_view word) {
  std::string w;
  for (char ch : to_lower(word))
    if (ch >= 'a' && ch <= 'z') w.push_back(ch);
  std::size_t groups = 0;
  bool in_group = false;
  for (char ch : w) {
    bool v = is_vowel(ch);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  const std::size_t n = w.size();
  if (n >= 2 && w[n - 1] == 'e' && groups > 0) {
    bool consonant_le = n >= 3 && w[n - 2] == 'l' && !is_vowel(w[n - 3]);
    if (!consonant_le) --groups;
  }
  return groups == 0 ? 1 : groups;
}

bool is_negation_keyword(const Token& tok, const Lexicons& lex) {
  if (lex.negation.count(tok.lower)) return true;
  if (lex.negation.count("n't")) {
    const std::string& l = tok.lower;
    if (l.size() > 3 && (l.ends_with("n't") || l.ends_with("n\xE2\x80\x99t"))) return true;
  }
  return false;
}

TokenSeq tag_negation(const TokenSeq& tokens, const Lexicons& lex) {
  TokenSeq out = tokens;
  bool in_scope = false;
  for (auto& tok : out) {
    if (!tok.word) {
      in_scope = false;
      continue;
    }
    if (is_negation_keyword(tok, lex)) {
      in_scope = true;
      continue;
    }
    if (in_scope && !tok.text.starts_with(kNegPrefix)) {
      tok.text.insert(0, kNegPrefix);
      tok.lower.insert(0, kNegPrefix);
    }
  }
  return out;
}

std::vector<std::string> ngrams(const TokenSeq& tokens, std::size_t n) {
  if (n == 0) throw std::invalid_argument("ngrams: n must be >= 1");
  std::vector<std::string> out;
  if (tokens.size() < n) return out;
  out.reserve(tokens.size() - n + 1);
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string g = tokens[i].lower;
    for (std::size_t k = 1; k < n; ++k) {
      g.push_back(' ');
      g += tokens[i + k].lower;
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::string normalize_for_chars(std::string_view s) {
  std::string lowered = to_lower(s);
  std::string out;
  out.reserve(lowered.size());
  std::size_t i = 0;
  bool pending_space = false;
  while (i < lowered.size()) {
    const std::size_t start = i;
    UChar32 c = next_cp(lowered, i);
    if (is_space_cp(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.append(lowered, start, i - start);
  }
  return out;
}

std::vector<std::string> char_ngrams(std::string_view s, std::size_t n) {
  if (n == 0) throw std::invalid_argument("char_ngrams: n must be >= 1");
  const std::string norm = normalize_for_chars(s);
  std::vector<std::size_t> offsets;
  std::size_t i = 0;
  while (i < norm.size()) {
    offsets.push_back(i);
    next_cp(norm, i);
  }
  offsets.push_back(norm.size());
  const std::size_t cps = offsets.size() - 1;
  std::vector<std::string> out;
  if (cps < n) return out;
  out.reserve(cps - n + 1);
  for (std::size_t k = 0; k + n <= cps; ++k)
    out.push_back(norm.substr(offsets[k], offsets[k + n] - offsets[k]));
  return out;
}

std::size_t count_words(const TokenSeq& tokens) {
  std::size_t n = 0;
  for (const auto& t : tokens) n += t.word ? 1 : 0;
  return n;
}

}  // namespace stance::text
