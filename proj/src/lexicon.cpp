#include "stance/lexicon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stance/textproc.hpp"

namespace stance::features {
namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = s.find_first_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b);
}

double parse_number(const std::string& s, const std::string& path, std::size_t line) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || !std::isfinite(v))
    throw std::runtime_error(path + ":" + std::to_string(line) + ": invalid value '" + s + "'");
  return v;
}

void side_polarity(const text::TokenSeq& toks, const Lexicon& lex, const std::string& side,
                   FeatureVector& out) {
  double npos = 0, nneg = 0, nzero = 0, sumpos = 0, sumneg = 0, maxpos = 0, minneg = 0, last = 0;
  auto visit = [&](const std::string& gram) {
    auto it = lex.scores.find(gram);
    if (it == lex.scores.end()) return;
    const double s = it->second;
    if (s > 0) {
      ++npos;
      sumpos += s;
      maxpos = std::max(maxpos, s);
      last = s;
    } else if (s < 0) {
      ++nneg;
      sumneg += s;
      minneg = std::min(minneg, s);
      last = s;
    } else {
      ++nzero;
    }
  };
  std::vector<const std::string*> words;
  for (const auto& t : toks)
    if (t.word) words.push_back(&t.lower);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (lex.has_bigrams && i > 0) visit(*words[i - 1] + " " + *words[i]);
    visit(*words[i]);
  }
  out.push(side + "_n_pos", npos);
  out.push(side + "_n_neg", nneg);
  out.push(side + "_n_neutral", nzero);
  out.push(side + "_sum_pos", sumpos);
  out.push(side + "_sum_neg", sumneg);
  out.push(side + "_max_pos", maxpos);
  out.push(side + "_min_neg", minneg);
  out.push(side + "_last", last);
}

void side_emotion(const text::TokenSeq& toks, const Lexicon& lex, const std::string& side,
                  FeatureVector& out) {
  EmotionCounts total{};
  auto visit = [&](const std::string& gram) {
    auto it = lex.emotions.find(gram);
    if (it == lex.emotions.end()) return;
    for (std::size_t e = 0; e < kNumEmotions; ++e) total[e] += it->second[e];
  };
  std::vector<const std::string*> words;
  for (const auto& t : toks)
    if (t.word) words.push_back(&t.lower);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (lex.has_bigrams && i > 0) visit(*words[i - 1] + " " + *words[i]);
    visit(*words[i]);
  }
  for (std::size_t e = 0; e < kNumEmotions; ++e) out.push(side + "_" + kEmotionNames[e], total[e]);
}

}  // namespace

Lexicon load_lexicon(const std::string& path, std::string name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon " + path);
  Lexicon lex;
  lex.name = name.empty() ? path : std::move(name);
  bool kind_known = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected gram<TAB>value");
    std::string gram = text::to_lower(trim(line.substr(0, tab)));
    std::string value = trim(line.substr(tab + 1));
    const LexiconKind kind = value.find(',') != std::string::npos ? LexiconKind::Emotion : LexiconKind::Polarity;
    if (!kind_known) {
      lex.kind = kind;
      kind_known = true;
    } else if (kind != lex.kind) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": mixed polarity and emotion entries");
    }
    if (gram.find(' ') != std::string::npos) {
      if (std::count(gram.begin(), gram.end(), ' ') > 1)
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": only 1- and 2-grams are supported");
      lex.has_bigrams = true;
    }
    if (kind == LexiconKind::Polarity) {
      lex.scores[gram] = parse_number(value, path, lineno);
    } else {
      EmotionCounts counts{};
      std::stringstream ss(value);
      std::string cell;
      std::size_t e = 0;
      while (std::getline(ss, cell, ',')) {
        if (e >= kNumEmotions)
          throw std::runtime_error(path + ":" + std::to_string(lineno) + ": more than 8 emotion values");
        double v = parse_number(trim(cell), path, lineno);
        if (v < 0 || v != std::floor(v))
          throw std::runtime_error(path + ":" + std::to_string(lineno) + ": emotion counts must be non-negative integers");
        counts[e++] = v;
      }
      if (e != kNumEmotions)
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 8 emotion values");
      lex.emotions[gram] = counts;
    }
  }
  return lex;
}

FeatureVector lexicon_vector(const Instance& inst, const Lexicon& lexicon) {
  if (lexicon.size() == 0) throw std::invalid_argument("lexicon '" + lexicon.name + "' is empty");
  FeatureVector out;
  const auto h = text::tokenize(inst.headline);
  const auto b = text::tokenize(inst.body);
  if (lexicon.kind == LexiconKind::Polarity) {
    side_polarity(h, lexicon, "h", out);
    side_polarity(b, lexicon, "b", out);
  } else {
    side_emotion(h, lexicon, "h", out);
    side_emotion(b, lexicon, "b", out);
  }
  return out;
}

}  // namespace stance::features
