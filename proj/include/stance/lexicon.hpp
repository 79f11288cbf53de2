#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <unordered_map>

#include "stance/corpus.hpp"
#include "stance/vocabulary.hpp"

namespace stance::features {

enum class LexiconKind { Polarity, Emotion };

inline constexpr std::size_t kNumEmotions = 8;
inline constexpr std::array<const char*, kNumEmotions> kEmotionNames = {
    "anger", "fear", "anticipation", "trust", "surprise", "sadness", "joy", "disgust"};

using EmotionCounts = std::array<double, kNumEmotions>;

/// Word (or two-word) lexicon: real polarity scores or emotion counts.
struct Lexicon {
  std::string name;
  LexiconKind kind = LexiconKind::Polarity;
  std::unordered_map<std::string, double> scores;
  std::unordered_map<std::string, EmotionCounts> emotions;
  bool has_bigrams = false;

  std::size_t size() const { return kind == LexiconKind::Polarity ? scores.size() : emotions.size(); }
  std::size_t width() const { return 2 * (kind == LexiconKind::Polarity ? 8 : kNumEmotions); }
};

/// TSV `gram<TAB>score` or `gram<TAB>e1,...,e8`; '#' starts a comment line.
/// The kind is taken from the first entry and must not change.
Lexicon load_lexicon(const std::string& path, std::string name = {});

/// Per side (headline, body). Polarity kind: positive/negative/neutral hit
/// counts, positive and negative score sums, max positive, min negative, and
/// the score of the last non-zero hit. Emotion kind: the eight emotion counts.
FeatureVector lexicon_vector(const Instance& inst, const Lexicon& lexicon);

}  // namespace stance::features
