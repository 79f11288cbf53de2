#include "stance/vocabulary.hpp"

#include <algorithm>
#include <stdexcept>

#include "stance/textproc.hpp"

namespace stance::features {

void FeatureVector::append(const FeatureVector& other, std::string_view prefix) {
  for (std::size_t i = 0; i < other.size(); ++i) {
    names.push_back(std::string(prefix) + other.names[i]);
    values.push_back(other.values[i]);
  }
}

double FeatureVector::at(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[i];
  throw std::out_of_range("no feature named '" + std::string(name) + "'");
}

std::vector<std::string> extract_grams(std::string_view text, const GramSpec& spec) {
  if (spec.orders.empty()) throw std::invalid_argument("gram spec without orders");
  std::vector<std::string> out;
  if (spec.unit == GramUnit::Char) {
    for (std::size_t n : spec.orders) {
      auto g = text::char_ngrams(text, n);
      out.insert(out.end(), std::make_move_iterator(g.begin()), std::make_move_iterator(g.end()));
    }
    return out;
  }
  text::TokenSeq toks = text::tokenize(text);
  if (spec.negation) toks = text::tag_negation(toks);
  text::TokenSeq words;
  words.reserve(toks.size());
  const auto& stop = stopwords();
  for (auto& t : toks) {
    if (!t.word) continue;
    if (spec.drop_stopwords && stop.count(t.lower)) continue;
    words.push_back(std::move(t));
  }
  for (std::size_t n : spec.orders) {
    auto g = text::ngrams(words, n);
    out.insert(out.end(), std::make_move_iterator(g.begin()), std::make_move_iterator(g.end()));
  }
  return out;
}

Vocabulary::Vocabulary(GramSpec spec, std::vector<std::string> entries)
    : spec_(std::move(spec)), entries_(std::move(entries)) {
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i], i).second)
      throw std::invalid_argument("duplicate vocabulary entry '" + entries_[i] + "'");
  }
}

std::optional<std::size_t> Vocabulary::find(std::string_view gram) const {
  auto it = index_.find(std::string(gram));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<double> Vocabulary::counts(std::string_view text) const {
  std::vector<double> out(entries_.size(), 0.0);
  for (const auto& g : extract_grams(text, spec_)) {
    auto it = index_.find(g);
    if (it != index_.end()) out[it->second] += 1.0;
  }
  return out;
}

Vocabulary fit_vocabulary(const std::vector<std::string>& texts, const GramSpec& spec, std::size_t size) {
  if (size == 0) throw std::invalid_argument("fit_vocabulary: size must be >= 1");
  if (texts.empty()) throw std::invalid_argument("fit_vocabulary: empty text collection");
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& t : texts)
    for (auto& g : extract_grams(t, spec)) ++freq[std::move(g)];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  auto cmp = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  const std::size_t keep = std::min(size, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(), cmp);
  std::vector<std::string> entries;
  entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) entries.push_back(std::move(ranked[i].first));
  return Vocabulary(spec, std::move(entries));
}

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a", "about", "above", "across", "after", "afterwards", "again", "against", "all", "almost",
      "alone", "along", "already", "also", "although", "always", "am", "among", "amongst", "an",
      "and", "another", "any", "anyhow", "anyone", "anything", "anyway", "anywhere", "are",
      "around", "as", "at", "back", "be", "became", "because", "become", "becomes", "becoming",
      "been", "before", "beforehand", "behind", "being", "below", "beside", "besides", "between",
      "beyond", "both", "but", "by", "can", "could", "did", "do", "does", "doing", "done", "down",
      "due", "during", "each", "either", "else", "elsewhere", "enough", "even", "ever", "every",
      "everyone", "everything", "everywhere", "except", "few", "for", "former", "formerly", "from",
      "further", "had", "has", "have", "having", "he", "hence", "her", "here", "hereafter", "hereby",
      "herein", "hereupon", "hers", "herself", "him", "himself", "his", "how", "however", "i", "if",
      "in", "indeed", "into", "is", "it", "its", "itself", "just", "last", "latter", "latterly",
      "least", "less", "many", "may", "me", "meanwhile", "might", "mine", "more", "moreover",
      "most", "mostly", "much", "must", "my", "myself", "namely", "neither", "nevertheless", "next",
      "now", "of", "off", "often", "on", "once", "one", "only", "onto", "or", "other", "others",
      "otherwise", "our", "ours", "ourselves", "out", "over", "own", "per", "perhaps", "please",
      "rather", "same", "seem", "seemed", "seeming", "seems", "several", "she", "should", "since",
      "so", "some", "somehow", "someone", "something", "sometime", "sometimes", "somewhere",
      "still", "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then",
      "thence", "there", "thereafter", "thereby", "therefore", "therein", "thereupon", "these",
      "they", "this", "those", "though", "through", "throughout", "thru", "thus", "to", "together",
      "too", "toward", "towards", "under", "until", "up", "upon", "us", "very", "via", "was", "we",
      "well", "were", "what", "whatever", "when", "whence", "whenever", "where", "whereafter",
      "whereas", "whereby", "wherein", "whereupon", "wherever", "whether", "which", "while",
      "whither", "who", "whoever", "whole", "whom", "whose", "why", "will", "with", "within",
      "would", "yet", "you", "your", "yours", "yourself", "yourselves"};
  return words;
}

}  // namespace stance::features
