#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace stance::features {

/// Named, ordered feature values.
struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  void push(std::string name, double value) {
    names.push_back(std::move(name));
    values.push_back(value);
  }
  void append(const FeatureVector& other, std::string_view prefix = {});
  /// Value by name; throws if absent.
  double at(std::string_view name) const;
};

enum class GramUnit { Word, Char };

/// How a vocabulary turns text into grams.
struct GramSpec {
  GramUnit unit = GramUnit::Word;
  /// Word n-gram orders, or the single character n.
  std::vector<std::size_t> orders = {1};
  /// Word grams are taken from negation-tagged tokens.
  bool negation = false;
  /// Word grams skip stop words.
  bool drop_stopwords = false;

  bool operator==(const GramSpec&) const = default;
};

/// Grams of `text` under `spec`, in text order. Word grams are built over
/// word tokens only (punctuation is dropped after negation tagging).
std::vector<std::string> extract_grams(std::string_view text, const GramSpec& spec);

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(GramSpec spec, std::vector<std::string> entries);

  const GramSpec& spec() const { return spec_; }
  const std::vector<std::string>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::optional<std::size_t> find(std::string_view gram) const;

  /// Term-frequency counts of `text` over the vocabulary.
  std::vector<double> counts(std::string_view text) const;

 private:
  GramSpec spec_;
  std::vector<std::string> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Top-`size` grams by total frequency over `texts`; ties broken by
/// ascending byte order.
Vocabulary fit_vocabulary(const std::vector<std::string>& texts, const GramSpec& spec, std::size_t size);

const std::unordered_set<std::string>& stopwords();

}  // namespace stance::features
