#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stance/corpus.hpp"
#include "stance/lexicon.hpp"
#include "stance/neural.hpp"
#include "stance/textproc.hpp"
#include "stance/topics.hpp"
#include "stance/vocabulary.hpp"

namespace stance::features {

// ---------------------------------------------------------------------------
// Catalogue

enum class Extractor {
  Bow,
  Boc,
  Lsi,
  Nmf,
  NmfCos,
  LdaCos,
  NrcPos,
  Wsim,
  Cooc,
  Refuting,
  Polarity,
  WordOverlap,
  TfidfCos,
  Structural,
  Readability,
  Lexdiv,
};

inline constexpr std::array<Extractor, 16> kAllExtractors = {
    Extractor::Bow,      Extractor::Boc,         Extractor::Lsi,         Extractor::Nmf,
    Extractor::NmfCos,   Extractor::LdaCos,      Extractor::NrcPos,      Extractor::Wsim,
    Extractor::Cooc,     Extractor::Refuting,    Extractor::Polarity,    Extractor::WordOverlap,
    Extractor::TfidfCos, Extractor::Structural,  Extractor::Readability, Extractor::Lexdiv};

enum class Group { BoWC, Topic, Oth, Baseline, Extra };

inline constexpr std::array<Group, 5> kAllGroups = {Group::BoWC, Group::Topic, Group::Oth, Group::Baseline,
                                                    Group::Extra};

std::string_view to_string(Extractor e);
Extractor parse_extractor(std::string_view s);
std::string_view to_string(Group g);
Group parse_group(std::string_view s);
Group group_of(Extractor e);
std::vector<Extractor> members(Group g);

// ---------------------------------------------------------------------------
// Standalone extractors

FeatureVector bow_vector(const Instance& inst, const Vocabulary& vocab_h, const Vocabulary& vocab_b);
FeatureVector boc_vector(const Instance& inst, const Vocabulary& vocab_h, const Vocabulary& vocab_b);

/// 8 headline units x 3 body scopes (first 100 code points, first 255, all).
FeatureVector cooc_vector(const Instance& inst);

const std::vector<std::string>& default_refuting_words();
FeatureVector refuting_vector(const Instance& inst,
                              const std::vector<std::string>& words = default_refuting_words());
FeatureVector polarity_vector(const Instance& inst,
                              const std::vector<std::string>& words = default_refuting_words());

struct ReadabilityScores {
  double flesch_reading_ease = 0.0;
  double flesch_kincaid_grade = 0.0;
  double gunning_fog = 0.0;
  double coleman_liau = 0.0;
  double ari = 0.0;
  double lix = 0.0;
  double rix = 0.0;
  double eflaw = 0.0;
  double strain = 0.0;
  double smog = 0.0;
  bool smog_valid = false;
  std::size_t words = 0;
  std::size_t sentences = 0;
};

/// Words are word tokens; characters are code points of word tokens.
/// A text without words scores zero everywhere.
ReadabilityScores readability(std::string_view text);
FeatureVector readability_vector(const Instance& inst);

/// Distinct / total over lowercase word tokens; 0 when empty.
double type_token_ratio(const std::vector<std::string>& tokens);
/// Mean of forward and backward factor counts at `threshold`, partial
/// factor included. Returns the token count when no factor completes.
double mtld(const std::vector<std::string>& tokens, double threshold = 0.72);
FeatureVector lexdiv_vector(const Instance& inst);

double word_overlap(const Instance& inst);
FeatureVector structural_vector(const Instance& inst);

struct TfidfSpace {
  Vocabulary vocab;
  std::vector<double> idf;
};

TfidfSpace fit_tfidf(const std::vector<std::string>& texts, std::size_t size);
double tfidf_cosine(const Instance& inst, const TfidfSpace& space);

// ---------------------------------------------------------------------------
// POS sidecar and embedding similarity

enum class PosTag { Noun, Verb, Other };

/// Tags aligned with text::tokenize() of each side; missing entries are Other.
struct PosSides {
  std::vector<PosTag> headline;
  std::vector<PosTag> body;
};

class PosAnnotation {
 public:
  void set(std::size_t instance, bool body, std::size_t token, PosTag tag);
  const PosSides* find(std::size_t instance) const;
  std::size_t size() const { return sides_.size(); }

 private:
  std::map<std::size_t, PosSides> sides_;
};

/// TSV `instance_index<TAB>side<TAB>token_index<TAB>tag`, side in
/// {headline, body}, tag in {NOUN, VERB, OTHER}.
PosAnnotation load_pos(const std::string& path);

/// Verb and noun embedding cosines, words per sentence and negation counts
/// per side. Without POS both selections use all alphabetic tokens and the
/// cosine names carry a "_nopos" suffix.
FeatureVector wsim_vector(const Instance& inst, const nn::EmbeddingTable& embeddings, const PosSides* pos);

/// Noun, verb and other counts per side.
FeatureVector pos_counts(const Instance& inst, const PosSides& pos);

// ---------------------------------------------------------------------------
// Pipelines

struct PipelineConfig {
  std::vector<Extractor> extractors = {Extractor::Bow, Extractor::Boc,    Extractor::Lsi,
                                       Extractor::Nmf, Extractor::NmfCos, Extractor::LdaCos};
  std::size_t bow_vocab = 5000;
  std::vector<std::size_t> bow_orders = {1, 2};
  bool bow_negation = true;
  std::size_t boc_vocab = 5000;
  std::size_t boc_n = 3;
  std::size_t tfidf_vocab = 5000;
  topics::TopicFitOptions topic;
  /// Also fit topic models on the texts passed as `extra_topic_texts`.
  bool topics_use_extra_texts = false;
  std::vector<std::string> lexicon_paths;
  std::string embeddings_path;
  std::size_t embedding_dim = 50;
  std::vector<std::string> refuting_words = default_refuting_words();
};

struct Block {
  Extractor extractor;
  std::size_t width = 0;
};

class FittedPipeline {
 public:
  const PipelineConfig& config() const { return config_; }
  bool has(Extractor e) const;
  /// Column names of extractor `e` as recorded at fit time.
  const std::vector<std::string>& names(Extractor e) const;
  std::size_t width(Extractor e) const { return names(e).size(); }
  bool pos_fitted() const { return pos_fitted_; }
  const nn::EmbeddingTable* embeddings() const { return embeddings_.get(); }
  const Vocabulary& bow_headline() const { return bow_h_; }
  const Vocabulary& bow_body() const { return bow_b_; }
  const Vocabulary& boc_headline() const { return boc_h_; }
  const Vocabulary& boc_body() const { return boc_b_; }
  const TfidfSpace& tfidf() const { return tfidf_; }
  /// Nullptr when that topic model was not fitted.
  const topics::TopicModel* topic_model(topics::TopicKind kind) const;
  const std::vector<Lexicon>& lexicons() const { return lexicons_; }

 private:
  friend FittedPipeline fit_pipeline(const Corpus&, const PipelineConfig&, const PosAnnotation*,
                                     const std::vector<std::string>*);
  friend std::vector<std::uint8_t> to_cbor(const FittedPipeline&);
  friend FittedPipeline from_cbor(const std::vector<std::uint8_t>&);

  PipelineConfig config_;
  Vocabulary bow_h_, bow_b_, boc_h_, boc_b_;
  TfidfSpace tfidf_;
  std::optional<topics::TopicModel> lsi_, nmf_, lda_;
  std::vector<Lexicon> lexicons_;
  std::shared_ptr<const nn::EmbeddingTable> embeddings_;
  bool pos_fitted_ = false;
  std::map<Extractor, std::vector<std::string>> layout_;
};

/// Fits every configured extractor on `train`. Vocabularies use the distinct
/// headline and body texts; topic models the union of both.
FittedPipeline fit_pipeline(const Corpus& train, const PipelineConfig& config, const PosAnnotation* pos = nullptr,
                            const std::vector<std::string>* extra_topic_texts = nullptr);

/// Values of one extractor for one instance (no caching).
FeatureVector extract_one(const FittedPipeline& pipeline, Extractor e, const Instance& inst,
                          const PosSides* pos = nullptr);

struct FeatureMatrix {
  Eigen::MatrixXd values;  ///< instances x features
  std::vector<std::string> names;
  std::vector<Block> blocks;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// Configured extractors belonging to `groups`, in configured order.
/// Throws when a requested group has no configured member.
std::vector<Extractor> select_groups(const PipelineConfig& config, const std::vector<Group>& groups);

/// Rows follow corpus order; columns the extractors in configured order.
/// Throws if an extractor was not fitted or its width differs from the layout.
FeatureMatrix extract(const FittedPipeline& pipeline, const Corpus& corpus, const std::vector<Extractor>& extractors,
                      const PosAnnotation* pos = nullptr);
FeatureMatrix extract(const FittedPipeline& pipeline, const Corpus& corpus, const std::vector<Group>& groups,
                      const PosAnnotation* pos = nullptr);

inline constexpr std::uint32_t kPipelineFormatVersion = 1;

/// Versioned CBOR document. Embedding tables are stored by path and reloaded.
std::vector<std::uint8_t> to_cbor(const FittedPipeline& pipeline);
FittedPipeline from_cbor(const std::vector<std::uint8_t>& bytes);
void save_pipeline(const FittedPipeline& pipeline, const std::string& path);
FittedPipeline load_pipeline(const std::string& path);

}  // namespace stance::features
