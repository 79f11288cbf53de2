#include "stance/features.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>


namespace stance::features {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Catalogue

namespace {

struct ExtractorInfo {
  Extractor e;
  const char* name;
  Group group;
};

constexpr ExtractorInfo kInfo[] = {
    {Extractor::Bow, "bow", Group::BoWC},
    {Extractor::Boc, "boc", Group::BoWC},
    {Extractor::Lsi, "lsi", Group::Topic},
    {Extractor::Nmf, "nmf", Group::Topic},
    {Extractor::NmfCos, "nmf_cos", Group::Topic},
    {Extractor::LdaCos, "lda_cos", Group::Topic},
    {Extractor::NrcPos, "nrc_pos", Group::Oth},
    {Extractor::Wsim, "wsim", Group::Oth},
    {Extractor::Cooc, "cooc", Group::Baseline},
    {Extractor::Refuting, "refuting", Group::Baseline},
    {Extractor::Polarity, "polarity", Group::Baseline},
    {Extractor::WordOverlap, "word_overlap", Group::Baseline},
    {Extractor::TfidfCos, "tfidf_cos", Group::Extra},
    {Extractor::Structural, "structural", Group::Extra},
    {Extractor::Readability, "readability", Group::Extra},
    {Extractor::Lexdiv, "lexdiv", Group::Extra},
};

const ExtractorInfo& info(Extractor e) {
  for (const auto& i : kInfo) {
    if (i.e == e) return i;
  }
  throw std::logic_error("unknown extractor");
}

}  // namespace

std::string_view to_string(Extractor e) { return info(e).name; }

Extractor parse_extractor(std::string_view s) {
  for (const auto& i : kInfo) {
    if (s == i.name) return i.e;
  }
  throw std::invalid_argument("unknown extractor: " + std::string(s));
}

std::string_view to_string(Group g) {
  switch (g) {
    case Group::BoWC:
      return "BoWC";
    case Group::Topic:
      return "Topic";
    case Group::Oth:
      return "Oth";
    case Group::Baseline:
      return "Baseline";
    case Group::Extra:
      return "Extra";
  }
  return "?";
}

Group parse_group(std::string_view s) {
  for (Group g : kAllGroups) {
    if (s == to_string(g)) return g;
  }
  if (s == "BoW/C") return Group::BoWC;
  throw std::invalid_argument("unknown feature group: " + std::string(s));
}

Group group_of(Extractor e) { return info(e).group; }

std::vector<Extractor> members(Group g) {
  std::vector<Extractor> out;
  for (const auto& i : kInfo) {
    if (i.group == g) out.push_back(i.e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Helpers

namespace {

std::vector<std::string> lower_words(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : text::tokenize(text)) {
    if (t.word) out.push_back(std::move(t.lower));
  }
  return out;
}

text::TokenSeq word_tokens(std::string_view text) {
  text::TokenSeq out;
  for (auto& t : text::tokenize(text)) {
    if (t.word) out.push_back(std::move(t));
  }
  return out;
}

FeatureVector counts_vector(const std::vector<double>& h, const std::vector<double>& b, const Vocabulary& vh,
                            const Vocabulary& vb) {
  FeatureVector out;
  out.names.reserve(h.size() + b.size());
  out.values.reserve(h.size() + b.size());
  for (std::size_t i = 0; i < h.size(); ++i) out.push("h:" + vh.entries()[i], h[i]);
  for (std::size_t i = 0; i < b.size(); ++i) out.push("b:" + vb.entries()[i], b[i]);
  return out;
}

}  // namespace

FeatureVector bow_vector(const Instance& inst, const Vocabulary& vocab_h, const Vocabulary& vocab_b) {
  return counts_vector(vocab_h.counts(inst.headline), vocab_b.counts(inst.body), vocab_h, vocab_b);
}

FeatureVector boc_vector(const Instance& inst, const Vocabulary& vocab_h, const Vocabulary& vocab_b) {
  return counts_vector(vocab_h.counts(inst.headline), vocab_b.counts(inst.body), vocab_h, vocab_b);
}

// ---------------------------------------------------------------------------
// Co-occurrence

namespace {

enum class CoocUnit { Word, Char, Stop };

struct CoocSpec {
  const char* name;
  CoocUnit unit;
  std::size_t n;
};

constexpr CoocSpec kCoocUnits[] = {
    {"w1", CoocUnit::Word, 1}, {"w2", CoocUnit::Word, 2},  {"w4", CoocUnit::Word, 4},
    {"c2", CoocUnit::Char, 2}, {"c4", CoocUnit::Char, 4},  {"c8", CoocUnit::Char, 8},
    {"c16", CoocUnit::Char, 16}, {"stop", CoocUnit::Stop, 1},
};

constexpr std::size_t kCoocScopes[] = {100, 255, 0};

std::vector<std::string> cooc_grams(std::string_view text, const CoocSpec& spec) {
  switch (spec.unit) {
    case CoocUnit::Word:
      return text::ngrams(word_tokens(text), spec.n);
    case CoocUnit::Char:
      return text::char_ngrams(text, spec.n);
    case CoocUnit::Stop: {
      std::vector<std::string> out;
      for (auto& w : lower_words(text)) {
        if (stopwords().count(w)) out.push_back(std::move(w));
      }
      return out;
    }
  }
  return {};
}

}  // namespace

FeatureVector cooc_vector(const Instance& inst) {
  FeatureVector out;
  std::string scopes[3];
  scopes[0] = text::utf8_prefix(inst.body, kCoocScopes[0]);
  scopes[1] = text::utf8_prefix(inst.body, kCoocScopes[1]);
  scopes[2] = inst.body;
  for (const auto& spec : kCoocUnits) {
    const auto hg = cooc_grams(inst.headline, spec);
    const std::unordered_set<std::string> headline_set(hg.begin(), hg.end());
    for (std::size_t s = 0; s < 3; ++s) {
      double count = 0.0;
      if (!headline_set.empty()) {
        for (const auto& g : cooc_grams(scopes[s], spec)) count += headline_set.count(g) ? 1.0 : 0.0;
      }
      const std::string scope = kCoocScopes[s] ? std::to_string(kCoocScopes[s]) : "all";
      out.push(std::string(spec.name) + "_" + scope, count);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Refuting words and polarity

const std::vector<std::string>& default_refuting_words() {
  static const std::vector<std::string> words = {"fake",    "fraud", "hoax",  "false", "deny",
                                                 "denies",  "not",   "despite", "nope", "doubt",
                                                 "doubts",  "bogus", "debunk", "pranks", "retract"};
  return words;
}

FeatureVector refuting_vector(const Instance& inst, const std::vector<std::string>& words) {
  const auto body = lower_words(inst.body);
  const std::unordered_set<std::string> present(body.begin(), body.end());
  FeatureVector out;
  for (const auto& w : words) out.push(w, present.count(w) ? 1.0 : 0.0);
  return out;
}

FeatureVector polarity_vector(const Instance& inst, const std::vector<std::string>& words) {
  const std::unordered_set<std::string> refuting(words.begin(), words.end());
  auto parity = [&](std::string_view text) {
    std::size_t n = 0;
    for (const auto& w : lower_words(text)) n += refuting.count(w);
    return static_cast<double>(n % 2);
  };
  FeatureVector out;
  out.push("h", parity(inst.headline));
  out.push("b", parity(inst.body));
  return out;
}

// ---------------------------------------------------------------------------
// Readability

ReadabilityScores readability(std::string_view text_in) {
  ReadabilityScores r;
  const auto sentences = text::split_sentences(text_in);
  std::size_t words = 0, syllables = 0, chars = 0, complex = 0, long_words = 0, mini = 0, n_sent = 0;
  std::size_t strain_syllables = 0;
  for (const auto& sent : sentences) {
    std::size_t in_sentence = 0;
    for (const auto& t : sent) {
      if (!t.word) continue;
      const std::size_t syl = text::count_syllables(t.lower);
      ++in_sentence;
      syllables += syl;
      chars += t.length;
      if (syl >= 3) ++complex;
      if (t.length > 6) ++long_words;
      if (t.length <= 3) ++mini;
      if (n_sent < 3) strain_syllables += syl;
    }
    words += in_sentence;
    if (in_sentence > 0) ++n_sent;
  }
  r.words = words;
  r.sentences = n_sent;
  if (words == 0) return r;
  const double w = static_cast<double>(words);
  const double s = static_cast<double>(n_sent);
  const double wps = w / s;
  const double spw = static_cast<double>(syllables) / w;
  r.flesch_reading_ease = 206.835 - 1.015 * wps - 84.6 * spw;
  r.flesch_kincaid_grade = 0.39 * wps + 11.8 * spw - 15.59;
  r.gunning_fog = 0.4 * (wps + 100.0 * static_cast<double>(complex) / w);
  const double letters_per_100 = 100.0 * static_cast<double>(chars) / w;
  const double sentences_per_100 = 100.0 * s / w;
  r.coleman_liau = 0.0588 * letters_per_100 - 0.296 * sentences_per_100 - 15.8;
  r.ari = 4.71 * static_cast<double>(chars) / w + 0.5 * wps - 21.43;
  r.lix = wps + 100.0 * static_cast<double>(long_words) / w;
  r.rix = static_cast<double>(long_words) / s;
  r.eflaw = (w + static_cast<double>(mini)) / s;
  r.strain = static_cast<double>(strain_syllables) / 10.0;
  if (n_sent >= 30) {
    r.smog_valid = true;
    r.smog = 1.043 * std::sqrt(static_cast<double>(complex) * 30.0 / s) + 3.1291;
  }
  return r;
}

FeatureVector readability_vector(const Instance& inst) {
  FeatureVector out;
  auto side = [&](const std::string& prefix, const ReadabilityScores& r) {
    out.push(prefix + "_fre", r.flesch_reading_ease);
    out.push(prefix + "_fkgl", r.flesch_kincaid_grade);
    out.push(prefix + "_fog", r.gunning_fog);
    out.push(prefix + "_cli", r.coleman_liau);
    out.push(prefix + "_ari", r.ari);
    out.push(prefix + "_lix", r.lix);
    out.push(prefix + "_rix", r.rix);
    out.push(prefix + "_eflaw", r.eflaw);
    out.push(prefix + "_strain", r.strain);
  };
  side("h", readability(inst.headline));
  const auto body = readability(inst.body);
  side("b", body);
  out.push("b_smog", body.smog);
  out.push("b_smog_valid", body.smog_valid ? 1.0 : 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Lexical diversity

double type_token_ratio(const std::vector<std::string>& tokens) {
  if (tokens.empty()) return 0.0;
  const std::unordered_set<std::string> types(tokens.begin(), tokens.end());
  return static_cast<double>(types.size()) / static_cast<double>(tokens.size());
}

namespace {

template <typename It>
double mtld_pass(It first, It last, double threshold) {
  double factors = 0.0;
  std::unordered_set<std::string> types;
  std::size_t count = 0;
  double ttr = 1.0;
  std::size_t total = 0;
  for (It it = first; it != last; ++it) {
    ++total;
    ++count;
    types.insert(*it);
    ttr = static_cast<double>(types.size()) / static_cast<double>(count);
    if (ttr <= threshold) {
      factors += 1.0;
      types.clear();
      count = 0;
      ttr = 1.0;
    }
  }
  if (count > 0) factors += (1.0 - ttr) / (1.0 - threshold);
  if (factors == 0.0) return static_cast<double>(total);
  return static_cast<double>(total) / factors;
}

}  // namespace

double mtld(const std::vector<std::string>& tokens, double threshold) {
  if (tokens.empty()) return 0.0;
  const double fwd = mtld_pass(tokens.begin(), tokens.end(), threshold);
  const double bwd = mtld_pass(tokens.rbegin(), tokens.rend(), threshold);
  return 0.5 * (fwd + bwd);
}

FeatureVector lexdiv_vector(const Instance& inst) {
  const auto h = lower_words(inst.headline);
  const auto b = lower_words(inst.body);
  const bool valid = b.size() >= 50;
  FeatureVector out;
  out.push("h_ttr", type_token_ratio(h));
  out.push("b_ttr", type_token_ratio(b));
  out.push("b_mtld", valid ? mtld(b) : 0.0);
  out.push("b_mtld_valid", valid ? 1.0 : 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Overlap, structure, TF-IDF

double word_overlap(const Instance& inst) {
  const auto h = lower_words(inst.headline);
  const auto b = lower_words(inst.body);
  const std::set<std::string> hs(h.begin(), h.end());
  const std::set<std::string> bs(b.begin(), b.end());
  std::vector<std::string> inter, uni;
  std::set_intersection(hs.begin(), hs.end(), bs.begin(), bs.end(), std::back_inserter(inter));
  std::set_union(hs.begin(), hs.end(), bs.begin(), bs.end(), std::back_inserter(uni));
  return uni.empty() ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

namespace {

double avg_length(const text::TokenSeq& words) {
  if (words.empty()) return 0.0;
  double total = 0.0;
  for (const auto& t : words) total += static_cast<double>(t.length);
  return total / static_cast<double>(words.size());
}

std::vector<std::string> paragraphs(std::string_view body) {
  std::vector<std::string> out;
  std::string current;
  bool has_text = false;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    std::size_t nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    std::string_view line = body.substr(pos, nl - pos);
    const bool blank = line.find_first_not_of(" \t\r\f\v") == std::string_view::npos;
    if (blank) {
      if (has_text) out.push_back(current);
      current.clear();
      has_text = false;
    } else {
      current.append(line);
      current.push_back('\n');
      has_text = true;
    }
    pos = nl + 1;
  }
  if (has_text) out.push_back(current);
  return out;
}

}  // namespace

FeatureVector structural_vector(const Instance& inst) {
  const auto h = word_tokens(inst.headline);
  const auto b = word_tokens(inst.body);
  const auto paras = paragraphs(inst.body);
  FeatureVector out;
  out.push("h_avg_word_len", avg_length(h));
  out.push("b_avg_word_len", avg_length(b));
  out.push("b_paragraphs", static_cast<double>(paras.size()));
  out.push("b_avg_paragraph_len", paras.empty() ? 0.0 : static_cast<double>(b.size()) / paras.size());
  return out;
}

TfidfSpace fit_tfidf(const std::vector<std::string>& texts, std::size_t size) {
  GramSpec spec;
  spec.unit = GramUnit::Word;
  spec.orders = {1, 2};
  TfidfSpace space;
  space.vocab = fit_vocabulary(texts, spec, size);
  space.idf = topics::fit_idf(texts, space.vocab);
  return space;
}

double tfidf_cosine(const Instance& inst, const TfidfSpace& space) {
  if (space.idf.size() != space.vocab.size() || space.vocab.size() == 0) {
    throw std::logic_error("tfidf space is not fitted");
  }
  const auto h = space.vocab.counts(inst.headline);
  const auto b = space.vocab.counts(inst.body);
  double dot = 0.0, nh = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = h[i] * space.idf[i];
    const double y = b[i] * space.idf[i];
    dot += x * y;
    nh += x * x;
    nb += y * y;
  }
  if (nh == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(nh * nb), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// POS and embedding similarity

void PosAnnotation::set(std::size_t instance, bool body, std::size_t token, PosTag tag) {
  auto& sides = sides_[instance];
  auto& tags = body ? sides.body : sides.headline;
  if (tags.size() <= token) tags.resize(token + 1, PosTag::Other);
  tags[token] = tag;
}

const PosSides* PosAnnotation::find(std::size_t instance) const {
  auto it = sides_.find(instance);
  return it == sides_.end() ? nullptr : &it->second;
}

PosAnnotation load_pos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open POS file: " + path);
  PosAnnotation pos;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    auto fail = [&](const std::string& what) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
    };
    if (f.size() != 4) fail("expected 4 tab-separated fields");
    std::size_t inst = 0, tok = 0;
    try {
      inst = std::stoul(f[0]);
      tok = std::stoul(f[2]);
    } catch (const std::exception&) {
      fail("bad index");
    }
    bool body;
    if (f[1] == "headline") {
      body = false;
    } else if (f[1] == "body") {
      body = true;
    } else {
      fail("side must be headline or body");
    }
    PosTag tag;
    if (f[3] == "NOUN") {
      tag = PosTag::Noun;
    } else if (f[3] == "VERB") {
      tag = PosTag::Verb;
    } else if (f[3] == "OTHER") {
      tag = PosTag::Other;
    } else {
      fail("unknown tag " + f[3]);
    }
    pos.set(inst, body, tok, tag);
  }
  return pos;
}

namespace {

PosTag tag_at(const std::vector<PosTag>& tags, std::size_t i) {
  return i < tags.size() ? tags[i] : PosTag::Other;
}

/// Mean embedding of the selected tokens that have a vector.
nn::Vec mean_embedding(const text::TokenSeq& toks, const std::vector<PosTag>* tags, PosTag want,
                       const nn::EmbeddingTable& emb) {
  nn::Vec sum = nn::Vec::Zero(static_cast<Eigen::Index>(emb.dim()));
  std::size_t n = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const bool selected = tags ? tag_at(*tags, i) == want : toks[i].alphabetic;
    if (!selected) continue;
    if (const auto* v = emb.find(toks[i].lower)) {
      for (std::size_t d = 0; d < v->size(); ++d) sum(static_cast<Eigen::Index>(d)) += (*v)[d];
      ++n;
    }
  }
  if (n > 0) sum /= static_cast<double>(n);
  return sum;
}

double words_per_sentence(std::string_view text) {
  const auto sents = text::split_sentences(text);
  std::size_t words = 0, n = 0;
  for (const auto& s : sents) {
    const auto w = text::count_words(s);
    words += w;
    if (w > 0) ++n;
  }
  return n == 0 ? 0.0 : static_cast<double>(words) / static_cast<double>(n);
}

double negation_count(const text::TokenSeq& toks) {
  double n = 0.0;
  for (const auto& t : toks) n += text::is_negation_keyword(t) ? 1.0 : 0.0;
  return n;
}

}  // namespace

FeatureVector wsim_vector(const Instance& inst, const nn::EmbeddingTable& embeddings, const PosSides* pos) {
  const auto h = text::tokenize(inst.headline);
  const auto b = text::tokenize(inst.body);
  const std::string suffix = pos ? "" : "_nopos";
  const auto* ht = pos ? &pos->headline : nullptr;
  const auto* bt = pos ? &pos->body : nullptr;
  FeatureVector out;
  out.push("verb_cos" + suffix, topics::cosine(mean_embedding(h, ht, PosTag::Verb, embeddings),
                                               mean_embedding(b, bt, PosTag::Verb, embeddings)));
  out.push("noun_cos" + suffix, topics::cosine(mean_embedding(h, ht, PosTag::Noun, embeddings),
                                               mean_embedding(b, bt, PosTag::Noun, embeddings)));
  out.push("h_words_per_sentence", words_per_sentence(inst.headline));
  out.push("b_words_per_sentence", words_per_sentence(inst.body));
  out.push("h_negations", negation_count(h));
  out.push("b_negations", negation_count(b));
  return out;
}

FeatureVector pos_counts(const Instance& inst, const PosSides& pos) {
  FeatureVector out;
  auto side = [&](const std::string& prefix, std::size_t n_tokens, const std::vector<PosTag>& tags) {
    double noun = 0, verb = 0, other = 0;
    for (std::size_t i = 0; i < n_tokens; ++i) {
      switch (tag_at(tags, i)) {
        case PosTag::Noun:
          ++noun;
          break;
        case PosTag::Verb:
          ++verb;
          break;
        case PosTag::Other:
          ++other;
          break;
      }
    }
    out.push(prefix + "_nouns", noun);
    out.push(prefix + "_verbs", verb);
    out.push(prefix + "_other", other);
  };
  side("h", text::tokenize(inst.headline).size(), pos.headline);
  side("b", text::tokenize(inst.body).size(), pos.body);
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

using TopicCache = std::map<topics::TopicKind, std::unordered_map<std::string, topics::Vec>>;

const topics::Vec& cached_fold_in(const topics::TopicModel& model, const std::string& text, TopicCache* cache,
                                  topics::Vec& scratch) {
  if (!cache) {
    scratch = topics::fold_in(model, text);
    return scratch;
  }
  auto& slot = (*cache)[model.kind];
  auto it = slot.find(text);
  if (it == slot.end()) it = slot.emplace(text, topics::fold_in(model, text)).first;
  return it->second;
}

const topics::TopicModel& require_topic(const FittedPipeline& p, topics::TopicKind kind, Extractor e) {
  const auto* m = p.topic_model(kind);
  if (!m) throw std::logic_error("extractor " + std::string(to_string(e)) + " is not fitted");
  return *m;
}

FeatureVector compute(const FittedPipeline& p, Extractor e, const Instance& inst, const PosSides* pos,
                      TopicCache* cache) {
  auto topic = [&](topics::TopicKind kind, topics::TopicMode mode) {
    const auto& model = require_topic(p, kind, e);
    topics::Vec hs, bs;
    const auto& h = cached_fold_in(model, inst.headline, cache, hs);
    const auto& b = cached_fold_in(model, inst.body, cache, bs);
    return topics::topic_features(model, h, b, mode);
  };
  switch (e) {
    case Extractor::Bow:
      return bow_vector(inst, p.bow_headline(), p.bow_body());
    case Extractor::Boc:
      return boc_vector(inst, p.boc_headline(), p.boc_body());
    case Extractor::Lsi:
      return topic(topics::TopicKind::Lsi, topics::TopicMode::Concat);
    case Extractor::Nmf:
      return topic(topics::TopicKind::Nmf, topics::TopicMode::Concat);
    case Extractor::NmfCos:
      return topic(topics::TopicKind::Nmf, topics::TopicMode::Cosine);
    case Extractor::LdaCos:
      return topic(topics::TopicKind::Lda, topics::TopicMode::Cosine);
    case Extractor::NrcPos: {
      if (p.lexicons().empty()) throw std::logic_error("extractor nrc_pos is not fitted");
      FeatureVector out;
      for (const auto& lex : p.lexicons()) out.append(lexicon_vector(inst, lex), lex.name + ".");
      if (p.pos_fitted()) {
        static const PosSides kEmpty;
        out.append(pos_counts(inst, pos ? *pos : kEmpty), "pos.");
      }
      return out;
    }
    case Extractor::Wsim: {
      if (!p.embeddings()) throw std::logic_error("extractor wsim is not fitted");
      static const PosSides kEmpty;
      return wsim_vector(inst, *p.embeddings(), p.pos_fitted() ? (pos ? pos : &kEmpty) : nullptr);
    }
    case Extractor::Cooc:
      return cooc_vector(inst);
    case Extractor::Refuting:
      return refuting_vector(inst, p.config().refuting_words);
    case Extractor::Polarity:
      return polarity_vector(inst, p.config().refuting_words);
    case Extractor::WordOverlap: {
      FeatureVector out;
      out.push("jaccard", word_overlap(inst));
      return out;
    }
    case Extractor::TfidfCos: {
      FeatureVector out;
      out.push("cos", tfidf_cosine(inst, p.tfidf()));
      return out;
    }
    case Extractor::Structural:
      return structural_vector(inst);
    case Extractor::Readability:
      return readability_vector(inst);
    case Extractor::Lexdiv:
      return lexdiv_vector(inst);
  }
  throw std::logic_error("unknown extractor");
}

bool configured(const PipelineConfig& c, Extractor e) {
  return std::find(c.extractors.begin(), c.extractors.end(), e) != c.extractors.end();
}

}  // namespace

bool FittedPipeline::has(Extractor e) const { return layout_.count(e) > 0; }

const std::vector<std::string>& FittedPipeline::names(Extractor e) const {
  auto it = layout_.find(e);
  if (it == layout_.end()) throw std::logic_error("extractor " + std::string(to_string(e)) + " is not fitted");
  return it->second;
}

const topics::TopicModel* FittedPipeline::topic_model(topics::TopicKind kind) const {
  switch (kind) {
    case topics::TopicKind::Lsi:
      return lsi_ ? &*lsi_ : nullptr;
    case topics::TopicKind::Nmf:
      return nmf_ ? &*nmf_ : nullptr;
    case topics::TopicKind::Lda:
      return lda_ ? &*lda_ : nullptr;
  }
  return nullptr;
}

namespace {

void record_layout(FittedPipeline& p, std::map<Extractor, std::vector<std::string>>& layout) {
  Instance probe;
  probe.headline = "x";
  probe.body = "x";
  static const PosSides kEmpty;
  for (Extractor e : p.config().extractors) {
    FeatureVector v = compute(p, e, probe, &kEmpty, nullptr);
    std::vector<std::string> names;
    names.reserve(v.names.size());
    for (auto& n : v.names) names.push_back(std::string(to_string(e)) + "." + n);
    layout[e] = std::move(names);
  }
}

}  // namespace

FittedPipeline fit_pipeline(const Corpus& train, const PipelineConfig& config, const PosAnnotation* pos,
                            const std::vector<std::string>* extra_topic_texts) {
  if (train.empty()) throw std::invalid_argument("cannot fit a pipeline on an empty corpus");
  {
    std::set<Extractor> seen;
    for (Extractor e : config.extractors) {
      if (!seen.insert(e).second) throw std::invalid_argument("extractor listed twice: " + std::string(to_string(e)));
    }
  }
  FittedPipeline p;
  p.config_ = config;

  std::vector<std::string> headlines;
  {
    std::set<std::string> seen;
    for (const auto& inst : train.instances()) {
      if (seen.insert(inst.headline).second) headlines.push_back(inst.headline);
    }
  }
  std::vector<std::string> bodies;
  for (const auto& [id, text] : train.bodies()) bodies.push_back(text);

  if (configured(config, Extractor::Bow)) {
    GramSpec spec;
    spec.orders = config.bow_orders;
    spec.negation = config.bow_negation;
    p.bow_h_ = fit_vocabulary(headlines, spec, config.bow_vocab);
    p.bow_b_ = fit_vocabulary(bodies, spec, config.bow_vocab);
  }
  if (configured(config, Extractor::Boc)) {
    GramSpec spec;
    spec.unit = GramUnit::Char;
    spec.orders = {config.boc_n};
    p.boc_h_ = fit_vocabulary(headlines, spec, config.boc_vocab);
    p.boc_b_ = fit_vocabulary(bodies, spec, config.boc_vocab);
  }
  std::vector<std::string> all_texts = headlines;
  all_texts.insert(all_texts.end(), bodies.begin(), bodies.end());
  if (configured(config, Extractor::TfidfCos)) p.tfidf_ = fit_tfidf(all_texts, config.tfidf_vocab);

  const bool want_lsi = configured(config, Extractor::Lsi);
  const bool want_nmf = configured(config, Extractor::Nmf) || configured(config, Extractor::NmfCos);
  const bool want_lda = configured(config, Extractor::LdaCos);
  if (want_lsi || want_nmf || want_lda) {
    std::vector<std::string> topic_texts = all_texts;
    if (config.topics_use_extra_texts && extra_topic_texts) {
      topic_texts.insert(topic_texts.end(), extra_topic_texts->begin(), extra_topic_texts->end());
    }
    if (want_lsi) p.lsi_ = topics::fit_topic_model(topics::TopicKind::Lsi, topic_texts, config.topic);
    if (want_nmf) p.nmf_ = topics::fit_topic_model(topics::TopicKind::Nmf, topic_texts, config.topic);
    if (want_lda) p.lda_ = topics::fit_topic_model(topics::TopicKind::Lda, topic_texts, config.topic);
  }

  if (configured(config, Extractor::NrcPos)) {
    if (config.lexicon_paths.empty()) throw std::invalid_argument("nrc_pos requires at least one lexicon");
    for (const auto& path : config.lexicon_paths) p.lexicons_.push_back(load_lexicon(path));
  }
  if (configured(config, Extractor::Wsim)) {
    if (config.embeddings_path.empty()) throw std::invalid_argument("wsim requires an embeddings file");
    p.embeddings_ = std::make_shared<const nn::EmbeddingTable>(
        nn::load_embeddings(config.embeddings_path, config.embedding_dim));
  }
  p.pos_fitted_ = pos != nullptr;

  record_layout(p, p.layout_);
  return p;
}

FeatureVector extract_one(const FittedPipeline& pipeline, Extractor e, const Instance& inst, const PosSides* pos) {
  if (!pipeline.has(e)) throw std::logic_error("extractor " + std::string(to_string(e)) + " is not fitted");
  return compute(pipeline, e, inst, pos, nullptr);
}

std::vector<Extractor> select_groups(const PipelineConfig& config, const std::vector<Group>& groups) {
  std::vector<Extractor> out;
  for (Group g : groups) {
    bool any = false;
    for (Extractor e : config.extractors) any = any || group_of(e) == g;
    if (!any) throw std::invalid_argument("no configured extractor in group " + std::string(to_string(g)));
  }
  for (Extractor e : config.extractors) {
    if (std::find(groups.begin(), groups.end(), group_of(e)) != groups.end()) out.push_back(e);
  }
  return out;
}

FeatureMatrix extract(const FittedPipeline& pipeline, const Corpus& corpus, const std::vector<Extractor>& extractors,
                      const PosAnnotation* pos) {
  // Configured order regardless of the order requested.
  std::vector<Extractor> order;
  for (Extractor e : extractors) {
    if (!pipeline.has(e)) throw std::logic_error("extractor " + std::string(to_string(e)) + " is not fitted");
  }
  for (Extractor e : pipeline.config().extractors) {
    if (std::find(extractors.begin(), extractors.end(), e) != extractors.end()) order.push_back(e);
  }
  const bool needs_pos = pipeline.pos_fitted() && std::any_of(order.begin(), order.end(), [](Extractor e) {
                           return e == Extractor::NrcPos || e == Extractor::Wsim;
                         });
  if (needs_pos && !pos) throw std::invalid_argument("pipeline was fitted with POS tags; none were supplied");

  FeatureMatrix fm;
  std::size_t width = 0;
  for (Extractor e : order) {
    const auto& names = pipeline.names(e);
    fm.blocks.push_back({e, names.size()});
    fm.names.insert(fm.names.end(), names.begin(), names.end());
    width += names.size();
  }
  fm.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(corpus.size()), static_cast<Eigen::Index>(width));
  TopicCache cache;
  static const PosSides kEmpty;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const PosSides* sides = nullptr;
    if (needs_pos) {
      sides = pos->find(i);
      if (!sides) sides = &kEmpty;
    }
    Eigen::Index col = 0;
    for (const auto& block : fm.blocks) {
      const FeatureVector v = compute(pipeline, block.extractor, corpus[i], sides, &cache);
      if (v.size() != block.width) {
        throw std::logic_error("extractor " + std::string(to_string(block.extractor)) + " produced " +
                               std::to_string(v.size()) + " values, layout has " + std::to_string(block.width));
      }
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double x = v.values[j];
        fm.values(static_cast<Eigen::Index>(i), col++) = std::isfinite(x) ? x : 0.0;
      }
    }
  }
  return fm;
}

FeatureMatrix extract(const FittedPipeline& pipeline, const Corpus& corpus, const std::vector<Group>& groups,
                      const PosAnnotation* pos) {
  return extract(pipeline, corpus, select_groups(pipeline.config(), groups), pos);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

static_assert(std::endian::native == std::endian::little, "artifact encoding assumes a little-endian host");

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(m.size()) * sizeof(double));
  if (!bytes.empty()) std::memcpy(bytes.data(), m.data(), bytes.size());
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", json::binary(std::move(bytes))}};
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& bytes = j.at("data").get_binary();
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double)) {
    throw std::runtime_error("pipeline artifact: matrix payload size mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  if (!bytes.empty()) std::memcpy(m.data(), bytes.data(), bytes.size());
  return m;
}

json vocab_json(const Vocabulary& v) {
  const auto& s = v.spec();
  return json{{"unit", s.unit == GramUnit::Word ? "word" : "char"},
              {"orders", s.orders},
              {"negation", s.negation},
              {"drop_stopwords", s.drop_stopwords},
              {"entries", v.entries()}};
}

Vocabulary vocab_from(const json& j) {
  GramSpec s;
  s.unit = j.at("unit").get<std::string>() == "word" ? GramUnit::Word : GramUnit::Char;
  s.orders = j.at("orders").get<std::vector<std::size_t>>();
  s.negation = j.at("negation").get<bool>();
  s.drop_stopwords = j.at("drop_stopwords").get<bool>();
  return Vocabulary(s, j.at("entries").get<std::vector<std::string>>());
}

json topic_json(const topics::TopicModel& m) {
  json j{{"kind", std::string(topics::to_string(m.kind))},
         {"vocab", vocab_json(m.vocab)},
         {"weighting", m.weighting == topics::Weighting::Tf ? "tf" : "tfidf"},
         {"idf", m.idf}};
  if (const auto* nmf = std::get_if<topics::NmfModel>(&m.model)) {
    j["h"] = matrix_json(nmf->h);
    j["k"] = nmf->k;
    j["objective"] = nmf->objective;
  } else if (const auto* lsi = std::get_if<topics::LsiModel>(&m.model)) {
    j["projection"] = matrix_json(lsi->projection);
    j["basis"] = matrix_json(lsi->basis);
    j["singular_values"] = matrix_json(lsi->singular_values);
    j["iterations"] = lsi->iterations;
    j["converged"] = lsi->converged;
  } else {
    const auto& lda = std::get<topics::LdaModel>(m.model);
    j["phi"] = matrix_json(lda.phi);
    j["alpha"] = lda.alpha;
    j["beta"] = lda.beta;
    j["seed"] = lda.seed;
  }
  return j;
}

topics::TopicModel topic_from(const json& j) {
  topics::TopicModel m;
  const auto kind = j.at("kind").get<std::string>();
  m.vocab = vocab_from(j.at("vocab"));
  m.weighting = j.at("weighting").get<std::string>() == "tf" ? topics::Weighting::Tf : topics::Weighting::TfIdf;
  m.idf = j.at("idf").get<std::vector<double>>();
  if (kind == "nmf") {
    m.kind = topics::TopicKind::Nmf;
    topics::NmfModel nmf;
    nmf.h = matrix_from(j.at("h"));
    nmf.k = j.at("k").get<std::size_t>();
    nmf.objective = j.at("objective").get<std::vector<double>>();
    m.model = std::move(nmf);
  } else if (kind == "lsi") {
    m.kind = topics::TopicKind::Lsi;
    topics::LsiModel lsi;
    lsi.projection = matrix_from(j.at("projection"));
    lsi.basis = matrix_from(j.at("basis"));
    lsi.singular_values = matrix_from(j.at("singular_values")).col(0);
    lsi.iterations = j.at("iterations").get<std::size_t>();
    lsi.converged = j.at("converged").get<bool>();
    m.model = std::move(lsi);
  } else if (kind == "lda") {
    m.kind = topics::TopicKind::Lda;
    topics::LdaModel lda;
    lda.phi = matrix_from(j.at("phi"));
    lda.alpha = j.at("alpha").get<double>();
    lda.beta = j.at("beta").get<double>();
    lda.seed = j.at("seed").get<std::uint64_t>();
    m.model = std::move(lda);
  } else {
    throw std::runtime_error("pipeline artifact: unknown topic kind " + kind);
  }
  return m;
}

json lexicon_json(const Lexicon& l) {
  json j{{"name", l.name}, {"kind", l.kind == LexiconKind::Polarity ? "polarity" : "emotion"}, {"bigrams", l.has_bigrams}};
  // Sorted for a stable byte encoding.
  if (l.kind == LexiconKind::Polarity) {
    std::map<std::string, double> sorted(l.scores.begin(), l.scores.end());
    j["scores"] = sorted;
  } else {
    std::map<std::string, EmotionCounts> sorted(l.emotions.begin(), l.emotions.end());
    j["emotions"] = sorted;
  }
  return j;
}

Lexicon lexicon_from(const json& j) {
  Lexicon l;
  l.name = j.at("name").get<std::string>();
  l.kind = j.at("kind").get<std::string>() == "polarity" ? LexiconKind::Polarity : LexiconKind::Emotion;
  l.has_bigrams = j.at("bigrams").get<bool>();
  if (l.kind == LexiconKind::Polarity) {
    for (const auto& [k, v] : j.at("scores").items()) l.scores[k] = v.get<double>();
  } else {
    for (const auto& [k, v] : j.at("emotions").items()) l.emotions[k] = v.get<EmotionCounts>();
  }
  return l;
}

std::vector<std::string> extractor_names(const std::vector<Extractor>& es) {
  std::vector<std::string> out;
  for (Extractor e : es) out.emplace_back(to_string(e));
  return out;
}

json config_json(const PipelineConfig& c) {
  return json{{"extractors", extractor_names(c.extractors)},
              {"bow_vocab", c.bow_vocab},
              {"bow_orders", c.bow_orders},
              {"bow_negation", c.bow_negation},
              {"boc_vocab", c.boc_vocab},
              {"boc_n", c.boc_n},
              {"tfidf_vocab", c.tfidf_vocab},
              {"topic_k", c.topic.k},
              {"topic_vocab", c.topic.vocab_size},
              {"nmf_iterations", c.topic.nmf_iterations},
              {"lda_iterations", c.topic.lda_iterations},
              {"lda_alpha", c.topic.lda_alpha},
              {"lda_beta", c.topic.lda_beta},
              {"topic_seed", c.topic.seed},
              {"topics_use_extra_texts", c.topics_use_extra_texts},
              {"lexicon_paths", c.lexicon_paths},
              {"embeddings_path", c.embeddings_path},
              {"embedding_dim", c.embedding_dim},
              {"refuting_words", c.refuting_words}};
}

PipelineConfig config_from(const json& j) {
  PipelineConfig c;
  c.extractors.clear();
  for (const auto& n : j.at("extractors")) c.extractors.push_back(parse_extractor(n.get<std::string>()));
  c.bow_vocab = j.at("bow_vocab");
  c.bow_orders = j.at("bow_orders").get<std::vector<std::size_t>>();
  c.bow_negation = j.at("bow_negation");
  c.boc_vocab = j.at("boc_vocab");
  c.boc_n = j.at("boc_n");
  c.tfidf_vocab = j.at("tfidf_vocab");
  c.topic.k = j.at("topic_k");
  c.topic.vocab_size = j.at("topic_vocab");
  c.topic.nmf_iterations = j.at("nmf_iterations");
  c.topic.lda_iterations = j.at("lda_iterations");
  c.topic.lda_alpha = j.at("lda_alpha");
  c.topic.lda_beta = j.at("lda_beta");
  c.topic.seed = j.at("topic_seed");
  c.topics_use_extra_texts = j.at("topics_use_extra_texts");
  c.lexicon_paths = j.at("lexicon_paths").get<std::vector<std::string>>();
  c.embeddings_path = j.at("embeddings_path");
  c.embedding_dim = j.at("embedding_dim");
  c.refuting_words = j.at("refuting_words").get<std::vector<std::string>>();
  return c;
}

}  // namespace

std::vector<std::uint8_t> to_cbor(const FittedPipeline& p) {
  json j;
  j["format"] = "stance-pipeline";
  j["version"] = kPipelineFormatVersion;
  j["config"] = config_json(p.config_);
  j["bow_h"] = vocab_json(p.bow_h_);
  j["bow_b"] = vocab_json(p.bow_b_);
  j["boc_h"] = vocab_json(p.boc_h_);
  j["boc_b"] = vocab_json(p.boc_b_);
  j["tfidf"] = json{{"vocab", vocab_json(p.tfidf_.vocab)}, {"idf", p.tfidf_.idf}};
  json tm = json::object();
  if (p.lsi_) tm["lsi"] = topic_json(*p.lsi_);
  if (p.nmf_) tm["nmf"] = topic_json(*p.nmf_);
  if (p.lda_) tm["lda"] = topic_json(*p.lda_);
  j["topics"] = tm;
  json lex = json::array();
  for (const auto& l : p.lexicons_) lex.push_back(lexicon_json(l));
  j["lexicons"] = lex;
  j["pos_fitted"] = p.pos_fitted_;
  json layout = json::array();
  for (Extractor e : p.config_.extractors) layout.push_back(json{{"extractor", to_string(e)}, {"names", p.names(e)}});
  j["layout"] = layout;
  return json::to_cbor(j);
}

FittedPipeline from_cbor(const std::vector<std::uint8_t>& bytes) {
  json j;
  try {
    j = json::from_cbor(bytes);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("pipeline artifact is not valid CBOR: ") + e.what());
  }
  if (j.value("format", "") != "stance-pipeline") throw std::runtime_error("not a pipeline artifact");
  const auto version = j.at("version").get<std::uint32_t>();
  if (version != kPipelineFormatVersion) {
    throw std::runtime_error("unsupported pipeline artifact version " + std::to_string(version));
  }
  FittedPipeline p;
  p.config_ = config_from(j.at("config"));
  p.bow_h_ = vocab_from(j.at("bow_h"));
  p.bow_b_ = vocab_from(j.at("bow_b"));
  p.boc_h_ = vocab_from(j.at("boc_h"));
  p.boc_b_ = vocab_from(j.at("boc_b"));
  p.tfidf_.vocab = vocab_from(j.at("tfidf").at("vocab"));
  p.tfidf_.idf = j.at("tfidf").at("idf").get<std::vector<double>>();
  const auto& tm = j.at("topics");
  if (tm.contains("lsi")) p.lsi_ = topic_from(tm.at("lsi"));
  if (tm.contains("nmf")) p.nmf_ = topic_from(tm.at("nmf"));
  if (tm.contains("lda")) p.lda_ = topic_from(tm.at("lda"));
  for (const auto& l : j.at("lexicons")) p.lexicons_.push_back(lexicon_from(l));
  p.pos_fitted_ = j.at("pos_fitted").get<bool>();
  for (const auto& entry : j.at("layout")) {
    p.layout_[parse_extractor(entry.at("extractor").get<std::string>())] =
        entry.at("names").get<std::vector<std::string>>();
  }
  if (configured(p.config_, Extractor::Wsim)) {
    p.embeddings_ = std::make_shared<const nn::EmbeddingTable>(
        nn::load_embeddings(p.config_.embeddings_path, p.config_.embedding_dim));
  }
  return p;
}

void save_pipeline(const FittedPipeline& pipeline, const std::string& path) {
  const auto bytes = to_cbor(pipeline);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

FittedPipeline load_pipeline(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_cbor(bytes);
}

}  // namespace stance::features
