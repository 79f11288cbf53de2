#include "stance/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "stance/csv.hpp"
#include "stance/random.hpp"
#include "stance/textproc.hpp"

namespace stance {
namespace {

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

std::int64_t parse_id(const std::string& s, const std::string& source, std::size_t line) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw csv::ParseError(source, line, "invalid body id '" + s + "'");
  }
  if (pos != s.size()) throw csv::ParseError(source, line, "invalid body id '" + s + "'");
  return v;
}

}  // namespace

std::string_view to_string(Stance s) {
  switch (s) {
    case Stance::Agree: return "agree";
    case Stance::Disagree: return "disagree";
    case Stance::Discuss: return "discuss";
    case Stance::Unrelated: return "unrelated";
  }
  throw std::logic_error("bad stance");
}

std::string_view short_name(Stance s) {
  switch (s) {
    case Stance::Agree: return "AGR";
    case Stance::Disagree: return "DSG";
    case Stance::Discuss: return "DSC";
    case Stance::Unrelated: return "UNR";
  }
  throw std::logic_error("bad stance");
}

Stance parse_stance(std::string_view s) {
  for (Stance st : kAllStances)
    if (to_string(st) == s) return st;
  throw std::invalid_argument("unknown stance '" + std::string(s) + "'");
}

Corpus::Corpus(std::string name, std::vector<Instance> instances)
    : name_(std::move(name)), instances_(std::move(instances)) {
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    const auto& inst = instances_[i];
    if (blank(inst.headline))
      throw std::invalid_argument(name_ + ": empty headline at instance " + std::to_string(i));
    if (blank(inst.body))
      throw std::invalid_argument(name_ + ": empty body at instance " + std::to_string(i));
    auto [it, inserted] = bodies_.emplace(inst.body_id, inst.body);
    if (!inserted && it->second != inst.body)
      throw std::invalid_argument(name_ + ": body id " + std::to_string(inst.body_id) +
                                  " maps to two different texts");
  }
}

bool Corpus::fully_labeled() const {
  return std::all_of(instances_.begin(), instances_.end(),
                     [](const Instance& i) { return i.stance.has_value(); });
}

bool Corpus::has_topics() const {
  return !instances_.empty() && std::all_of(instances_.begin(), instances_.end(),
                                            [](const Instance& i) { return i.topic.has_value(); });
}

std::vector<Stance> Corpus::labels() const {
  std::vector<Stance> out;
  out.reserve(instances_.size());
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (!instances_[i].stance)
      throw std::invalid_argument(name_ + ": instance " + std::to_string(i) + " is unlabeled");
    out.push_back(*instances_[i].stance);
  }
  return out;
}

Corpus Corpus::subset(const std::vector<std::size_t>& indices, std::string name) const {
  std::vector<Instance> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(instances_.at(i));
  return Corpus(std::move(name), std::move(out));
}

Corpus Corpus::without_labels() const {
  std::vector<Instance> out = instances_;
  for (auto& i : out) i.stance.reset();
  return Corpus(name_, std::move(out));
}

Corpus Corpus::renamed(std::string name) const {
  Corpus c = *this;
  c.name_ = std::move(name);
  return c;
}

Corpus load_fnc(const std::string& stances_path, const std::string& bodies_path, std::string name) {
  auto body_rows = csv::read_table(bodies_path, {"Body ID", "articleBody"});
  std::unordered_map<std::int64_t, std::string> bodies;
  for (auto& r : body_rows) {
    std::int64_t id = parse_id(r.fields[0], bodies_path, r.line);
    if (!bodies.emplace(id, std::move(r.fields[1])).second)
      throw csv::ParseError(bodies_path, r.line, "duplicate body id " + std::to_string(id));
  }

  std::vector<std::string> header;
  auto rows = csv::read_table(stances_path, {"Headline", "Body ID"}, &header);
  const bool has_stance = header.size() >= 3 && header[2] == "Stance";
  std::size_t topic_col = 0;
  for (std::size_t c = 2; c < header.size(); ++c)
    if (header[c] == "Topic") topic_col = c;

  std::vector<Instance> instances;
  instances.reserve(rows.size());
  for (auto& r : rows) {
    Instance inst;
    inst.headline = std::move(r.fields[0]);
    inst.body_id = parse_id(r.fields[1], stances_path, r.line);
    auto it = bodies.find(inst.body_id);
    if (it == bodies.end())
      throw csv::ParseError(stances_path, r.line,
                            "unresolved body id " + std::to_string(inst.body_id));
    inst.body = it->second;
    if (has_stance) {
      try {
        inst.stance = parse_stance(r.fields[2]);
      } catch (const std::invalid_argument& e) {
        throw csv::ParseError(stances_path, r.line, e.what());
      }
    }
    if (topic_col) inst.topic = r.fields[topic_col];
    instances.push_back(std::move(inst));
  }
  return Corpus(std::move(name), std::move(instances));
}

void write_fnc(const Corpus& corpus, const std::string& stances_path, const std::string& bodies_path) {
  std::ofstream st(stances_path, std::ios::binary);
  if (!st) throw std::runtime_error("cannot write " + stances_path);
  const bool topics = corpus.has_topics();
  const bool labeled = corpus.fully_labeled();
  std::vector<std::string> header = {"Headline", "Body ID"};
  if (labeled) header.push_back("Stance");
  if (topics) header.push_back("Topic");
  csv::write_row(st, header);
  for (const auto& inst : corpus.instances()) {
    std::vector<std::string> row = {inst.headline, std::to_string(inst.body_id)};
    if (labeled) row.emplace_back(to_string(*inst.stance));
    if (topics) row.push_back(*inst.topic);
    csv::write_row(st, row);
  }
  std::ofstream bd(bodies_path, std::ios::binary);
  if (!bd) throw std::runtime_error("cannot write " + bodies_path);
  csv::write_row(bd, {"Body ID", "articleBody"});
  for (const auto& [id, text] : corpus.bodies()) csv::write_row(bd, {std::to_string(id), text});
}

std::vector<ArcRecord> load_arc_records(const std::string& path) {
  auto rows = csv::read_table(path, {"topic_id", "post", "claim_a", "claim_b", "worker_choice"});
  std::vector<ArcRecord> out;
  out.reserve(rows.size());
  for (auto& r : rows) {
    ArcRecord rec;
    rec.topic_id = std::move(r.fields[0]);
    rec.post = std::move(r.fields[1]);
    rec.claim_a = std::move(r.fields[2]);
    rec.claim_b = std::move(r.fields[3]);
    const std::string& wc = r.fields[4];
    if (wc == "A") rec.worker_choice = WorkerChoice::A;
    else if (wc == "B") rec.worker_choice = WorkerChoice::B;
    else if (wc == "NEITHER") rec.worker_choice = WorkerChoice::Neither;
    else throw csv::ParseError(path, r.line, "worker_choice must be A, B or NEITHER, got '" + wc + "'");
    if (rec.claim_a == rec.claim_b) throw csv::ParseError(path, r.line, "claim_a equals claim_b");
    out.push_back(std::move(rec));
  }
  return out;
}

Corpus derive_arc(const std::vector<ArcRecord>& records, std::size_t unrelated_per_post,
                  std::uint64_t seed, std::string name) {
  // Distinct claims grouped by topic so one topic's claims form a contiguous
  // block of the pool and can be skipped by index arithmetic.
  std::vector<std::string> topic_order;
  std::unordered_map<std::string, std::size_t> topic_index;
  std::vector<std::vector<std::string>> topic_claims;
  std::vector<std::set<std::string>> seen;
  for (const auto& rec : records) {
    if (rec.claim_a == rec.claim_b)
      throw std::invalid_argument("derive_arc: record in topic '" + rec.topic_id +
                                  "' has identical claims");
    auto [it, inserted] = topic_index.emplace(rec.topic_id, topic_order.size());
    if (inserted) {
      topic_order.push_back(rec.topic_id);
      topic_claims.emplace_back();
      seen.emplace_back();
    }
    for (const std::string* c : {&rec.claim_a, &rec.claim_b}) {
      if (seen[it->second].insert(*c).second) topic_claims[it->second].push_back(*c);
    }
  }
  std::vector<std::size_t> offset(topic_claims.size() + 1, 0);
  for (std::size_t t = 0; t < topic_claims.size(); ++t)
    offset[t + 1] = offset[t] + topic_claims[t].size();
  const std::size_t total_claims = offset.back();

  if (unrelated_per_post > 0 && topic_order.size() < 2)
    throw std::invalid_argument("derive_arc: unrelated sampling needs at least two topics");

  std::vector<Instance> out;
  out.reserve(records.size() * (1 + unrelated_per_post));
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    Rng rng(derive_seed(seed, r));
    const bool pick_a = rng.uniform() < 0.5;
    Instance rel;
    rel.headline = pick_a ? rec.claim_a : rec.claim_b;
    rel.body_id = static_cast<std::int64_t>(r);
    rel.body = rec.post;
    rel.topic = rec.topic_id;
    switch (rec.worker_choice) {
      case WorkerChoice::Neither: rel.stance = Stance::Discuss; break;
      case WorkerChoice::A: rel.stance = pick_a ? Stance::Agree : Stance::Disagree; break;
      case WorkerChoice::B: rel.stance = pick_a ? Stance::Disagree : Stance::Agree; break;
    }
    out.push_back(std::move(rel));

    if (unrelated_per_post == 0) continue;
    const std::size_t t = topic_index.at(rec.topic_id);
    const std::size_t own = topic_claims[t].size();
    const std::size_t pool = total_claims - own;
    if (unrelated_per_post > pool)
      throw std::invalid_argument("derive_arc: " + std::to_string(unrelated_per_post) +
                                  " unrelated claims requested but only " + std::to_string(pool) +
                                  " cross-topic claims exist for topic '" + rec.topic_id + "'");
    for (std::size_t j : rng.sample_without_replacement(pool, unrelated_per_post)) {
      const std::size_t g = j < offset[t] ? j : j + own;
      const std::size_t owner =
          static_cast<std::size_t>(std::upper_bound(offset.begin(), offset.end(), g) - offset.begin()) - 1;
      Instance unr;
      unr.headline = topic_claims[owner][g - offset[owner]];
      unr.body_id = static_cast<std::int64_t>(r);
      unr.body = rec.post;
      unr.stance = Stance::Unrelated;
      unr.topic = rec.topic_id;
      out.push_back(std::move(unr));
    }
  }
  return Corpus(std::move(name), std::move(out));
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.n_instances = corpus.size();
  std::set<std::string> headlines;
  std::map<Stance, std::size_t> counts;
  std::size_t labeled = 0;
  for (const auto& inst : corpus.instances()) {
    headlines.insert(inst.headline);
    if (inst.stance) {
      ++counts[*inst.stance];
      ++labeled;
    }
  }
  s.n_headlines = headlines.size();
  s.n_bodies = corpus.bodies().size();
  if (s.n_bodies) {
    double tokens = 0;
    for (const auto& [id, body] : corpus.bodies()) tokens += static_cast<double>(text::tokenize(body).size());
    s.mean_tokens_per_body = tokens / static_cast<double>(s.n_bodies);
  }
  if (labeled) {
    for (const auto& [st, c] : counts)
      s.label_fractions[st] = static_cast<double>(c) / static_cast<double>(labeled);
  }
  return s;
}

std::size_t holdout_test_size(std::size_t n, double test_fraction) {
  auto t = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction + 0.5));
  return std::clamp<std::size_t>(t, 1, n - 1);
}

std::vector<std::size_t> fold_sizes(std::size_t n, std::size_t k) {
  std::vector<std::size_t> sizes(k, n / k);
  for (std::size_t i = 0; i < n % k; ++i) ++sizes[i];
  return sizes;
}

namespace {

// Groups of instance indices that must stay together: one per instance, or
// one per topic in first-appearance order.
std::vector<std::vector<std::size_t>> split_units(const Corpus& corpus, SplitUnit unit) {
  std::vector<std::vector<std::size_t>> units;
  if (unit == SplitUnit::Instance) {
    units.resize(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) units[i] = {i};
    return units;
  }
  if (!corpus.has_topics())
    throw std::invalid_argument(corpus.name() + ": topic-level split requested but no topic ids present");
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto [it, inserted] = idx.emplace(*corpus[i].topic, units.size());
    if (inserted) units.emplace_back();
    units[it->second].push_back(i);
  }
  return units;
}

std::vector<std::size_t> flatten(const std::vector<std::vector<std::size_t>>& units,
                                 const std::vector<std::size_t>& order, std::size_t begin,
                                 std::size_t end) {
  std::vector<std::size_t> out;
  for (std::size_t u = begin; u < end; ++u)
    for (std::size_t i : units[order[u]]) out.push_back(i);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::pair<Corpus, Corpus> split_holdout(const Corpus& corpus, double test_fraction,
                                        std::uint64_t seed, SplitUnit unit) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split_holdout: test_fraction must lie in (0, 1)");
  auto units = split_units(corpus, unit);
  if (units.size() < 2) throw std::invalid_argument("split_holdout: need at least 2 split units");
  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n_test = holdout_test_size(units.size(), test_fraction);
  const std::size_t n_train = units.size() - n_test;
  return {corpus.subset(flatten(units, order, 0, n_train), corpus.name() + "-train"),
          corpus.subset(flatten(units, order, n_train, units.size()), corpus.name() + "-test")};
}

std::vector<Fold> kfold(const Corpus& corpus, std::size_t k, std::uint64_t seed, SplitUnit unit) {
  if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
  auto units = split_units(corpus, unit);
  if (k > units.size())
    throw std::invalid_argument("kfold: k=" + std::to_string(k) + " exceeds " +
                                std::to_string(units.size()) + " split units");
  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  auto sizes = fold_sizes(units.size(), k);
  std::vector<Fold> folds;
  folds.reserve(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t end = start + sizes[f];
    std::vector<std::size_t> train_units;
    for (std::size_t u = 0; u < units.size(); ++u)
      if (u < start || u >= end) train_units.push_back(u);
    std::vector<std::size_t> train_idx;
    for (std::size_t u : train_units)
      for (std::size_t i : units[order[u]]) train_idx.push_back(i);
    std::sort(train_idx.begin(), train_idx.end());
    const std::string tag = corpus.name() + "-fold" + std::to_string(f);
    folds.push_back({corpus.subset(train_idx, tag + "-train"),
                     corpus.subset(flatten(units, order, start, end), tag + "-dev")});
    start = end;
  }
  return folds;
}

Corpus resample(const Corpus& corpus, ResampleStrategy strategy, std::uint64_t seed) {
  if (corpus.empty() || !corpus.fully_labeled())
    throw std::invalid_argument("resample: corpus must be non-empty and fully labeled");
  std::array<std::vector<std::size_t>, kNumStances> by_class;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_class[index_of(*corpus[i].stance)].push_back(i);

  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& c : by_class) {
    if (c.empty()) continue;
    lo = std::min(lo, c.size());
    hi = std::max(hi, c.size());
  }
  Rng rng(seed);
  std::vector<std::size_t> picked;
  for (const auto& members : by_class) {
    if (members.empty()) continue;
    if (strategy == ResampleStrategy::Undersample) {
      for (std::size_t j : rng.sample_without_replacement(members.size(), lo)) picked.push_back(members[j]);
    } else {
      picked.insert(picked.end(), members.begin(), members.end());
      for (std::size_t e = members.size(); e < hi; ++e) picked.push_back(members[rng.below(members.size())]);
    }
  }
  rng.shuffle(picked);
  return corpus.subset(picked, corpus.name() + (strategy == ResampleStrategy::Undersample ? "-under" : "-over"));
}

}  // namespace stance
