#pragma once

// Shared fixtures for the unit and acceptance tests: temporary directories,
// a seeded synthetic stance corpus and matching embedding files.

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "stance/corpus.hpp"
#include "stance/random.hpp"

namespace stance::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("stance_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string data_path(const std::string& name) { return std::string(STANCE_TEST_DATA) + "/" + name; }

/// Letters-only pseudo word for topic `t`, slot `j`.
inline std::string topic_word(std::size_t t, std::size_t j) {
  std::string w = "z";
  w += static_cast<char>('a' + t % 26);
  w += static_cast<char>('a' + j % 26);
  w += static_cast<char>('a' + (j / 26) % 26);
  w += "ok";
  return w;
}

inline const std::array<std::vector<std::string>, 3>& stance_markers() {
  static const std::array<std::vector<std::string>, 3> m = {
      std::vector<std::string>{"confirmed", "verified", "official"},
      std::vector<std::string>{"hoax", "fabricated", "debunked"},
      std::vector<std::string>{"reportedly", "allegedly", "rumoured"}};
  return m;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> f = {"the", "report", "said", "people", "today", "city", "news", "week"};
  return f;
}

struct SyntheticOptions {
  std::size_t n = 200;
  std::uint64_t seed = 1;
  std::size_t topics = 8;
  std::size_t words_per_topic = 20;
  std::string name = "SYN";
  /// Labels cycle AGR, DSG, DSC, UNR; when false every label is UNR except
  /// every `related_every`-th instance.
  bool balanced = true;
  std::size_t related_every = 4;
};

/// Separable corpus: related bodies share topic words with the headline and
/// carry a stance marker; unrelated bodies come from another topic and carry
/// a random marker.
inline Corpus synthetic_corpus(const SyntheticOptions& opt) {
  Rng rng(opt.seed);
  std::vector<Instance> out;
  auto pick_words = [&](std::size_t topic, std::size_t count) {
    std::string s;
    for (std::size_t i = 0; i < count; ++i) {
      s += (s.empty() ? "" : " ") + topic_word(topic, rng.below(opt.words_per_topic));
    }
    return s;
  };
  for (std::size_t i = 0; i < opt.n; ++i) {
    Stance label = opt.balanced ? stance_at(i % kNumStances)
                                : (i % opt.related_every == 0 ? stance_at(rng.below(3)) : Stance::Unrelated);
    const std::size_t topic = rng.below(opt.topics);
    std::size_t body_topic = topic;
    std::size_t marker_class = index_of(label);
    if (label == Stance::Unrelated) {
      body_topic = (topic + 1 + rng.below(opt.topics - 1)) % opt.topics;
      marker_class = rng.below(3);
    }
    Instance inst;
    inst.headline = pick_words(topic, 5) + " " + filler_words()[rng.below(filler_words().size())];
    const auto& markers = stance_markers()[marker_class];
    inst.body = pick_words(body_topic, 12) + " " + markers[rng.below(markers.size())] + " " +
                filler_words()[rng.below(filler_words().size())] + ". " + pick_words(body_topic, 8) + " " +
                markers[rng.below(markers.size())] + ".";
    inst.body_id = static_cast<std::int64_t>(i + 1);
    inst.stance = label;
    out.push_back(std::move(inst));
  }
  return Corpus(opt.name, std::move(out));
}

/// Every word the synthetic corpus can emit.
inline std::vector<std::string> synthetic_vocabulary(const SyntheticOptions& opt) {
  std::vector<std::string> words;
  for (std::size_t t = 0; t < opt.topics; ++t) {
    for (std::size_t j = 0; j < opt.words_per_topic; ++j) words.push_back(topic_word(t, j));
  }
  for (const auto& m : stance_markers()) words.insert(words.end(), m.begin(), m.end());
  words.insert(words.end(), filler_words().begin(), filler_words().end());
  return words;
}

inline void write_embeddings(const std::string& path, const std::vector<std::string>& words, std::size_t dim,
                             std::uint64_t seed) {
  Rng rng(seed);
  std::ofstream out(path);
  for (const auto& w : words) {
    out << w;
    for (std::size_t d = 0; d < dim; ++d) out << ' ' << rng.normal();
    out << '\n';
  }
}

/// `n` ARC records over `topics` topics with two claims each.
inline std::vector<ArcRecord> synthetic_arc(std::size_t n, std::size_t topics, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ArcRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    ArcRecord r;
    const std::size_t t = i % topics;
    r.topic_id = "t" + std::to_string(t);
    r.post = "post number " + std::to_string(i) + " about topic " + std::to_string(t) + ".";
    r.claim_a = "claim a of topic " + std::to_string(t);
    r.claim_b = "claim b of topic " + std::to_string(t);
    const auto c = rng.below(3);
    r.worker_choice = c == 0 ? WorkerChoice::A : (c == 1 ? WorkerChoice::B : WorkerChoice::Neither);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace stance::testing
