#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stance {

enum class Stance : std::uint8_t { Agree = 0, Disagree = 1, Discuss = 2, Unrelated = 3 };

inline constexpr std::size_t kNumStances = 4;
inline constexpr std::array<Stance, kNumStances> kAllStances = {Stance::Agree, Stance::Disagree,
                                                               Stance::Discuss, Stance::Unrelated};

/// CSV spelling: "agree", "disagree", "discuss", "unrelated".
std::string_view to_string(Stance s);
/// Short column label: AGR, DSG, DSC, UNR.
std::string_view short_name(Stance s);
Stance parse_stance(std::string_view s);
inline bool is_related(Stance s) { return s != Stance::Unrelated; }
inline std::size_t index_of(Stance s) { return static_cast<std::size_t>(s); }
inline Stance stance_at(std::size_t i) { return static_cast<Stance>(i); }

struct Instance {
  std::string headline;
  std::int64_t body_id = 0;
  std::string body;
  std::optional<Stance> stance;
  /// Present only when the source carries topic ids (derived ARC corpora).
  std::optional<std::string> topic;

  bool operator==(const Instance&) const = default;
};

/// Immutable collection of instances with the body table they reference.
class Corpus {
 public:
  Corpus() = default;
  /// Validates that every body id resolves and matches the instance text.
  Corpus(std::string name, std::vector<Instance> instances);

  const std::string& name() const { return name_; }
  const std::vector<Instance>& instances() const { return instances_; }
  const std::map<std::int64_t, std::string>& bodies() const { return bodies_; }
  std::size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }
  const Instance& operator[](std::size_t i) const { return instances_[i]; }

  bool fully_labeled() const;
  bool has_topics() const;
  std::vector<Stance> labels() const;

  Corpus subset(const std::vector<std::size_t>& indices, std::string name) const;
  /// Same instances with the stance field cleared.
  Corpus without_labels() const;
  Corpus renamed(std::string name) const;

 private:
  std::string name_;
  std::vector<Instance> instances_;
  std::map<std::int64_t, std::string> bodies_;
};

struct CorpusStats {
  std::size_t n_headlines = 0;
  std::size_t n_bodies = 0;
  std::size_t n_instances = 0;
  double mean_tokens_per_body = 0.0;
  std::map<Stance, double> label_fractions;
};

enum class WorkerChoice { A, B, Neither };

struct ArcRecord {
  std::string topic_id;
  std::string post;
  std::string claim_a;
  std::string claim_b;
  WorkerChoice worker_choice = WorkerChoice::Neither;
};

/// Loads an FNC-1 style stances/bodies CSV pair. The stances file may carry
/// an optional fourth `Topic` column.
Corpus load_fnc(const std::string& stances_path, const std::string& bodies_path,
                std::string name = "FNC");
/// Writes the pair back (LF line endings, bodies ordered by id).
void write_fnc(const Corpus& corpus, const std::string& stances_path, const std::string& bodies_path);

std::vector<ArcRecord> load_arc_records(const std::string& path);

Corpus derive_arc(const std::vector<ArcRecord>& records, std::size_t unrelated_per_post,
                  std::uint64_t seed, std::string name = "ARC");

CorpusStats corpus_stats(const Corpus& corpus);

enum class SplitUnit { Instance, Topic };

/// Returns (train, test).
std::pair<Corpus, Corpus> split_holdout(const Corpus& corpus, double test_fraction, std::uint64_t seed,
                                        SplitUnit unit = SplitUnit::Instance);

struct Fold {
  Corpus train;
  Corpus dev;
};

std::vector<Fold> kfold(const Corpus& corpus, std::size_t k, std::uint64_t seed,
                        SplitUnit unit = SplitUnit::Instance);

/// Sizes of k folds over n items: the first n % k folds get one extra.
std::vector<std::size_t> fold_sizes(std::size_t n, std::size_t k);
/// Test-part size of a holdout split: round-half-up of n * fraction, clamped to [1, n-1].
std::size_t holdout_test_size(std::size_t n, double test_fraction);

enum class ResampleStrategy { Undersample, Oversample };

Corpus resample(const Corpus& corpus, ResampleStrategy strategy, std::uint64_t seed);

}  // namespace stance
