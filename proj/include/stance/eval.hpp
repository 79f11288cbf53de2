#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stance/corpus.hpp"

namespace stance::eval {

/// Gold rows by predicted columns in the order AGR, DSG, DSC, UNR.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumStances>, kNumStances> counts{};

  std::size_t total() const;
  std::size_t at(Stance gold, Stance pred) const { return counts[index_of(gold)][index_of(pred)]; }
};

struct FncScore {
  double raw = 0.0;
  double max = 0.0;
  double normalized = 0.0;
};

struct F1Scores {
  std::array<double, kNumStances> per_class{};
  double macro = 0.0;
};

struct EvaluationReport {
  FncScore fnc;
  F1Scores f1;
  ConfusionMatrix confusion;
};

FncScore fnc_score(const std::vector<Stance>& gold, const std::vector<Stance>& pred);
ConfusionMatrix confusion(const std::vector<Stance>& gold, const std::vector<Stance>& pred);
/// F1 is 0 when precision + recall is 0; macro averages all four classes.
F1Scores f1_scores(const ConfusionMatrix& cm);
EvaluationReport evaluate(const std::vector<Stance>& gold, const std::vector<Stance>& pred);

// ---------------------------------------------------------------------------
// Prediction files

struct PredictionRow {
  std::string headline;
  std::int64_t body_id = 0;
  Stance stance = Stance::Unrelated;
};

/// CSV `Headline,Body ID,Stance`.
void write_predictions(const std::string& path, const Corpus& corpus, const std::vector<Stance>& pred);
std::vector<PredictionRow> load_predictions(const std::string& path);

/// Predicted labels aligned to `gold`; rows must match headline and body id
/// in order.
std::vector<Stance> align_predictions(const Corpus& gold, const std::vector<PredictionRow>& rows);

// ---------------------------------------------------------------------------
// Annotator agreement

/// Items by raters; an empty cell means the rater did not label the item.
struct AnnotationMatrix {
  std::vector<std::string> item_ids;
  std::vector<std::string> rater_ids;
  std::vector<std::vector<std::optional<Stance>>> labels;  ///< [item][rater]

  std::size_t items() const { return labels.size(); }
  std::size_t raters() const { return rater_ids.size(); }
  static AnnotationMatrix from_grid(std::vector<std::vector<std::optional<Stance>>> grid);
};

/// CSV `item_id,rater_id,label`; ids are ordered by first appearance.
AnnotationMatrix load_annotations(const std::string& path);

/// Most frequent label of an item; ties go to the lower class index.
std::optional<Stance> majority_label(const std::vector<std::optional<Stance>>& row);

/// Fleiss' kappa with per-item rater counts. With `subset`, only items whose
/// majority label lies in the subset are kept. Throws if a kept item has
/// fewer than two annotations or nothing is kept.
double fleiss_kappa(const AnnotationMatrix& annotations, const std::vector<Stance>* subset = nullptr);

struct MaceOptions {
  std::size_t iterations = 50;
  std::size_t restarts = 10;
  double smoothing = 0.1 / static_cast<double>(kNumStances);
  std::uint64_t seed = 1;
};

struct MaceResult {
  std::vector<Stance> labels;
  std::vector<double> competences;  ///< 1 - spamming probability, per rater
  std::vector<std::array<double, kNumStances>> posteriors;
  double objective = 0.0;
  std::size_t best_restart = 0;
  /// Per restart: smoothed log-likelihood before each M-step and at the end.
  std::vector<std::vector<double>> traces;
};

/// EM for the annotator model: each annotation is a spam draw from a
/// rater-specific label distribution or a copy of the true label. The
/// smoothing acts as a Dirichlet prior, so the traced objective is the
/// log-likelihood plus the log prior.
MaceResult mace_aggregate(const AnnotationMatrix& annotations, const MaceOptions& opts = {});

/// Majority vote per item (ties to the lower class index).
std::vector<Stance> majority_vote(const AnnotationMatrix& annotations);

EvaluationReport upper_bound_report(const std::vector<Stance>& aggregated, const std::vector<Stance>& gold);

struct AgreementReport {
  double kappa_all = 0.0;
  std::optional<double> kappa_related_only;
  MaceResult mace;
};

AgreementReport agreement_report(const AnnotationMatrix& annotations, const MaceOptions& opts = {});

}  // namespace stance::eval
