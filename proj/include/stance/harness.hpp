#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stance/config.hpp"
#include "stance/corpus.hpp"
#include "stance/eval.hpp"
#include "stance/features.hpp"
#include "stance/models.hpp"
#include "stance/report.hpp"

namespace stance::harness {

/// A harness failure tagged with the stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct Inputs {
  Corpus train;
  std::optional<Corpus> test;
  std::optional<features::PosAnnotation> train_pos;
  std::optional<features::PosAnnotation> test_pos;
};

/// Validates every referenced path, then loads the corpora.
Inputs load_inputs(const ExperimentConfig& config, bool need_test);

struct RunOutcome {
  eval::EvaluationReport report;
  std::vector<Stance> predictions;
  models::TrainedModel model;
};

/// Fits the pipeline on `train`, trains, predicts `test` with its labels
/// stripped, and scores against the held-back labels. `config` must already
/// carry the run seed (see with_seed).
RunOutcome train_and_evaluate(const ExperimentConfig& config, const Corpus& train, const Corpus& test,
                              const features::PosAnnotation* train_pos = nullptr,
                              const features::PosAnnotation* test_pos = nullptr);

struct ExperimentResult {
  std::vector<eval::EvaluationReport> per_seed;
  ReportTable table;
  /// `<output_dir>/<config hash>`, empty when nothing was written.
  std::string output_path;
};

ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const Corpus& train, const Corpus& test,
                                const features::PosAnnotation* train_pos = nullptr,
                                const features::PosAnnotation* test_pos = nullptr);

/// Train on one corpus, evaluate on another. The row is named TRAIN-TEST
/// after the corpus names.
ExperimentResult run_cross_domain(const ExperimentConfig& config, const Corpus& train, const Corpus& test);

struct CvResult {
  /// One report per (seed, fold).
  std::vector<eval::EvaluationReport> folds;
  ReportTable table;
  /// Pipelines fitted per fold, same order as `folds` (null for majority).
  std::vector<std::shared_ptr<const features::FittedPipeline>> pipelines;
  std::string output_path;
};

CvResult run_cv(const ExperimentConfig& config, const Corpus& corpus, std::size_t k);

/// Names of the two reference rows of the feature evaluation.
inline constexpr const char* kMajorityRow = "majority";
inline constexpr const char* kBaselineRow = "baseline";

/// One k-fold row per configured extractor plus the majority and
/// baseline reference rows. Rows with F1m below 0.9 x baseline are flagged.
ReportTable run_feature_eval(const ExperimentConfig& config, const Corpus& corpus);

enum class AblationMode { Only, Without, AllStar, All };

struct AblationSpec {
  std::vector<features::Group> groups = {features::Group::BoWC, features::Group::Topic, features::Group::Oth};
  std::vector<AblationMode> modes = {AblationMode::Only, AblationMode::Without, AblationMode::AllStar,
                                     AblationMode::All};
  /// Preselected extractors for All*; derived from run_feature_eval when unset.
  std::optional<std::vector<features::Extractor>> all_star;
};

struct AblationRow {
  std::string name;
  std::vector<features::Extractor> extractors;
};

/// Row names and feature sets in output order. Rows whose set would be
/// empty are dropped.
std::vector<AblationRow> ablation_rows(const std::vector<features::Extractor>& configured, const AblationSpec& spec,
                                       const std::vector<features::Extractor>& all_star);

ReportTable run_ablation(const ExperimentConfig& config, const Corpus& corpus, const AblationSpec& spec = {});

/// Unflagged extractor rows of a feature-evaluation table.
std::vector<features::Extractor> preselected(const ReportTable& feature_eval);

/// Writes config.ini plus `<stem>.csv`, `.txt` and `.jsonl` under
/// `<output_dir>/<config hash>/`. Returns that directory.
std::string write_reports(const ExperimentConfig& config, const ReportTable& table, const std::string& stem);

}  // namespace stance::harness
