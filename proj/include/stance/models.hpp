#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stance/corpus.hpp"
#include "stance/features.hpp"
#include "stance/neural.hpp"

namespace stance::models {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Probabilities = std::array<double, kNumStances>;

enum class ModelKind { Majority, Gbdt, FeatMlp, StackLstm, Ensemble };

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

struct GbdtHyper {
  std::size_t trees = 200;
  std::size_t depth = 3;
  double learning_rate = 0.1;
  std::uint64_t seed = 1;
};

/// Shared by the two neural models.
struct NetTraining {
  std::size_t epochs = 30;
  std::size_t batch = 32;
  double learning_rate = 1e-3;
  /// Share of the training data held out for early stopping; 0 disables it.
  double validation_fraction = 0.1;
  std::size_t patience = 5;
  /// Stop once training accuracy reaches this value (checked after each
  /// epoch); values above 1 disable the check.
  double stop_at_train_accuracy = 2.0;
  std::uint64_t seed = 1;
};

struct MlpHyper {
  std::size_t hidden_layers = 6;
  std::size_t hidden_size = 600;
  NetTraining training{100, 32, 1e-3, 0.1, 5, 2.0, 1};
};

struct LstmHyper {
  std::size_t hidden = 100;
  double dropout = 0.2;
  std::size_t dense_layers = 3;
  std::size_t dense_size = 600;
  std::size_t max_len = 100;
  std::size_t embedding_dim = 50;
  std::string embeddings_path;
  NetTraining training;
};

struct ModelSpec {
  ModelKind kind = ModelKind::Majority;
  GbdtHyper gbdt;
  MlpHyper mlp;
  LstmHyper lstm;
  /// Feature groups fed to the model; empty selects every pipeline extractor.
  std::vector<features::Group> groups;
  /// Explicit extractor list; takes precedence over `groups` when non-empty.
  std::vector<features::Extractor> extractors;
  std::vector<ModelSpec> members;  ///< ensemble voters
};

struct TrainingMetadata {
  std::size_t epochs = 0;
  double final_loss = 0.0;
  double wall_seconds = 0.0;  ///< not persisted; artifacts stay byte-identical across runs
  bool early_stopped = false;
  std::vector<double> loss_trace;            ///< per epoch or boosting round
  std::vector<double> train_accuracy_trace;  ///< per epoch, when tracked
};

struct Prediction {
  Stance label = Stance::Unrelated;
  std::optional<Probabilities> probabilities;
};

// ---------------------------------------------------------------------------
// Majority and voting

/// Most frequent label; ties go to UNR, then DSC, AGR, DSG.
Stance majority_label(const std::vector<Stance>& labels);

/// Per-instance modal label; ties go to DSG, then AGR, DSC, UNR.
std::vector<Stance> ensemble_vote(const std::vector<std::vector<Stance>>& votes);

// ---------------------------------------------------------------------------
// Gradient boosting

struct TreeNode {
  int feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  double predict(const Vec& x) const;
};

struct GbdtModel {
  std::size_t n_features = 0;
  double learning_rate = 0.1;
  Probabilities prior{};  ///< training class frequencies, for argmax ties
  std::vector<std::array<RegressionTree, kNumStances>> rounds;
  TrainingMetadata meta;
};

/// Softmax gradient boosting; one least-squares tree per class per round.
GbdtModel fit_gbdt(const Mat& x, const std::vector<Stance>& y, const GbdtHyper& hyper);
Vec gbdt_scores(const GbdtModel& model, const Vec& x);
Probabilities gbdt_proba(const GbdtModel& model, const Vec& x);
/// Argmax probability; ties go to the more frequent training class.
Stance gbdt_predict(const GbdtModel& model, const Vec& x);

// ---------------------------------------------------------------------------
// Neural models

/// Column-wise standardization fitted on training rows; constant columns
/// are centred only.
struct Standardizer {
  Vec mean;
  Vec scale;

  static Standardizer fit(const Mat& x);
  Mat apply(const Mat& x) const;
  Vec apply(const Vec& x) const;
};

struct FeatMlpNet {
  nn::ParameterSet<double> params;
  std::vector<nn::DenseLayer<double>> layers;
};

FeatMlpNet make_featmlp(std::size_t inputs, std::size_t hidden_layers, std::size_t hidden_size, Rng& rng);
/// Logits (4 x batch) for standardized inputs (features x batch).
nn::Var featmlp_logits(nn::Graph<double>& g, const FeatMlpNet& net, nn::Var x);

struct FeatMlpModel {
  Standardizer standardizer;
  FeatMlpNet net;
  TrainingMetadata meta;
};

FeatMlpModel fit_featmlp(const Mat& x, const std::vector<Stance>& y, const MlpHyper& hyper);
Probabilities featmlp_proba(const FeatMlpModel& model, const Vec& x);

struct StackLstmNet {
  nn::ParameterSet<double> params;
  nn::LstmParams<double> lstm1;
  nn::LstmParams<double> lstm2;
  std::vector<nn::DenseLayer<double>> dense;  ///< hidden layers then the output layer
  std::size_t dim = 0;
  std::size_t hidden = 0;
  std::size_t n_features = 0;
};

StackLstmNet make_stacklstm(std::size_t dim, std::size_t hidden, std::size_t n_features, std::size_t dense_layers,
                            std::size_t dense_size, Rng& rng);

/// Logits (4 x batch). `seqs` are dim x length matrices of any lengths;
/// `feats` is n_features x batch. Dropout follows each LSTM when `train`.
nn::Var stacklstm_logits(nn::Graph<double>& g, const StackLstmNet& net, const std::vector<const Mat*>& seqs,
                         const Mat& feats, double dropout, bool train, Rng& rng);

struct StackLstmModel {
  Standardizer standardizer;
  StackLstmNet net;
  double dropout = 0.2;
  TrainingMetadata meta;
};

StackLstmModel fit_stacklstm(const std::vector<Mat>& seqs, const Mat& x, const std::vector<Stance>& y,
                             const LstmHyper& hyper);
Probabilities stacklstm_proba(const StackLstmModel& model, const Mat& seq, const Vec& x);

// ---------------------------------------------------------------------------
// Trained models over corpora

struct MajorityModel {
  Stance label = Stance::Unrelated;
};

class TrainedModel;

struct EnsembleModel {
  std::vector<TrainedModel> members;
};

class TrainedModel {
 public:
  using State = std::variant<MajorityModel, GbdtModel, FeatMlpModel, StackLstmModel, EnsembleModel>;

  ModelSpec spec;
  TrainingMetadata meta;
  std::shared_ptr<const features::FittedPipeline> pipeline;
  std::shared_ptr<const nn::EmbeddingTable> embeddings;
  std::vector<features::Extractor> extractors;  ///< feature columns in use
  std::uint64_t layout_hash = 0;
  std::shared_ptr<State> state;

  ModelKind kind() const { return spec.kind; }
};

/// Hash of an ordered feature-name layout.
std::uint64_t layout_hash(const std::vector<std::string>& names);

struct TrainInputs {
  const features::PosAnnotation* pos = nullptr;
  /// Overrides spec.lstm.embeddings_path when set.
  std::shared_ptr<const nn::EmbeddingTable> embeddings;
};

/// Trains on a labeled corpus. Feature-based kinds need `pipeline`.
TrainedModel train_model(const ModelSpec& spec, const Corpus& train,
                         std::shared_ptr<const features::FittedPipeline> pipeline, const TrainInputs& inputs = {});

/// One prediction per instance, in order; each depends only on its instance.
std::vector<Prediction> predict(const TrainedModel& model, const Corpus& corpus,
                                const features::PosAnnotation* pos = nullptr);

std::vector<Stance> labels_of(const std::vector<Prediction>& preds);

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// `STNC`, u32 version, u64 + CBOR header, u64 + pipeline CBOR,
/// u64 count + f64 payload, u64 FNV-1a checksum of everything before it.
std::vector<std::uint8_t> serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(const std::vector<std::uint8_t>& bytes,
                               std::shared_ptr<const nn::EmbeddingTable> embeddings = nullptr);
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path, std::shared_ptr<const nn::EmbeddingTable> embeddings = nullptr);

}  // namespace stance::models
