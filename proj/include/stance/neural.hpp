#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "stance/random.hpp"
#include "stance/textproc.hpp"

namespace stance::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Mat = Matrix<double>;
using Vec = Vector<double>;

// ---------------------------------------------------------------------------
// Embeddings

/// Fixed word vectors. Lookups of absent tokens yield the zero vector.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 50) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  std::size_t duplicates() const { return duplicates_; }
  bool contains(const std::string& token) const { return vectors_.count(token) > 0; }

  /// Inserts or replaces; returns false when the token was already present.
  bool set(const std::string& token, std::vector<double> values);
  /// Pointer to the stored vector or nullptr.
  const std::vector<double>* find(const std::string& token) const;
  Vec lookup(const std::string& token) const;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::size_t duplicates_ = 0;
};

/// Text format: one token per line followed by `dim` space-separated values.
/// Duplicate tokens keep the last vector and log a warning.
EmbeddingTable load_embeddings(const std::string& path, std::size_t dim);

struct EmbeddedSequence {
  Mat values;  ///< dim x length, one column per token
  std::size_t headline_tokens = 0;
  bool headline_truncated = false;
  std::size_t unknown = 0;
};

/// Headline tokens first, then body tokens, cut to `max_len` columns.
/// Unknown tokens embed as zero; an empty result is one zero column.
EmbeddedSequence embed_sequence(const text::TokenSeq& headline, const text::TokenSeq& body,
                                const EmbeddingTable& table, std::size_t max_len = 100);

// ---------------------------------------------------------------------------
// Parameters and the computation graph

template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
};

/// Owns parameters at stable addresses.
template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, Matrix<T> init);
  Parameter<T>& get(const std::string& name);
  const Parameter<T>& get(const std::string& name) const;
  std::vector<Parameter<T>*> all();
  std::vector<const Parameter<T>*> all() const;
  std::size_t count() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

struct Var {
  std::size_t id = 0;
};

/// Records a forward computation and replays it backwards. Values are
/// column-major batches: one example per column.
template <typename T>
class Graph {
 public:
  using M = Matrix<T>;

  Var constant(M value);
  /// Leaf bound to a parameter; backward() accumulates into `p.grad`.
  Var param(Parameter<T>& p);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, T c);
  /// x (r x n) plus column vector b (r x 1) broadcast over columns.
  Var add_bias(Var x, Var b);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var relu(Var x);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_rows(Var x, Eigen::Index start, Eigen::Index count);
  /// Columns `ids` of `table` (dim x vocab).
  Var gather_cols(Var table, const std::vector<Eigen::Index>& ids);
  /// Inverted dropout; identity unless `train`.
  Var dropout(Var x, double rate, bool train, Rng& rng);
  Var sum(Var x);
  /// Mean softmax cross-entropy over the batch columns; 1 x 1.
  Var softmax_xent(Var logits, const std::vector<int>& gold);

  const M& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient of the last backward() target with respect to `v`.
  const M& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1; `loss` must be 1 x 1.
  void backward(Var loss);

 private:
  struct Node {
    M value;
    M grad;
    std::vector<std::size_t> inputs;
    std::function<void(Graph&, std::size_t)> back;
    Parameter<T>* param = nullptr;
  };

  Var push(M value, std::vector<std::size_t> inputs, std::function<void(Graph&, std::size_t)> back);
  M& grad_of(std::size_t id);

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Layers

enum class Activation { Identity, Relu, Softmax };

template <typename T>
struct DenseLayer {
  Parameter<T>* weight = nullptr;  ///< out x in
  Parameter<T>* bias = nullptr;    ///< out x 1
  Activation activation = Activation::Identity;

  Eigen::Index in() const { return weight->value.cols(); }
  Eigen::Index out() const { return weight->value.rows(); }
};

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), bias zero.
template <typename T>
DenseLayer<T> make_dense(ParameterSet<T>& set, const std::string& name, std::size_t in, std::size_t out,
                         Activation act, Rng& rng);

template <typename T>
Var dense_forward(Graph<T>& g, const DenseLayer<T>& layer, Var x);

/// Affine + activation for each layer in order. The returned node holds
/// logits unless the last layer uses Activation::Softmax.
template <typename T>
Var mlp_forward(Graph<T>& g, const std::vector<DenseLayer<T>>& layers, Var x);

template <typename T>
Matrix<T> mlp_forward(const std::vector<DenseLayer<T>>& layers, const Matrix<T>& x);

/// Gate blocks stacked in order input, forget, cell, output.
template <typename T>
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter<T>* w = nullptr;  ///< 4h x input
  Parameter<T>* u = nullptr;  ///< 4h x h
  Parameter<T>* b = nullptr;  ///< 4h x 1; forget block starts at 1
};

template <typename T>
LstmParams<T> make_lstm(ParameterSet<T>& set, const std::string& name, std::size_t input_dim,
                        std::size_t hidden_dim, Rng& rng);

struct LstmOutput {
  std::vector<Var> hidden;
  Var final;
};

/// Runs the recurrence over `inputs` (each input_dim x batch). When `masks`
/// is given (each hidden x batch, entries 0/1), a zero keeps that column's
/// state unchanged, so padded steps do not move the final state.
template <typename T>
LstmOutput lstm_forward(Graph<T>& g, const LstmParams<T>& params, const std::vector<Var>& inputs,
                        const std::vector<Var>* masks = nullptr);

/// Convenience: single sequence given as columns of `seq`.
template <typename T>
std::vector<Vector<T>> lstm_forward(const LstmParams<T>& params, const Matrix<T>& seq);

// ---------------------------------------------------------------------------
// Loss, dropout, optimizers

struct SoftmaxXent {
  double loss = 0.0;
  Vec probabilities;
};

/// Max-subtracted softmax and -log p[gold].
SoftmaxXent softmax_xent(const Vec& logits, std::size_t gold);
Vec softmax(const Vec& logits);

enum class DropoutMode { Train, Eval };

template <typename T>
Matrix<T> dropout(const Matrix<T>& x, double rate, DropoutMode mode, Rng& rng);

enum class OptimizerAlgo { Sgd, Adam };

struct OptimizerConfig {
  OptimizerAlgo algo = OptimizerAlgo::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update from the accumulated gradients. Throws (before
  /// touching any parameter) if a gradient is not finite.
  void step(ParameterSet<T>& params);
  std::size_t steps() const { return t_; }

 private:
  struct Moments {
    Matrix<T> m;
    Matrix<T> v;
  };
  OptimizerConfig cfg_;
  std::size_t t_ = 0;
  std::unordered_map<const Parameter<T>*, Moments> state_;
};

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Multiplies the analytic gradient before comparison (fault injection).
  double analytic_scale = 1.0;
  /// Denominator floor for the relative error.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// `build` constructs the scalar loss on a fresh graph from the current
/// values in `params`. Every parameter entry is compared against central
/// differences: |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(ParameterSet<double>& params, const std::function<Var(Graph<double>&)>& build,
                           const GradCheckOptions& opts = {});

}  // namespace stance::nn
