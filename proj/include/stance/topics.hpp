#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stance/corpus.hpp"
#include "stance/vocabulary.hpp"

namespace stance::topics {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Weighting { Tf, TfIdf };

/// Documents by terms; entries are non-negative weights.
struct TermDocMatrix {
  features::Vocabulary vocab;
  Weighting weighting = Weighting::Tf;
  std::vector<double> idf;  ///< empty for Tf
  SparseMat m;

  Eigen::Index rows() const { return m.rows(); }
  Eigen::Index cols() const { return m.cols(); }
};

/// Smoothed inverse document frequency: ln((1 + N) / (1 + df)) + 1.
std::vector<double> fit_idf(const std::vector<std::string>& texts, const features::Vocabulary& vocab);

/// Row i holds the (idf-weighted) counts of the vocabulary grams in text i.
/// For TfIdf the idf table is fitted on `texts` unless one is given.
TermDocMatrix build_term_doc(const std::vector<std::string>& texts, const features::Vocabulary& vocab,
                             Weighting weighting, const std::vector<double>* idf = nullptr);

/// Weighted row for one text, matching build_term_doc.
Vec term_row(std::string_view text, const TermDocMatrix& shape);

SparseMat to_sparse(const Mat& dense);

// ---------------------------------------------------------------------------

struct NmfModel {
  Mat w;  ///< docs x k
  Mat h;  ///< k x terms
  std::size_t k = 0;
  std::vector<double> objective;  ///< squared Frobenius error, one entry per iteration
};

struct NmfOptions {
  std::size_t iterations = 200;
  double tolerance = 1e-6;  ///< relative objective change
  std::uint64_t seed = 1;
};

/// Lee-Seung multiplicative updates for ||M - WH||_F^2.
NmfModel fit_nmf(const SparseMat& m, std::size_t k, const NmfOptions& opts = {});

/// Non-negative weights for `row` (1 x terms) with H held fixed.
Vec nmf_fold_in(const NmfModel& model, const Vec& row, std::size_t iterations = 200, double tolerance = 1e-6);

struct LsiModel {
  Mat projection;      ///< terms x k, right singular vectors scaled by 1/sigma
  Mat basis;           ///< terms x k, right singular vectors
  Vec singular_values; ///< descending
  std::size_t iterations = 0;
  bool converged = false;
};

struct LsiOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 10000;
  std::uint64_t seed = 1;
  std::size_t oversample = 10;
};

/// Truncated SVD by block subspace iteration on M^T M.
LsiModel fit_lsi(const SparseMat& m, std::size_t k, const LsiOptions& opts = {});

Vec lsi_fold_in(const LsiModel& model, const Vec& row);

/// ||M - M V V^T||_F for the model's basis V.
double lsi_reconstruction_error(const SparseMat& m, const LsiModel& model);

struct LdaModel {
  Mat phi;  ///< k x terms, rows are distributions
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 1;
};

struct LdaOptions {
  double alpha = -1.0;  ///< negative selects 50 / k
  double beta = 0.01;
  std::size_t iterations = 200;
  std::uint64_t seed = 1;
};

/// Collapsed Gibbs sampling. Entries of `m` must be non-negative integers.
LdaModel fit_lda(const SparseMat& m, std::size_t k, const LdaOptions& opts = {});

/// Topic proportions of an unseen document by Gibbs sweeps with phi fixed.
/// The document with no tokens maps to the zero vector.
Vec lda_fold_in(const LdaModel& model, const Vec& counts, std::uint64_t seed, std::size_t sweeps = 50);

/// Indices of the `n` largest entries of phi row `topic`, descending.
std::vector<std::size_t> top_terms(const LdaModel& model, std::size_t topic, std::size_t n);

// ---------------------------------------------------------------------------

enum class TopicKind { Nmf, Lsi, Lda };

std::string_view to_string(TopicKind kind);

/// A fitted topic model together with the term space it was fitted in.
struct TopicModel {
  TopicKind kind = TopicKind::Nmf;
  features::Vocabulary vocab;
  Weighting weighting = Weighting::Tf;
  std::vector<double> idf;
  std::variant<NmfModel, LsiModel, LdaModel> model;

  std::size_t k() const;
};

struct TopicFitOptions {
  std::size_t k = 300;
  std::size_t vocab_size = 5000;
  std::size_t nmf_iterations = 200;
  std::size_t lda_iterations = 200;
  double lda_alpha = -1.0;
  double lda_beta = 0.01;
  std::uint64_t seed = 1;
};

/// NMF and LSI use TF-IDF weighting, LDA raw counts. The vocabulary is word
/// unigrams with stop words removed. k is clamped to the matrix rank bound.
TopicModel fit_topic_model(TopicKind kind, const std::vector<std::string>& texts, const TopicFitOptions& opts);

/// Topic-space vector of `text`; zero when no vocabulary gram occurs.
Vec fold_in(const TopicModel& model, std::string_view text);

enum class TopicMode { Concat, Cosine };

double cosine(const Vec& a, const Vec& b);

/// Concat: headline vector then body vector (2k values). Cosine: one value.
features::FeatureVector topic_features(const TopicModel& model, const Instance& inst, TopicMode mode);

/// Same, from precomputed fold-ins.
features::FeatureVector topic_features(const TopicModel& model, const Vec& headline, const Vec& body,
                                       TopicMode mode);

}  // namespace stance::topics
