#include "stance/topics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <type_traits>
#include <unordered_set>

#include "stance/random.hpp"

namespace stance::topics {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();

void check_k(std::size_t k, const SparseMat& m, const char* what) {
  const auto bound = static_cast<std::size_t>(std::min(m.rows(), m.cols()));
  if (k == 0 || k > bound) {
    throw std::invalid_argument(std::string(what) + ": k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(bound) + "]");
  }
}

}  // namespace

std::vector<double> fit_idf(const std::vector<std::string>& texts, const features::Vocabulary& vocab) {
  std::vector<double> df(vocab.size(), 0.0);
  for (const auto& t : texts) {
    std::unordered_set<std::size_t> seen;
    for (const auto& g : features::extract_grams(t, vocab.spec())) {
      if (auto i = vocab.find(g)) seen.insert(*i);
    }
    for (auto i : seen) df[i] += 1.0;
  }
  const double n = static_cast<double>(texts.size());
  std::vector<double> idf(vocab.size());
  for (std::size_t i = 0; i < idf.size(); ++i) idf[i] = std::log((1.0 + n) / (1.0 + df[i])) + 1.0;
  return idf;
}

TermDocMatrix build_term_doc(const std::vector<std::string>& texts, const features::Vocabulary& vocab,
                             Weighting weighting, const std::vector<double>* idf) {
  TermDocMatrix out;
  out.vocab = vocab;
  out.weighting = weighting;
  if (weighting == Weighting::TfIdf) {
    out.idf = idf ? *idf : fit_idf(texts, vocab);
    if (out.idf.size() != vocab.size()) throw std::invalid_argument("idf table does not match vocabulary");
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t r = 0; r < texts.size(); ++r) {
    const auto counts = vocab.counts(texts[r]);
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0.0) continue;
      const double w = weighting == Weighting::TfIdf ? counts[c] * out.idf[c] : counts[c];
      trips.emplace_back(static_cast<int>(r), static_cast<int>(c), w);
    }
  }
  out.m.resize(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(vocab.size()));
  out.m.setFromTriplets(trips.begin(), trips.end());
  out.m.makeCompressed();
  return out;
}

Vec term_row(std::string_view text, const TermDocMatrix& shape) {
  const auto counts = shape.vocab.counts(text);
  Vec row(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t c = 0; c < counts.size(); ++c) {
    row(static_cast<Eigen::Index>(c)) = shape.weighting == Weighting::TfIdf ? counts[c] * shape.idf[c] : counts[c];
  }
  return row;
}

SparseMat to_sparse(const Mat& dense) {
  SparseMat s = dense.sparseView();
  s.makeCompressed();
  return s;
}

// ---------------------------------------------------------------------------
// NMF

namespace {

double nmf_objective(double m_sq, const SparseMat& m, const Mat& w, const Mat& h) {
  // ||M||^2 - 2 tr(W^T M H^T) + tr(W^T W H H^T)
  const Mat mht = m * h.transpose();
  const double cross = (w.array() * mht.array()).sum();
  const Mat wtw = w.transpose() * w;
  const Mat hht = h * h.transpose();
  const double quad = (wtw.array() * hht.array()).sum();
  return std::max(0.0, m_sq - 2.0 * cross + quad);
}

}  // namespace

NmfModel fit_nmf(const SparseMat& m, std::size_t k, const NmfOptions& opts) {
  check_k(k, m, "fit_nmf");
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (SparseMat::InnerIterator it(m, r); it; ++it) {
      if (!(it.value() >= 0.0) || !std::isfinite(it.value())) {
        throw std::invalid_argument("fit_nmf: entries must be finite and non-negative");
      }
    }
  }
  const Eigen::Index n = m.rows();
  const Eigen::Index t = m.cols();
  const auto kk = static_cast<Eigen::Index>(k);
  const double m_sq = m.squaredNorm();
  const double mean = m.sum() / static_cast<double>(n * t);
  const double scale = std::sqrt(std::max(mean, 1e-12) / static_cast<double>(k));

  Rng rng(opts.seed);
  NmfModel model;
  model.k = k;
  model.w.resize(n, kk);
  model.h.resize(kk, t);
  for (Eigen::Index j = 0; j < kk; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) model.w(i, j) = scale * rng.uniform(0.01, 1.0);
  }
  for (Eigen::Index j = 0; j < t; ++j) {
    for (Eigen::Index i = 0; i < kk; ++i) model.h(i, j) = scale * rng.uniform(0.01, 1.0);
  }

  double prev = nmf_objective(m_sq, m, model.w, model.h);
  for (std::size_t it = 0; it < opts.iterations; ++it) {
    const Mat wtm = (m.transpose() * model.w).transpose();
    const Mat wtwh = (model.w.transpose() * model.w) * model.h;
    model.h.array() *= wtm.array() / (wtwh.array() + kTiny);

    const Mat mht = m * model.h.transpose();
    const Mat whht = model.w * (model.h * model.h.transpose());
    model.w.array() *= mht.array() / (whht.array() + kTiny);

    const double obj = nmf_objective(m_sq, m, model.w, model.h);
    model.objective.push_back(obj);
    if (obj == 0.0) break;
    if (prev > 0.0 && std::abs(prev - obj) / prev < opts.tolerance) break;
    prev = obj;
  }
  return model;
}

Vec nmf_fold_in(const NmfModel& model, const Vec& row, std::size_t iterations, double tolerance) {
  const auto kk = static_cast<Eigen::Index>(model.k);
  if (model.h.rows() != kk || model.h.cols() != row.size()) throw std::invalid_argument("nmf_fold_in: shape mismatch");
  if (row.isZero(0.0)) return Vec::Zero(kk);
  const Vec hx = model.h * row;
  const Mat hht = model.h * model.h.transpose();
  const double mean = row.sum() / static_cast<double>(row.size());
  Vec w = Vec::Constant(kk, std::sqrt(std::max(mean, 1e-12) / static_cast<double>(model.k)));
  const double x_sq = row.squaredNorm();
  auto objective = [&](const Vec& v) { return std::max(0.0, x_sq - 2.0 * v.dot(hx) + v.dot(hht * v)); };
  double prev = objective(w);
  for (std::size_t it = 0; it < iterations; ++it) {
    w.array() *= hx.array() / ((hht * w).array() + kTiny);
    const double obj = objective(w);
    if (obj == 0.0 || (prev > 0.0 && std::abs(prev - obj) / prev < tolerance)) break;
    prev = obj;
  }
  return w;
}

// ---------------------------------------------------------------------------
// LSI

namespace {

/// Modified Gram-Schmidt, applied twice. Columns that vanish are replaced by
/// fresh random directions.
void orthonormalize(Mat& q, Rng& rng) {
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (int attempt = 0;; ++attempt) {
      const double before = q.col(j).norm();
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
      }
      const double nrm = q.col(j).norm();
      if (nrm > 1e-10 * std::max(before, 1e-300) && nrm > 0.0) {
        q.col(j) /= nrm;
        break;
      }
      if (attempt > 8) throw std::runtime_error("orthonormalize: cannot complete basis");
      for (Eigen::Index i = 0; i < q.rows(); ++i) q(i, j) = rng.normal();
    }
  }
}

}  // namespace

LsiModel fit_lsi(const SparseMat& m, std::size_t k, const LsiOptions& opts) {
  check_k(k, m, "fit_lsi");
  const Eigen::Index t = m.cols();
  const auto kk = static_cast<Eigen::Index>(k);
  const Eigen::Index b = std::min<Eigen::Index>(t, kk + static_cast<Eigen::Index>(opts.oversample));

  Rng rng(opts.seed);
  Mat q(t, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    for (Eigen::Index i = 0; i < t; ++i) q(i, j) = rng.normal();
  }
  orthonormalize(q, rng);

  LsiModel model;
  Vec lambda;
  Mat ritz;
  for (std::size_t it = 1; it <= opts.max_iterations; ++it) {
    const Mat mq = m * q;
    const Mat z = m.transpose() * mq;
    const Mat tq = q.transpose() * z;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (tq + tq.transpose()));
    // Descending order.
    const Vec ev = es.eigenvalues().reverse();
    const Mat s = es.eigenvectors().rowwise().reverse();
    ritz = q * s;
    lambda = ev;
    const Mat zs = z * s;
    const double top = std::max(ev(0), 0.0);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < kk; ++j) worst = std::max(worst, (zs.col(j) - ev(j) * ritz.col(j)).norm());
    model.iterations = it;
    if (worst <= opts.tolerance * std::max(top, 1.0) || top == 0.0) {
      model.converged = true;
      break;
    }
    q = zs;
    orthonormalize(q, rng);
  }

  model.basis = ritz.leftCols(kk);
  model.singular_values.resize(kk);
  model.projection = Mat::Zero(t, kk);
  const double sigma_max = std::sqrt(std::max(lambda(0), 0.0));
  for (Eigen::Index j = 0; j < kk; ++j) {
    const double sigma = std::sqrt(std::max(lambda(j), 0.0));
    model.singular_values(j) = sigma;
    // Sign convention: largest-magnitude component positive.
    Eigen::Index arg;
    model.basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (model.basis(arg, j) < 0.0) model.basis.col(j) *= -1.0;
    if (sigma > opts.tolerance * std::max(sigma_max, 1.0)) model.projection.col(j) = model.basis.col(j) / sigma;
  }
  return model;
}

Vec lsi_fold_in(const LsiModel& model, const Vec& row) {
  if (model.projection.rows() != row.size()) throw std::invalid_argument("lsi_fold_in: shape mismatch");
  return model.projection.transpose() * row;
}

double lsi_reconstruction_error(const SparseMat& m, const LsiModel& model) {
  const Mat mv = m * model.basis;
  const Mat approx = mv * model.basis.transpose();
  return (Mat(m) - approx).norm();
}

// ---------------------------------------------------------------------------
// LDA

namespace {

std::size_t sample_topic(std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

int as_count(double v) {
  const double r = std::round(v);
  if (!(v >= 0.0) || std::abs(v - r) > 1e-9 || !std::isfinite(v)) {
    throw std::invalid_argument("LDA requires non-negative integer counts");
  }
  return static_cast<int>(r);
}

}  // namespace

LdaModel fit_lda(const SparseMat& m, std::size_t k, const LdaOptions& opts) {
  if (k < 2) throw std::invalid_argument("fit_lda: k must be at least 2");
  const std::size_t n_terms = static_cast<std::size_t>(m.cols());
  LdaModel model;
  model.alpha = opts.alpha < 0.0 ? 50.0 / static_cast<double>(k) : opts.alpha;
  model.beta = opts.beta;
  model.seed = opts.seed;
  if (model.beta <= 0.0 || model.alpha <= 0.0) throw std::invalid_argument("fit_lda: alpha and beta must be positive");

  std::vector<std::vector<std::size_t>> words(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (SparseMat::InnerIterator it(m, r); it; ++it) {
      const int c = as_count(it.value());
      for (int i = 0; i < c; ++i) words[static_cast<std::size_t>(r)].push_back(static_cast<std::size_t>(it.col()));
    }
  }

  Rng rng(opts.seed);
  std::vector<std::vector<std::size_t>> z(words.size());
  std::vector<std::vector<int>> ndk(words.size(), std::vector<int>(k, 0));
  std::vector<int> nkw(k * n_terms, 0);
  std::vector<int> nk(k, 0);
  for (std::size_t d = 0; d < words.size(); ++d) {
    z[d].resize(words[d].size());
    for (std::size_t i = 0; i < words[d].size(); ++i) {
      const std::size_t topic = rng.below(k);
      z[d][i] = topic;
      ++ndk[d][topic];
      ++nkw[topic * n_terms + words[d][i]];
      ++nk[topic];
    }
  }

  const double vbeta = static_cast<double>(n_terms) * model.beta;
  std::vector<double> cum(k);
  for (std::size_t sweep = 0; sweep < opts.iterations; ++sweep) {
    for (std::size_t d = 0; d < words.size(); ++d) {
      for (std::size_t i = 0; i < words[d].size(); ++i) {
        const std::size_t w = words[d][i];
        std::size_t topic = z[d][i];
        --ndk[d][topic];
        --nkw[topic * n_terms + w];
        --nk[topic];
        double acc = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
          acc += (ndk[d][t] + model.alpha) * (nkw[t * n_terms + w] + model.beta) / (nk[t] + vbeta);
          cum[t] = acc;
        }
        topic = sample_topic(cum, rng);
        z[d][i] = topic;
        ++ndk[d][topic];
        ++nkw[topic * n_terms + w];
        ++nk[topic];
      }
    }
  }

  model.phi.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n_terms));
  for (std::size_t t = 0; t < k; ++t) {
    const double denom = nk[t] + vbeta;
    for (std::size_t w = 0; w < n_terms; ++w) {
      model.phi(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(w)) = (nkw[t * n_terms + w] + model.beta) / denom;
    }
    // Normalise exactly so rows sum to one despite rounding.
    model.phi.row(static_cast<Eigen::Index>(t)) /= model.phi.row(static_cast<Eigen::Index>(t)).sum();
  }
  return model;
}

Vec lda_fold_in(const LdaModel& model, const Vec& counts, std::uint64_t seed, std::size_t sweeps) {
  const auto k = static_cast<std::size_t>(model.phi.rows());
  if (counts.size() != model.phi.cols()) throw std::invalid_argument("lda_fold_in: shape mismatch");
  std::vector<Eigen::Index> words;
  for (Eigen::Index w = 0; w < counts.size(); ++w) {
    const int c = as_count(counts(w));
    for (int i = 0; i < c; ++i) words.push_back(w);
  }
  if (words.empty()) return Vec::Zero(static_cast<Eigen::Index>(k));
  Rng rng(seed);
  std::vector<std::size_t> z(words.size());
  std::vector<int> ndk(k, 0);
  for (std::size_t i = 0; i < words.size(); ++i) {
    z[i] = rng.below(k);
    ++ndk[z[i]];
  }
  std::vector<double> cum(k);
  for (std::size_t s = 0; s < sweeps; ++s) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      --ndk[z[i]];
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        acc += (ndk[t] + model.alpha) * model.phi(static_cast<Eigen::Index>(t), words[i]);
        cum[t] = acc;
      }
      z[i] = sample_topic(cum, rng);
      ++ndk[z[i]];
    }
  }
  Vec theta(static_cast<Eigen::Index>(k));
  const double denom = static_cast<double>(words.size()) + static_cast<double>(k) * model.alpha;
  for (std::size_t t = 0; t < k; ++t) theta(static_cast<Eigen::Index>(t)) = (ndk[t] + model.alpha) / denom;
  return theta;
}

std::vector<std::size_t> top_terms(const LdaModel& model, std::size_t topic, std::size_t n) {
  const auto row = model.phi.row(static_cast<Eigen::Index>(topic));
  std::vector<std::size_t> idx(static_cast<std::size_t>(row.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return row(static_cast<Eigen::Index>(a)) > row(static_cast<Eigen::Index>(b));
  });
  idx.resize(std::min(n, idx.size()));
  return idx;
}

// ---------------------------------------------------------------------------
// Topic features

std::string_view to_string(TopicKind kind) {
  switch (kind) {
    case TopicKind::Nmf:
      return "nmf";
    case TopicKind::Lsi:
      return "lsi";
    case TopicKind::Lda:
      return "lda";
  }
  return "?";
}

std::size_t TopicModel::k() const {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, NmfModel>) {
          return m.k;
        } else if constexpr (std::is_same_v<M, LsiModel>) {
          return static_cast<std::size_t>(m.singular_values.size());
        } else {
          return static_cast<std::size_t>(m.phi.rows());
        }
      },
      model);
}

TopicModel fit_topic_model(TopicKind kind, const std::vector<std::string>& texts, const TopicFitOptions& opts) {
  features::GramSpec spec;
  spec.unit = features::GramUnit::Word;
  spec.orders = {1};
  spec.drop_stopwords = true;
  TopicModel out;
  out.kind = kind;
  out.vocab = features::fit_vocabulary(texts, spec, opts.vocab_size);
  if (out.vocab.size() == 0) throw std::invalid_argument("topic vocabulary is empty");
  out.weighting = kind == TopicKind::Lda ? Weighting::Tf : Weighting::TfIdf;
  TermDocMatrix tdm = build_term_doc(texts, out.vocab, out.weighting);
  out.idf = tdm.idf;
  std::size_t k = std::min<std::size_t>(opts.k, static_cast<std::size_t>(std::min(tdm.rows(), tdm.cols())));
  switch (kind) {
    case TopicKind::Nmf: {
      NmfOptions o;
      o.iterations = opts.nmf_iterations;
      o.seed = opts.seed;
      out.model = fit_nmf(tdm.m, std::max<std::size_t>(k, 1), o);
      break;
    }
    case TopicKind::Lsi: {
      LsiOptions o;
      o.seed = opts.seed;
      out.model = fit_lsi(tdm.m, std::max<std::size_t>(k, 1), o);
      break;
    }
    case TopicKind::Lda: {
      LdaOptions o;
      o.alpha = opts.lda_alpha;
      o.beta = opts.lda_beta;
      o.iterations = opts.lda_iterations;
      o.seed = opts.seed;
      out.model = fit_lda(tdm.m, std::max<std::size_t>(opts.k, 2), o);
      break;
    }
  }
  return out;
}

Vec fold_in(const TopicModel& model, std::string_view text) {
  const auto counts = model.vocab.counts(text);
  Vec row(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t c = 0; c < counts.size(); ++c) {
    row(static_cast<Eigen::Index>(c)) = model.weighting == Weighting::TfIdf ? counts[c] * model.idf[c] : counts[c];
  }
  switch (model.kind) {
    case TopicKind::Nmf:
      return nmf_fold_in(std::get<NmfModel>(model.model), row);
    case TopicKind::Lsi:
      return lsi_fold_in(std::get<LsiModel>(model.model), row);
    case TopicKind::Lda: {
      const auto& lda = std::get<LdaModel>(model.model);
      return lda_fold_in(lda, row, derive_seed(lda.seed, fnv1a(text)));
    }
  }
  throw std::logic_error("unknown topic kind");
}

double cosine(const Vec& a, const Vec& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

features::FeatureVector topic_features(const TopicModel& model, const Vec& headline, const Vec& body,
                                       TopicMode mode) {
  features::FeatureVector out;
  if (mode == TopicMode::Cosine) {
    out.push("cos", cosine(headline, body));
    return out;
  }
  for (Eigen::Index i = 0; i < headline.size(); ++i) out.push("h" + std::to_string(i), headline(i));
  for (Eigen::Index i = 0; i < body.size(); ++i) out.push("b" + std::to_string(i), body(i));
  (void)model;
  return out;
}

features::FeatureVector topic_features(const TopicModel& model, const Instance& inst, TopicMode mode) {
  return topic_features(model, fold_in(model, inst.headline), fold_in(model, inst.body), mode);
}

}  // namespace stance::topics
