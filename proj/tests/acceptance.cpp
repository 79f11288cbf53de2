// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// FAIL. Criterion 12 needs the full datasets and runs only with --full.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stance/config.hpp"
#include "stance/corpus.hpp"
#include "stance/eval.hpp"
#include "stance/features.hpp"
#include "stance/harness.hpp"
#include "stance/models.hpp"
#include "stance/neural.hpp"
#include "stance/topics.hpp"
#include "support.hpp"

using namespace stance;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

constexpr Stance A = Stance::Agree, D = Stance::Disagree, C = Stance::Discuss, U = Stance::Unrelated;

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::vector<Stance> expand(std::size_t agr, std::size_t dsg, std::size_t dsc, std::size_t unr) {
  std::vector<Stance> v;
  v.insert(v.end(), agr, A);
  v.insert(v.end(), dsg, D);
  v.insert(v.end(), dsc, C);
  v.insert(v.end(), unr, U);
  return v;
}

std::vector<Stance> perfect_split_always_dsc(const std::vector<Stance>& gold) {
  std::vector<Stance> p;
  for (Stance s : gold) p.push_back(s == U ? U : C);
  return p;
}

// --- 1 --------------------------------------------------------------------

Outcome metric_paper_numbers() {
  // Label counts of the released FNC-1 competition test split.
  const auto gold = expand(1903, 697, 4464, 18349);
  const auto unr = eval::evaluate(gold, std::vector<Stance>(gold.size(), U));
  const auto dsc = eval::evaluate(gold, perfect_split_always_dsc(gold));
  const bool ok = std::abs(unr.fnc.normalized - 0.394) <= 0.001 && std::abs(unr.f1.per_class[3] - 0.839) <= 0.001 &&
                  std::abs(unr.f1.macro - 0.210) <= 0.001 && std::abs(dsc.fnc.normalized - 0.833) <= 0.001 &&
                  std::abs(dsc.f1.macro - 0.444) <= 0.002;
  return {ok, fmt("all-UNR FNC=%.4f F1(UNR)=%.4f F1m=%.4f; split+DSC FNC=%.4f", unr.fnc.normalized,
                  unr.f1.per_class[3], unr.f1.macro, dsc.fnc.normalized) +
                  fmt(" F1m=%.4f", dsc.f1.macro)};
}

// --- 2 --------------------------------------------------------------------

Outcome metric_closed_form() {
  Rng rng(2024);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2000 + rng.below(20000);
    const double u_target = rng.uniform(0.01, 0.99);
    const double c_target = rng.uniform(0.01, 0.99);
    const std::size_t n_unr = std::clamp<std::size_t>(static_cast<std::size_t>(u_target * n), 1, n - 1);
    const std::size_t n_rel = n - n_unr;
    const std::size_t n_dsc = std::min(n_rel, static_cast<std::size_t>(c_target * static_cast<double>(n_rel)));
    const std::size_t rest = n_rel - n_dsc;
    const std::size_t n_agr = rest / 2;
    const auto gold = expand(n_agr, rest - n_agr, n_dsc, n_unr);
    const double u = static_cast<double>(n_unr) / static_cast<double>(n);
    const double c = static_cast<double>(n_dsc) / static_cast<double>(n_rel);
    const double denom = 0.25 * u + (1 - u);
    const double want_unr = 0.25 * u / denom;
    const double want_dsc = (0.25 * u + (1 - u) * (0.25 + 0.75 * c)) / denom;
    worst = std::max(worst, std::abs(eval::fnc_score(gold, std::vector<Stance>(n, U)).normalized - want_unr));
    worst = std::max(worst, std::abs(eval::fnc_score(gold, perfect_split_always_dsc(gold)).normalized - want_dsc));
  }
  return {worst <= 1e-9, fmt("max |diff| = %.3g over 200 distributions", worst)};
}

// --- 3 --------------------------------------------------------------------

Outcome f1_brute_force() {
  Rng rng(3);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<Stance> g(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = stance_at(rng.below(4));
      p[i] = stance_at(rng.below(4));
    }
    const auto f1 = eval::f1_scores(eval::confusion(g, p));
    double macro = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += g[i] == stance_at(k) && p[i] == stance_at(k);
        fp += g[i] != stance_at(k) && p[i] == stance_at(k);
        fn += g[i] == stance_at(k) && p[i] != stance_at(k);
      }
      const double f = tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
      mismatches += std::abs(f1.per_class[k] - f) > 1e-12;
      macro += f;
    }
    mismatches += std::abs(f1.macro - macro / 4.0) > 1e-12;
  }
  return {mismatches == 0, fmt("%.0f mismatches in 1000 lists", static_cast<double>(mismatches))};
}

// --- 4 --------------------------------------------------------------------

Outcome arc_arithmetic() {
  const auto records = testing::synthetic_arc(4448, 186, 4);
  const Corpus arc = derive_arc(records, 3, 11);
  std::size_t unr = 0;
  for (const auto& s : arc.labels()) unr += s == U;
  const double share = static_cast<double>(unr) / static_cast<double>(arc.size());
  return {arc.size() == 17792 && unr * 4 == arc.size() * 3,
          fmt("%.0f instances, %.4f%% UNR", static_cast<double>(arc.size()), 100.0 * share)};
}

// --- 5 --------------------------------------------------------------------

Outcome gradient_checks() {
  using namespace nn;
  Rng rng(5);
  auto randm = [&](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * 0.5;
    return m;
  };
  std::vector<std::pair<std::string, double>> errs;

  {  // dense + softmax cross-entropy
    ParameterSet<double> ps;
    auto layer = make_dense(ps, "dense", 5, 4, Activation::Identity, rng);
    layer.bias->value = randm(4, 1);
    const Mat x = randm(5, 3);
    errs.emplace_back("dense+xent", grad_check(ps, [&](Graph<double>& g) {
                        return g.softmax_xent(dense_forward(g, layer, g.constant(x)), {0, 3, 1});
                      }).max_relative_error);
  }
  {  // LSTM through time
    ParameterSet<double> ps;
    auto lstm = make_lstm(ps, "lstm", 3, 4, rng);
    auto out = make_dense(ps, "out", 4, 4, Activation::Identity, rng);
    std::vector<Mat> xs;
    for (int t = 0; t < 6; ++t) xs.push_back(randm(3, 2));
    errs.emplace_back("lstm-bptt", grad_check(ps, [&](Graph<double>& g) {
                        std::vector<Var> in;
                        for (const auto& x : xs) in.push_back(g.constant(x));
                        return g.softmax_xent(dense_forward(g, out, lstm_forward(g, lstm, in).final), {2, 0});
                      }).max_relative_error);
  }
  {  // embedding lookup
    ParameterSet<double> ps;
    auto& table = ps.add("embedding", randm(3, 7));
    auto out = make_dense(ps, "out", 3, 4, Activation::Identity, rng);
    errs.emplace_back("embedding", grad_check(ps, [&](Graph<double>& g) {
                        Var e = g.gather_cols(g.param(table), {1, 5, 1});
                        return g.softmax_xent(dense_forward(g, out, e), {0, 1, 3});
                      }).max_relative_error);
  }
  {  // full micro stackLSTM: dim 3, hidden 4, 6 features
    auto net = models::make_stacklstm(3, 4, 6, 2, 5, rng);
    for (auto& layer : net.dense) layer.bias->value.setConstant(0.05);
    std::vector<Mat> seqs = {randm(3, 5), randm(3, 3), randm(3, 5)};
    const Mat feats = randm(6, 3);
    Rng unused(0);
    errs.emplace_back("micro-stacklstm", grad_check(net.params, [&](Graph<double>& g) {
                        std::vector<const Mat*> ptrs = {&seqs[0], &seqs[1], &seqs[2]};
                        return g.softmax_xent(models::stacklstm_logits(g, net, ptrs, feats, 0.0, false, unused),
                                              {3, 1, 0});
                      }).max_relative_error);
  }
  double worst = 0;
  std::string detail;
  for (const auto& [name, e] : errs) {
    worst = std::max(worst, e);
    detail += (detail.empty() ? "" : ", ") + name + fmt("=%.2g", e);
  }
  return {worst < 1e-4, detail};
}

// --- 6 --------------------------------------------------------------------

Outcome nmf_property() {
  using namespace topics;
  double worst_rise = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(600 + s);
    Mat m(50, 40);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
    NmfOptions opts;
    opts.iterations = 200;
    opts.tolerance = 0;
    opts.seed = s + 1;
    const auto model = fit_nmf(to_sparse(m), 5, opts);
    for (std::size_t i = 1; i < model.objective.size(); ++i)
      worst_rise = std::max(worst_rise, model.objective[i] - model.objective[i - 1]);
  }
  Rng rng(66);
  Vec a(50), b(40);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.uniform(0.1, 1.0);
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(0.1, 1.0);
  const Mat r1 = a * b.transpose();
  NmfOptions opts;
  opts.iterations = 2000;
  opts.tolerance = 0;
  const auto model = fit_nmf(to_sparse(r1), 1, opts);
  const double rel = (r1 - model.w * model.h).norm() / r1.norm();
  return {worst_rise <= 1e-10 && rel < 1e-6, fmt("max objective rise %.3g, rank-1 relative error %.3g", worst_rise, rel)};
}

// --- 7 --------------------------------------------------------------------

Outcome lsi_property() {
  using namespace topics;
  Mat d = Mat::Zero(3, 3);
  d(0, 0) = 3;
  d(1, 1) = 2;
  d(2, 2) = 1;
  const auto model = fit_lsi(to_sparse(d), 2);
  const double e = std::max(std::abs(model.singular_values(0) - 3), std::abs(model.singular_values(1) - 2));
  bool monotone = true;
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(700 + s);
    Mat m(30, 20);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= 20; ++k) {
      const double err = lsi_reconstruction_error(to_sparse(m), fit_lsi(to_sparse(m), k));
      monotone = monotone && err <= prev + 1e-9;
      prev = err;
    }
  }
  return {e <= 1e-8 && monotone, fmt("singular value error %.3g, monotone in k: ", e) + (monotone ? "yes" : "no")};
}

// --- 8 --------------------------------------------------------------------

Outcome lda_property() {
  using namespace topics;
  std::size_t recovered = 0;
  double worst_row = 0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    Rng rng(800 + s);
    std::vector<std::string> texts;
    for (std::size_t d = 0; d < 40; ++d) {
      std::string t;
      for (int w = 0; w < 30; ++w) t += testing::topic_word(d % 2, rng.below(8)) + " ";
      texts.push_back(t);
    }
    TopicFitOptions opts;
    opts.k = 2;
    opts.vocab_size = 100;
    opts.lda_iterations = 200;
    opts.lda_alpha = 0.1;
    opts.seed = s;
    const auto tm = fit_topic_model(TopicKind::Lda, texts, opts);
    const auto& lda = std::get<LdaModel>(tm.model);
    std::set<char> fam[2];
    for (std::size_t t = 0; t < 2; ++t) {
      worst_row = std::max(worst_row, std::abs(lda.phi.row(static_cast<Eigen::Index>(t)).sum() - 1.0));
      for (std::size_t idx : top_terms(lda, t, 8)) fam[t].insert(tm.vocab.entries()[idx][1]);
    }
    recovered += fam[0].size() == 1 && fam[1].size() == 1 && fam[0] != fam[1];
  }
  return {recovered >= 9 && worst_row <= 1e-9,
          fmt("%.0f/10 seeds recover the partition, max |row sum - 1| = %.3g", static_cast<double>(recovered), worst_row)};
}

// --- 9 --------------------------------------------------------------------

features::PipelineConfig capacity_pipeline() {
  features::PipelineConfig c;
  c.extractors = {features::Extractor::Bow, features::Extractor::WordOverlap, features::Extractor::TfidfCos};
  c.bow_vocab = 200;
  c.tfidf_vocab = 200;
  return c;
}

Outcome model_capacity() {
  testing::TempDir dir;
  testing::SyntheticOptions so;
  so.n = 32;
  so.seed = 9;
  const Corpus small = testing::synthetic_corpus(so);
  testing::write_embeddings(dir.file("emb.txt"), testing::synthetic_vocabulary(so), 50, 9);
  const auto pipe = std::make_shared<const features::FittedPipeline>(features::fit_pipeline(small, capacity_pipeline()));

  auto train_acc = [&](const models::TrainedModel& m) {
    const auto pred = models::labels_of(models::predict(m, small.without_labels()));
    std::size_t right = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) right += pred[i] == small.labels()[i];
    return static_cast<double>(right) / static_cast<double>(pred.size());
  };

  models::ModelSpec mlp;
  mlp.kind = models::ModelKind::FeatMlp;
  mlp.mlp.training.epochs = 500;
  mlp.mlp.training.validation_fraction = 0;
  mlp.mlp.training.stop_at_train_accuracy = 1.0;
  const auto m1 = models::train_model(mlp, small, pipe);

  models::ModelSpec lstm;
  lstm.kind = models::ModelKind::StackLstm;
  lstm.lstm.embeddings_path = dir.file("emb.txt");
  lstm.lstm.embedding_dim = 50;
  lstm.lstm.training.epochs = 300;
  lstm.lstm.training.validation_fraction = 0;
  lstm.lstm.training.stop_at_train_accuracy = 1.0;
  const auto m2 = models::train_model(lstm, small, pipe);

  // Separable corpus: small topic vocabularies make every related pair share
  // words, and a unigram BoW over the whole vocabulary carries the markers.
  so.n = 500;
  so.seed = 90;
  so.words_per_topic = 6;
  const Corpus big = testing::synthetic_corpus(so);
  so.seed = 91;
  const Corpus held = testing::synthetic_corpus(so);
  auto big_config = capacity_pipeline();
  big_config.bow_orders = {1};
  big_config.bow_vocab = 100;
  const auto big_pipe = std::make_shared<const features::FittedPipeline>(features::fit_pipeline(big, big_config));
  models::ModelSpec mlp_big = mlp;
  mlp_big.mlp.training.epochs = 30;
  mlp_big.mlp.training.stop_at_train_accuracy = 2.0;
  const auto m3 = models::train_model(mlp_big, big, big_pipe);
  const auto f1m = eval::evaluate(held.labels(), models::labels_of(models::predict(m3, held.without_labels()))).f1.macro;

  const double a1 = train_acc(m1), a2 = train_acc(m2);
  const bool ok = a1 == 1.0 && m1.meta.epochs <= 500 && a2 == 1.0 && m2.meta.epochs <= 300 && f1m >= 0.95;
  return {ok, fmt("featMLP train acc %.3f after %.0f epochs; stackLSTM train acc %.3f after %.0f epochs;", a1,
                  static_cast<double>(m1.meta.epochs), a2, static_cast<double>(m2.meta.epochs)) +
                  fmt(" featMLP held-out F1m %.3f", f1m)};
}

// --- 10 -------------------------------------------------------------------

Outcome agreement_suite() {
  Rng rng(10);
  std::vector<std::vector<std::optional<Stance>>> unanimous;
  for (int i = 0; i < 50; ++i) unanimous.emplace_back(5, stance_at(rng.below(4)));
  const double k1 = eval::fleiss_kappa(eval::AnnotationMatrix::from_grid(unanimous));

  std::vector<std::vector<std::optional<Stance>>> noise;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::optional<Stance>> row;
    for (int r = 0; r < 5; ++r) row.push_back(stance_at(rng.below(4)));
    noise.push_back(row);
  }
  const double k0 = eval::fleiss_kappa(eval::AnnotationMatrix::from_grid(noise));

  std::size_t wins = 0;
  bool competences_ordered = true;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    Rng r(1000 + s);
    std::vector<Stance> truth;
    std::vector<std::vector<std::optional<Stance>>> grid;
    for (int i = 0; i < 200; ++i) {
      const Stance t = stance_at(r.below(4));
      truth.push_back(t);
      std::vector<std::optional<Stance>> row;
      for (int f = 0; f < 3; ++f) row.push_back(r.bernoulli(0.7) ? t : stance_at(r.below(4)));
      for (int sp = 0; sp < 2; ++sp) row.push_back(stance_at(r.below(4)));
      grid.push_back(row);
    }
    const auto m = eval::AnnotationMatrix::from_grid(grid);
    eval::MaceOptions opts;
    opts.seed = s;
    const auto mace = eval::mace_aggregate(m, opts);
    const auto vote = eval::majority_vote(m);
    std::size_t mace_right = 0, vote_right = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      mace_right += mace.labels[i] == truth[i];
      vote_right += vote[i] == truth[i];
    }
    wins += mace_right >= vote_right;
    const double min_faithful = std::min({mace.competences[0], mace.competences[1], mace.competences[2]});
    competences_ordered = competences_ordered && std::max(mace.competences[3], mace.competences[4]) < min_faithful;
  }
  const bool ok = std::abs(k1 - 1.0) < 1e-12 && std::abs(k0) <= 0.05 && wins >= 19 && competences_ordered;
  return {ok, fmt("unanimous kappa %.3f, random kappa %.4f, MACE >= vote in %.0f/20 seeds", k1, k0,
                  static_cast<double>(wins)) +
                  std::string(", spammers below faithful: ") + (competences_ordered ? "yes" : "no")};
}

// --- 11 -------------------------------------------------------------------

std::string random_field(Rng& rng) {
  static const std::vector<std::string> pieces = {"a", "Z", " ", ",", "\"", "\n", "\xC3\xA9", "\xE2\x80\x94", "x y", "9"};
  std::string s;
  const std::size_t n = rng.below(12);
  for (std::size_t i = 0; i < n; ++i) s += pieces[rng.below(pieces.size())];
  return s;
}

Outcome determinism_round_trip() {
  std::vector<std::string> failures;
  testing::TempDir dir;

  // Corpus CSV write/read on randomized text.
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Instance> xs;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      Instance x;
      x.headline = "h" + random_field(rng);
      x.body = "b" + random_field(rng);
      x.body_id = static_cast<std::int64_t>(rng.below(1000000));
      x.stance = stance_at(rng.below(4));
      xs.push_back(x);
    }
    // Body ids must resolve to a single text.
    std::map<std::int64_t, std::string> first;
    for (auto& x : xs) x.body = first.emplace(x.body_id, x.body).first->second;
    const Corpus c("R", xs);
    write_fnc(c, dir.file("s.csv"), dir.file("b.csv"));
    const Corpus back = load_fnc(dir.file("s.csv"), dir.file("b.csv"), "R");
    if (back.instances() != c.instances()) {
      failures.push_back("corpus csv");
      break;
    }
  }

  // Seeded stages run twice.
  testing::SyntheticOptions so;
  so.n = 60;
  const Corpus train = testing::synthetic_corpus(so);
  so.seed = 5;
  so.n = 20;
  const Corpus test = testing::synthetic_corpus(so).without_labels();
  testing::write_embeddings(dir.file("emb.txt"), testing::synthetic_vocabulary(so), 6, 1);
  features::PipelineConfig pc;
  pc.extractors.assign(features::kAllExtractors.begin(), features::kAllExtractors.end());
  pc.extractors.erase(std::remove(pc.extractors.begin(), pc.extractors.end(), features::Extractor::NrcPos),
                      pc.extractors.end());
  pc.bow_vocab = pc.boc_vocab = pc.tfidf_vocab = 100;
  pc.topic.k = 5;
  pc.topic.vocab_size = 100;
  pc.topic.nmf_iterations = pc.topic.lda_iterations = 40;
  pc.embeddings_path = dir.file("emb.txt");
  pc.embedding_dim = 6;
  const auto p1 = features::fit_pipeline(train, pc);
  const auto p2 = features::fit_pipeline(train, pc);
  if (features::to_cbor(p1) != features::to_cbor(p2)) failures.push_back("pipeline fit");
  if (features::extract(p1, test, pc.extractors).values != features::extract(p2, test, pc.extractors).values)
    failures.push_back("feature extraction");
  const auto shared = std::make_shared<const features::FittedPipeline>(p1);

  if (kfold(train, 5, 3)[2].dev.instances() != kfold(train, 5, 3)[2].dev.instances()) failures.push_back("kfold");
  if (resample(train, ResampleStrategy::Oversample, 4).instances() !=
      resample(train, ResampleStrategy::Oversample, 4).instances())
    failures.push_back("resample");
  const auto arc = testing::synthetic_arc(100, 7, 2);
  if (derive_arc(arc, 3, 8).instances() != derive_arc(arc, 3, 8).instances()) failures.push_back("derive_arc");

  for (auto kind : {models::ModelKind::Majority, models::ModelKind::Gbdt, models::ModelKind::FeatMlp,
                    models::ModelKind::StackLstm, models::ModelKind::Ensemble}) {
    models::ModelSpec spec;
    spec.kind = kind;
    spec.gbdt.trees = 10;
    spec.mlp.hidden_layers = 2;
    spec.mlp.hidden_size = 16;
    spec.mlp.training.epochs = 4;
    spec.lstm.hidden = 5;
    spec.lstm.dense_layers = 1;
    spec.lstm.dense_size = 8;
    spec.lstm.max_len = 20;
    spec.lstm.embedding_dim = 6;
    spec.lstm.embeddings_path = dir.file("emb.txt");
    spec.lstm.training.epochs = 2;
    if (kind == models::ModelKind::Ensemble) {
      for (auto k : {models::ModelKind::Gbdt, models::ModelKind::FeatMlp, models::ModelKind::StackLstm}) {
        models::ModelSpec m = spec;
        m.kind = k;
        spec.members.push_back(m);
      }
    }
    const auto a = models::train_model(spec, train, shared);
    const auto b = models::train_model(spec, train, shared);
    const auto bytes = models::serialize_model(a);
    const std::string name(models::to_string(kind));
    if (bytes != models::serialize_model(b)) failures.push_back("train " + name);
    models::save_model(a, dir.file("m.stnc"));
    const auto loaded = models::load_model(dir.file("m.stnc"));
    if (models::serialize_model(loaded) != bytes) failures.push_back("save/load " + name);
    const auto pa = models::predict(a, test), pl = models::predict(loaded, test);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (pa[i].label != pl[i].label || pa[i].probabilities != pl[i].probabilities) {
        failures.push_back("predict after load " + name);
        break;
      }
    }
  }

  std::string detail = failures.empty() ? "pipeline, splits, resampling, ARC, 5 model kinds and CSV round-trips exact"
                                        : "failed:";
  for (const auto& f : failures) detail += " " + f + ";";
  return {failures.empty(), detail};
}

// --- 12 -------------------------------------------------------------------

Outcome full_scale(const std::string& data_dir) {
  namespace fs = std::filesystem;
  const fs::path d(data_dir);
  for (const char* f : {"train_stances.csv", "train_bodies.csv", "competition_test_stances.csv",
                        "competition_test_bodies.csv"}) {
    if (!fs::exists(d / f)) return {false, std::string("missing ") + (d / f).string()};
  }
  ExperimentConfig cfg = default_config();
  cfg.train_stances = (d / "train_stances.csv").string();
  cfg.train_bodies = (d / "train_bodies.csv").string();
  cfg.test_stances = (d / "competition_test_stances.csv").string();
  cfg.test_bodies = (d / "competition_test_bodies.csv").string();
  cfg.model.kind = models::ModelKind::FeatMlp;
  const auto run = harness::run_experiment(cfg);
  const auto& v = run.table.rows[0].values;
  const auto in = harness::load_inputs(cfg, false);
  harness::AblationSpec spec;
  spec.groups = {features::Group::Oth};
  spec.modes = {harness::AblationMode::Without};
  cfg.cv_folds = 10;
  const auto ab = harness::run_ablation(cfg, in.train, spec);
  const double cv_f1m = ab.rows.at(0).values[1];
  const bool ok = std::abs(v[0] - 0.82) <= 0.02 && std::abs(v[1] - 0.60) <= 0.03 && std::abs(cv_f1m - 0.80) <= 0.03;
  return {ok, fmt("featMLP FNC %.3f F1m %.3f; All-without-Oth CV F1m %.3f", v[0], v[1], cv_f1m)};
}

}  // namespace

int main(int argc, char** argv) {
  bool full = false;
  std::string data_dir = std::getenv("STANCE_FNC_DIR") ? std::getenv("STANCE_FNC_DIR") : "data/fnc-1";
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--full") == 0) full = true;
    if (std::strcmp(argv[i], "--data") == 0 && i + 1 < argc) data_dir = argv[++i];
  }

  const std::vector<Criterion> criteria = {
      {1, "metric oracle, published test-split label counts", 1, metric_paper_numbers},
      {2, "metric oracle, closed form on random distributions", 5, metric_closed_form},
      {3, "F1 equals a brute-force counting oracle", 5, f1_brute_force},
      {4, "ARC derivation arithmetic", 10, arc_arithmetic},
      {5, "gradient checks (dense, LSTM, embedding, xent, micro stackLSTM)", 60, gradient_checks},
      {6, "NMF monotone objective and rank-1 recovery", 30, nmf_property},
      {7, "LSI singular values and monotone reconstruction", 10, lsi_property},
      {8, "LDA vocabulary partition and normalized topics", 60, lda_property},
      {9, "model capacity sanity", 300, model_capacity},
      {10, "agreement suite (Fleiss, MACE)", 120, agreement_suite},
      {11, "determinism and round-trips", 60, determinism_round_trip},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s  %2d  %s  [%.2fs / %.0fs]  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), secs,
                c.budget_seconds, o.detail.c_str(), in_time ? "" : " (over time budget)");
    std::fflush(stdout);
  }

  if (!full) {
    std::printf("SKIP  12  full-scale trained-model rows (needs the FNC-1 data; run with --full)\n");
  } else {
    Outcome o;
    try {
      o = full_scale(data_dir);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  12  full-scale trained-model rows  %s\n", o.pass ? "PASS" : "FAIL", o.detail.c_str());
  }
  return failed == 0 ? 0 : 1;
}
