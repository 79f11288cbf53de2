#include <cmath>
#include <fstream>

#include "doctest.h"
#include "stance/models.hpp"
#include "support.hpp"

using namespace stance;
using namespace stance::models;

namespace {

constexpr Stance A = Stance::Agree, D = Stance::Disagree, C = Stance::Discuss, U = Stance::Unrelated;

features::PipelineConfig light_pipeline() {
  features::PipelineConfig c;
  c.extractors = {features::Extractor::Bow, features::Extractor::WordOverlap, features::Extractor::TfidfCos,
                  features::Extractor::Refuting};
  c.bow_vocab = 80;
  c.tfidf_vocab = 80;
  return c;
}

ModelSpec small_spec(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  s.gbdt.trees = 20;
  s.mlp.hidden_layers = 2;
  s.mlp.hidden_size = 16;
  s.mlp.training.epochs = 5;
  s.lstm.hidden = 6;
  s.lstm.dense_layers = 1;
  s.lstm.dense_size = 8;
  s.lstm.max_len = 12;
  s.lstm.embedding_dim = 4;
  s.lstm.training.epochs = 2;
  return s;
}

}  // namespace

TEST_CASE("majority and vote tie rules") {
  CHECK(majority_label({A, A, D}) == A);
  CHECK(majority_label({A, U}) == U);
  CHECK(majority_label({A, C}) == C);
  CHECK(majority_label({A, D}) == A);
  CHECK_THROWS(majority_label({}));
  CHECK(ensemble_vote({{A, U}, {D, U}, {C, C}}) == std::vector<Stance>{D, U});
  CHECK(ensemble_vote({{A}, {C}}) == std::vector<Stance>{A});
  CHECK(ensemble_vote({{U}, {C}}) == std::vector<Stance>{C});
  for (auto k : {ModelKind::Majority, ModelKind::Gbdt, ModelKind::FeatMlp, ModelKind::StackLstm, ModelKind::Ensemble})
    CHECK(parse_model_kind(to_string(k)) == k);
}

TEST_CASE("one boosting round matches the hand-derived leaves") {
  // Scores start at zero, so p = 1/4 and residuals are 3/4 or -1/4. A leaf
  // holding residuals r takes (3/4) * sum r / sum |r|(1 - |r|).
  Mat x(4, 1);
  x << 0, 1, 2, 3;
  GbdtHyper h;
  h.trees = 1;
  h.depth = 1;
  h.learning_rate = 0.1;
  const auto m = fit_gbdt(x, {A, A, U, U}, h);
  REQUIRE(m.rounds.size() == 1);
  const auto& agree = m.rounds[0][0];
  REQUIRE(agree.nodes.size() == 3);
  CHECK(agree.nodes[0].feature == 0);
  CHECK(agree.nodes[0].threshold == doctest::Approx(1.5));
  Vec lo(1), hi(1);
  lo << 0.0;
  hi << 3.0;
  CHECK(agree.predict(lo) == doctest::Approx(3.0));
  CHECK(agree.predict(hi) == doctest::Approx(-1.0));
  const auto& disagree = m.rounds[0][1];
  CHECK(disagree.nodes.size() == 1);
  CHECK(disagree.predict(lo) == doctest::Approx(-1.0));
  CHECK(m.rounds[0][3].predict(hi) == doctest::Approx(3.0));
  const Vec s = gbdt_scores(m, lo);
  CHECK(s(0) == doctest::Approx(0.3));
  CHECK(s(3) == doctest::Approx(-0.1));
  CHECK(m.meta.loss_trace.size() == 2);
  CHECK(m.meta.loss_trace[0] == doctest::Approx(std::log(4.0)));
  CHECK(gbdt_predict(m, lo) == A);
  CHECK(gbdt_predict(m, hi) == U);
}

TEST_CASE("boosting fits separable data and validates input") {
  Rng rng(4);
  Mat x(80, 3);
  std::vector<Stance> y;
  for (Eigen::Index i = 0; i < 80; ++i) {
    const std::size_t k = static_cast<std::size_t>(i) % 4;
    x(i, 0) = static_cast<double>(k) + 0.3 * rng.uniform();
    x(i, 1) = rng.normal();
    x(i, 2) = 1.0;
    y.push_back(stance_at(k));
  }
  GbdtHyper h;
  h.trees = 30;
  const auto m = fit_gbdt(x, y, h);
  CHECK(m.meta.loss_trace.back() < m.meta.loss_trace.front() / 4);
  for (std::size_t i = 1; i < m.meta.loss_trace.size(); ++i) CHECK(m.meta.loss_trace[i] <= m.meta.loss_trace[i - 1] + 1e-12);
  std::size_t right = 0;
  for (Eigen::Index i = 0; i < 80; ++i) right += gbdt_predict(m, x.row(i).transpose()) == y[static_cast<std::size_t>(i)];
  CHECK(right == 80);
  const auto p = gbdt_proba(m, x.row(0).transpose());
  CHECK(p[0] + p[1] + p[2] + p[3] == doctest::Approx(1.0));

  Mat bad = x;
  bad(3, 1) = std::nan("");
  CHECK_THROWS(fit_gbdt(bad, y, h));
  CHECK_THROWS(fit_gbdt(x, std::vector<Stance>(80, U), h));
  CHECK_THROWS(gbdt_scores(m, Vec::Zero(2)));
}

TEST_CASE("standardizer") {
  Mat x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  const auto s = Standardizer::fit(x);
  const Mat z = s.apply(x);
  CHECK(z.col(0).mean() == doctest::Approx(0.0));
  CHECK(z(0, 0) == doctest::Approx(-1.0 / std::sqrt(2.0 / 3.0)));
  CHECK(z.col(1).isZero());
}

TEST_CASE("stacked LSTM parameter count") {
  Rng rng(1);
  const std::size_t f = 7;
  const auto net = make_stacklstm(50, 100, f, 3, 600, rng);
  CHECK(net.params.count() == 60400 + 80400 + (100 + f) * 600 + 600 + 2 * 360600 + 2404);
}

TEST_CASE("featMLP memorizes a small training set") {
  Rng rng(2);
  Mat x(32, 10);
  std::vector<Stance> y;
  for (Eigen::Index i = 0; i < 32; ++i) {
    for (Eigen::Index j = 0; j < 10; ++j) x(i, j) = rng.normal();
    y.push_back(stance_at(rng.below(4)));
  }
  MlpHyper h;
  h.hidden_layers = 2;
  h.hidden_size = 64;
  h.training.epochs = 500;
  h.training.batch = 8;
  h.training.validation_fraction = 0;
  h.training.learning_rate = 0.01;
  h.training.stop_at_train_accuracy = 1.0;
  const auto m = fit_featmlp(x, y, h);
  REQUIRE_FALSE(m.meta.train_accuracy_trace.empty());
  CHECK(m.meta.train_accuracy_trace.back() == 1.0);
  CHECK(m.meta.epochs < 500);
}

TEST_CASE("training is reproducible from the seed") {
  Rng rng(6);
  Mat x(40, 4);
  std::vector<Stance> y;
  for (Eigen::Index i = 0; i < 40; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = rng.normal();
    y.push_back(stance_at(static_cast<std::size_t>(i) % 4));
  }
  MlpHyper h;
  h.hidden_layers = 1;
  h.hidden_size = 8;
  h.training.epochs = 10;
  const auto a = fit_featmlp(x, y, h);
  const auto b = fit_featmlp(x, y, h);
  CHECK(a.meta.loss_trace == b.meta.loss_trace);
  h.training.seed = 2;
  CHECK(fit_featmlp(x, y, h).meta.loss_trace != a.meta.loss_trace);
}

TEST_CASE("train, predict and serialize every kind") {
  testing::TempDir dir;
  testing::SyntheticOptions so;
  so.n = 48;
  const Corpus train = testing::synthetic_corpus(so);
  so.seed = 2;
  so.n = 16;
  const Corpus test = testing::synthetic_corpus(so).without_labels();
  testing::write_embeddings(dir.file("emb.txt"), testing::synthetic_vocabulary(so), 4, 5);

  const auto pipeline = std::make_shared<const features::FittedPipeline>(features::fit_pipeline(train, light_pipeline()));
  for (auto kind : {ModelKind::Majority, ModelKind::Gbdt, ModelKind::FeatMlp, ModelKind::StackLstm, ModelKind::Ensemble}) {
    CAPTURE(to_string(kind));
    ModelSpec spec = small_spec(kind);
    spec.lstm.embeddings_path = dir.file("emb.txt");
    if (kind == ModelKind::Ensemble) {
      for (auto k : {ModelKind::Gbdt, ModelKind::FeatMlp, ModelKind::StackLstm}) {
        ModelSpec m = spec;
        m.kind = k;
        spec.members.push_back(m);
      }
    }
    const TrainedModel model = train_model(spec, train, pipeline);
    const auto preds = predict(model, test);
    REQUIRE(preds.size() == test.size());
    if (kind == ModelKind::Majority) {
      // Balanced labels tie; the tie goes to UNR.
      for (const auto& p : preds) CHECK(p.label == U);
    }

    const auto bytes = serialize_model(model);
    CHECK(bytes.size() > 24);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "STNC");
    const TrainedModel back = deserialize_model(bytes);
    const auto again = predict(back, test);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      CHECK(again[i].label == preds[i].label);
      if (preds[i].probabilities) {
        REQUIRE(again[i].probabilities);
        CHECK(*again[i].probabilities == *preds[i].probabilities);
      }
    }
    CHECK(serialize_model(back) == bytes);

    save_model(model, dir.file("m.stnc"));
    CHECK(labels_of(predict(load_model(dir.file("m.stnc")), test)) == labels_of(preds));

    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x01;
    CHECK_THROWS(deserialize_model(flipped));
    auto truncated = bytes;
    truncated.resize(bytes.size() - 9);
    CHECK_THROWS(deserialize_model(truncated));
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS(deserialize_model(magic));
  }
}

TEST_CASE("predictions depend only on each instance") {
  testing::SyntheticOptions so;
  so.n = 40;
  const Corpus train = testing::synthetic_corpus(so);
  so.seed = 9;
  const Corpus test = testing::synthetic_corpus(so).without_labels();
  const auto pipeline = std::make_shared<const features::FittedPipeline>(features::fit_pipeline(train, light_pipeline()));
  const auto model = train_model(small_spec(ModelKind::Gbdt), train, pipeline);
  const auto all = labels_of(predict(model, test));
  std::vector<std::size_t> idx = {5, 1, 30};
  const auto part = labels_of(predict(model, test.subset(idx, "part")));
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(part[i] == all[idx[i]]);
}

TEST_CASE("train_model input errors") {
  testing::SyntheticOptions so;
  so.n = 20;
  const Corpus train = testing::synthetic_corpus(so);
  const auto pipeline = std::make_shared<const features::FittedPipeline>(features::fit_pipeline(train, light_pipeline()));
  CHECK_THROWS(train_model(small_spec(ModelKind::Gbdt), train.without_labels(), pipeline));
  CHECK_THROWS(train_model(small_spec(ModelKind::Gbdt), train.subset({}, "empty"), pipeline));
  CHECK_THROWS(train_model(small_spec(ModelKind::Gbdt), train, nullptr));
  ModelSpec s = small_spec(ModelKind::Gbdt);
  s.extractors = {features::Extractor::Lsi};
  CHECK_THROWS(train_model(s, train, pipeline));
  ModelSpec lstm = small_spec(ModelKind::StackLstm);
  lstm.lstm.embeddings_path = "/nonexistent/emb.txt";
  CHECK_THROWS(train_model(lstm, train, pipeline));
}

TEST_CASE("boosting on a linearly separable toy set and with zero rounds") {
  Rng rng(12);
  Mat x(200, 2);
  std::vector<Stance> y;
  for (Eigen::Index i = 0; i < 200; ++i) {
    x(i, 0) = rng.uniform(-1, 1);
    x(i, 1) = rng.uniform(-1, 1);
    y.push_back(x(i, 0) + 0.5 * x(i, 1) > 0 ? A : U);
  }
  const auto m = fit_gbdt(x, y, {});
  std::size_t right = 0;
  for (Eigen::Index i = 0; i < 200; ++i) right += gbdt_predict(m, x.row(i).transpose()) == y[static_cast<std::size_t>(i)];
  CHECK(right >= 196);

  GbdtHyper none;
  none.trees = 0;
  std::vector<Stance> skew(200, U);
  for (std::size_t i = 0; i < 30; ++i) skew[i] = C;
  const auto z = fit_gbdt(x, skew, none);
  const auto p = gbdt_proba(z, x.row(0).transpose());
  for (double v : p) CHECK(v == doctest::Approx(0.25));
  CHECK(gbdt_predict(z, x.row(0).transpose()) == U);
}

TEST_CASE("featMLP on a separable four-class feature set") {
  Rng rng(13);
  Mat x(500, 6);
  std::vector<Stance> y;
  for (Eigen::Index i = 0; i < 500; ++i) {
    const std::size_t k = rng.below(4);
    for (Eigen::Index j = 0; j < 6; ++j) x(i, j) = 0.3 * rng.normal();
    x(i, static_cast<Eigen::Index>(k)) += 2.0;
    y.push_back(stance_at(k));
  }
  MlpHyper h;
  h.hidden_layers = 2;
  h.hidden_size = 32;
  h.training.epochs = 20;
  const auto m = fit_featmlp(x.topRows(400), std::vector<Stance>(y.begin(), y.begin() + 400), h);
  std::vector<Stance> pred;
  for (Eigen::Index i = 400; i < 500; ++i) {
    const auto p = featmlp_proba(m, x.row(i).transpose());
    pred.push_back(stance_at(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())));
  }
  std::array<double, 4> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto g = index_of(y[400 + i]), q = index_of(pred[i]);
    if (g == q) tp[g] += 1;
    else {
      fp[q] += 1;
      fn[g] += 1;
    }
  }
  double f1m = 0;
  for (int k = 0; k < 4; ++k) f1m += tp[k] == 0 ? 0 : 2 * tp[k] / (2 * tp[k] + fp[k] + fn[k]) / 4;
  CHECK(f1m >= 0.95);
}

TEST_CASE("stackLSTM inference is deterministic") {
  Rng rng(14);
  LstmHyper h;
  h.hidden = 4;
  h.dense_layers = 1;
  h.dense_size = 6;
  h.embedding_dim = 3;
  h.training.epochs = 2;
  std::vector<Mat> seqs;
  Mat x(8, 2);
  std::vector<Stance> y;
  for (int i = 0; i < 8; ++i) {
    seqs.push_back(Mat::Random(3, 2 + i % 3));
    x.row(i) << rng.normal(), rng.normal();
    y.push_back(stance_at(static_cast<std::size_t>(i) % 4));
  }
  const auto m = fit_stacklstm(seqs, x, y, h);
  CHECK(stacklstm_proba(m, seqs[0], x.row(0).transpose()) == stacklstm_proba(m, seqs[0], x.row(0).transpose()));
  CHECK_THROWS(stacklstm_proba(m, Mat::Zero(5, 2), x.row(0).transpose()));
}
