#include <cmath>

#include "doctest.h"
#include "stance/neural.hpp"
#include "support.hpp"

using namespace stance;
using namespace stance::nn;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Plain-loop LSTM step with gate rows stacked input, forget, cell, output.
void reference_step(const Mat& w, const Mat& u, const Mat& b, const std::vector<double>& x, std::vector<double>& h,
                    std::vector<double>& c) {
  const std::size_t hd = h.size();
  std::vector<double> z(4 * hd, 0.0);
  for (std::size_t r = 0; r < 4 * hd; ++r) {
    double s = b(static_cast<Eigen::Index>(r), 0);
    for (std::size_t j = 0; j < x.size(); ++j) s += w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) * x[j];
    for (std::size_t j = 0; j < hd; ++j) s += u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) * h[j];
    z[r] = s;
  }
  for (std::size_t k = 0; k < hd; ++k) {
    const double ig = sigm(z[k]);
    const double fg = sigm(z[hd + k]);
    const double cand = std::tanh(z[2 * hd + k]);
    const double og = sigm(z[3 * hd + k]);
    c[k] = fg * c[k] + ig * cand;
    h[k] = og * std::tanh(c[k]);
  }
}

}  // namespace

TEST_CASE("softmax cross-entropy") {
  Vec logits(4);
  logits << 1, 2, 3, 4;
  const auto r = softmax_xent(logits, 2);
  const double z = std::exp(1) + std::exp(2) + std::exp(3) + std::exp(4);
  CHECK(r.loss == doctest::Approx(-std::log(std::exp(3) / z)));
  CHECK(r.probabilities.sum() == doctest::Approx(1.0));
  Vec huge(2);
  huge << 1000, 0;
  const auto s = softmax_xent(huge, 0);
  CHECK(std::isfinite(s.loss));
  CHECK(s.loss == doctest::Approx(0.0));
  CHECK(softmax_xent(huge, 1).loss == doctest::Approx(1000.0));
}

TEST_CASE("graph ops gradients") {
  Rng rng(3);
  ParameterSet<double> ps;
  auto& a = ps.add("a", random_mat(3, 4, rng));
  auto& b = ps.add("b", random_mat(4, 2, rng));
  auto& bias = ps.add("bias", random_mat(3, 1, rng));
  auto& t = ps.add("table", random_mat(3, 5, rng));
  const std::vector<int> gold = {0, 2};
  auto build = [&](Graph<double>& g) {
    Var x = g.matmul(g.param(a), g.param(b));
    x = g.add_bias(x, g.param(bias));
    Var s = g.sigmoid(x);
    Var th = g.tanh(g.scale(x, 0.5));
    Var r = g.relu(g.sub(x, g.constant(Mat::Constant(3, 2, 0.1))));
    Var m = g.mul(s, th);
    Var e = g.gather_cols(g.param(t), {1, 4});
    Var cat = g.concat_rows({g.add(m, r), e});
    Var top = g.slice_rows(cat, 1, 4);
    Var logits = g.add(g.slice_rows(top, 0, 3), g.slice_rows(cat, 0, 3));
    return g.add(g.softmax_xent(logits, gold), g.scale(g.sum(e), 0.01));
  };
  const auto res = grad_check(ps, build);
  CHECK(res.checked == 12 + 8 + 3 + 15);
  CHECK(res.max_relative_error < 1e-6);
}

TEST_CASE("MLP and LSTM gradients pass the check and corruption is caught") {
  Rng rng(5);
  ParameterSet<double> ps;
  std::vector<DenseLayer<double>> layers = {make_dense(ps, "d0", 6, 5, Activation::Relu, rng),
                                            make_dense(ps, "out", 5, 4, Activation::Identity, rng)};
  const auto lstm = make_lstm(ps, "lstm", 3, 6, rng);
  // Shift the relu inputs away from the kink for finite differences.
  layers[0].bias->value.setConstant(0.05);
  std::vector<Mat> xs;
  for (int s = 0; s < 4; ++s) xs.push_back(random_mat(3, 2, rng));
  Mat mask = Mat::Ones(6, 2);
  mask.col(1).setZero();
  const std::vector<int> gold = {1, 3};
  auto build = [&](Graph<double>& g) {
    std::vector<Var> in, masks;
    for (const auto& x : xs) in.push_back(g.constant(x));
    for (int s = 0; s < 4; ++s) masks.push_back(g.constant(s < 2 ? Mat(Mat::Ones(6, 2)) : mask));
    const auto out = lstm_forward(g, lstm, in, &masks);
    return g.softmax_xent(mlp_forward(g, layers, out.final), gold);
  };
  const auto ok = grad_check(ps, build);
  CHECK(ok.max_relative_error < 1e-5);

  GradCheckOptions bad;
  bad.analytic_scale = 1.01;
  const auto corrupted = grad_check(ps, build, bad);
  CHECK(corrupted.max_relative_error > 5e-3);
}

TEST_CASE("LSTM forward matches a plain-loop reference") {
  Rng rng(7);
  ParameterSet<double> ps;
  const auto lstm = make_lstm(ps, "l", 4, 3, rng);
  CHECK(lstm.b->value.block(3, 0, 3, 1).isApprox(Mat::Ones(3, 1)));
  lstm.b->value = random_mat(12, 1, rng);
  const Mat seq = random_mat(4, 6, rng);
  const auto got = lstm_forward(lstm, seq);
  std::vector<double> h(3, 0.0), c(3, 0.0);
  for (Eigen::Index t = 0; t < seq.cols(); ++t) {
    std::vector<double> x(seq.col(t).data(), seq.col(t).data() + 4);
    reference_step(lstm.w->value, lstm.u->value, lstm.b->value, x, h, c);
    for (std::size_t k = 0; k < 3; ++k) CHECK(got[static_cast<std::size_t>(t)](static_cast<Eigen::Index>(k)) == doctest::Approx(h[k]).epsilon(1e-12));
  }
}

TEST_CASE("masked steps keep the final state") {
  Rng rng(9);
  ParameterSet<double> ps;
  const auto lstm = make_lstm(ps, "l", 2, 3, rng);
  const Mat short_seq = random_mat(2, 3, rng);
  Mat padded = Mat::Zero(2, 5);
  padded.leftCols(3) = short_seq;
  Graph<double> g;
  std::vector<Var> in, masks;
  for (int t = 0; t < 5; ++t) {
    in.push_back(g.constant(padded.col(t)));
    masks.push_back(g.constant(Mat::Constant(3, 1, t < 3 ? 1.0 : 0.0)));
  }
  const auto out = lstm_forward(g, lstm, in, &masks);
  const auto ref = lstm_forward(lstm, short_seq);
  CHECK(Vec(g.value(out.final).col(0)).isApprox(ref.back(), 1e-12));
}

TEST_CASE("dense init bounds and mlp forward agree") {
  Rng rng(11);
  ParameterSet<double> ps;
  const auto d = make_dense(ps, "d", 10, 6, Activation::Relu, rng);
  const double bound = std::sqrt(6.0 / 16.0);
  CHECK(d.weight->value.cwiseAbs().maxCoeff() <= bound);
  CHECK(d.bias->value.isZero());
  CHECK(ps.count() == 66);
  const std::vector<DenseLayer<double>> layers = {d, make_dense(ps, "o", 6, 4, Activation::Softmax, rng)};
  const Mat x = random_mat(10, 3, rng);
  const Mat direct = mlp_forward(layers, x);
  Graph<double> g;
  const Var v = mlp_forward(g, layers, g.constant(x));
  CHECK(g.value(v).isApprox(direct));
  for (Eigen::Index c = 0; c < 3; ++c) CHECK(direct.col(c).sum() == doctest::Approx(1.0));
}

TEST_CASE("dropout") {
  Rng rng(13);
  const Mat x = Mat::Ones(100, 100);
  CHECK(dropout(x, 0.5, DropoutMode::Eval, rng) == x);
  const Mat y = dropout(x, 0.5, DropoutMode::Train, rng);
  const double kept = (y.array() > 0).cast<double>().sum();
  CHECK(kept / 1e4 == doctest::Approx(0.5).epsilon(0.05));
  CHECK(y.maxCoeff() == doctest::Approx(2.0));
  CHECK(y.mean() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("Adam converges on a quadratic and rejects non-finite gradients") {
  ParameterSet<double> ps;
  auto& p = ps.add("p", Mat::Constant(2, 1, 5.0));
  OptimizerConfig cfg;
  cfg.lr = 0.1;
  Optimizer<double> opt(cfg);
  for (int i = 0; i < 500; ++i) {
    ps.zero_grad();
    p.grad = 2.0 * (p.value.array() - 1.0).matrix();
    opt.step(ps);
  }
  CHECK(p.value(0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(opt.steps() == 500);
  const Mat before = p.value;
  p.grad(0) = std::nan("");
  CHECK_THROWS(opt.step(ps));
  CHECK(p.value == before);

  // First Adam step moves each coordinate by lr against the gradient sign.
  ParameterSet<double> q;
  auto& r = q.add("r", Mat::Zero(2, 1));
  Optimizer<double> fresh(cfg);
  r.grad << 3.0, -0.2;
  fresh.step(q);
  CHECK(r.value(0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(r.value(1) == doctest::Approx(0.1).epsilon(1e-6));

  OptimizerConfig sgd;
  sgd.algo = OptimizerAlgo::Sgd;
  sgd.lr = 0.5;
  Optimizer<double> plain(sgd);
  r.value.setZero();
  r.grad << 1.0, 2.0;
  plain.step(q);
  CHECK(r.value(1) == doctest::Approx(-1.0));
}

TEST_CASE("embeddings") {
  testing::TempDir dir;
  testing::write_text(dir.file("e.txt"), "cat 1 0\ndog 0 1\ncat 2 2\n");
  const auto table = load_embeddings(dir.file("e.txt"), 2);
  CHECK(table.size() == 2);
  CHECK(table.duplicates() == 1);
  CHECK(table.lookup("cat")(0) == 2.0);
  CHECK(table.lookup("zebra").isZero());
  testing::write_text(dir.file("bad.txt"), "cat 1\n");
  CHECK_THROWS(load_embeddings(dir.file("bad.txt"), 2));
  testing::write_text(dir.file("nan.txt"), "cat 1 nan\n");
  CHECK_THROWS(load_embeddings(dir.file("nan.txt"), 2));

  const auto seq = embed_sequence(text::tokenize("cat dog"), text::tokenize("zebra cat"), table, 3);
  CHECK(seq.values.cols() == 3);
  CHECK(seq.headline_tokens == 2);
  CHECK(seq.unknown == 1);
  CHECK(seq.values.col(2).isZero());
  const auto empty = embed_sequence({}, {}, table, 10);
  CHECK(empty.values.cols() == 1);
  CHECK(empty.values.isZero());
  CHECK(embed_sequence(text::tokenize("cat dog cat"), {}, table, 2).headline_truncated);
}

TEST_CASE("float instantiation runs") {
  Rng rng(1);
  ParameterSet<float> ps;
  const auto d = make_dense(ps, "d", 3, 2, Activation::Identity, rng);
  Graph<float> g;
  const Var v = dense_forward(g, d, g.constant(Matrix<float>::Ones(3, 1)));
  CHECK(g.value(v).rows() == 2);
}

TEST_CASE("scalar LSTM step against hand arithmetic") {
  Rng rng(1);
  ParameterSet<double> ps;
  const auto lstm = make_lstm(ps, "s", 1, 1, rng);
  lstm.w->value.setOnes();
  lstm.u->value.setOnes();
  lstm.b->value.setOnes();
  Mat x(1, 1);
  x << 1.0;
  const auto out = lstm_forward(lstm, x);
  // h0 = c0 = 0, every pre-activation is 1 + 1 = 2.
  const double s2 = 1.0 / (1.0 + std::exp(-2.0));
  const double c1 = s2 * std::tanh(2.0);
  CHECK(out[0](0) == doctest::Approx(s2 * std::tanh(c1)).epsilon(1e-12));
}
