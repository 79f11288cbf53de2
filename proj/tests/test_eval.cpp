#include <cmath>
#include <map>

#include "doctest.h"
#include "stance/eval.hpp"
#include "support.hpp"

using namespace stance;
using namespace stance::eval;

namespace {

constexpr Stance A = Stance::Agree, D = Stance::Disagree, C = Stance::Discuss, U = Stance::Unrelated;

bool related(Stance s) { return s != U; }

// The official weighting written out per pair: 0.25 for the related /
// unrelated decision, 0.75 more for the exact related class.
double fnc_raw_reference(const std::vector<Stance>& g, const std::vector<Stance>& p) {
  double s = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == p[i]) {
      s += 0.25;
      if (g[i] != U) s += 0.5;
    }
    if (related(g[i]) && related(p[i])) s += 0.25;
  }
  return s;
}

double fnc_max_reference(const std::vector<Stance>& g) {
  double s = 0;
  for (Stance x : g) s += x == U ? 0.25 : 1.0;
  return s;
}

// Per-class F1 from explicit tp / fp / fn counts.
double f1_reference(const std::vector<Stance>& g, const std::vector<Stance>& p, Stance c) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (p[i] == c && g[i] == c) ++tp;
    if (p[i] == c && g[i] != c) ++fp;
    if (p[i] != c && g[i] == c) ++fn;
  }
  if (tp == 0) return 0.0;
  const double prec = tp / (tp + fp), rec = tp / (tp + fn);
  return 2 * prec * rec / (prec + rec);
}

// Fleiss' kappa for a complete matrix with a fixed rater count per item.
double fleiss_reference(const std::vector<std::vector<Stance>>& rows) {
  const double n = static_cast<double>(rows[0].size());
  const double items = static_cast<double>(rows.size());
  std::array<double, 4> col{};
  double p_bar = 0;
  for (const auto& r : rows) {
    std::array<double, 4> cnt{};
    for (Stance s : r) cnt[index_of(s)] += 1;
    double agree = 0;
    for (int k = 0; k < 4; ++k) {
      agree += cnt[k] * (cnt[k] - 1);
      col[k] += cnt[k];
    }
    p_bar += agree / (n * (n - 1));
  }
  p_bar /= items;
  double pe = 0;
  for (double c : col) pe += (c / (items * n)) * (c / (items * n));
  return (p_bar - pe) / (1 - pe);
}

std::vector<Stance> expand(const std::array<std::size_t, 4>& counts) {
  std::vector<Stance> v;
  for (std::size_t k = 0; k < 4; ++k) v.insert(v.end(), counts[k], stance_at(k));
  return v;
}

}  // namespace

TEST_CASE("FNC score and F1 agree with the reference on random pairs") {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<Stance> g(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = stance_at(rng.below(4));
      p[i] = stance_at(rng.below(4));
    }
    const auto r = evaluate(g, p);
    CHECK(r.fnc.raw == doctest::Approx(fnc_raw_reference(g, p)));
    CHECK(r.fnc.max == doctest::Approx(fnc_max_reference(g)));
    CHECK(r.fnc.normalized == doctest::Approx(fnc_raw_reference(g, p) / fnc_max_reference(g)));
    double macro = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const double f = f1_reference(g, p, stance_at(k));
      CHECK(r.f1.per_class[k] == doctest::Approx(f));
      macro += f / 4;
    }
    CHECK(r.f1.macro == doctest::Approx(macro));
    CHECK(r.confusion.total() == n);
    CHECK(evaluate(g, g).fnc.normalized == doctest::Approx(1.0));
  }
  CHECK_THROWS(fnc_score({A}, {}));
  CHECK_THROWS(fnc_score({}, {}));
}

TEST_CASE("published test-split baselines") {
  const auto gold = expand({1903, 697, 4464, 18349});
  const auto all_unr = evaluate(gold, std::vector<Stance>(gold.size(), U));
  CHECK(all_unr.fnc.normalized == doctest::Approx(0.3937).epsilon(5e-4));
  CHECK(all_unr.f1.per_class[3] == doctest::Approx(0.8386).epsilon(5e-4));
  CHECK(all_unr.f1.macro == doctest::Approx(0.2097).epsilon(5e-4));
  std::vector<Stance> dsc(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) dsc[i] = gold[i] == U ? U : C;
  const auto r = evaluate(gold, dsc);
  CHECK(r.fnc.normalized == doctest::Approx(0.8326).epsilon(5e-4));
  CHECK(r.f1.macro == doctest::Approx(0.4436).epsilon(5e-4));
}

TEST_CASE("prediction files") {
  testing::TempDir dir;
  const Corpus c = testing::synthetic_corpus({});
  std::vector<Stance> pred;
  for (std::size_t i = 0; i < c.size(); ++i) pred.push_back(stance_at((i * 7) % 4));
  write_predictions(dir.file("p.csv"), c, pred);
  const auto rows = load_predictions(dir.file("p.csv"));
  CHECK(align_predictions(c, rows) == pred);
  auto shuffled = rows;
  std::swap(shuffled[0], shuffled[1]);
  CHECK_THROWS(align_predictions(c, shuffled));
  shuffled.pop_back();
  CHECK_THROWS(align_predictions(c, shuffled));
  testing::write_text(dir.file("bad.csv"), "Headline,Body ID,Stance\nh,1,maybe\n");
  CHECK_THROWS(load_predictions(dir.file("bad.csv")));
}

TEST_CASE("Fleiss kappa") {
  const auto m = AnnotationMatrix::from_grid({{A, A, D}, {C, C, C}});
  CHECK(fleiss_kappa(m) == doctest::Approx(5.0 / 11.0));
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<Stance>> rows(2 + rng.below(20), std::vector<Stance>(2 + rng.below(4)));
    for (auto& r : rows) {
      const Stance base = stance_at(rng.below(4));
      for (auto& s : r) s = rng.bernoulli(0.6) ? base : stance_at(rng.below(4));
    }
    std::vector<std::vector<std::optional<Stance>>> grid;
    for (const auto& r : rows) grid.emplace_back(r.begin(), r.end());
    const double ref = fleiss_reference(rows);
    if (std::isfinite(ref)) CHECK(fleiss_kappa(AnnotationMatrix::from_grid(grid)) == doctest::Approx(ref));
  }
  // Items with a single annotation cannot enter the statistic.
  CHECK_THROWS(fleiss_kappa(AnnotationMatrix::from_grid({{A, std::nullopt}})));
  const std::vector<Stance> rel = {A, D, C};
  const auto mixed = AnnotationMatrix::from_grid({{A, A, D}, {U, U, U}, {C, C, A}});
  CHECK_NOTHROW(fleiss_kappa(mixed, &rel));
  const auto only_unrelated = AnnotationMatrix::from_grid({{U, U}, {U, U}});
  CHECK_THROWS(fleiss_kappa(only_unrelated, &rel));
}

TEST_CASE("MACE: objective non-decreasing and spammer detected") {
  Rng rng(5);
  std::vector<Stance> truth;
  std::vector<std::vector<std::optional<Stance>>> grid;
  for (int i = 0; i < 120; ++i) {
    const Stance t = stance_at(rng.below(4));
    truth.push_back(t);
    std::vector<std::optional<Stance>> row;
    for (int r = 0; r < 4; ++r) row.push_back(rng.bernoulli(0.9) ? t : stance_at(rng.below(4)));
    row.push_back(stance_at(rng.below(4)));  // rater 4 guesses
    grid.push_back(row);
  }
  const auto m = AnnotationMatrix::from_grid(grid);
  MaceOptions opts;
  opts.restarts = 3;
  const auto res = mace_aggregate(m, opts);
  for (const auto& trace : res.traces) {
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-9);
  }
  CHECK(res.competences[4] < res.competences[0]);
  CHECK(res.competences[0] > 0.7);
  std::size_t right = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) right += res.labels[i] == truth[i];
  CHECK(right >= 115);
  for (const auto& p : res.posteriors) CHECK(p[0] + p[1] + p[2] + p[3] == doctest::Approx(1.0));
  CHECK(mace_aggregate(m, opts).labels == res.labels);

  const auto up = upper_bound_report(res.labels, truth);
  CHECK(up.fnc.normalized > 0.9);
  CHECK(majority_vote(m).size() == truth.size());
  const auto rep = agreement_report(m, opts);
  CHECK(rep.kappa_related_only.has_value());
  CHECK(rep.kappa_all > 0.3);
}

TEST_CASE("annotation files") {
  testing::TempDir dir;
  testing::write_text(dir.file("a.csv"),
                      "item_id,rater_id,label\nx,r1,agree\nx,r2,disagree\ny,r2,unrelated\ny,r1,unrelated\n");
  const auto m = load_annotations(dir.file("a.csv"));
  CHECK(m.items() == 2);
  CHECK(m.raters() == 2);
  CHECK(m.labels[0][1] == D);
  CHECK(m.labels[1][0] == U);
  CHECK(majority_label(m.labels[0]) == A);
  testing::write_text(dir.file("dup.csv"), "item_id,rater_id,label\nx,r1,agree\nx,r1,agree\n");
  CHECK_THROWS(load_annotations(dir.file("dup.csv")));
}

TEST_CASE("hand-scored examples") {
  const auto s = fnc_score({U, A, A, C}, {U, A, U, C});
  CHECK(s.raw == doctest::Approx(2.25));
  CHECK(s.max == doctest::Approx(3.25));
  CHECK(s.normalized == doctest::Approx(2.25 / 3.25).epsilon(1e-9));
  const auto f = f1_scores(confusion({A, A, D, U}, {A, D, D, U}));
  CHECK(f.per_class[0] == doctest::Approx(2.0 / 3.0));
  CHECK(f.per_class[1] == doctest::Approx(2.0 / 3.0));
  CHECK(f.per_class[2] == 0.0);
  CHECK(f.per_class[3] == 1.0);
  CHECK(f.macro == doctest::Approx(0.5833333333).epsilon(1e-9));
}
