#include "stance/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "stance/csv.hpp"
#include "stance/random.hpp"

namespace stance::eval {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (auto c : row) n += c;
  }
  return n;
}

FncScore fnc_score(const std::vector<Stance>& gold, const std::vector<Stance>& pred) {
  if (gold.size() != pred.size()) throw std::invalid_argument("fnc_score: gold and prediction lengths differ");
  if (gold.empty()) throw std::invalid_argument("fnc_score: nothing to score");
  FncScore s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool g_rel = is_related(gold[i]);
    const bool p_rel = is_related(pred[i]);
    if (g_rel == p_rel) s.raw += 0.25;
    if (g_rel && p_rel && gold[i] == pred[i]) s.raw += 0.75;
    s.max += g_rel ? 1.0 : 0.25;
  }
  s.normalized = s.raw / s.max;
  return s;
}

ConfusionMatrix confusion(const std::vector<Stance>& gold, const std::vector<Stance>& pred) {
  if (gold.size() != pred.size()) throw std::invalid_argument("confusion: gold and prediction lengths differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) ++cm.counts[index_of(gold[i])][index_of(pred[i])];
  return cm;
}

F1Scores f1_scores(const ConfusionMatrix& cm) {
  F1Scores f;
  for (std::size_t c = 0; c < kNumStances; ++c) {
    std::size_t tp = cm.counts[c][c], gold_n = 0, pred_n = 0;
    for (std::size_t k = 0; k < kNumStances; ++k) {
      gold_n += cm.counts[c][k];
      pred_n += cm.counts[k][c];
    }
    const double p = pred_n ? static_cast<double>(tp) / static_cast<double>(pred_n) : 0.0;
    const double r = gold_n ? static_cast<double>(tp) / static_cast<double>(gold_n) : 0.0;
    f.per_class[c] = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    f.macro += f.per_class[c];
  }
  f.macro /= static_cast<double>(kNumStances);
  return f;
}

EvaluationReport evaluate(const std::vector<Stance>& gold, const std::vector<Stance>& pred) {
  EvaluationReport r;
  r.fnc = fnc_score(gold, pred);
  r.confusion = confusion(gold, pred);
  r.f1 = f1_scores(r.confusion);
  return r;
}

// ---------------------------------------------------------------------------
// Prediction files

void write_predictions(const std::string& path, const Corpus& corpus, const std::vector<Stance>& pred) {
  if (pred.size() != corpus.size()) throw std::invalid_argument("write_predictions: size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  csv::write_row(out, {"Headline", "Body ID", "Stance"});
  for (std::size_t i = 0; i < pred.size(); ++i) {
    csv::write_row(out, {corpus[i].headline, std::to_string(corpus[i].body_id), std::string(to_string(pred[i]))});
  }
}

std::vector<PredictionRow> load_predictions(const std::string& path) {
  std::vector<PredictionRow> out;
  for (const auto& rec : csv::read_table(path, {"Headline", "Body ID", "Stance"})) {
    PredictionRow row;
    row.headline = rec.fields[0];
    try {
      row.body_id = std::stoll(rec.fields[1]);
      row.stance = parse_stance(rec.fields[2]);
    } catch (const std::exception& e) {
      throw csv::ParseError(path, rec.line, e.what());
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<Stance> align_predictions(const Corpus& gold, const std::vector<PredictionRow>& rows) {
  if (rows.size() != gold.size()) {
    throw std::invalid_argument("predictions have " + std::to_string(rows.size()) + " rows, gold has " +
                                std::to_string(gold.size()));
  }
  std::vector<Stance> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].headline != gold[i].headline || rows[i].body_id != gold[i].body_id) {
      throw std::invalid_argument("prediction row " + std::to_string(i + 1) + " does not match the gold pair");
    }
    out.push_back(rows[i].stance);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agreement

AnnotationMatrix AnnotationMatrix::from_grid(std::vector<std::vector<std::optional<Stance>>> grid) {
  AnnotationMatrix m;
  std::size_t raters = 0;
  for (const auto& row : grid) raters = std::max(raters, row.size());
  for (auto& row : grid) row.resize(raters);
  for (std::size_t i = 0; i < grid.size(); ++i) m.item_ids.push_back(std::to_string(i));
  for (std::size_t j = 0; j < raters; ++j) m.rater_ids.push_back(std::to_string(j));
  m.labels = std::move(grid);
  return m;
}

AnnotationMatrix load_annotations(const std::string& path) {
  AnnotationMatrix m;
  std::map<std::string, std::size_t> items, raters;
  struct Cell {
    std::size_t item, rater;
    Stance label;
    std::size_t line;
  };
  std::vector<Cell> cells;
  for (const auto& rec : csv::read_table(path, {"item_id", "rater_id", "label"})) {
    auto [it, new_item] = items.emplace(rec.fields[0], m.item_ids.size());
    if (new_item) m.item_ids.push_back(rec.fields[0]);
    auto [rt, new_rater] = raters.emplace(rec.fields[1], m.rater_ids.size());
    if (new_rater) m.rater_ids.push_back(rec.fields[1]);
    Stance s;
    try {
      s = parse_stance(rec.fields[2]);
    } catch (const std::exception& e) {
      throw csv::ParseError(path, rec.line, e.what());
    }
    cells.push_back({it->second, rt->second, s, rec.line});
  }
  m.labels.assign(m.item_ids.size(), std::vector<std::optional<Stance>>(m.rater_ids.size()));
  for (const auto& c : cells) {
    if (m.labels[c.item][c.rater]) throw csv::ParseError(path, c.line, "duplicate annotation");
    m.labels[c.item][c.rater] = c.label;
  }
  return m;
}

std::optional<Stance> majority_label(const std::vector<std::optional<Stance>>& row) {
  std::array<std::size_t, kNumStances> counts{};
  bool any = false;
  for (const auto& l : row) {
    if (l) {
      ++counts[index_of(*l)];
      any = true;
    }
  }
  if (!any) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumStances; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return stance_at(best);
}

double fleiss_kappa(const AnnotationMatrix& annotations, const std::vector<Stance>* subset) {
  double p_bar = 0.0;
  std::array<double, kNumStances> class_totals{};
  double total = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < annotations.items(); ++i) {
    const auto& row = annotations.labels[i];
    if (subset) {
      const auto maj = majority_label(row);
      if (!maj || std::find(subset->begin(), subset->end(), *maj) == subset->end()) continue;
    }
    std::array<double, kNumStances> n{};
    double ni = 0.0;
    for (const auto& l : row) {
      if (l) {
        n[index_of(*l)] += 1.0;
        ni += 1.0;
      }
    }
    if (ni < 2.0) {
      throw std::invalid_argument("item " + annotations.item_ids[i] + " has fewer than two annotations");
    }
    double agree = 0.0;
    for (std::size_t c = 0; c < kNumStances; ++c) {
      agree += n[c] * (n[c] - 1.0);
      class_totals[c] += n[c];
    }
    p_bar += agree / (ni * (ni - 1.0));
    total += ni;
    ++kept;
  }
  if (kept == 0) throw std::invalid_argument("fleiss_kappa: no items to score");
  p_bar /= static_cast<double>(kept);
  if (p_bar == 1.0) return 1.0;
  double p_e = 0.0;
  for (double t : class_totals) p_e += (t / total) * (t / total);
  return (p_bar - p_e) / (1.0 - p_e);
}

std::vector<Stance> majority_vote(const AnnotationMatrix& annotations) {
  std::vector<Stance> out;
  for (const auto& row : annotations.labels) {
    const auto m = majority_label(row);
    if (!m) throw std::invalid_argument("majority_vote: item without annotations");
    out.push_back(*m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// MACE

namespace {

constexpr std::size_t K = kNumStances;

struct MaceParams {
  std::vector<double> spam;                     ///< per rater
  std::vector<std::array<double, K>> strategy;  ///< per rater
};

struct Obs {
  std::size_t rater;
  std::size_t label;
};

/// Per-item annotation lists.
std::vector<std::vector<Obs>> observations(const AnnotationMatrix& a) {
  std::vector<std::vector<Obs>> out(a.items());
  for (std::size_t i = 0; i < a.items(); ++i) {
    for (std::size_t j = 0; j < a.raters(); ++j) {
      if (const auto& l = a.labels[i][j]) out[i].push_back({j, index_of(*l)});
    }
  }
  return out;
}

double log_prior(const MaceParams& p, double smoothing) {
  double lp = 0.0;
  for (std::size_t j = 0; j < p.spam.size(); ++j) {
    lp += smoothing * (std::log(p.spam[j]) + std::log(1.0 - p.spam[j]));
    for (double x : p.strategy[j]) lp += smoothing * std::log(x);
  }
  return lp;
}

/// E-step; fills item posteriors and returns the marginal log-likelihood.
double e_step(const std::vector<std::vector<Obs>>& obs, const MaceParams& p,
              std::vector<std::array<double, K>>& post) {
  double ll = 0.0;
  post.assign(obs.size(), {});
  for (std::size_t i = 0; i < obs.size(); ++i) {
    std::array<double, K> logp{};
    for (std::size_t t = 0; t < K; ++t) {
      double s = std::log(1.0 / static_cast<double>(K));
      for (const auto& o : obs[i]) {
        const double spam_part = p.spam[o.rater] * p.strategy[o.rater][o.label];
        const double copy_part = o.label == t ? 1.0 - p.spam[o.rater] : 0.0;
        s += std::log(spam_part + copy_part);
      }
      logp[t] = s;
    }
    const double mx = *std::max_element(logp.begin(), logp.end());
    double z = 0.0;
    for (std::size_t t = 0; t < K; ++t) z += std::exp(logp[t] - mx);
    for (std::size_t t = 0; t < K; ++t) post[i][t] = std::exp(logp[t] - mx) / z;
    ll += mx + std::log(z);
  }
  return ll;
}

void m_step(const std::vector<std::vector<Obs>>& obs, const std::vector<std::array<double, K>>& post,
            double smoothing, MaceParams& p) {
  const std::size_t r = p.spam.size();
  std::vector<double> copy_count(r, 0.0), spam_count(r, 0.0);
  std::vector<std::array<double, K>> label_count(r, std::array<double, K>{});
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (const auto& o : obs[i]) {
      const double spam_part = p.spam[o.rater] * p.strategy[o.rater][o.label];
      const double copy_part = 1.0 - p.spam[o.rater];
      // P(copy | data) = P(true = label) * copy / (copy + spam).
      const double copy_resp = post[i][o.label] * copy_part / (copy_part + spam_part);
      const double spam_resp = 1.0 - copy_resp;
      copy_count[o.rater] += copy_resp;
      spam_count[o.rater] += spam_resp;
      label_count[o.rater][o.label] += spam_resp;
    }
  }
  for (std::size_t j = 0; j < r; ++j) {
    p.spam[j] = (spam_count[j] + smoothing) / (spam_count[j] + copy_count[j] + 2.0 * smoothing);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += label_count[j][k] + smoothing;
    for (std::size_t k = 0; k < K; ++k) p.strategy[j][k] = (label_count[j][k] + smoothing) / z;
  }
}

}  // namespace

MaceResult mace_aggregate(const AnnotationMatrix& annotations, const MaceOptions& opts) {
  if (opts.restarts == 0) throw std::invalid_argument("mace_aggregate: at least one restart is required");
  if (!(opts.smoothing > 0.0)) throw std::invalid_argument("mace_aggregate: smoothing must be positive");
  const auto obs = observations(annotations);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].empty()) throw std::invalid_argument("item " + annotations.item_ids[i] + " has no annotations");
  }
  const std::size_t r = annotations.raters();

  MaceResult best;
  best.objective = -std::numeric_limits<double>::infinity();
  MaceParams best_params;
  for (std::size_t restart = 0; restart < opts.restarts; ++restart) {
    Rng rng(derive_seed(opts.seed, restart));
    MaceParams p;
    p.spam.resize(r);
    p.strategy.resize(r);
    for (std::size_t j = 0; j < r; ++j) {
      p.spam[j] = rng.uniform(0.05, 0.95);
      double z = 0.0;
      for (std::size_t k = 0; k < K; ++k) z += (p.strategy[j][k] = rng.uniform(0.1, 1.0));
      for (std::size_t k = 0; k < K; ++k) p.strategy[j][k] /= z;
    }
    std::vector<double> trace;
    std::vector<std::array<double, K>> post;
    for (std::size_t it = 0; it < opts.iterations; ++it) {
      trace.push_back(e_step(obs, p, post) + log_prior(p, opts.smoothing));
      m_step(obs, post, opts.smoothing, p);
    }
    const double final_obj = e_step(obs, p, post) + log_prior(p, opts.smoothing);
    trace.push_back(final_obj);
    best.traces.push_back(trace);
    if (final_obj > best.objective) {
      best.objective = final_obj;
      best.best_restart = restart;
      best.posteriors = post;
      best_params = p;
    }
  }
  best.labels.clear();
  for (const auto& pi : best.posteriors) {
    std::size_t arg = 0;
    for (std::size_t t = 1; t < K; ++t) {
      if (pi[t] > pi[arg]) arg = t;
    }
    best.labels.push_back(stance_at(arg));
  }
  best.competences.clear();
  for (double s : best_params.spam) best.competences.push_back(1.0 - s);
  return best;
}

EvaluationReport upper_bound_report(const std::vector<Stance>& aggregated, const std::vector<Stance>& gold) {
  if (aggregated.size() != gold.size()) throw std::invalid_argument("upper_bound_report: length mismatch");
  return evaluate(gold, aggregated);
}

AgreementReport agreement_report(const AnnotationMatrix& annotations, const MaceOptions& opts) {
  AgreementReport rep;
  rep.kappa_all = fleiss_kappa(annotations);
  const std::vector<Stance> related = {Stance::Agree, Stance::Disagree, Stance::Discuss};
  try {
    rep.kappa_related_only = fleiss_kappa(annotations, &related);
  } catch (const std::invalid_argument&) {
    rep.kappa_related_only.reset();
  }
  rep.mace = mace_aggregate(annotations, opts);
  return rep;
}

}  // namespace stance::eval
