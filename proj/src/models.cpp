#include "stance/models.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "stance/random.hpp"
#include "stance/textproc.hpp"

namespace stance::models {

using json = nlohmann::json;
constexpr std::size_t K = kNumStances;

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Majority:
      return "majority";
    case ModelKind::Gbdt:
      return "gbdt";
    case ModelKind::FeatMlp:
      return "featmlp";
    case ModelKind::StackLstm:
      return "stacklstm";
    case ModelKind::Ensemble:
      return "ensemble";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  for (ModelKind k : {ModelKind::Majority, ModelKind::Gbdt, ModelKind::FeatMlp, ModelKind::StackLstm,
                      ModelKind::Ensemble}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown model kind: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Majority and voting

Stance majority_label(const std::vector<Stance>& labels) {
  if (labels.empty()) throw std::invalid_argument("majority of an empty label list");
  std::array<std::size_t, K> counts{};
  for (Stance s : labels) ++counts[index_of(s)];
  constexpr std::array<Stance, K> priority = {Stance::Unrelated, Stance::Discuss, Stance::Agree, Stance::Disagree};
  Stance best = priority[0];
  for (Stance s : priority) {
    if (counts[index_of(s)] > counts[index_of(best)]) best = s;
  }
  return best;
}

std::vector<Stance> ensemble_vote(const std::vector<std::vector<Stance>>& votes) {
  if (votes.empty()) throw std::invalid_argument("ensemble_vote needs at least one voter");
  const std::size_t n = votes[0].size();
  for (const auto& v : votes) {
    if (v.size() != n) throw std::invalid_argument("ensemble_vote: voters disagree on length");
  }
  constexpr std::array<Stance, K> priority = {Stance::Disagree, Stance::Agree, Stance::Discuss, Stance::Unrelated};
  std::vector<Stance> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<std::size_t, K> counts{};
    for (const auto& v : votes) ++counts[index_of(v[i])];
    Stance best = priority[0];
    for (Stance s : priority) {
      if (counts[index_of(s)] > counts[index_of(best)]) best = s;
    }
    out[i] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient boosting

double RegressionTree::predict(const Vec& x) const {
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

namespace {

void require_finite(const Mat& x, const char* who) {
  if (!x.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite feature value");
}

void softmax_rows(const Mat& scores, Mat& p) {
  p.resize(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double mx = scores.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index k = 0; k < scores.cols(); ++k) z += (p(i, k) = std::exp(scores(i, k) - mx));
    p.row(i) /= z;
  }
}

double log_loss(const Mat& scores, const std::vector<Stance>& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double mx = scores.row(i).maxCoeff();
    const double lse = mx + std::log((scores.row(i).array() - mx).exp().sum());
    total += lse - scores(i, static_cast<Eigen::Index>(index_of(y[static_cast<std::size_t>(i)])));
  }
  return total / static_cast<double>(scores.rows());
}

struct SplitScan {
  double sum_left = 0.0;
  std::size_t n_left = 0;
  double prev = 0.0;
  bool has_prev = false;
};

struct OpenNode {
  int tree_index = 0;
  double sum = 0.0;
  std::size_t count = 0;
  double best_gain = 0.0;
  int best_feature = -1;
  double best_threshold = 0.0;
};

/// Least-squares regression tree on `residual`, grown level by level with
/// exact greedy splits. Leaves take the multiclass Newton step.
RegressionTree grow_tree(const Mat& x, const std::vector<std::vector<Eigen::Index>>& sorted, const Vec& residual,
                         const Vec& hess, std::size_t depth) {
  const auto n = static_cast<std::size_t>(x.rows());
  RegressionTree tree;
  tree.nodes.push_back(TreeNode{});
  std::vector<int> node_of(n, 0);
  std::vector<OpenNode> open(1);
  open[0].tree_index = 0;
  open[0].count = n;
  open[0].sum = residual.sum();

  for (std::size_t level = 0; level < depth && !open.empty(); ++level) {
    // Map tree node -> position in `open`.
    std::vector<int> slot(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < open.size(); ++s) slot[static_cast<std::size_t>(open[s].tree_index)] = static_cast<int>(s);
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      std::vector<SplitScan> scan(open.size());
      for (Eigen::Index idx : sorted[static_cast<std::size_t>(f)]) {
        const int nd = node_of[static_cast<std::size_t>(idx)];
        if (nd < 0) continue;
        const int s = slot[static_cast<std::size_t>(nd)];
        if (s < 0) continue;
        auto& sc = scan[static_cast<std::size_t>(s)];
        auto& on = open[static_cast<std::size_t>(s)];
        const double v = x(idx, f);
        if (sc.has_prev && v > sc.prev) {
          const double nl = static_cast<double>(sc.n_left);
          const double nr = static_cast<double>(on.count - sc.n_left);
          const double sr = on.sum - sc.sum_left;
          const double gain = sc.sum_left * sc.sum_left / nl + sr * sr / nr - on.sum * on.sum / static_cast<double>(on.count);
          if (gain > on.best_gain) {
            on.best_gain = gain;
            on.best_feature = static_cast<int>(f);
            double thr = 0.5 * (sc.prev + v);
            if (!(thr < v)) thr = sc.prev;
            on.best_threshold = thr;
          }
        }
        sc.sum_left += residual(idx);
        ++sc.n_left;
        sc.prev = v;
        sc.has_prev = true;
      }
    }
    std::vector<OpenNode> next;
    for (const auto& on : open) {
      if (on.best_feature < 0 || on.best_gain <= 1e-12) continue;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(TreeNode{});
      tree.nodes.push_back(TreeNode{});
      auto& parent = tree.nodes[static_cast<std::size_t>(on.tree_index)];
      parent.feature = on.best_feature;
      parent.threshold = on.best_threshold;
      parent.left = left;
      parent.right = left + 1;
      OpenNode l, r;
      l.tree_index = left;
      r.tree_index = left + 1;
      next.push_back(l);
      next.push_back(r);
    }
    // Route samples of split nodes to their children.
    for (std::size_t i = 0; i < n; ++i) {
      const int nd = node_of[i];
      const auto& tn = tree.nodes[static_cast<std::size_t>(nd)];
      if (tn.feature < 0) continue;
      node_of[i] = x(static_cast<Eigen::Index>(i), tn.feature) <= tn.threshold ? tn.left : tn.right;
    }
    for (auto& on : next) {
      on.sum = 0.0;
      on.count = 0;
    }
    std::vector<int> next_slot(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < next.size(); ++s) next_slot[static_cast<std::size_t>(next[s].tree_index)] = static_cast<int>(s);
    for (std::size_t i = 0; i < n; ++i) {
      const int s = next_slot[static_cast<std::size_t>(node_of[i])];
      if (s < 0) continue;
      next[static_cast<std::size_t>(s)].sum += residual(static_cast<Eigen::Index>(i));
      ++next[static_cast<std::size_t>(s)].count;
    }
    open = std::move(next);
  }

  std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    num[static_cast<std::size_t>(node_of[i])] += residual(static_cast<Eigen::Index>(i));
    den[static_cast<std::size_t>(node_of[i])] += hess(static_cast<Eigen::Index>(i));
  }
  const double factor = static_cast<double>(K - 1) / static_cast<double>(K);
  for (std::size_t t = 0; t < tree.nodes.size(); ++t) {
    if (tree.nodes[t].feature >= 0) continue;
    tree.nodes[t].value = den[t] < 1e-150 ? 0.0 : factor * num[t] / den[t];
  }
  return tree;
}

}  // namespace

GbdtModel fit_gbdt(const Mat& x, const std::vector<Stance>& y, const GbdtHyper& hyper) {
  const auto start = std::chrono::steady_clock::now();
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.empty()) {
    throw std::invalid_argument("fit_gbdt: feature rows and labels differ or are empty");
  }
  require_finite(x, "fit_gbdt");
  GbdtModel model;
  model.n_features = static_cast<std::size_t>(x.cols());
  model.learning_rate = hyper.learning_rate;
  std::size_t classes = 0;
  for (Stance s : y) model.prior[index_of(s)] += 1.0;
  for (double& p : model.prior) {
    classes += p > 0.0 ? 1 : 0;
    p /= static_cast<double>(y.size());
  }
  if (classes < 2) throw std::invalid_argument("fit_gbdt: at least two classes must be present");

  std::vector<std::vector<Eigen::Index>> sorted(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    auto& idx = sorted[static_cast<std::size_t>(f)];
    idx.resize(static_cast<std::size_t>(x.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a, f) < x(b, f); });
  }

  const Eigen::Index n = x.rows();
  Mat scores = Mat::Zero(n, static_cast<Eigen::Index>(K));
  Mat p;
  model.meta.loss_trace.push_back(log_loss(scores, y));
  for (std::size_t round = 0; round < hyper.trees; ++round) {
    softmax_rows(scores, p);
    std::array<RegressionTree, K> trees;
    for (std::size_t k = 0; k < K; ++k) {
      Vec residual(n), hess(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double target = index_of(y[static_cast<std::size_t>(i)]) == k ? 1.0 : 0.0;
        const double pk = p(i, static_cast<Eigen::Index>(k));
        residual(i) = target - pk;
        hess(i) = std::abs(residual(i)) * (1.0 - std::abs(residual(i)));
      }
      trees[k] = grow_tree(x, sorted, residual, hess, hyper.depth);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec row = x.row(i).transpose();
      for (std::size_t k = 0; k < K; ++k) scores(i, static_cast<Eigen::Index>(k)) += hyper.learning_rate * trees[k].predict(row);
    }
    model.rounds.push_back(std::move(trees));
    model.meta.loss_trace.push_back(log_loss(scores, y));
  }
  model.meta.epochs = hyper.trees;
  model.meta.final_loss = model.meta.loss_trace.back();
  model.meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return model;
}

Vec gbdt_scores(const GbdtModel& model, const Vec& x) {
  if (static_cast<std::size_t>(x.size()) != model.n_features) throw std::invalid_argument("gbdt: feature width mismatch");
  Vec s = Vec::Zero(static_cast<Eigen::Index>(K));
  for (const auto& round : model.rounds) {
    for (std::size_t k = 0; k < K; ++k) s(static_cast<Eigen::Index>(k)) += model.learning_rate * round[k].predict(x);
  }
  return s;
}

namespace {

Probabilities to_probabilities(const Vec& logits) {
  const Vec p = nn::softmax(logits);
  Probabilities out{};
  for (std::size_t k = 0; k < K; ++k) out[k] = p(static_cast<Eigen::Index>(k));
  return out;
}

std::size_t argmax(const Probabilities& p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < K; ++k) {
    if (p[k] > p[best]) best = k;
  }
  return best;
}

}  // namespace

Probabilities gbdt_proba(const GbdtModel& model, const Vec& x) { return to_probabilities(gbdt_scores(model, x)); }

Stance gbdt_predict(const GbdtModel& model, const Vec& x) {
  const Probabilities p = gbdt_proba(model, x);
  std::size_t best = 0;
  for (std::size_t k = 1; k < K; ++k) {
    if (p[k] > p[best] || (p[k] == p[best] && model.prior[k] > model.prior[best])) best = k;
  }
  return stance_at(best);
}

// ---------------------------------------------------------------------------
// Standardization

Standardizer Standardizer::fit(const Mat& x) {
  Standardizer s;
  const double n = static_cast<double>(std::max<Eigen::Index>(x.rows(), 1));
  s.mean = x.colwise().sum().transpose() / n;
  s.scale = Vec::Ones(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    if (sd > 1e-12) s.scale(j) = sd;
  }
  return s;
}

Mat Standardizer::apply(const Mat& x) const {
  Mat out = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = (x.col(j).array() - mean(j)) / scale(j);
  return out;
}

Vec Standardizer::apply(const Vec& x) const { return ((x - mean).array() / scale.array()).matrix(); }

// ---------------------------------------------------------------------------
// Shared training loop

namespace {

struct LoopHooks {
  std::function<nn::Var(nn::Graph<double>&, const std::vector<std::size_t>&, Rng&)> batch_loss;
  std::function<double(const std::vector<std::size_t>&)> eval_loss;
  std::function<double(const std::vector<std::size_t>&)> accuracy;
};

TrainingMetadata run_training(nn::ParameterSet<double>& params, std::size_t n, const NetTraining& t,
                              const LoopHooks& hooks) {
  const auto start = std::chrono::steady_clock::now();
  if (t.batch == 0) throw std::invalid_argument("batch size must be positive");
  Rng rng(derive_seed(t.seed, 1));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> val;
  if (t.validation_fraction > 0.0) {
    rng.shuffle(order);
    const auto n_val = static_cast<std::size_t>(std::llround(t.validation_fraction * static_cast<double>(n)));
    if (n_val >= 1 && n_val < n) {
      val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
      order.erase(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
      std::sort(val.begin(), val.end());
      std::sort(order.begin(), order.end());
    } else {
      std::sort(order.begin(), order.end());
    }
  }

  nn::OptimizerConfig oc;
  oc.lr = t.learning_rate;
  nn::Optimizer<double> opt(oc);
  TrainingMetadata meta;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Mat> best_values;
  std::size_t wait = 0;
  for (std::size_t epoch = 0; epoch < t.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += t.batch) {
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(b),
                                           order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + t.batch)));
      params.zero_grad();
      nn::Graph<double> g;
      nn::Var loss = hooks.batch_loss(g, batch, rng);
      const double l = g.value(loss)(0, 0);
      if (!std::isfinite(l)) throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch + 1));
      g.backward(loss);
      opt.step(params);
      total += l * static_cast<double>(batch.size());
    }
    meta.epochs = epoch + 1;
    meta.loss_trace.push_back(total / static_cast<double>(std::max<std::size_t>(order.size(), 1)));
    if (t.stop_at_train_accuracy <= 1.0) {
      const double acc = hooks.accuracy(order);
      meta.train_accuracy_trace.push_back(acc);
      if (acc >= t.stop_at_train_accuracy) break;
    }
    if (!val.empty()) {
      const double vl = hooks.eval_loss(val);
      if (vl < best_val) {
        best_val = vl;
        best_values.clear();
        for (const auto* p : params.all()) best_values.push_back(p->value);
        wait = 0;
      } else if (++wait >= t.patience) {
        meta.early_stopped = true;
        break;
      }
    }
  }
  if (!best_values.empty()) {
    auto all = params.all();
    for (std::size_t i = 0; i < all.size(); ++i) all[i]->value = best_values[i];
  }
  meta.final_loss = meta.loss_trace.empty() ? 0.0 : meta.loss_trace.back();
  meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return meta;
}

std::vector<int> gold_of(const std::vector<Stance>& y, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(static_cast<int>(index_of(y[i])));
  return out;
}

Mat gather_columns(const Mat& xt, const std::vector<std::size_t>& idx) {
  Mat out(xt.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = xt.col(static_cast<Eigen::Index>(idx[j]));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// featMLP

FeatMlpNet make_featmlp(std::size_t inputs, std::size_t hidden_layers, std::size_t hidden_size, Rng& rng) {
  FeatMlpNet net;
  std::size_t in = inputs;
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    net.layers.push_back(nn::make_dense(net.params, "dense" + std::to_string(l), in, hidden_size, nn::Activation::Relu, rng));
    in = hidden_size;
  }
  net.layers.push_back(nn::make_dense(net.params, "out", in, K, nn::Activation::Identity, rng));
  return net;
}

nn::Var featmlp_logits(nn::Graph<double>& g, const FeatMlpNet& net, nn::Var x) {
  return nn::mlp_forward(g, net.layers, x);
}

FeatMlpModel fit_featmlp(const Mat& x, const std::vector<Stance>& y, const MlpHyper& hyper) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.empty()) {
    throw std::invalid_argument("fit_featmlp: feature rows and labels differ or are empty");
  }
  require_finite(x, "fit_featmlp");
  FeatMlpModel model;
  model.standardizer = Standardizer::fit(x);
  const Mat xt = model.standardizer.apply(x).transpose();  // features x n
  Rng init(derive_seed(hyper.training.seed, 0));
  model.net = make_featmlp(static_cast<std::size_t>(x.cols()), hyper.hidden_layers, hyper.hidden_size, init);
  const FeatMlpNet& net = model.net;

  auto logits_for = [&](nn::Graph<double>& g, const std::vector<std::size_t>& idx) {
    return featmlp_logits(g, net, g.constant(gather_columns(xt, idx)));
  };
  LoopHooks hooks;
  hooks.batch_loss = [&](nn::Graph<double>& g, const std::vector<std::size_t>& idx, Rng&) {
    return g.softmax_xent(logits_for(g, idx), gold_of(y, idx));
  };
  hooks.eval_loss = [&](const std::vector<std::size_t>& idx) {
    nn::Graph<double> g;
    return g.value(g.softmax_xent(logits_for(g, idx), gold_of(y, idx)))(0, 0);
  };
  hooks.accuracy = [&](const std::vector<std::size_t>& idx) {
    nn::Graph<double> g;
    const Mat& z = g.value(logits_for(g, idx));
    std::size_t hit = 0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      Eigen::Index arg;
      z.col(static_cast<Eigen::Index>(j)).maxCoeff(&arg);
      hit += static_cast<std::size_t>(arg) == index_of(y[idx[j]]) ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(std::max<std::size_t>(idx.size(), 1));
  };
  model.meta = run_training(model.net.params, y.size(), hyper.training, hooks);
  return model;
}

Probabilities featmlp_proba(const FeatMlpModel& model, const Vec& x) {
  if (x.size() != model.standardizer.mean.size()) throw std::invalid_argument("featmlp: feature width mismatch");
  nn::Graph<double> g;
  Mat col = model.standardizer.apply(x);
  const Mat& z = g.value(featmlp_logits(g, model.net, g.constant(col)));
  return to_probabilities(z.col(0));
}

// ---------------------------------------------------------------------------
// stackLSTM

StackLstmNet make_stacklstm(std::size_t dim, std::size_t hidden, std::size_t n_features, std::size_t dense_layers,
                            std::size_t dense_size, Rng& rng) {
  StackLstmNet net;
  net.dim = dim;
  net.hidden = hidden;
  net.n_features = n_features;
  net.lstm1 = nn::make_lstm(net.params, "lstm1", dim, hidden, rng);
  net.lstm2 = nn::make_lstm(net.params, "lstm2", hidden, hidden, rng);
  std::size_t in = hidden + n_features;
  for (std::size_t l = 0; l < dense_layers; ++l) {
    net.dense.push_back(nn::make_dense(net.params, "dense" + std::to_string(l), in, dense_size, nn::Activation::Relu, rng));
    in = dense_size;
  }
  net.dense.push_back(nn::make_dense(net.params, "out", in, K, nn::Activation::Identity, rng));
  return net;
}

nn::Var stacklstm_logits(nn::Graph<double>& g, const StackLstmNet& net, const std::vector<const Mat*>& seqs,
                         const Mat& feats, double dropout, bool train, Rng& rng) {
  const auto batch = static_cast<Eigen::Index>(seqs.size());
  if (batch == 0) throw std::invalid_argument("stacklstm: empty batch");
  if (feats.cols() != batch || static_cast<std::size_t>(feats.rows()) != net.n_features) {
    throw std::invalid_argument("stacklstm: feature block has the wrong shape");
  }
  Eigen::Index steps = 0;
  for (const Mat* s : seqs) {
    if (static_cast<std::size_t>(s->rows()) != net.dim) throw std::invalid_argument("stacklstm: embedding dim mismatch");
    steps = std::max(steps, s->cols());
  }
  const auto dim = static_cast<Eigen::Index>(net.dim);
  const auto h = static_cast<Eigen::Index>(net.hidden);
  std::vector<nn::Var> inputs, masks;
  bool ragged = false;
  for (const Mat* s : seqs) ragged = ragged || s->cols() != steps;
  for (Eigen::Index t = 0; t < steps; ++t) {
    Mat in = Mat::Zero(dim, batch);
    Mat m = Mat::Zero(h, batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Mat& s = *seqs[static_cast<std::size_t>(b)];
      if (t < s.cols()) {
        in.col(b) = s.col(t);
        m.col(b).setOnes();
      }
    }
    inputs.push_back(g.constant(std::move(in)));
    if (ragged) masks.push_back(g.constant(std::move(m)));
  }
  const nn::LstmOutput o1 = nn::lstm_forward(g, net.lstm1, inputs, ragged ? &masks : nullptr);
  std::vector<nn::Var> mid;
  for (nn::Var v : o1.hidden) mid.push_back(g.dropout(v, dropout, train, rng));
  const nn::LstmOutput o2 = nn::lstm_forward(g, net.lstm2, mid, ragged ? &masks : nullptr);
  nn::Var top = g.dropout(o2.final, dropout, train, rng);
  nn::Var joined = g.concat_rows({top, g.constant(feats)});
  return nn::mlp_forward(g, net.dense, joined);
}

StackLstmModel fit_stacklstm(const std::vector<Mat>& seqs, const Mat& x, const std::vector<Stance>& y,
                             const LstmHyper& hyper) {
  if (seqs.size() != y.size() || static_cast<std::size_t>(x.rows()) != y.size() || y.empty()) {
    throw std::invalid_argument("fit_stacklstm: inputs disagree in length or are empty");
  }
  require_finite(x, "fit_stacklstm");
  for (const auto& s : seqs) {
    if (static_cast<std::size_t>(s.rows()) != hyper.embedding_dim) {
      throw std::invalid_argument("fit_stacklstm: embedding dim " + std::to_string(s.rows()) + " differs from configured " +
                                  std::to_string(hyper.embedding_dim));
    }
  }
  StackLstmModel model;
  model.dropout = hyper.dropout;
  model.standardizer = Standardizer::fit(x);
  const Mat xt = model.standardizer.apply(x).transpose();
  Rng init(derive_seed(hyper.training.seed, 0));
  model.net = make_stacklstm(hyper.embedding_dim, hyper.hidden, static_cast<std::size_t>(x.cols()), hyper.dense_layers,
                             hyper.dense_size, init);
  const StackLstmNet& net = model.net;

  auto logits_for = [&](nn::Graph<double>& g, const std::vector<std::size_t>& idx, bool train, Rng& rng) {
    std::vector<const Mat*> batch;
    for (auto i : idx) batch.push_back(&seqs[i]);
    return stacklstm_logits(g, net, batch, gather_columns(xt, idx), hyper.dropout, train, rng);
  };
  Rng eval_rng(0);
  LoopHooks hooks;
  hooks.batch_loss = [&](nn::Graph<double>& g, const std::vector<std::size_t>& idx, Rng& rng) {
    return g.softmax_xent(logits_for(g, idx, true, rng), gold_of(y, idx));
  };
  hooks.eval_loss = [&](const std::vector<std::size_t>& idx) {
    double total = 0.0;
    for (std::size_t b = 0; b < idx.size(); b += hyper.training.batch) {
      std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(b),
                                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), b + hyper.training.batch)));
      nn::Graph<double> g;
      total += g.value(g.softmax_xent(logits_for(g, chunk, false, eval_rng), gold_of(y, chunk)))(0, 0) *
               static_cast<double>(chunk.size());
    }
    return total / static_cast<double>(idx.size());
  };
  hooks.accuracy = [&](const std::vector<std::size_t>& idx) {
    std::size_t hit = 0;
    for (std::size_t b = 0; b < idx.size(); b += hyper.training.batch) {
      std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(b),
                                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), b + hyper.training.batch)));
      nn::Graph<double> g;
      const Mat& z = g.value(logits_for(g, chunk, false, eval_rng));
      for (std::size_t j = 0; j < chunk.size(); ++j) {
        Eigen::Index arg;
        z.col(static_cast<Eigen::Index>(j)).maxCoeff(&arg);
        hit += static_cast<std::size_t>(arg) == index_of(y[chunk[j]]) ? 1 : 0;
      }
    }
    return static_cast<double>(hit) / static_cast<double>(std::max<std::size_t>(idx.size(), 1));
  };
  model.meta = run_training(model.net.params, y.size(), hyper.training, hooks);
  return model;
}

Probabilities stacklstm_proba(const StackLstmModel& model, const Mat& seq, const Vec& x) {
  if (x.size() != model.standardizer.mean.size()) throw std::invalid_argument("stacklstm: feature width mismatch");
  nn::Graph<double> g;
  Rng unused(0);
  const Mat feats = model.standardizer.apply(x);
  const Mat& z = g.value(stacklstm_logits(g, model.net, {&seq}, feats, model.dropout, false, unused));
  return to_probabilities(z.col(0));
}

// ---------------------------------------------------------------------------
// Corpus-level training and prediction

std::uint64_t layout_hash(const std::vector<std::string>& names) {
  std::uint64_t h = fnv1a("layout");
  for (const auto& n : names) {
    h = fnv1a(n, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  }
  return h;
}

namespace {

std::vector<features::Extractor> model_extractors(const ModelSpec& spec, const features::FittedPipeline& pipeline) {
  if (!spec.extractors.empty()) {
    for (auto e : spec.extractors) {
      if (!pipeline.has(e)) throw std::invalid_argument("extractor " + std::string(features::to_string(e)) + " is not fitted");
    }
    return spec.extractors;
  }
  if (spec.groups.empty()) return pipeline.config().extractors;
  return features::select_groups(pipeline.config(), spec.groups);
}

std::vector<Mat> embed_corpus(const Corpus& corpus, const nn::EmbeddingTable& table, std::size_t max_len) {
  std::vector<Mat> out;
  out.reserve(corpus.size());
  for (const auto& inst : corpus.instances()) {
    out.push_back(nn::embed_sequence(text::tokenize(inst.headline), text::tokenize(inst.body), table, max_len).values);
  }
  return out;
}

std::shared_ptr<const nn::EmbeddingTable> resolve_embeddings(const LstmHyper& hyper,
                                                             std::shared_ptr<const nn::EmbeddingTable> given) {
  if (given) {
    if (given->dim() != hyper.embedding_dim) {
      throw std::invalid_argument("embedding table has dim " + std::to_string(given->dim()) + ", model expects " +
                                  std::to_string(hyper.embedding_dim));
    }
    return given;
  }
  if (hyper.embeddings_path.empty()) throw std::invalid_argument("stacklstm needs an embeddings file");
  return std::make_shared<const nn::EmbeddingTable>(nn::load_embeddings(hyper.embeddings_path, hyper.embedding_dim));
}

features::FeatureMatrix model_features(const TrainedModel& m, const Corpus& corpus, const features::PosAnnotation* pos) {
  if (!m.pipeline) throw std::logic_error("model has no fitted pipeline");
  auto fm = features::extract(*m.pipeline, corpus, m.extractors, pos);
  if (layout_hash(fm.names) != m.layout_hash) {
    throw std::runtime_error("feature layout differs from the one the model was trained on");
  }
  return fm;
}

}  // namespace

TrainedModel train_model(const ModelSpec& spec, const Corpus& train,
                         std::shared_ptr<const features::FittedPipeline> pipeline, const TrainInputs& inputs) {
  if (train.empty()) throw std::invalid_argument("cannot train on an empty corpus");
  if (!train.fully_labeled()) throw std::invalid_argument("training corpus has unlabeled instances");
  const auto start = std::chrono::steady_clock::now();
  TrainedModel m;
  m.spec = spec;
  m.pipeline = pipeline;
  const auto y = train.labels();

  auto with_features = [&]() {
    if (!pipeline) throw std::invalid_argument(std::string(to_string(spec.kind)) + " needs a fitted pipeline");
    m.extractors = model_extractors(spec, *pipeline);
    auto fm = features::extract(*pipeline, train, m.extractors, inputs.pos);
    m.layout_hash = layout_hash(fm.names);
    return fm;
  };

  switch (spec.kind) {
    case ModelKind::Majority:
      m.state = std::make_shared<TrainedModel::State>(MajorityModel{majority_label(y)});
      break;
    case ModelKind::Gbdt: {
      auto fm = with_features();
      auto g = fit_gbdt(fm.values, y, spec.gbdt);
      m.meta = g.meta;
      m.state = std::make_shared<TrainedModel::State>(std::move(g));
      break;
    }
    case ModelKind::FeatMlp: {
      auto fm = with_features();
      auto f = fit_featmlp(fm.values, y, spec.mlp);
      m.meta = f.meta;
      m.state = std::make_shared<TrainedModel::State>(std::move(f));
      break;
    }
    case ModelKind::StackLstm: {
      auto fm = with_features();
      m.embeddings = resolve_embeddings(spec.lstm, inputs.embeddings);
      const auto seqs = embed_corpus(train, *m.embeddings, spec.lstm.max_len);
      auto s = fit_stacklstm(seqs, fm.values, y, spec.lstm);
      m.meta = s.meta;
      m.state = std::make_shared<TrainedModel::State>(std::move(s));
      break;
    }
    case ModelKind::Ensemble: {
      if (spec.members.empty()) throw std::invalid_argument("ensemble needs at least one member");
      EnsembleModel e;
      for (const auto& member : spec.members) {
        if (member.kind == ModelKind::Ensemble) throw std::invalid_argument("ensembles cannot be nested");
        e.members.push_back(train_model(member, train, pipeline, inputs));
      }
      m.state = std::make_shared<TrainedModel::State>(std::move(e));
      break;
    }
  }
  if (spec.kind == ModelKind::Majority || spec.kind == ModelKind::Ensemble) {
    m.meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return m;
}

std::vector<Prediction> predict(const TrainedModel& model, const Corpus& corpus, const features::PosAnnotation* pos) {
  if (!model.state) throw std::logic_error("model is not trained");
  std::vector<Prediction> out(corpus.size());
  const auto& state = *model.state;
  if (const auto* maj = std::get_if<MajorityModel>(&state)) {
    for (auto& p : out) p.label = maj->label;
    return out;
  }
  if (const auto* ens = std::get_if<EnsembleModel>(&state)) {
    std::vector<std::vector<Stance>> votes;
    for (const auto& member : ens->members) votes.push_back(labels_of(predict(member, corpus, pos)));
    const auto labels = ensemble_vote(votes);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].label = labels[i];
    return out;
  }
  const auto fm = model_features(model, corpus, pos);
  std::vector<Mat> seqs;
  if (std::holds_alternative<StackLstmModel>(state)) {
    if (!model.embeddings) throw std::logic_error("stacklstm model has no embeddings");
    seqs = embed_corpus(corpus, *model.embeddings, model.spec.lstm.max_len);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vec x = fm.values.row(static_cast<Eigen::Index>(i)).transpose();
    if (const auto* g = std::get_if<GbdtModel>(&state)) {
      out[i].probabilities = gbdt_proba(*g, x);
      out[i].label = gbdt_predict(*g, x);
      continue;
    }
    if (const auto* f = std::get_if<FeatMlpModel>(&state)) {
      out[i].probabilities = featmlp_proba(*f, x);
    } else {
      out[i].probabilities = stacklstm_proba(std::get<StackLstmModel>(state), seqs[i], x);
    }
    out[i].label = stance_at(argmax(*out[i].probabilities));
  }
  return out;
}

std::vector<Stance> labels_of(const std::vector<Prediction>& preds) {
  std::vector<Stance> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p.label);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

static_assert(std::endian::native == std::endian::little, "artifact encoding assumes a little-endian host");

json training_json(const NetTraining& t) {
  return json{{"epochs", t.epochs},
              {"batch", t.batch},
              {"learning_rate", t.learning_rate},
              {"validation_fraction", t.validation_fraction},
              {"patience", t.patience},
              {"stop_at_train_accuracy", t.stop_at_train_accuracy},
              {"seed", t.seed}};
}

NetTraining training_from(const json& j) {
  NetTraining t;
  t.epochs = j.at("epochs");
  t.batch = j.at("batch");
  t.learning_rate = j.at("learning_rate");
  t.validation_fraction = j.at("validation_fraction");
  t.patience = j.at("patience");
  t.stop_at_train_accuracy = j.at("stop_at_train_accuracy");
  t.seed = j.at("seed");
  return t;
}

json spec_json(const ModelSpec& s) {
  json groups = json::array();
  for (auto g : s.groups) groups.push_back(std::string(features::to_string(g)));
  json members = json::array();
  for (const auto& m : s.members) members.push_back(spec_json(m));
  json extractors = json::array();
  for (auto e : s.extractors) extractors.push_back(std::string(features::to_string(e)));
  return json{{"kind", std::string(to_string(s.kind))},
              {"gbdt", {{"trees", s.gbdt.trees}, {"depth", s.gbdt.depth}, {"learning_rate", s.gbdt.learning_rate}, {"seed", s.gbdt.seed}}},
              {"mlp", {{"hidden_layers", s.mlp.hidden_layers}, {"hidden_size", s.mlp.hidden_size}, {"training", training_json(s.mlp.training)}}},
              {"lstm",
               {{"hidden", s.lstm.hidden},
                {"dropout", s.lstm.dropout},
                {"dense_layers", s.lstm.dense_layers},
                {"dense_size", s.lstm.dense_size},
                {"max_len", s.lstm.max_len},
                {"embedding_dim", s.lstm.embedding_dim},
                {"embeddings_path", s.lstm.embeddings_path},
                {"training", training_json(s.lstm.training)}}},
              {"groups", groups},
              {"extractors", extractors},
              {"members", members}};
}

ModelSpec spec_from(const json& j) {
  ModelSpec s;
  s.kind = parse_model_kind(j.at("kind").get<std::string>());
  const auto& g = j.at("gbdt");
  s.gbdt.trees = g.at("trees");
  s.gbdt.depth = g.at("depth");
  s.gbdt.learning_rate = g.at("learning_rate");
  s.gbdt.seed = g.at("seed");
  const auto& m = j.at("mlp");
  s.mlp.hidden_layers = m.at("hidden_layers");
  s.mlp.hidden_size = m.at("hidden_size");
  s.mlp.training = training_from(m.at("training"));
  const auto& l = j.at("lstm");
  s.lstm.hidden = l.at("hidden");
  s.lstm.dropout = l.at("dropout");
  s.lstm.dense_layers = l.at("dense_layers");
  s.lstm.dense_size = l.at("dense_size");
  s.lstm.max_len = l.at("max_len");
  s.lstm.embedding_dim = l.at("embedding_dim");
  s.lstm.embeddings_path = l.at("embeddings_path");
  s.lstm.training = training_from(l.at("training"));
  for (const auto& gname : j.at("groups")) s.groups.push_back(features::parse_group(gname.get<std::string>()));
  for (const auto& e : j.at("extractors")) s.extractors.push_back(features::parse_extractor(e.get<std::string>()));
  for (const auto& member : j.at("members")) s.members.push_back(spec_from(member));
  return s;
}

json meta_json(const TrainingMetadata& m) {
  return json{{"epochs", m.epochs},
              {"final_loss", m.final_loss},
              {"early_stopped", m.early_stopped},
              {"loss_trace", m.loss_trace},
              {"train_accuracy_trace", m.train_accuracy_trace}};
}

TrainingMetadata meta_from(const json& j) {
  TrainingMetadata m;
  m.epochs = j.at("epochs");
  m.final_loss = j.at("final_loss");
  m.early_stopped = j.at("early_stopped");
  m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  m.train_accuracy_trace = j.at("train_accuracy_trace").get<std::vector<double>>();
  return m;
}

/// Named matrices written to / read from the flat payload.
struct TensorSink {
  json index = json::array();
  std::vector<double>* payload;

  void put(const std::string& name, const Mat& m) {
    index.push_back(json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    payload->insert(payload->end(), m.data(), m.data() + m.size());
  }
};

struct TensorSource {
  std::map<std::string, Mat> tensors;

  TensorSource(const json& index, const std::vector<double>& payload, std::size_t& offset) {
    for (const auto& e : index) {
      const auto rows = e.at("rows").get<Eigen::Index>();
      const auto cols = e.at("cols").get<Eigen::Index>();
      const auto n = static_cast<std::size_t>(rows * cols);
      if (offset + n > payload.size()) throw std::runtime_error("model artifact: parameter payload too short");
      Mat m(rows, cols);
      std::copy(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                payload.begin() + static_cast<std::ptrdiff_t>(offset + n), m.data());
      offset += n;
      tensors[e.at("name").get<std::string>()] = std::move(m);
    }
  }

  const Mat& get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("model artifact: missing tensor " + name);
    return it->second;
  }
};

Mat tree_matrix(const RegressionTree& t) {
  Mat m(static_cast<Eigen::Index>(t.nodes.size()), 5);
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    const auto r = static_cast<Eigen::Index>(i);
    m(r, 0) = n.feature;
    m(r, 1) = n.threshold;
    m(r, 2) = n.left;
    m(r, 3) = n.right;
    m(r, 4) = n.value;
  }
  return m;
}

RegressionTree tree_from(const Mat& m) {
  RegressionTree t;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    TreeNode n;
    n.feature = static_cast<int>(m(r, 0));
    n.threshold = m(r, 1);
    n.left = static_cast<int>(m(r, 2));
    n.right = static_cast<int>(m(r, 3));
    n.value = m(r, 4);
    t.nodes.push_back(n);
  }
  return t;
}

void put_params(TensorSink& sink, const nn::ParameterSet<double>& params) {
  for (const auto* p : params.all()) sink.put("param." + p->name, p->value);
}

void take_params(const TensorSource& src, nn::ParameterSet<double>& params) {
  for (auto* p : params.all()) {
    const Mat& v = src.get("param." + p->name);
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw std::runtime_error("model artifact: tensor " + p->name + " has the wrong shape");
    }
    p->value = v;
  }
}

void put_standardizer(TensorSink& sink, const Standardizer& s) {
  sink.put("std.mean", s.mean);
  sink.put("std.scale", s.scale);
}

Standardizer take_standardizer(const TensorSource& src) {
  Standardizer s;
  s.mean = src.get("std.mean").col(0);
  s.scale = src.get("std.scale").col(0);
  return s;
}

json encode(const TrainedModel& m, std::vector<double>& payload) {
  json h;
  h["spec"] = spec_json(m.spec);
  h["meta"] = meta_json(m.meta);
  json ex = json::array();
  for (auto e : m.extractors) ex.push_back(std::string(features::to_string(e)));
  h["extractors"] = ex;
  h["layout_hash"] = m.layout_hash;
  TensorSink sink{json::array(), &payload};
  const auto& state = *m.state;
  if (const auto* maj = std::get_if<MajorityModel>(&state)) {
    Mat v(1, 1);
    v(0, 0) = static_cast<double>(index_of(maj->label));
    sink.put("label", v);
  } else if (const auto* g = std::get_if<GbdtModel>(&state)) {
    h["n_features"] = g->n_features;
    h["learning_rate"] = g->learning_rate;
    h["rounds"] = g->rounds.size();
    Mat prior(static_cast<Eigen::Index>(K), 1);
    for (std::size_t k = 0; k < K; ++k) prior(static_cast<Eigen::Index>(k), 0) = g->prior[k];
    sink.put("prior", prior);
    for (std::size_t r = 0; r < g->rounds.size(); ++r) {
      for (std::size_t k = 0; k < K; ++k) sink.put("tree." + std::to_string(r) + "." + std::to_string(k), tree_matrix(g->rounds[r][k]));
    }
  } else if (const auto* f = std::get_if<FeatMlpModel>(&state)) {
    h["inputs"] = f->standardizer.mean.size();
    put_standardizer(sink, f->standardizer);
    put_params(sink, f->net.params);
  } else if (const auto* s = std::get_if<StackLstmModel>(&state)) {
    h["inputs"] = s->standardizer.mean.size();
    h["dropout"] = s->dropout;
    put_standardizer(sink, s->standardizer);
    put_params(sink, s->net.params);
  } else {
    const auto& e = std::get<EnsembleModel>(state);
    json members = json::array();
    for (const auto& member : e.members) members.push_back(encode(member, payload));
    h["members"] = members;
  }
  h["tensors"] = sink.index;
  return h;
}

TrainedModel decode(const json& h, const std::vector<double>& payload, std::size_t& offset,
                    std::shared_ptr<const features::FittedPipeline> pipeline,
                    std::shared_ptr<const nn::EmbeddingTable> embeddings) {
  TrainedModel m;
  m.spec = spec_from(h.at("spec"));
  m.meta = meta_from(h.at("meta"));
  for (const auto& e : h.at("extractors")) m.extractors.push_back(features::parse_extractor(e.get<std::string>()));
  m.layout_hash = h.at("layout_hash").get<std::uint64_t>();
  m.pipeline = pipeline;
  const TensorSource src(h.at("tensors"), payload, offset);
  switch (m.spec.kind) {
    case ModelKind::Majority: {
      const double v = src.get("label")(0, 0);
      if (v < 0 || v >= K) throw std::runtime_error("model artifact: bad majority label");
      m.state = std::make_shared<TrainedModel::State>(MajorityModel{stance_at(static_cast<std::size_t>(v))});
      break;
    }
    case ModelKind::Gbdt: {
      GbdtModel g;
      g.n_features = h.at("n_features");
      g.learning_rate = h.at("learning_rate");
      const Mat& prior = src.get("prior");
      for (std::size_t k = 0; k < K; ++k) g.prior[k] = prior(static_cast<Eigen::Index>(k), 0);
      const std::size_t rounds = h.at("rounds");
      for (std::size_t r = 0; r < rounds; ++r) {
        std::array<RegressionTree, K> trees;
        for (std::size_t k = 0; k < K; ++k) trees[k] = tree_from(src.get("tree." + std::to_string(r) + "." + std::to_string(k)));
        g.rounds.push_back(std::move(trees));
      }
      g.meta = m.meta;
      m.state = std::make_shared<TrainedModel::State>(std::move(g));
      break;
    }
    case ModelKind::FeatMlp: {
      FeatMlpModel f;
      f.standardizer = take_standardizer(src);
      Rng rng(0);
      f.net = make_featmlp(h.at("inputs").get<std::size_t>(), m.spec.mlp.hidden_layers, m.spec.mlp.hidden_size, rng);
      take_params(src, f.net.params);
      f.meta = m.meta;
      m.state = std::make_shared<TrainedModel::State>(std::move(f));
      break;
    }
    case ModelKind::StackLstm: {
      StackLstmModel s;
      s.standardizer = take_standardizer(src);
      s.dropout = h.at("dropout");
      Rng rng(0);
      s.net = make_stacklstm(m.spec.lstm.embedding_dim, m.spec.lstm.hidden, h.at("inputs").get<std::size_t>(),
                             m.spec.lstm.dense_layers, m.spec.lstm.dense_size, rng);
      take_params(src, s.net.params);
      s.meta = m.meta;
      m.embeddings = resolve_embeddings(m.spec.lstm, embeddings);
      m.state = std::make_shared<TrainedModel::State>(std::move(s));
      break;
    }
    case ModelKind::Ensemble: {
      EnsembleModel e;
      for (const auto& member : h.at("members")) e.members.push_back(decode(member, payload, offset, pipeline, embeddings));
      m.state = std::make_shared<TrainedModel::State>(std::move(e));
      break;
    }
  }
  return m;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw std::runtime_error("model artifact is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 8;
    return v;
  }
  std::vector<std::uint8_t> blob(std::uint64_t n) {
    if (n > bytes.size()) throw std::runtime_error("model artifact is truncated");
    need(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> out(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += static_cast<std::size_t>(n);
    return out;
  }
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const TrainedModel& model) {
  if (!model.state) throw std::logic_error("cannot save an untrained model");
  std::vector<double> payload;
  json header = encode(model, payload);
  const auto header_bytes = json::to_cbor(header);
  const auto pipeline_bytes = model.pipeline ? features::to_cbor(*model.pipeline) : std::vector<std::uint8_t>{};
  std::vector<std::uint8_t> out = {'S', 'T', 'N', 'C'};
  put_u32(out, kModelFormatVersion);
  put_u64(out, header_bytes.size());
  out.insert(out.end(), header_bytes.begin(), header_bytes.end());
  put_u64(out, pipeline_bytes.size());
  out.insert(out.end(), pipeline_bytes.begin(), pipeline_bytes.end());
  put_u64(out, payload.size());
  const std::size_t at = out.size();
  out.resize(at + payload.size() * sizeof(double));
  if (!payload.empty()) std::memcpy(out.data() + at, payload.data(), payload.size() * sizeof(double));
  const std::uint64_t sum = fnv1a(std::string_view(reinterpret_cast<const char*>(out.data()), out.size()));
  put_u64(out, sum);
  return out;
}

TrainedModel deserialize_model(const std::vector<std::uint8_t>& bytes,
                               std::shared_ptr<const nn::EmbeddingTable> embeddings) {
  if (bytes.size() < 4 + 4 + 8 || std::memcmp(bytes.data(), "STNC", 4) != 0) {
    throw std::runtime_error("not a model artifact (bad magic)");
  }
  if (bytes.size() < 8 + 4 + 8 * 4) throw std::runtime_error("model artifact is truncated");
  const std::size_t body = bytes.size() - 8;
  Reader tail{bytes, body};
  const std::uint64_t stored = tail.u64();
  const std::uint64_t actual = fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), body));
  Reader r{bytes, 4};
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw std::runtime_error("unsupported model artifact version " + std::to_string(version));
  }
  if (stored != actual) throw std::runtime_error("model artifact checksum mismatch (corrupted or truncated)");
  const auto header_bytes = r.blob(r.u64());
  const auto pipeline_bytes = r.blob(r.u64());
  const std::uint64_t n = r.u64();
  if (n > (body - r.pos) / sizeof(double) || r.pos + n * sizeof(double) != body) {
    throw std::runtime_error("model artifact: payload length mismatch");
  }
  std::vector<double> payload(static_cast<std::size_t>(n));
  if (n) std::memcpy(payload.data(), bytes.data() + r.pos, static_cast<std::size_t>(n) * sizeof(double));

  json header;
  try {
    header = json::from_cbor(header_bytes);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model artifact header is not valid CBOR: ") + e.what());
  }
  std::shared_ptr<const features::FittedPipeline> pipeline;
  if (!pipeline_bytes.empty()) {
    pipeline = std::make_shared<const features::FittedPipeline>(features::from_cbor(pipeline_bytes));
  }
  std::size_t offset = 0;
  TrainedModel m = decode(header, payload, offset, pipeline, embeddings);
  if (offset != payload.size()) throw std::runtime_error("model artifact: unused parameter payload");
  return m;
}

void save_model(const TrainedModel& model, const std::string& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

TrainedModel load_model(const std::string& path, std::shared_ptr<const nn::EmbeddingTable> embeddings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes, std::move(embeddings));
}

}  // namespace stance::models
