#include "stance/neural.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace stance::nn {

// ---------------------------------------------------------------------------
// Embeddings

bool EmbeddingTable::set(const std::string& token, std::vector<double> values) {
  if (values.size() != dim_) {
    throw std::invalid_argument("embedding for '" + token + "' has " + std::to_string(values.size()) +
                                " values, expected " + std::to_string(dim_));
  }
  auto [it, inserted] = vectors_.insert_or_assign(token, std::move(values));
  (void)it;
  if (!inserted) ++duplicates_;
  return inserted;
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

Vec EmbeddingTable::lookup(const std::string& token) const {
  Vec out = Vec::Zero(static_cast<Eigen::Index>(dim_));
  if (const auto* v = find(token)) {
    for (std::size_t i = 0; i < dim_; ++i) out(static_cast<Eigen::Index>(i)) = (*v)[i];
  }
  return out;
}

EmbeddingTable load_embeddings(const std::string& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings file: " + path);
  EmbeddingTable table(dim);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> values;
    values.reserve(dim);
    double x;
    while (ss >> x) values.push_back(x);
    if (!ss.eof()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": non-numeric embedding value");
    }
    if (values.size() != dim) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                               " values, got " + std::to_string(values.size()));
    }
    if (!table.set(token, std::move(values))) {
      std::cerr << "warning: " << path << ":" << line_no << ": duplicate embedding for '" << token
                << "', keeping the last one\n";
    }
  }
  return table;
}

EmbeddedSequence embed_sequence(const text::TokenSeq& headline, const text::TokenSeq& body,
                                const EmbeddingTable& table, std::size_t max_len) {
  EmbeddedSequence out;
  std::vector<const text::Token*> toks;
  for (const auto& t : headline) toks.push_back(&t);
  for (const auto& t : body) toks.push_back(&t);
  std::size_t len = std::min(toks.size(), max_len);
  out.headline_tokens = std::min(headline.size(), len);
  out.headline_truncated = headline.size() > max_len;
  const auto dim = static_cast<Eigen::Index>(table.dim());
  out.values = Mat::Zero(dim, static_cast<Eigen::Index>(std::max<std::size_t>(len, 1)));
  for (std::size_t i = 0; i < len; ++i) {
    const auto* v = table.find(toks[i]->lower);
    if (!v) {
      ++out.unknown;
      continue;
    }
    for (Eigen::Index d = 0; d < dim; ++d) out.values(d, static_cast<Eigen::Index>(i)) = (*v)[d];
  }
  return out;
}

// ---------------------------------------------------------------------------
// ParameterSet

template <typename T>
Parameter<T>& ParameterSet<T>::add(std::string name, Matrix<T> init) {
  for (const auto& p : params_) {
    if (p->name == name) throw std::invalid_argument("duplicate parameter name: " + name);
  }
  auto p = std::make_unique<Parameter<T>>();
  p->name = std::move(name);
  p->grad = Matrix<T>::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  params_.push_back(std::move(p));
  return *params_.back();
}

template <typename T>
Parameter<T>& ParameterSet<T>::get(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw std::out_of_range("no parameter named " + name);
}

template <typename T>
const Parameter<T>& ParameterSet<T>::get(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw std::out_of_range("no parameter named " + name);
}

template <typename T>
std::vector<Parameter<T>*> ParameterSet<T>::all() {
  std::vector<Parameter<T>*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> ParameterSet<T>::all() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

template <typename T>
std::size_t ParameterSet<T>::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

// ---------------------------------------------------------------------------
// Graph

template <typename T>
Var Graph<T>::push(M value, std::vector<std::size_t> inputs, std::function<void(Graph&, std::size_t)> back) {
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
typename Graph<T>::M& Graph<T>::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0 && n.value.size() != 0) n.grad = M::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename T>
Var Graph<T>::constant(M value) {
  return push(std::move(value), {}, nullptr);
}

template <typename T>
Var Graph<T>::param(Parameter<T>& p) {
  Var v = push(p.value, {}, nullptr);
  nodes_[v.id].param = &p;
  return v;
}

namespace {

void require(bool ok, const char* op) {
  if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + op);
}

}  // namespace

template <typename T>
Var Graph<T>::matmul(Var a, Var b) {
  require(value(a).cols() == value(b).rows(), "matmul");
  M v = value(a) * value(b);
  return push(std::move(v), {a.id, b.id}, [a, b](Graph& g, std::size_t self) {
    const M& gy = g.nodes_[self].grad;
    g.grad_of(a.id).noalias() += gy * g.value(b).transpose();
    g.grad_of(b.id).noalias() += g.value(a).transpose() * gy;
  });
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "add");
  return push(value(a) + value(b), {a.id, b.id}, [a, b](Graph& g, std::size_t self) {
    const M& gy = g.nodes_[self].grad;
    g.grad_of(a.id) += gy;
    g.grad_of(b.id) += gy;
  });
}

template <typename T>
Var Graph<T>::sub(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "sub");
  return push(value(a) - value(b), {a.id, b.id}, [a, b](Graph& g, std::size_t self) {
    const M& gy = g.nodes_[self].grad;
    g.grad_of(a.id) += gy;
    g.grad_of(b.id) -= gy;
  });
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(), "mul");
  return push(value(a).cwiseProduct(value(b)), {a.id, b.id}, [a, b](Graph& g, std::size_t self) {
    const M& gy = g.nodes_[self].grad;
    g.grad_of(a.id) += gy.cwiseProduct(g.value(b));
    g.grad_of(b.id) += gy.cwiseProduct(g.value(a));
  });
}

template <typename T>
Var Graph<T>::scale(Var x, T c) {
  return push(value(x) * c, {x.id}, [x, c](Graph& g, std::size_t self) {
    g.grad_of(x.id) += g.nodes_[self].grad * c;
  });
}

template <typename T>
Var Graph<T>::add_bias(Var x, Var b) {
  require(value(b).cols() == 1 && value(b).rows() == value(x).rows(), "add_bias");
  M v = value(x).colwise() + value(b).col(0);
  return push(std::move(v), {x.id, b.id}, [x, b](Graph& g, std::size_t self) {
    const M& gy = g.nodes_[self].grad;
    g.grad_of(x.id) += gy;
    g.grad_of(b.id) += gy.rowwise().sum();
  });
}

template <typename T>
Var Graph<T>::sigmoid(Var x) {
  M v = value(x).unaryExpr([](T z) {
    return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
  });
  return push(std::move(v), {x.id}, [x](Graph& g, std::size_t self) {
    const M& y = g.nodes_[self].value;
    g.grad_of(x.id) += g.nodes_[self].grad.cwiseProduct(y.cwiseProduct((T(1) - y.array()).matrix()));
  });
}

template <typename T>
Var Graph<T>::tanh(Var x) {
  M v = value(x).array().tanh().matrix();
  return push(std::move(v), {x.id}, [x](Graph& g, std::size_t self) {
    const M& y = g.nodes_[self].value;
    g.grad_of(x.id) += g.nodes_[self].grad.cwiseProduct((T(1) - y.array().square()).matrix());
  });
}

template <typename T>
Var Graph<T>::relu(Var x) {
  M v = value(x).cwiseMax(T(0));
  return push(std::move(v), {x.id}, [x](Graph& g, std::size_t self) {
    const M& in = g.value(x);
    g.grad_of(x.id) += (in.array() > T(0)).select(g.nodes_[self].grad, M::Zero(in.rows(), in.cols()));
  });
}

template <typename T>
Var Graph<T>::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows of nothing");
  Eigen::Index rows = 0;
  const Eigen::Index cols = value(parts[0]).cols();
  for (Var p : parts) {
    require(value(p).cols() == cols, "concat_rows");
    rows += value(p).rows();
  }
  M v(rows, cols);
  Eigen::Index r = 0;
  std::vector<std::size_t> ids;
  for (Var p : parts) {
    v.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
    ids.push_back(p.id);
  }
  return push(std::move(v), ids, [parts](Graph& g, std::size_t self) {
    Eigen::Index r0 = 0;
    for (Var p : parts) {
      const Eigen::Index n = g.value(p).rows();
      g.grad_of(p.id) += g.nodes_[self].grad.middleRows(r0, n);
      r0 += n;
    }
  });
}

template <typename T>
Var Graph<T>::slice_rows(Var x, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= value(x).rows(), "slice_rows");
  M v = value(x).middleRows(start, count);
  return push(std::move(v), {x.id}, [x, start, count](Graph& g, std::size_t self) {
    g.grad_of(x.id).middleRows(start, count) += g.nodes_[self].grad;
  });
}

template <typename T>
Var Graph<T>::gather_cols(Var table, const std::vector<Eigen::Index>& ids) {
  const M& t = value(table);
  M v(t.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    require(ids[j] >= 0 && ids[j] < t.cols(), "gather_cols");
    v.col(static_cast<Eigen::Index>(j)) = t.col(ids[j]);
  }
  return push(std::move(v), {table.id}, [table, ids](Graph& g, std::size_t self) {
    M& gt = g.grad_of(table.id);
    const M& gy = g.nodes_[self].grad;
    for (std::size_t j = 0; j < ids.size(); ++j) gt.col(ids[j]) += gy.col(static_cast<Eigen::Index>(j));
  });
}

template <typename T>
Var Graph<T>::dropout(Var x, double rate, bool train, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (!train || rate == 0.0) return x;
  const M& in = value(x);
  M mask(in.rows(), in.cols());
  const T keep = T(1.0 / (1.0 - rate));
  for (Eigen::Index j = 0; j < in.cols(); ++j) {
    for (Eigen::Index i = 0; i < in.rows(); ++i) mask(i, j) = rng.uniform() < rate ? T(0) : keep;
  }
  Var m = constant(std::move(mask));
  return mul(x, m);
}

template <typename T>
Var Graph<T>::sum(Var x) {
  M v(1, 1);
  v(0, 0) = value(x).sum();
  return push(std::move(v), {x.id}, [x](Graph& g, std::size_t self) {
    g.grad_of(x.id).array() += g.nodes_[self].grad(0, 0);
  });
}

template <typename T>
Var Graph<T>::softmax_xent(Var logits, const std::vector<int>& gold) {
  const M& z = value(logits);
  require(static_cast<std::size_t>(z.cols()) == gold.size() && !gold.empty(), "softmax_xent");
  M p(z.rows(), z.cols());
  T loss = T(0);
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const int y = gold[static_cast<std::size_t>(j)];
    if (y < 0 || y >= z.rows()) throw std::out_of_range("gold label out of range");
    const T mx = z.col(j).maxCoeff();
    p.col(j) = (z.col(j).array() - mx).exp().matrix();
    const T s = p.col(j).sum();
    p.col(j) /= s;
    loss += -(z(y, j) - mx - std::log(s));
  }
  const T n = static_cast<T>(z.cols());
  M v(1, 1);
  v(0, 0) = loss / n;
  return push(std::move(v), {logits.id}, [logits, gold, p = std::move(p), n](Graph& g, std::size_t self) {
    M d = p;
    for (std::size_t j = 0; j < gold.size(); ++j) d(gold[j], static_cast<Eigen::Index>(j)) -= T(1);
    g.grad_of(logits.id) += d * (g.nodes_[self].grad(0, 0) / n);
  });
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (value(loss).rows() != 1 || value(loss).cols() != 1) {
    throw std::invalid_argument("backward target must be a scalar");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_of(loss.id)(0, 0) = T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back(*this, i);
    if (n.param) n.param->grad += n.grad;
  }
}

// ---------------------------------------------------------------------------
// Layers

namespace {

template <typename T>
Matrix<T> glorot(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix<T> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(rng.uniform(-limit, limit));
  }
  return m;
}

}  // namespace

template <typename T>
DenseLayer<T> make_dense(ParameterSet<T>& set, const std::string& name, std::size_t in, std::size_t out,
                         Activation act, Rng& rng) {
  DenseLayer<T> layer;
  layer.weight = &set.add(name + ".W", glorot<T>(out, in, in, out, rng));
  layer.bias = &set.add(name + ".b", Matrix<T>::Zero(static_cast<Eigen::Index>(out), 1));
  layer.activation = act;
  return layer;
}

template <typename T>
Var dense_forward(Graph<T>& g, const DenseLayer<T>& layer, Var x) {
  Var z = g.add_bias(g.matmul(g.param(*layer.weight), x), g.param(*layer.bias));
  switch (layer.activation) {
    case Activation::Relu:
      return g.relu(z);
    case Activation::Softmax: {
      // Inference only: probabilities are returned as a constant.
      Matrix<T> p = g.value(z);
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        p.col(j) = (p.col(j).array() - p.col(j).maxCoeff()).exp().matrix();
        p.col(j) /= p.col(j).sum();
      }
      return g.constant(std::move(p));
    }
    case Activation::Identity:
      break;
  }
  return z;
}

template <typename T>
Var mlp_forward(Graph<T>& g, const std::vector<DenseLayer<T>>& layers, Var x) {
  for (const auto& layer : layers) x = dense_forward(g, layer, x);
  return x;
}

template <typename T>
Matrix<T> mlp_forward(const std::vector<DenseLayer<T>>& layers, const Matrix<T>& x) {
  Graph<T> g;
  Var out = mlp_forward(g, layers, g.constant(x));
  return g.value(out);
}

template <typename T>
LstmParams<T> make_lstm(ParameterSet<T>& set, const std::string& name, std::size_t input_dim,
                        std::size_t hidden_dim, Rng& rng) {
  LstmParams<T> p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const std::size_t h4 = 4 * hidden_dim;
  p.w = &set.add(name + ".W", glorot<T>(h4, input_dim, input_dim, h4, rng));
  p.u = &set.add(name + ".U", glorot<T>(h4, hidden_dim, hidden_dim, h4, rng));
  Matrix<T> b = Matrix<T>::Zero(static_cast<Eigen::Index>(h4), 1);
  b.middleRows(static_cast<Eigen::Index>(hidden_dim), static_cast<Eigen::Index>(hidden_dim)).setOnes();
  p.b = &set.add(name + ".b", std::move(b));
  return p;
}

template <typename T>
LstmOutput lstm_forward(Graph<T>& g, const LstmParams<T>& params, const std::vector<Var>& inputs,
                        const std::vector<Var>* masks) {
  if (inputs.empty()) throw std::invalid_argument("lstm_forward on an empty sequence");
  if (masks && masks->size() != inputs.size()) throw std::invalid_argument("mask count differs from steps");
  const auto h = static_cast<Eigen::Index>(params.hidden_dim);
  const Eigen::Index batch = g.value(inputs[0]).cols();
  Var w = g.param(*params.w);
  Var u = g.param(*params.u);
  Var b = g.param(*params.b);
  Var hs = g.constant(Matrix<T>::Zero(h, batch));
  Var cs = g.constant(Matrix<T>::Zero(h, batch));
  LstmOutput out;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Var z = g.add_bias(g.add(g.matmul(w, inputs[t]), g.matmul(u, hs)), b);
    Var i = g.sigmoid(g.slice_rows(z, 0, h));
    Var f = g.sigmoid(g.slice_rows(z, h, h));
    Var c_hat = g.tanh(g.slice_rows(z, 2 * h, h));
    Var o = g.sigmoid(g.slice_rows(z, 3 * h, h));
    Var c_new = g.add(g.mul(f, cs), g.mul(i, c_hat));
    Var h_new = g.mul(o, g.tanh(c_new));
    if (masks) {
      Var m = (*masks)[t];
      c_new = g.add(cs, g.mul(m, g.sub(c_new, cs)));
      h_new = g.add(hs, g.mul(m, g.sub(h_new, hs)));
    }
    cs = c_new;
    hs = h_new;
    out.hidden.push_back(hs);
  }
  out.final = hs;
  return out;
}

template <typename T>
std::vector<Vector<T>> lstm_forward(const LstmParams<T>& params, const Matrix<T>& seq) {
  Graph<T> g;
  std::vector<Var> inputs;
  for (Eigen::Index t = 0; t < seq.cols(); ++t) inputs.push_back(g.constant(seq.col(t)));
  LstmOutput o = lstm_forward(g, params, inputs);
  std::vector<Vector<T>> out;
  for (Var v : o.hidden) out.push_back(g.value(v).col(0));
  return out;
}

// ---------------------------------------------------------------------------
// Loss, dropout, optimizers

Vec softmax(const Vec& logits) {
  Vec p = (logits.array() - logits.maxCoeff()).exp().matrix();
  return p / p.sum();
}

SoftmaxXent softmax_xent(const Vec& logits, std::size_t gold) {
  if (gold >= static_cast<std::size_t>(logits.size())) throw std::out_of_range("gold label out of range");
  const double mx = logits.maxCoeff();
  const double lse = std::log((logits.array() - mx).exp().sum());
  SoftmaxXent r;
  r.probabilities = softmax(logits);
  r.loss = -(logits(static_cast<Eigen::Index>(gold)) - mx - lse);
  return r;
}

template <typename T>
Matrix<T> dropout(const Matrix<T>& x, double rate, DropoutMode mode, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (mode == DropoutMode::Eval || rate == 0.0) return x;
  Matrix<T> y = x;
  const T keep = T(1.0 / (1.0 - rate));
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, j) = rng.uniform() < rate ? T(0) : y(i, j) * keep;
  }
  return y;
}

template <typename T>
void Optimizer<T>::step(ParameterSet<T>& params) {
  auto all = params.all();
  for (const auto* p : all) {
    if (!p->grad.allFinite()) throw std::runtime_error("non-finite gradient in parameter " + p->name);
  }
  ++t_;
  const T lr = static_cast<T>(cfg_.lr);
  if (cfg_.algo == OptimizerAlgo::Sgd) {
    for (auto* p : all) p->value -= lr * p->grad;
    return;
  }
  const T b1 = static_cast<T>(cfg_.beta1);
  const T b2 = static_cast<T>(cfg_.beta2);
  const T eps = static_cast<T>(cfg_.epsilon);
  const T c1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, static_cast<double>(t_)));
  const T c2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, static_cast<double>(t_)));
  for (auto* p : all) {
    auto& s = state_[p];
    if (s.m.size() == 0) {
      s.m = Matrix<T>::Zero(p->value.rows(), p->value.cols());
      s.v = Matrix<T>::Zero(p->value.rows(), p->value.cols());
    }
    s.m = b1 * s.m + (T(1) - b1) * p->grad;
    s.v = b2 * s.v + (T(1) - b2) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps);
  }
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckResult grad_check(ParameterSet<double>& params, const std::function<Var(Graph<double>&)>& build,
                           const GradCheckOptions& opts) {
  params.zero_grad();
  {
    Graph<double> g;
    Var loss = build(g);
    g.backward(loss);
  }
  auto eval = [&]() {
    Graph<double> g;
    Var loss = build(g);
    return g.value(loss)(0, 0);
  };
  GradCheckResult r;
  for (auto* p : params.all()) {
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      double& x = p->value.data()[k];
      const double saved = x;
      x = saved + opts.epsilon;
      const double up = eval();
      x = saved - opts.epsilon;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * opts.epsilon);
      const double analytic = p->grad.data()[k] * opts.analytic_scale;
      const double denom = std::max({std::abs(analytic), std::abs(numeric), opts.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++r.checked;
      if (rel > r.max_relative_error || r.worst_parameter.empty()) {
        r.max_relative_error = rel;
        r.worst_parameter = p->name;
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Instantiations

#define STANCE_NN_INSTANTIATE(T)                                                                          \
  template class ParameterSet<T>;                                                                         \
  template class Graph<T>;                                                                                \
  template class Optimizer<T>;                                                                            \
  template DenseLayer<T> make_dense<T>(ParameterSet<T>&, const std::string&, std::size_t, std::size_t,    \
                                       Activation, Rng&);                                                 \
  template Var dense_forward<T>(Graph<T>&, const DenseLayer<T>&, Var);                                    \
  template Var mlp_forward<T>(Graph<T>&, const std::vector<DenseLayer<T>>&, Var);                         \
  template Matrix<T> mlp_forward<T>(const std::vector<DenseLayer<T>>&, const Matrix<T>&);                 \
  template LstmParams<T> make_lstm<T>(ParameterSet<T>&, const std::string&, std::size_t, std::size_t,     \
                                      Rng&);                                                              \
  template LstmOutput lstm_forward<T>(Graph<T>&, const LstmParams<T>&, const std::vector<Var>&,           \
                                      const std::vector<Var>*);                                           \
  template std::vector<Vector<T>> lstm_forward<T>(const LstmParams<T>&, const Matrix<T>&);                \
  template Matrix<T> dropout<T>(const Matrix<T>&, double, DropoutMode, Rng&);

STANCE_NN_INSTANTIATE(float)
STANCE_NN_INSTANTIATE(double)

#undef STANCE_NN_INSTANTIATE

}  // namespace stance::nn
