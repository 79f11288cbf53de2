#include "stance/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stance/random.hpp"

namespace stance {

namespace pt = boost::property_tree;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      const auto b = cur.find_first_not_of(" \t");
      const auto e = cur.find_last_not_of(" \t");
      if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  return os.str();
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

class Reader {
 public:
  Reader(const pt::ptree& tree, std::string source) : tree_(tree), source_(std::move(source)) {}

  std::optional<std::string> raw(const std::string& key) const {
    if (auto v = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'))) return *v;
    return std::nullopt;
  }
  void str(const std::string& key, std::string& out) const {
    if (auto v = raw(key)) out = *v;
  }
  void size(const std::string& key, std::size_t& out) const {
    if (auto v = raw(key)) out = static_cast<std::size_t>(parse_u64(key, *v));
  }
  void u64(const std::string& key, std::uint64_t& out) const {
    if (auto v = raw(key)) out = parse_u64(key, *v);
  }
  void real(const std::string& key, double& out) const {
    if (auto v = raw(key)) {
      double d = 0.0;
      auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), d);
      if (ec != std::errc{} || p != v->data() + v->size()) fail(key, *v);
      out = d;
    }
  }
  void flag(const std::string& key, bool& out) const {
    if (auto v = raw(key)) {
      if (*v == "true" || *v == "1" || *v == "yes") {
        out = true;
      } else if (*v == "false" || *v == "0" || *v == "no") {
        out = false;
      } else {
        fail(key, *v);
      }
    }
  }
  [[noreturn]] void fail(const std::string& key, const std::string& v) const {
    throw std::invalid_argument(source_ + ": bad value for " + key + ": '" + v + "'");
  }

 private:
  std::uint64_t parse_u64(const std::string& key, const std::string& v) const {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) fail(key, v);
    return out;
  }

  const pt::ptree& tree_;
  std::string source_;
};

void read_training(const Reader& r, const std::string& section, models::NetTraining& t) {
  r.size(section + ".epochs", t.epochs);
  r.size(section + ".batch", t.batch);
  r.real(section + ".learning_rate", t.learning_rate);
  r.real(section + ".validation_fraction", t.validation_fraction);
  r.size(section + ".patience", t.patience);
  r.real(section + ".stop_at_train_accuracy", t.stop_at_train_accuracy);
}

void write_training(std::ostream& os, const models::NetTraining& t) {
  os << "epochs = " << t.epochs << "\n"
     << "batch = " << t.batch << "\n"
     << "learning_rate = " << format_double(t.learning_rate) << "\n"
     << "validation_fraction = " << format_double(t.validation_fraction) << "\n"
     << "patience = " << t.patience << "\n"
     << "stop_at_train_accuracy = " << format_double(t.stop_at_train_accuracy) << "\n";
}

std::string resample_name(const std::optional<ResampleStrategy>& r) {
  if (!r) return "none";
  return *r == ResampleStrategy::Undersample ? "undersample" : "oversample";
}

}  // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  static const std::map<std::string, std::vector<std::string>> known = {
      {"experiment", {"name", "seeds", "cv_folds", "resample", "output_dir"}},
      {"data", {"train_name", "test_name", "train_stances", "train_bodies", "test_stances", "test_bodies", "train_pos", "test_pos"}},
      {"pipeline",
       {"extractors", "bow_vocab", "bow_orders", "bow_negation", "boc_vocab", "boc_n", "tfidf_vocab", "lexicons",
        "embeddings", "embedding_dim", "refuting_words", "topics_use_test_text"}},
      {"topics", {"k", "vocab_size", "nmf_iterations", "lda_iterations", "lda_alpha", "lda_beta"}},
      {"model", {"kind", "groups", "members"}},
      {"gbdt", {"trees", "depth", "learning_rate"}},
      {"mlp",
       {"hidden_layers", "hidden_size", "epochs", "batch", "learning_rate", "validation_fraction", "patience",
        "stop_at_train_accuracy"}},
      {"lstm",
       {"hidden", "dropout", "dense_layers", "dense_size", "max_len", "epochs", "batch", "learning_rate",
        "validation_fraction", "patience", "stop_at_train_accuracy"}},
  };
  for (const auto& [section, body] : tree) {
    auto it = known.find(section);
    if (it == known.end()) throw std::invalid_argument(source + ": unknown section [" + section + "]");
    if (body.empty() && !body.data().empty()) {
      throw std::invalid_argument(source + ": key '" + section + "' outside of a section");
    }
    for (const auto& [key, _] : body) {
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
        throw std::invalid_argument(source + ": unknown key " + section + "." + key);
      }
    }
  }

  const Reader r(tree, source);
  ExperimentConfig c;
  r.str("experiment.name", c.name);
  if (auto v = r.raw("experiment.seeds")) {
    c.seeds.clear();
    for (const auto& s : split_list(*v)) {
      std::uint64_t seed = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
      if (ec != std::errc{} || p != s.data() + s.size()) r.fail("experiment.seeds", *v);
      c.seeds.push_back(seed);
    }
    if (c.seeds.empty()) r.fail("experiment.seeds", *v);
  }
  r.size("experiment.cv_folds", c.cv_folds);
  if (auto v = r.raw("experiment.resample")) {
    if (*v == "none") {
      c.resample.reset();
    } else if (*v == "undersample") {
      c.resample = ResampleStrategy::Undersample;
    } else if (*v == "oversample") {
      c.resample = ResampleStrategy::Oversample;
    } else {
      r.fail("experiment.resample", *v);
    }
  }
  r.str("experiment.output_dir", c.output_dir);

  r.str("data.train_name", c.train_name);
  r.str("data.test_name", c.test_name);
  r.str("data.train_stances", c.train_stances);
  r.str("data.train_bodies", c.train_bodies);
  r.str("data.test_stances", c.test_stances);
  r.str("data.test_bodies", c.test_bodies);
  r.str("data.train_pos", c.train_pos);
  r.str("data.test_pos", c.test_pos);

  auto& p = c.pipeline;
  if (auto v = r.raw("pipeline.extractors")) {
    p.extractors.clear();
    for (const auto& s : split_list(*v)) p.extractors.push_back(features::parse_extractor(s));
  }
  r.size("pipeline.bow_vocab", p.bow_vocab);
  if (auto v = r.raw("pipeline.bow_orders")) {
    p.bow_orders.clear();
    for (const auto& s : split_list(*v)) p.bow_orders.push_back(static_cast<std::size_t>(std::stoul(s)));
  }
  r.flag("pipeline.bow_negation", p.bow_negation);
  r.size("pipeline.boc_vocab", p.boc_vocab);
  r.size("pipeline.boc_n", p.boc_n);
  r.size("pipeline.tfidf_vocab", p.tfidf_vocab);
  if (auto v = r.raw("pipeline.lexicons")) p.lexicon_paths = split_list(*v);
  r.str("pipeline.embeddings", p.embeddings_path);
  r.size("pipeline.embedding_dim", p.embedding_dim);
  if (auto v = r.raw("pipeline.refuting_words")) p.refuting_words = split_list(*v);
  r.flag("pipeline.topics_use_test_text", p.topics_use_extra_texts);

  r.size("topics.k", p.topic.k);
  r.size("topics.vocab_size", p.topic.vocab_size);
  r.size("topics.nmf_iterations", p.topic.nmf_iterations);
  r.size("topics.lda_iterations", p.topic.lda_iterations);
  r.real("topics.lda_alpha", p.topic.lda_alpha);
  r.real("topics.lda_beta", p.topic.lda_beta);

  auto& m = c.model;
  if (auto v = r.raw("model.kind")) m.kind = models::parse_model_kind(*v);
  if (auto v = r.raw("model.groups")) {
    for (const auto& s : split_list(*v)) m.groups.push_back(features::parse_group(s));
  }
  r.size("gbdt.trees", m.gbdt.trees);
  r.size("gbdt.depth", m.gbdt.depth);
  r.real("gbdt.learning_rate", m.gbdt.learning_rate);
  r.size("mlp.hidden_layers", m.mlp.hidden_layers);
  r.size("mlp.hidden_size", m.mlp.hidden_size);
  read_training(r, "mlp", m.mlp.training);
  r.size("lstm.hidden", m.lstm.hidden);
  r.real("lstm.dropout", m.lstm.dropout);
  r.size("lstm.dense_layers", m.lstm.dense_layers);
  r.size("lstm.dense_size", m.lstm.dense_size);
  r.size("lstm.max_len", m.lstm.max_len);
  read_training(r, "lstm", m.lstm.training);
  m.lstm.embeddings_path = p.embeddings_path;
  m.lstm.embedding_dim = p.embedding_dim;
  if (auto v = r.raw("model.members")) {
    for (const auto& s : split_list(*v)) {
      models::ModelSpec member = m;
      member.kind = models::parse_model_kind(s);
      member.members.clear();
      if (member.kind == models::ModelKind::Ensemble) r.fail("model.members", *v);
      m.members.push_back(std::move(member));
    }
  }
  if (m.kind == models::ModelKind::Ensemble && m.members.empty()) {
    throw std::invalid_argument(source + ": ensemble model needs model.members");
  }
  if (c.cv_folds < 2) r.fail("experiment.cv_folds", std::to_string(c.cv_folds));
  return with_seed(c, c.seeds.front());
}

std::string canonical_text(const ExperimentConfig& c) {
  std::ostringstream os;
  std::vector<std::string> extractors, groups, members;
  for (auto e : c.pipeline.extractors) extractors.emplace_back(features::to_string(e));
  for (auto g : c.model.groups) groups.emplace_back(features::to_string(g));
  for (const auto& m : c.model.members) members.emplace_back(models::to_string(m.kind));
  const auto& p = c.pipeline;
  const auto& m = c.model;
  os << "[experiment]\n"
     << "name = " << c.name << "\n"
     << "seeds = " << join(c.seeds) << "\n"
     << "cv_folds = " << c.cv_folds << "\n"
     << "resample = " << resample_name(c.resample) << "\n"
     << "output_dir = " << c.output_dir << "\n\n"
     << "[data]\n"
     << "train_name = " << c.train_name << "\n"
     << "test_name = " << c.test_name << "\n"
     << "train_stances = " << c.train_stances << "\n"
     << "train_bodies = " << c.train_bodies << "\n"
     << "test_stances = " << c.test_stances << "\n"
     << "test_bodies = " << c.test_bodies << "\n"
     << "train_pos = " << c.train_pos << "\n"
     << "test_pos = " << c.test_pos << "\n\n"
     << "[pipeline]\n"
     << "extractors = " << join(extractors) << "\n"
     << "bow_vocab = " << p.bow_vocab << "\n"
     << "bow_orders = " << join(p.bow_orders) << "\n"
     << "bow_negation = " << (p.bow_negation ? "true" : "false") << "\n"
     << "boc_vocab = " << p.boc_vocab << "\n"
     << "boc_n = " << p.boc_n << "\n"
     << "tfidf_vocab = " << p.tfidf_vocab << "\n"
     << "lexicons = " << join(p.lexicon_paths) << "\n"
     << "embeddings = " << p.embeddings_path << "\n"
     << "embedding_dim = " << p.embedding_dim << "\n"
     << "refuting_words = " << join(p.refuting_words) << "\n"
     << "topics_use_test_text = " << (p.topics_use_extra_texts ? "true" : "false") << "\n\n"
     << "[topics]\n"
     << "k = " << p.topic.k << "\n"
     << "vocab_size = " << p.topic.vocab_size << "\n"
     << "nmf_iterations = " << p.topic.nmf_iterations << "\n"
     << "lda_iterations = " << p.topic.lda_iterations << "\n"
     << "lda_alpha = " << format_double(p.topic.lda_alpha) << "\n"
     << "lda_beta = " << format_double(p.topic.lda_beta) << "\n\n"
     << "[model]\n"
     << "kind = " << models::to_string(m.kind) << "\n"
     << "groups = " << join(groups) << "\n"
     << "members = " << join(members) << "\n\n"
     << "[gbdt]\n"
     << "trees = " << m.gbdt.trees << "\n"
     << "depth = " << m.gbdt.depth << "\n"
     << "learning_rate = " << format_double(m.gbdt.learning_rate) << "\n\n"
     << "[mlp]\n"
     << "hidden_layers = " << m.mlp.hidden_layers << "\n"
     << "hidden_size = " << m.mlp.hidden_size << "\n";
  write_training(os, m.mlp.training);
  os << "\n[lstm]\n"
     << "hidden = " << m.lstm.hidden << "\n"
     << "dropout = " << format_double(m.lstm.dropout) << "\n"
     << "dense_layers = " << m.lstm.dense_layers << "\n"
     << "dense_size = " << m.lstm.dense_size << "\n"
     << "max_len = " << m.lstm.max_len << "\n";
  write_training(os, m.lstm.training);
  return os.str();
}

std::string config_hash(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.output_dir.clear();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical_text(c))));
  return buf;
}

namespace {

void seed_spec(models::ModelSpec& m, std::uint64_t seed) {
  m.gbdt.seed = seed;
  m.mlp.training.seed = seed;
  m.lstm.training.seed = seed;
  for (auto& member : m.members) seed_spec(member, seed);
}

}  // namespace

ExperimentConfig with_seed(const ExperimentConfig& config, std::uint64_t seed) {
  ExperimentConfig c = config;
  c.pipeline.topic.seed = seed;
  seed_spec(c.model, seed);
  return c;
}

void apply_seed_override(ExperimentConfig& config) {
  if (const char* env = std::getenv("STANCEBENCH_SEED"); env && *env) {
    std::uint64_t seed = 0;
    const std::string_view s(env);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (ec != std::errc{} || p != s.data() + s.size()) {
      throw std::invalid_argument("STANCEBENCH_SEED is not an unsigned integer: " + std::string(s));
    }
    config.seeds = {seed};
    config = with_seed(config, seed);
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = parse_config(ss.str(), path);
  apply_seed_override(c);
  return c;
}

void validate_paths(const ExperimentConfig& c, bool need_test) {
  auto check = [](const std::string& what, const std::string& path, bool required) {
    if (path.empty()) {
      if (required) throw std::invalid_argument("config: " + what + " is not set");
      return;
    }
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open " + what + " '" + path + "'");
  };
  check("data.train_stances", c.train_stances, true);
  check("data.train_bodies", c.train_bodies, true);
  check("data.test_stances", c.test_stances, need_test);
  check("data.test_bodies", c.test_bodies, need_test);
  check("data.train_pos", c.train_pos, false);
  if (need_test) check("data.test_pos", c.test_pos, false);
  for (const auto& l : c.pipeline.lexicon_paths) check("pipeline.lexicons", l, true);
  check("pipeline.embeddings", c.pipeline.embeddings_path, false);
}

}  // namespace stance
