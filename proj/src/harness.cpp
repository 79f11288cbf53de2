#include "stance/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "stance/random.hpp"

namespace stance::harness {

namespace fs = std::filesystem;

StageError::StageError(std::string stage, const std::string& what)
    : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

namespace {

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::ostringstream os;
  for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
  return os.str();
}

std::vector<std::pair<std::string, std::string>> base_meta(const ExperimentConfig& c, const std::string& run) {
  return {{"run", run},
          {"name", c.name},
          {"config_hash", config_hash(c)},
          {"seeds", join_seeds(c.seeds)},
          {"topics_fit", c.pipeline.topics_use_extra_texts ? "train+test-text" : "train-only"}};
}

bool needs_features(const models::ModelSpec& spec) { return spec.kind != models::ModelKind::Majority; }

Corpus maybe_resample(const ExperimentConfig& c, const Corpus& train, std::uint64_t seed) {
  if (!c.resample) return train;
  return resample(train, *c.resample, derive_seed(seed, 0x7265));
}

std::vector<std::string> texts_of(const Corpus& corpus) {
  std::vector<std::string> out;
  for (const auto& inst : corpus.instances()) out.push_back(inst.headline);
  for (const auto& [id, body] : corpus.bodies()) out.push_back(body);
  return out;
}

std::shared_ptr<const features::FittedPipeline> fit_for(const ExperimentConfig& c, const Corpus& train,
                                                        const Corpus& unlabeled_test,
                                                        const features::PosAnnotation* train_pos) {
  std::vector<std::string> extra;
  if (c.pipeline.topics_use_extra_texts) extra = texts_of(unlabeled_test);
  return std::make_shared<const features::FittedPipeline>(features::fit_pipeline(
      train, c.pipeline, train_pos, c.pipeline.topics_use_extra_texts ? &extra : nullptr));
}

std::string row_name(const ExperimentConfig& c) { return std::string(models::to_string(c.model.kind)); }

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ExperimentResult run_pair(const ExperimentConfig& config, const Corpus& train, const Corpus& test,
                          const features::PosAnnotation* train_pos, const features::PosAnnotation* test_pos,
                          const std::string& run, const std::string& name) {
  if (config.seeds.empty()) throw StageError("config", "no seeds");
  ExperimentResult result;
  std::vector<RunOutcome> outcomes;
  for (std::uint64_t seed : config.seeds) {
    outcomes.push_back(train_and_evaluate(with_seed(config, seed), train, test, train_pos, test_pos));
    result.per_seed.push_back(outcomes.back().report);
  }
  result.table.meta = base_meta(config, run);
  result.table.meta.emplace_back("train", train.name());
  result.table.meta.emplace_back("test", test.name());
  result.table.rows.push_back(aggregate_row(name, result.per_seed));
  if (!config.output_dir.empty()) {
    result.output_path = stage("report", [&] {
      const std::string dir = write_reports(config, result.table, run);
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const std::string suffix = "_seed" + std::to_string(config.seeds[i]);
        eval::write_predictions((fs::path(dir) / (run + "_predictions" + suffix + ".csv")).string(), test,
                                outcomes[i].predictions);
        models::save_model(outcomes[i].model, (fs::path(dir) / (run + "_model" + suffix + ".stnc")).string());
      }
      return dir;
    });
  }
  return result;
}

/// Per (seed, fold): fits one pipeline on the training folds and scores every
/// requested model spec on the dev fold. Returns reports[spec][run].
struct CvRuns {
  std::vector<std::vector<eval::EvaluationReport>> reports;
  std::vector<std::shared_ptr<const features::FittedPipeline>> pipelines;
};

CvRuns cross_validate(const ExperimentConfig& config, const Corpus& corpus, std::size_t k,
                      const features::PipelineConfig& pipeline_config, const std::vector<models::ModelSpec>& specs) {
  if (k < 2) throw StageError("cv", "k must be at least 2");
  if (!corpus.fully_labeled()) throw StageError("cv", "corpus has unlabeled instances");
  CvRuns runs;
  runs.reports.resize(specs.size());
  const bool any_features = std::any_of(specs.begin(), specs.end(), needs_features);
  for (std::uint64_t seed : config.seeds) {
    ExperimentConfig seeded = with_seed(config, seed);
    seeded.pipeline = pipeline_config;
    seeded.pipeline.topic.seed = seed;
    const auto folds = stage("split", [&] { return kfold(corpus, k, seed); });
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const Corpus train = stage("resample", [&] { return maybe_resample(seeded, folds[f].train, derive_seed(seed, f)); });
      const Corpus dev = folds[f].dev.without_labels();
      const auto gold = folds[f].dev.labels();
      std::shared_ptr<const features::FittedPipeline> pipeline;
      if (any_features) pipeline = stage("fit-pipeline", [&] { return fit_for(seeded, train, dev, nullptr); });
      runs.pipelines.push_back(pipeline);
      for (std::size_t s = 0; s < specs.size(); ++s) {
        models::ModelSpec spec = specs[s];
        ExperimentConfig tmp = seeded;
        tmp.model = spec;
        tmp = with_seed(tmp, seed);
        const auto model = stage("train", [&] {
          return models::train_model(tmp.model, train, needs_features(spec) ? pipeline : nullptr);
        });
        const auto pred = stage("predict", [&] { return models::labels_of(models::predict(model, dev)); });
        runs.reports[s].push_back(stage("score", [&] { return eval::evaluate(gold, pred); }));
      }
    }
  }
  return runs;
}

}  // namespace

Inputs load_inputs(const ExperimentConfig& config, bool need_test) {
  return stage("load", [&] {
    validate_paths(config, need_test);
    Inputs in;
    in.train = load_fnc(config.train_stances, config.train_bodies, config.train_name);
    if (need_test) in.test = load_fnc(config.test_stances, config.test_bodies, config.test_name);
    if (!config.train_pos.empty()) in.train_pos = features::load_pos(config.train_pos);
    if (need_test && !config.test_pos.empty()) in.test_pos = features::load_pos(config.test_pos);
    return in;
  });
}

RunOutcome train_and_evaluate(const ExperimentConfig& config, const Corpus& train, const Corpus& test,
                              const features::PosAnnotation* train_pos, const features::PosAnnotation* test_pos) {
  if (!test.fully_labeled()) throw StageError("score", "test corpus has unlabeled instances");
  const auto gold = test.labels();
  const Corpus unlabeled = test.without_labels();
  const std::uint64_t seed = config.pipeline.topic.seed;
  const Corpus fit_on = stage("resample", [&] { return maybe_resample(config, train, seed); });
  // Resampling reorders instances, so POS indices only apply to the original order.
  const features::PosAnnotation* pos = config.resample ? nullptr : train_pos;
  std::shared_ptr<const features::FittedPipeline> pipeline;
  if (needs_features(config.model)) {
    pipeline = stage("fit-pipeline", [&] { return fit_for(config, fit_on, unlabeled, pos); });
  }
  RunOutcome out;
  out.model = stage("train", [&] {
    models::TrainInputs inputs;
    inputs.pos = pos;
    return models::train_model(config.model, fit_on, pipeline, inputs);
  });
  out.predictions = stage("predict", [&] {
    return models::labels_of(models::predict(out.model, unlabeled, pipeline && pipeline->pos_fitted() ? test_pos : nullptr));
  });
  out.report = stage("score", [&] { return eval::evaluate(gold, out.predictions); });
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const Inputs in = load_inputs(config, true);
  return run_experiment(config, in.train, *in.test, in.train_pos ? &*in.train_pos : nullptr,
                        in.test_pos ? &*in.test_pos : nullptr);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Corpus& train, const Corpus& test,
                                const features::PosAnnotation* train_pos, const features::PosAnnotation* test_pos) {
  return run_pair(config, train, test, train_pos, test_pos, "experiment", row_name(config));
}

ExperimentResult run_cross_domain(const ExperimentConfig& config, const Corpus& train, const Corpus& test) {
  return run_pair(config, train, test, nullptr, nullptr, "cross_domain", train.name() + "-" + test.name());
}

CvResult run_cv(const ExperimentConfig& config, const Corpus& corpus, std::size_t k) {
  CvResult result;
  auto runs = cross_validate(config, corpus, k, config.pipeline, {config.model});
  result.folds = std::move(runs.reports[0]);
  result.pipelines = std::move(runs.pipelines);
  result.table.meta = base_meta(config, "cv");
  result.table.meta.emplace_back("corpus", corpus.name());
  result.table.meta.emplace_back("k", std::to_string(k));
  for (std::size_t i = 0; i < result.folds.size(); ++i) {
    const std::size_t seed_index = i / k;
    std::string name = "fold" + std::to_string(i % k + 1);
    if (config.seeds.size() > 1) name += "_seed" + std::to_string(config.seeds[seed_index]);
    result.table.rows.push_back(aggregate_row(name, {result.folds[i]}));
  }
  ReportRow mean = aggregate_row("mean", result.folds);
  if (!mean.stdev) mean.stdev = ReportCells{};
  result.table.rows.push_back(mean);
  if (!config.output_dir.empty()) result.output_path = stage("report", [&] { return write_reports(config, result.table, "cv"); });
  return result;
}

ReportTable run_feature_eval(const ExperimentConfig& config, const Corpus& corpus) {
  using models::ModelKind;
  if (config.model.kind != ModelKind::Gbdt && config.model.kind != ModelKind::FeatMlp) {
    throw StageError("feature-eval", "model kind must be gbdt or featmlp");
  }
  const auto& configured = config.pipeline.extractors;
  if (configured.empty()) throw StageError("feature-eval", "no extractors configured");
  features::PipelineConfig pc = config.pipeline;
  for (auto e : features::members(features::Group::Baseline)) {
    if (std::find(pc.extractors.begin(), pc.extractors.end(), e) == pc.extractors.end()) pc.extractors.push_back(e);
  }
  std::vector<models::ModelSpec> specs;
  models::ModelSpec majority;
  majority.kind = ModelKind::Majority;
  specs.push_back(majority);
  models::ModelSpec baseline = config.model;
  baseline.kind = ModelKind::Gbdt;
  baseline.groups.clear();
  baseline.extractors = features::members(features::Group::Baseline);
  specs.push_back(baseline);
  for (auto e : configured) {
    models::ModelSpec s = config.model;
    s.groups.clear();
    s.extractors = {e};
    specs.push_back(s);
  }
  const auto runs = cross_validate(config, corpus, config.cv_folds, pc, specs);
  ReportTable t;
  t.meta = base_meta(config, "feature_eval");
  t.meta.emplace_back("corpus", corpus.name());
  t.meta.emplace_back("k", std::to_string(config.cv_folds));
  t.rows.push_back(aggregate_row(kMajorityRow, runs.reports[0]));
  t.rows.push_back(aggregate_row(kBaselineRow, runs.reports[1]));
  const double threshold = 0.9 * t.rows[1].values[1];
  for (std::size_t i = 0; i < configured.size(); ++i) {
    ReportRow row = aggregate_row(std::string(features::to_string(configured[i])), runs.reports[i + 2]);
    row.flagged = row.values[1] < threshold;
    t.rows.push_back(row);
  }
  if (!config.output_dir.empty()) {
    stage("report", [&] {
      const std::string dir = write_reports(config, t, "feature_eval");
      std::ostringstream plot;
      plot << "extractor,f1m,f1m_sd,below_baseline\n";
      for (std::size_t i = 2; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        plot << r.name << "," << r.values[1] << "," << (r.stdev ? (*r.stdev)[1] : 0.0) << ","
             << (r.flagged ? 1 : 0) << "\n";
      }
      write_file(fs::path(dir) / "feature_eval_plot.csv", plot.str());
      return 0;
    });
  }
  return t;
}

std::vector<features::Extractor> preselected(const ReportTable& table) {
  std::vector<features::Extractor> out;
  for (const auto& r : table.rows) {
    if (r.name == kMajorityRow || r.name == kBaselineRow || r.flagged) continue;
    out.push_back(features::parse_extractor(r.name));
  }
  return out;
}

std::vector<AblationRow> ablation_rows(const std::vector<features::Extractor>& configured, const AblationSpec& spec,
                                       const std::vector<features::Extractor>& all_star) {
  auto has_mode = [&](AblationMode m) { return std::find(spec.modes.begin(), spec.modes.end(), m) != spec.modes.end(); };
  auto filter = [&](const std::function<bool(features::Extractor)>& keep) {
    std::vector<features::Extractor> out;
    for (auto e : configured) {
      if (keep(e)) out.push_back(e);
    }
    return out;
  };
  std::vector<AblationRow> rows;
  auto add = [&](std::string name, std::vector<features::Extractor> set) {
    if (!set.empty()) rows.push_back({std::move(name), std::move(set)});
  };
  const auto label = [](features::Group g) { return g == features::Group::BoWC ? std::string("BoW/C") : std::string(features::to_string(g)); };
  if (has_mode(AblationMode::Only)) {
    for (auto g : spec.groups) add("Only-" + label(g), filter([&](auto e) { return features::group_of(e) == g; }));
  }
  if (has_mode(AblationMode::Without)) {
    for (auto g : spec.groups) add("All-without-" + label(g), filter([&](auto e) { return features::group_of(e) != g; }));
  }
  if (has_mode(AblationMode::AllStar)) {
    add("All*", filter([&](auto e) { return std::find(all_star.begin(), all_star.end(), e) != all_star.end(); }));
  }
  if (has_mode(AblationMode::All)) add("All", configured);
  return rows;
}

ReportTable run_ablation(const ExperimentConfig& config, const Corpus& corpus, const AblationSpec& spec) {
  std::vector<features::Extractor> star;
  const bool want_star = std::find(spec.modes.begin(), spec.modes.end(), AblationMode::AllStar) != spec.modes.end();
  if (want_star) {
    if (spec.all_star) {
      star = *spec.all_star;
    } else {
      ExperimentConfig quiet = config;
      quiet.output_dir.clear();
      star = preselected(run_feature_eval(quiet, corpus));
    }
  }
  const auto rows = ablation_rows(config.pipeline.extractors, spec, star);
  if (rows.empty()) throw StageError("ablation", "no ablation row has a non-empty feature set");
  std::vector<models::ModelSpec> specs;
  for (const auto& r : rows) {
    models::ModelSpec s = config.model;
    s.groups.clear();
    s.extractors = r.extractors;
    specs.push_back(s);
  }
  const auto runs = cross_validate(config, corpus, config.cv_folds, config.pipeline, specs);
  ReportTable t;
  t.meta = base_meta(config, "ablation");
  t.meta.emplace_back("corpus", corpus.name());
  t.meta.emplace_back("k", std::to_string(config.cv_folds));
  if (want_star) {
    std::string names;
    for (auto e : star) names += (names.empty() ? "" : ";") + std::string(features::to_string(e));
    t.meta.emplace_back("all_star", names);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) t.rows.push_back(aggregate_row(rows[i].name, runs.reports[i]));
  if (!config.output_dir.empty()) stage("report", [&] { return write_reports(config, t, "ablation"); });
  return t;
}

std::string write_reports(const ExperimentConfig& config, const ReportTable& table, const std::string& stem) {
  if (config.output_dir.empty()) throw std::invalid_argument("no output directory configured");
  const fs::path dir = fs::path(config.output_dir) / config_hash(config);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "config.ini", canonical_text(config));
  // Render everything first so a failure leaves no partial report behind.
  const std::string csv = render_report(table, ReportFormat::Csv);
  const std::string txt = render_report(table, ReportFormat::Text);
  const std::string jsonl = render_report(table, ReportFormat::JsonLines);
  write_file(dir / (stem + ".csv"), csv);
  write_file(dir / (stem + ".txt"), txt);
  write_file(dir / (stem + ".jsonl"), jsonl);
  return dir.string();
}

}  // namespace stance::harness
