// Command-line front end for the stance toolkit.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stance/config.hpp"
#include "stance/corpus.hpp"
#include "stance/csv.hpp"
#include "stance/eval.hpp"
#include "stance/features.hpp"
#include "stance/harness.hpp"
#include "stance/models.hpp"
#include "stance/report.hpp"

namespace {

using namespace stance;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::string model_kind;
  std::string format = "text";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config (INI)");
  cmd->add_option("--seed", c.seed, "Override the seed list with one seed");
  cmd->add_option("--output-dir", c.output_dir, "Override the output directory");
  cmd->add_option("--model", c.model_kind, "Override the model kind");
  cmd->add_option("--format", c.format, "Report format printed to stdout: text, csv, jsonl");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? default_config() : load_config(c.config);
  if (c.seed) {
    cfg.seeds = {*c.seed};
    cfg = with_seed(cfg, *c.seed);
  }
  if (!c.output_dir.empty()) cfg.output_dir = c.output_dir;
  if (!c.model_kind.empty()) cfg.model.kind = models::parse_model_kind(c.model_kind);
  return cfg;
}

void print_table(const ReportTable& t, const std::string& format) {
  std::cout << render_report(t, parse_report_format(format));
}

void print_stats(const Corpus& corpus) {
  const auto s = corpus_stats(corpus);
  std::printf("corpus      %s\n", corpus.name().c_str());
  std::printf("instances   %zu\nheadlines   %zu\nbodies      %zu\n", s.n_instances, s.n_headlines, s.n_bodies);
  std::printf("tokens/body %.2f\n", s.mean_tokens_per_body);
  for (auto [label, frac] : s.label_fractions) {
    std::printf("%-11s %.4f\n", std::string(short_name(label)).c_str(), frac);
  }
}

std::vector<Stance> load_gold_items(const std::string& path, const std::vector<std::string>& item_ids) {
  std::map<std::string, Stance> by_id;
  for (const auto& r : csv::read_table(path, {"item_id", "label"})) by_id[r.fields[0]] = parse_stance(r.fields[1]);
  std::vector<Stance> out;
  for (const auto& id : item_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::runtime_error("gold file has no label for item " + id);
    out.push_back(it->second);
  }
  return out;
}

void print_eval(const eval::EvaluationReport& r, const std::string& name, const std::string& format) {
  ReportTable t;
  ReportRow row;
  row.name = name;
  row.values = cells_of(r);
  t.rows.push_back(row);
  print_table(t, format);
  std::printf("fnc_raw=%.2f fnc_max=%.2f\n", r.fnc.raw, r.fnc.max);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stancebench: document-level stance detection experiments"};
  app.require_subcommand(1);
  Common common;

  auto* ingest = app.add_subcommand("ingest", "Load an FNC-style corpus, validate it and print statistics");
  std::string stances, bodies, out_stances, out_bodies, name = "FNC";
  ingest->add_option("--stances", stances)->required();
  ingest->add_option("--bodies", bodies)->required();
  ingest->add_option("--name", name);
  ingest->add_option("--out-stances", out_stances, "Rewrite the normalized stances CSV here");
  ingest->add_option("--out-bodies", out_bodies, "Rewrite the normalized bodies CSV here");
  add_common(ingest, common);

  auto* arc = app.add_subcommand("derive-arc", "Derive an FNC-style corpus from ARC records");
  std::string records;
  std::size_t per_post = 3;
  std::uint64_t arc_seed = 1;
  arc->add_option("--records", records)->required();
  arc->add_option("--unrelated-per-post", per_post);
  arc->add_option("--arc-seed", arc_seed);
  arc->add_option("--out-stances", out_stances)->required();
  arc->add_option("--out-bodies", out_bodies)->required();
  add_common(arc, common);

  auto* fitp = app.add_subcommand("fit-pipeline", "Fit the feature pipeline on the training corpus");
  std::string out_path;
  fitp->add_option("--out", out_path)->required();
  add_common(fitp, common);

  auto* train = app.add_subcommand("train", "Train a model on the training corpus and save it");
  train->add_option("--out", out_path)->required();
  add_common(train, common);

  auto* pred = app.add_subcommand("predict", "Predict stances for a corpus with a saved model");
  std::string model_path, embeddings, pos_path;
  pred->add_option("--model-file", model_path)->required();
  pred->add_option("--stances", stances)->required();
  pred->add_option("--bodies", bodies)->required();
  pred->add_option("--out", out_path)->required();
  std::size_t embedding_dim = 50;
  pred->add_option("--embeddings", embeddings, "Embedding file overriding the stored path");
  pred->add_option("--embedding-dim", embedding_dim);
  pred->add_option("--pos", pos_path);
  add_common(pred, common);

  auto* score = app.add_subcommand("score", "Score a predictions CSV against gold stances");
  std::string predictions;
  score->add_option("--stances", stances)->required();
  score->add_option("--bodies", bodies)->required();
  score->add_option("--predictions", predictions)->required();
  add_common(score, common);

  auto* feval = app.add_subcommand("feature-eval", "Cross-validated evaluation of each extractor alone");
  add_common(feval, common);

  auto* abl = app.add_subcommand("ablation", "Group ablation over BoW/C, Topic and Oth");
  std::vector<std::string> all_star;
  abl->add_option("--all-star", all_star, "Preselected extractors for the All* row");
  add_common(abl, common);

  auto* cv = app.add_subcommand("cv", "k-fold cross-validation on the training corpus");
  std::optional<std::size_t> k;
  cv->add_option("--k", k, "Number of folds (defaults to experiment.cv_folds)");
  add_common(cv, common);

  auto* run = app.add_subcommand("run", "Train on the training corpus, evaluate on the test corpus");
  add_common(run, common);

  auto* cross = app.add_subcommand("cross-domain", "Train on one corpus and evaluate on another");
  add_common(cross, common);

  auto* agree = app.add_subcommand("agreement", "Fleiss' kappa and MACE over an annotation matrix");
  std::string annotations, gold_items;
  std::size_t restarts = 10;
  agree->add_option("--annotations", annotations)->required();
  agree->add_option("--gold", gold_items, "CSV item_id,label for the upper-bound report");
  agree->add_option("--restarts", restarts);
  add_common(agree, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      const Corpus c = load_fnc(stances, bodies, name);
      print_stats(c);
      if (!out_stances.empty() || !out_bodies.empty()) {
        if (out_stances.empty() || out_bodies.empty()) throw std::invalid_argument("give both --out-stances and --out-bodies");
        write_fnc(c, out_stances, out_bodies);
      }
    } else if (arc->parsed()) {
      const Corpus c = derive_arc(load_arc_records(records), per_post, arc_seed);
      write_fnc(c, out_stances, out_bodies);
      print_stats(c);
    } else if (fitp->parsed()) {
      const auto cfg = resolve(common);
      const auto in = harness::load_inputs(cfg, false);
      const auto p = features::fit_pipeline(in.train, cfg.pipeline, in.train_pos ? &*in.train_pos : nullptr);
      features::save_pipeline(p, out_path);
      std::printf("pipeline written to %s\n", out_path.c_str());
    } else if (train->parsed()) {
      const auto cfg = resolve(common);
      const auto in = harness::load_inputs(cfg, false);
      std::shared_ptr<const features::FittedPipeline> p;
      if (cfg.model.kind != models::ModelKind::Majority) {
        p = std::make_shared<const features::FittedPipeline>(
            features::fit_pipeline(in.train, cfg.pipeline, in.train_pos ? &*in.train_pos : nullptr));
      }
      models::TrainInputs inputs;
      inputs.pos = in.train_pos ? &*in.train_pos : nullptr;
      const auto m = models::train_model(cfg.model, in.train, p, inputs);
      models::save_model(m, out_path);
      std::printf("model %s trained in %zu epochs (%.2f s), written to %s\n",
                  std::string(models::to_string(m.kind())).c_str(), m.meta.epochs, m.meta.wall_seconds,
                  out_path.c_str());
    } else if (pred->parsed()) {
      std::shared_ptr<const nn::EmbeddingTable> table;
      if (!embeddings.empty()) {
        table = std::make_shared<const nn::EmbeddingTable>(nn::load_embeddings(embeddings, embedding_dim));
      }
      const auto m = models::load_model(model_path, table);
      const Corpus c = load_fnc(stances, bodies).without_labels();
      std::optional<features::PosAnnotation> pos;
      if (!pos_path.empty()) pos = features::load_pos(pos_path);
      const auto labels = models::labels_of(models::predict(m, c, pos ? &*pos : nullptr));
      eval::write_predictions(out_path, c, labels);
      std::printf("%zu predictions written to %s\n", labels.size(), out_path.c_str());
    } else if (score->parsed()) {
      const Corpus gold = load_fnc(stances, bodies);
      const auto pred_labels = eval::align_predictions(gold, eval::load_predictions(predictions));
      print_eval(eval::evaluate(gold.labels(), pred_labels), std::filesystem::path(predictions).stem().string(),
                 common.format);
    } else if (feval->parsed()) {
      const auto cfg = resolve(common);
      const auto in = harness::load_inputs(cfg, false);
      print_table(harness::run_feature_eval(cfg, in.train), common.format);
    } else if (abl->parsed()) {
      const auto cfg = resolve(common);
      const auto in = harness::load_inputs(cfg, false);
      harness::AblationSpec spec;
      if (!all_star.empty()) {
        spec.all_star.emplace();
        for (const auto& e : all_star) spec.all_star->push_back(features::parse_extractor(e));
      }
      print_table(harness::run_ablation(cfg, in.train, spec), common.format);
    } else if (cv->parsed()) {
      const auto cfg = resolve(common);
      const auto in = harness::load_inputs(cfg, false);
      print_table(harness::run_cv(cfg, in.train, k.value_or(cfg.cv_folds)).table, common.format);
    } else if (run->parsed()) {
      const auto cfg = resolve(common);
      print_table(harness::run_experiment(cfg).table, common.format);
    } else if (cross->parsed()) {
      const auto cfg = resolve(common);
      const auto in = harness::load_inputs(cfg, true);
      print_table(harness::run_cross_domain(cfg, in.train, *in.test).table, common.format);
    } else if (agree->parsed()) {
      const auto ann = eval::load_annotations(annotations);
      eval::MaceOptions opts;
      opts.restarts = restarts;
      if (common.seed) opts.seed = *common.seed;
      const auto rep = eval::agreement_report(ann, opts);
      std::printf("items %zu raters %zu\n", ann.items(), ann.raters());
      std::printf("kappa_all %.4f\n", rep.kappa_all);
      if (rep.kappa_related_only) std::printf("kappa_related %.4f\n", *rep.kappa_related_only);
      for (std::size_t r = 0; r < ann.raters(); ++r) {
        std::printf("competence %s %.4f\n", ann.rater_ids[r].c_str(), rep.mace.competences[r]);
      }
      if (!gold_items.empty()) {
        const auto gold = load_gold_items(gold_items, ann.item_ids);
        print_eval(eval::upper_bound_report(rep.mace.labels, gold), "mace", common.format);
      }
    }
  } catch (const harness::StageError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
