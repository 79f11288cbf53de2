#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stance/corpus.hpp"
#include "stance/features.hpp"
#include "stance/models.hpp"

namespace stance {

/// Everything a harness run needs. Loaded from an INI file with one section
/// per stage ([experiment], [data], [pipeline], [topics], [model], [gbdt],
/// [mlp], [lstm]).
struct ExperimentConfig {
  std::string name = "experiment";
  std::string train_name = "train";
  std::string test_name = "test";
  std::string train_stances;
  std::string train_bodies;
  std::string test_stances;
  std::string test_bodies;
  /// POS sidecars for the train and test corpora (optional).
  std::string train_pos;
  std::string test_pos;
  features::PipelineConfig pipeline;
  models::ModelSpec model;
  std::vector<std::uint64_t> seeds = {1};
  std::size_t cv_folds = 10;
  std::optional<ResampleStrategy> resample;
  std::string output_dir;
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
/// Reads `path`; STANCEBENCH_SEED, when set, replaces the seed list.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig default_config();

/// Canonical INI rendering: every key, fixed order. parse_config of this
/// text reproduces the config.
std::string canonical_text(const ExperimentConfig& config);
/// 16 hex digits of the FNV-1a hash of canonical_text, ignoring output_dir.
std::string config_hash(const ExperimentConfig& config);

/// The config with every seeded stage set to `seed`.
ExperimentConfig with_seed(const ExperimentConfig& config, std::uint64_t seed);

/// Throws naming the first referenced input file that cannot be opened.
void validate_paths(const ExperimentConfig& config, bool need_test);

/// Applies STANCEBENCH_SEED if set.
void apply_seed_override(ExperimentConfig& config);

}  // namespace stance
