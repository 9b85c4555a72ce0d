#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stresskit/anonymize.hpp"
#include "stresskit/augment.hpp"
#include "stresskit/corpus.hpp"
#include "stresskit/dsp.hpp"
#include "stresskit/experiment.hpp"
#include "stresskit/neural/network.hpp"

namespace stresskit::cli {

/// Everything the subcommands read from the JSON config file. Flags win
/// over file values; unknown keys anywhere in the file are rejected.
struct RunConfig {
  PreprocessConfig preprocess;

  GenderStretchTable gender_table;
  WsolaConfig wsola;

  AugmentationSpec augment;
  int copies_per_method = 5;

  ClassAxis split_axis = ClassAxis::Stress;
  std::uint64_t split_seed = 1;

  ModelConfig model;
  TrainConfig train;
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  std::string workspace = "workspace";
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig default_run_config();

}  // namespace stresskit::cli
