#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sast/event_data.hpp"
#include "sast/kv_file.hpp"
#include "sast/network.hpp"
#include "sast/optim.hpp"

namespace sast {

struct DataConfig {
  enum class Source { Synthetic, Manifest };
  Source source = Source::Synthetic;
  std::string manifest_path;
  SyntheticSpec synth;
  double split_train = 0.6;
  double split_val = 0.2;
  double split_test = 0.2;
  int steps = 10;          // T
  std::uint64_t seed = 0;  // dataset generation + split; independent of training seeds
};

struct ModelConfig {
  std::vector<int> hidden;
  double leak = 0.5;
  double threshold = 1.0;
  SurrogateConfig surrogate;
};

struct TrainSection {
  Method method = Method::Baseline;
  int epochs = 1;
  int batch_size = 32;
  AdamConfig adam;
  SAMConfig sam;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // sweep / multi-seed runs
  std::vector<double> rho_grid;
};

struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainSection train;
  std::string path;
  std::string config_hash;  // fnv1a64 of the canonical key=value form, hex
};

/// Parses and fully validates a run configuration; every violation throws
/// with the offending key named. Unknown keys are rejected.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const KvFile& kv);

/// Everything the commands need from one config: generated or loaded event
/// streams, the deterministic split, and the binned per-split datasets.
struct PreparedData {
  EventDataset events;
  SplitIndices split;
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
  std::vector<int> dims;  // [D, hidden..., classes]
};

PreparedData prepare_data(const RunConfig& config);

TrainOptions train_options_from(const RunConfig& config, const std::vector<int>& dims, int threads);

}  // namespace sast
