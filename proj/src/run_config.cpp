#include "sast/run_config.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <set>

namespace sast {

namespace {

const std::set<std::string> kKnownKeys = {
    "data.source",        "data.path",          "data.classes",
    "data.samples_per_class", "data.width",     "data.height",
    "data.duration_us",   "data.events_per_sample", "data.noise_fraction",
    "data.seed",          "data.split_train",   "data.split_val",
    "data.split_test",    "data.steps",
    "model.hidden",       "model.leak",         "model.threshold",
    "model.surrogate",    "model.slope",
    "train.method",       "train.epochs",       "train.batch_size",
    "train.learning_rate", "train.beta1",       "train.beta2",
    "train.adam_eps",     "train.rho",          "train.delta",
    "train.seed",         "train.seeds",        "train.rho_grid",
};

[[noreturn]] void fail(const KvFile& kv, const std::string& key, const std::string& reason) {
  throw std::invalid_argument(kv.path + ": " + key + ": " + reason);
}

}  // namespace

RunConfig parse_run_config(const KvFile& kv) {
  for (const auto& [key, value] : kv.values) {
    (void)value;
    if (!kKnownKeys.count(key)) {
      throw std::invalid_argument(kv.path + ": unknown key '" + key + "'");
    }
  }

  RunConfig cfg;
  cfg.path = kv.path;

  const std::string source = kv.get_string("data.source", "synthetic");
  if (source == "synthetic") {
    cfg.data.source = DataConfig::Source::Synthetic;
    cfg.data.synth.classes = static_cast<int>(kv.get_int("data.classes", 2));
    cfg.data.synth.samples_per_class = static_cast<int>(kv.get_int("data.samples_per_class", 50));
    cfg.data.synth.width = static_cast<int>(kv.get_int("data.width", 8));
    cfg.data.synth.height = static_cast<int>(kv.get_int("data.height", 8));
    cfg.data.synth.duration_us = kv.get_int("data.duration_us", 100000);
    cfg.data.synth.events_per_sample = static_cast<int>(kv.get_int("data.events_per_sample", 800));
    cfg.data.synth.noise_fraction = kv.get_double("data.noise_fraction", 0.2);
    if (cfg.data.synth.classes < 2) fail(kv, "data.classes", "must be >= 2");
    if (cfg.data.synth.samples_per_class < 1) fail(kv, "data.samples_per_class", "must be >= 1");
    if (cfg.data.synth.width < 2 || cfg.data.synth.height < 2) {
      fail(kv, "data.width/height", "sensor must be at least 2x2");
    }
    if (cfg.data.synth.events_per_sample < 1) fail(kv, "data.events_per_sample", "must be >= 1");
    if (cfg.data.synth.noise_fraction < 0.0 || cfg.data.synth.noise_fraction > 1.0) {
      fail(kv, "data.noise_fraction", "must lie in [0, 1]");
    }
  } else if (source == "manifest") {
    cfg.data.source = DataConfig::Source::Manifest;
    cfg.data.manifest_path = kv.get_string("data.path");
    if (!std::filesystem::exists(cfg.data.manifest_path)) {
      fail(kv, "data.path", "dataset directory does not exist: " + cfg.data.manifest_path);
    }
  } else {
    fail(kv, "data.source", "must be 'synthetic' or 'manifest'");
  }

  cfg.data.seed = static_cast<std::uint64_t>(kv.get_int("data.seed", 0));
  cfg.data.synth.seed = cfg.data.seed;
  cfg.data.split_train = kv.get_double("data.split_train", 0.6);
  cfg.data.split_val = kv.get_double("data.split_val", 0.2);
  cfg.data.split_test = kv.get_double("data.split_test", 0.2);
  if (cfg.data.split_train < 0 || cfg.data.split_val < 0 || cfg.data.split_test < 0 ||
      cfg.data.split_train + cfg.data.split_val + cfg.data.split_test > 1.0 + 1e-9) {
    fail(kv, "data.split_*", "fractions must be non-negative and sum to at most 1");
  }
  cfg.data.steps = static_cast<int>(kv.get_int("data.steps", 10));
  if (cfg.data.steps < 1) fail(kv, "data.steps", "must be >= 1");

  for (const long long h : kv.has("model.hidden") ? kv.get_int_list("model.hidden")
                                                  : std::vector<long long>{32}) {
    if (h < 1) fail(kv, "model.hidden", "all hidden dims must be >= 1");
    cfg.model.hidden.push_back(static_cast<int>(h));
  }
  cfg.model.leak = kv.get_double("model.leak", 0.5);
  if (!(cfg.model.leak > 0.0 && cfg.model.leak < 1.0)) fail(kv, "model.leak", "must lie in (0, 1)");
  cfg.model.threshold = kv.get_double("model.threshold", 1.0);
  if (!(cfg.model.threshold > 0.0)) fail(kv, "model.threshold", "must be positive");
  const std::string surrogate = kv.get_string("model.surrogate", "arctan");
  if (surrogate == "arctan") {
    cfg.model.surrogate.kind = SurrogateKind::Arctan;
  } else if (surrogate == "step") {
    cfg.model.surrogate.kind = SurrogateKind::Step;
  } else {
    fail(kv, "model.surrogate", "must be 'arctan' or 'step'");
  }
  cfg.model.surrogate.slope = kv.get_double("model.slope", 25.0);
  if (!(cfg.model.surrogate.slope > 0.0)) fail(kv, "model.slope", "must be positive");

  const std::string method = kv.get_string("train.method", "baseline");
  if (method == "baseline") {
    cfg.train.method = Method::Baseline;
  } else if (method == "sast") {
    cfg.train.method = Method::Sast;
  } else {
    fail(kv, "train.method", "must be 'baseline' or 'sast'");
  }
  cfg.train.epochs = static_cast<int>(kv.get_int("train.epochs", 1));
  if (cfg.train.epochs < 0) fail(kv, "train.epochs", "must be >= 0");
  cfg.train.batch_size = static_cast<int>(kv.get_int("train.batch_size", 32));
  if (cfg.train.batch_size < 1) fail(kv, "train.batch_size", "must be >= 1");
  cfg.train.adam.lr = kv.get_double("train.learning_rate", 1e-3);
  if (!(cfg.train.adam.lr > 0.0)) fail(kv, "train.learning_rate", "must be positive");
  cfg.train.adam.beta1 = kv.get_double("train.beta1", 0.9);
  cfg.train.adam.beta2 = kv.get_double("train.beta2", 0.999);
  cfg.train.adam.eps = kv.get_double("train.adam_eps", 1e-8);
  if (cfg.train.adam.beta1 < 0 || cfg.train.adam.beta1 >= 1 || cfg.train.adam.beta2 < 0 ||
      cfg.train.adam.beta2 >= 1 || !(cfg.train.adam.eps > 0)) {
    fail(kv, "train.beta1/beta2/adam_eps", "Adam moments must lie in [0, 1), eps > 0");
  }
  cfg.train.sam.rho = kv.get_double("train.rho", 0.0);
  if (cfg.train.sam.rho < 0.0) fail(kv, "train.rho", "must be >= 0");
  cfg.train.sam.delta = kv.get_double("train.delta", 1e-12);
  if (!(cfg.train.sam.delta > 0.0)) fail(kv, "train.delta", "must be > 0");
  cfg.train.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", 1));
  if (kv.has("train.seeds")) {
    for (const long long s : kv.get_int_list("train.seeds")) {
      cfg.train.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  } else {
    cfg.train.seeds.push_back(cfg.train.seed);
  }
  if (kv.has("train.rho_grid")) {
    cfg.train.rho_grid = kv.get_double_list("train.rho_grid");
    for (const double r : cfg.train.rho_grid) {
      if (r < 0.0) fail(kv, "train.rho_grid", "all entries must be >= 0");
    }
  } else {
    cfg.train.rho_grid = {0.1, 0.2, 0.3, 0.4, 0.5};
  }

  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016" PRIx64, fnv1a64(canonical_kv(kv)));
  cfg.config_hash = hash;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(parse_kv_file(path));
}

PreparedData prepare_data(const RunConfig& config) {
  PreparedData data;
  if (config.data.source == DataConfig::Source::Synthetic) {
    data.events = make_synthetic_events(config.data.synth);
  } else {
    data.events = load_manifest_dataset(config.data.manifest_path);
  }
  data.split = stratified_split(data.events.labels, data.events.num_classes,
                                config.data.split_train, config.data.split_val,
                                config.data.split_test, config.data.seed);
  const LabeledDataset full = bin_dataset(data.events, config.data.steps);
  data.train = subset(full, data.split.train);
  data.val = subset(full, data.split.val);
  data.test = subset(full, data.split.test);

  data.dims.push_back(full.dim);
  for (const int h : config.model.hidden) data.dims.push_back(h);
  data.dims.push_back(full.num_classes);
  return data;
}

TrainOptions train_options_from(const RunConfig& config, const std::vector<int>& dims, int threads) {
  TrainOptions options;
  options.dims = dims;
  options.leak = config.model.leak;
  options.threshold = config.model.threshold;
  options.surrogate = config.model.surrogate;
  options.method = config.train.method;
  options.sam = config.train.sam;
  options.adam = config.train.adam;
  options.epochs = config.train.epochs;
  options.batch_size = config.train.batch_size;
  options.seed = config.train.seed;
  options.threads = threads;
  return options;
}

}  // namespace sast
