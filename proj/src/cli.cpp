#include "sast/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "sast/diagnostics.hpp"
#include "sast/eval.hpp"
#include "sast/hw_sim.hpp"
#include "sast/rng.hpp"
#include "sast/run_config.hpp"

namespace sast::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_csv(const fs::path& path, const std::string& schema, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# schema=" << schema << "\n" << header << "\n";
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json config_json(const RunConfig& config) {
  json j;
  j["hash"] = config.config_hash;
  return j;
}

json record_json(const TrainRecord& record) {
  json steps;
  steps["loss"] = json::array();
  steps["grad_norm"] = json::array();
  steps["grad_evals"] = json::array();
  for (const StepRow& row : record.steps) {
    steps["loss"].push_back(row.loss);
    steps["grad_norm"].push_back(row.grad_norm);
    steps["grad_evals"].push_back(row.grad_evals);
  }
  json epochs = json::array();
  for (const EpochRow& row : record.epochs) {
    epochs.push_back({{"epoch", row.epoch},
                      {"lr", row.lr},
                      {"mean_loss", row.mean_loss},
                      {"mean_grad_norm", row.mean_grad_norm},
                      {"val_surrogate_acc", row.val_surrogate_acc},
                      {"val_hard_acc", row.val_hard_acc},
                      {"grad_evals_cum", row.grad_evals_cum}});
  }
  json j;
  j["method"] = record.method;
  j["rho"] = record.rho;
  j["total_grad_evals"] = record.total_grad_evals;
  j["best"] = {{"epoch", record.best_epoch},
               {"val_hard_acc", record.best_val_hard_acc},
               {"val_surrogate_acc", record.best_val_surrogate_acc}};
  j["per_step"] = steps;
  j["per_epoch"] = epochs;
  return j;
}

void write_train_csv(const fs::path& path, const TrainRecord& record) {
  auto out = open_csv(path, "sastnet.train.v1",
                      "epoch,lr,mean_loss,mean_grad_norm,val_surrogate_acc,val_hard_acc,"
                      "grad_evals_cum,wall_s");
  for (const EpochRow& row : record.epochs) {
    out << row.epoch << ',' << fmt_double(row.lr) << ',' << fmt_double(row.mean_loss) << ','
        << fmt_double(row.mean_grad_norm) << ',' << fmt_double(row.val_surrogate_acc) << ','
        << fmt_double(row.val_hard_acc) << ',' << row.grad_evals_cum << ','
        << fmt_double(row.wall_s) << "\n";
  }
}

Mode parse_mode(const std::string& mode) {
  if (mode == "surrogate") return Mode::Surrogate;
  if (mode == "hard") return Mode::Hard;
  throw std::invalid_argument("unknown mode '" + mode + "' (expected surrogate or hard)");
}

const LabeledDataset& pick_split(const PreparedData& data, const std::string& split) {
  if (split == "train") return data.train;
  if (split == "val") return data.val;
  if (split == "test") return data.test;
  throw std::invalid_argument("unknown split '" + split + "' (expected train, val, or test)");
}

std::vector<int> split_indices(const PreparedData& data, const std::string& split) {
  if (split == "train") return data.split.train;
  if (split == "val") return data.split.val;
  if (split == "test") return data.split.test;
  throw std::invalid_argument("unknown split '" + split + "'");
}

void check_checkpoint_dims(const NetworkParams& params, const PreparedData& data,
                           const std::string& checkpoint) {
  const int data_dim = data.dims.front();
  const int data_classes = data.dims.back();
  if (params.input_dim() != data_dim || params.num_classes() != data_classes) {
    throw std::invalid_argument(
        "checkpoint " + checkpoint + " has input/classes " + std::to_string(params.input_dim()) +
        "/" + std::to_string(params.num_classes()) + " but the dataset needs " +
        std::to_string(data_dim) + "/" + std::to_string(data_classes));
  }
}

// Validation failures exit 2, anything thrown while computing exits 1.
template <class Setup, class Run>
int guarded(Setup&& setup, Run&& run) {
  try {
    setup();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int cmd_train(const TrainArgs& args) {
  RunConfig config;
  PreparedData data;
  TrainOptions options;
  auto setup = [&] {
    config = load_run_config(args.config);
    data = prepare_data(config);
    if (data.train.size() == 0) throw std::invalid_argument(args.config + ": training split is empty");
    if (data.val.size() == 0) throw std::invalid_argument(args.config + ": validation split is empty");
    options = train_options_from(config, data.dims, args.threads);
    fs::create_directories(args.out_dir);
  };
  auto run = [&] {
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result = train(data.train, data.val, options);
    const double total_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path out(args.out_dir);
    save_checkpoint((out / "checkpoint.bin").string(), result.best);
    write_train_csv(out / "train.csv", result.record);

    json summary;
    summary["schema"] = "sastnet.train_summary.v1";
    summary["config"] = config_json(config);
    summary["seed"] = config.train.seed;
    summary["data_seed"] = config.data.seed;
    summary["arch"] = data.dims;
    summary["param_count"] = learnable_param_count(result.best);
    summary["threshold_count"] = threshold_count(result.best);
    summary["record"] = record_json(result.record);

    // Convergence monitor: probed smoothness and estimated gradient noise at
    // the final parameters, juxtaposed with the recorded gradient norms.
    if (!result.record.steps.empty() && data.train.size() >= 2) {
      TheoryConstants consts;
      consts.alpha = result.final_params.leak;
      consts.rho = result.record.rho;
      consts.eta = config.train.adam.lr;
      consts.loss_initial = result.record.steps.front().loss;
      consts.loss_optimal = 0.0;
      const int probe_batch = std::min<int>(config.train.batch_size, static_cast<int>(data.train.size()));
      std::vector<int> idx(probe_batch);
      for (int i = 0; i < probe_batch; ++i) idx[i] = i;
      const Batch batch = batch_from(data.train, idx);
      NetworkParams scratch = result.final_params;
      const FlatLossFn loss_fn = [&scratch, &batch, &args](const Vec& flat) {
        unflatten_params(flat, scratch);
        double sum = 0.0;
        for (const SampleView& s : batch) {
          sum += cross_entropy(forward(scratch, *s.frames, Mode::Surrogate).logits, s.label);
        }
        (void)args;
        return sum / static_cast<double>(batch.size());
      };
      consts.beta_hat = estimate_beta(loss_fn, flatten_params(result.final_params), 32, 1e-3,
                                      config.train.seed);
      const int noise_batches = 8;
      consts.sigma_noise_sq = estimate_gradient_noise(result.final_params, data.train, probe_batch,
                                                      noise_batches, config.train.seed, args.threads);
      consts.sigma_noise_source = "estimated";
      const ConvergenceReport conv = convergence_monitor(result.record, consts);
      summary["convergence"] = {{"mean_sq_grad_norm", conv.mean_sq_grad_norm},
                                {"floor", conv.floor},
                                {"bound_rhs", conv.bound_rhs},
                                {"beta_hat", consts.beta_hat},
                                {"sigma_noise_sq", consts.sigma_noise_sq},
                                {"sigma_noise_source", consts.sigma_noise_source}};
    }

    json timing;
    timing["total_s"] = total_s;
    json per_epoch = json::array();
    for (const EpochRow& row : result.record.epochs) per_epoch.push_back(row.wall_s);
    timing["per_epoch_s"] = per_epoch;
    summary["timing"] = timing;  // stripped in determinism comparisons

    write_json(out / "summary.json", summary);
    std::cout << "trained " << result.record.method << " for " << result.record.epochs.size()
              << " epochs; best val hard acc " << result.record.best_val_hard_acc << " at epoch "
              << result.record.best_epoch << "\n";
  };
  return guarded(setup, run);
}

int cmd_eval(const EvalArgs& args) {
  RunConfig config;
  PreparedData data;
  NetworkParams params;
  auto setup = [&] {
    config = load_run_config(args.config);
    data = prepare_data(config);
    params = load_checkpoint(args.checkpoint);
    check_checkpoint_dims(params, data, args.checkpoint);
    if (pick_split(data, args.split).size() == 0) {
      throw std::invalid_argument("split '" + args.split + "' is empty under " + args.config);
    }
    if (args.mode != "both") parse_mode(args.mode);
    for (const double p : args.corrupt) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("--corrupt values must lie in [0, 1]");
      }
    }
    fs::create_directories(args.out_dir);
  };
  auto run = [&] {
    const LabeledDataset& ds = pick_split(data, args.split);
    const fs::path out(args.out_dir);

    json j;
    j["schema"] = "sastnet.eval.v1";
    j["config"] = config_json(config);
    j["checkpoint"] = args.checkpoint;
    j["split"] = args.split;
    double acc_surrogate = std::numeric_limits<double>::quiet_NaN();
    double acc_hard = std::numeric_limits<double>::quiet_NaN();
    double delta = std::numeric_limits<double>::quiet_NaN();
    if (args.mode == "both") {
      const EvalResult r = transfer_gap(params, ds, args.threads);
      acc_surrogate = r.acc_surrogate;
      acc_hard = r.acc_hard;
      delta = r.delta_transfer;
      j["acc_surrogate"] = acc_surrogate;
      j["acc_hard"] = acc_hard;
      j["delta_transfer"] = delta;
    } else {
      const Mode mode = parse_mode(args.mode);
      const double acc = evaluate(params, ds, mode, args.threads);
      (mode == Mode::Surrogate ? acc_surrogate : acc_hard) = acc;
      j[mode == Mode::Surrogate ? "acc_surrogate" : "acc_hard"] = acc;
    }

    auto csv = open_csv(out / "eval.csv", "sastnet.eval.v1",
                        "split,acc_surrogate,acc_hard,delta_transfer");
    csv << args.split << ',' << fmt_double(acc_surrogate) << ',' << fmt_double(acc_hard) << ','
        << fmt_double(delta) << "\n";

    if (!args.corrupt.empty()) {
      const EventDataset events = subset(data.events, split_indices(data, args.split));
      const Mode mode = args.mode == "surrogate" ? Mode::Surrogate : Mode::Hard;
      const std::uint64_t base = stream_seed(config.train.seed, Stream::Corruption);
      const auto rows =
          corruption_sweep(params, events, config.data.steps, args.corrupt, base, mode, args.threads);
      auto corr = open_csv(out / "corruption.csv", "sastnet.corruption.v1", "p,accuracy,mode");
      json jrows = json::array();
      for (const CorruptionRow& row : rows) {
        corr << fmt_double(row.p) << ',' << fmt_double(row.accuracy) << ','
             << (mode == Mode::Surrogate ? "surrogate" : "hard") << "\n";
        jrows.push_back({{"p", row.p}, {"accuracy", row.accuracy}});
      }
      j["corruption"] = jrows;
      j["corruption_mode"] = mode == Mode::Surrogate ? "surrogate" : "hard";
    }
    write_json(out / "eval.json", j);
    std::cout << "evaluated split " << args.split << "\n";
  };
  return guarded(setup, run);
}

int cmd_hwsim(const HwSimArgs& args) {
  RunConfig config;
  PreparedData data;
  NetworkParams params;
  QuantProfile profile;
  auto setup = [&] {
    config = load_run_config(args.config);
    data = prepare_data(config);
    params = load_checkpoint(args.checkpoint);
    check_checkpoint_dims(params, data, args.checkpoint);
    profile = profile_by_name(args.profile);
    if (data.test.size() == 0) {
      throw std::invalid_argument("test split is empty under " + args.config);
    }
    fs::create_directories(args.out_dir);
  };
  auto run = [&] {
    const QuantizedNetwork qnet = quantize_weights(params, profile);
    const HwEvalResult result = hw_evaluate(qnet, data.test, args.reference_ksynops, args.threads);
    const fs::path out(args.out_dir);
    save_quantized_network((out / "qnet.bin").string(), qnet);

    json j;
    j["schema"] = "sastnet.hwsim.v1";
    j["config"] = config_json(config);
    j["checkpoint"] = args.checkpoint;
    j["checkpoint_reused"] = true;  // pretrained weights, no hardware-aware retraining
    j["profile"] = profile.name;
    j["weight_bits"] = profile.weight_bits;
    j["membrane_format"] =
        "Q" + std::to_string(profile.membrane.integer_bits) + "." +
        std::to_string(profile.membrane.fraction_bits);
    j["accuracy"] = result.accuracy;
    j["mean_ksynops"] = result.mean_ksynops;
    if (result.ops_ratio) j["ops_ratio"] = *result.ops_ratio;
    write_json(out / "hwsim.json", j);

    auto csv = open_csv(out / "hwsim.csv", "sastnet.hwsim.v1",
                        "profile,weight_bits,membrane_format,accuracy,mean_ksynops,ops_ratio");
    csv << profile.name << ',' << profile.weight_bits << ','
        << j["membrane_format"].get<std::string>() << ',' << fmt_double(result.accuracy) << ','
        << fmt_double(result.mean_ksynops) << ','
        << (result.ops_ratio ? fmt_double(*result.ops_ratio) : "nan") << "\n";
    std::cout << "hw profile " << profile.name << ": accuracy " << result.accuracy << ", kSynOps "
              << result.mean_ksynops << "\n";
  };
  return guarded(setup, run);
}

int cmd_diagnose(const DiagnoseArgs& args) {
  RunConfig config;
  PreparedData data;
  NetworkParams params;
  auto setup = [&] {
    static const std::vector<std::string> kKnown = {"gamma", "lipschitz", "margins", "samband"};
    if (std::find(kKnown.begin(), kKnown.end(), args.what) == kKnown.end()) {
      throw std::invalid_argument("unknown diagnostic '" + args.what +
                                  "' (expected gamma, lipschitz, margins, or samband)");
    }
    config = load_run_config(args.config);
    data = prepare_data(config);
    params = load_checkpoint(args.checkpoint);
    check_checkpoint_dims(params, data, args.checkpoint);
    if (pick_split(data, args.split).size() == 0) {
      throw std::invalid_argument("split '" + args.split + "' is empty under " + args.config);
    }
    fs::create_directories(fs::path(args.out_dir) / "diagnostics");
  };
  auto run = [&] {
    const LabeledDataset& ds = pick_split(data, args.split);
    const fs::path dir = fs::path(args.out_dir) / "diagnostics";
    json j;
    j["schema"] = "sastnet.diagnostic.v1";
    j["config"] = config_json(config);
    j["checkpoint"] = args.checkpoint;
    j["split"] = args.split;
    j["what"] = args.what;

    if (args.what == "gamma") {
      const ContractionReport report = contraction_proxy(params, ds, args.threads);
      j["b1_hat"] = report.b1_hat;
      j["m_theta_hat"] = report.m_theta_hat;
      j["gamma_hat"] = report.gamma_hat;
      j["contraction"] = report.contraction;
      j["argmax"] = {{"layer", report.argmax.layer},
                     {"step", report.argmax.step},
                     {"sample", report.argmax.sample}};
      write_json(dir / "gamma.json", j);
    } else if (args.what == "lipschitz") {
      const TheoryConstants consts = measure_theory_constants(params, ds, args.threads);
      const double gamma_local = consts.alpha + consts.max_threshold * consts.b1_local;
      const double gamma_global = consts.alpha + consts.max_threshold * consts.b1_global;
      j["max_layer_norm"] = consts.max_layer_norm;
      j["max_threshold"] = consts.max_threshold;
      j["readout_norm"] = consts.readout_norm;
      j["b1_local"] = consts.b1_local;
      j["b1_global"] = consts.b1_global;
      j["b2_local"] = consts.b2_local;
      j["b2_global"] = consts.b2_global;
      j["gamma_local"] = gamma_local;
      j["gamma_global"] = gamma_global;
      j["contractive_local"] = gamma_local < 1.0;
      j["contractive_global"] = gamma_global < 1.0;
      j["lipschitz_local_b1"] = lipschitz_bound(consts, consts.b1_local);
      j["lipschitz_global_b1"] = lipschitz_bound(consts, consts.b1_global);
      const LipschitzProbeReport probe =
          lipschitz_probe(params, ds, consts.b1_global, 100, config.train.seed, args.threads);
      j["probe"] = {{"pairs", 100},
                    {"max_ratio", probe.max_ratio},
                    {"bound", probe.bound},
                    {"satisfied", probe.satisfied}};
      write_json(dir / "lipschitz.json", j);
    } else if (args.what == "margins") {
      const MarginStatistic stat = margin_statistic(params, ds, 0.2, args.threads);
      j["window"] = stat.window;
      j["fraction_within"] = stat.fraction_within;
      j["margin_count"] = stat.margin_count;
      write_json(dir / "margins.json", j);
      auto csv = open_csv(dir / "margins_histogram.csv", "sastnet.margins.v1", "bin_center,mass");
      for (std::size_t b = 0; b < stat.bin_centers.size(); ++b) {
        csv << fmt_double(stat.bin_centers[b]) << ',' << fmt_double(stat.bin_mass[b]) << "\n";
      }
    } else {  // samband
      const int batch_size = std::min<int>(config.train.batch_size, static_cast<int>(ds.size()));
      std::vector<int> idx(batch_size);
      for (int i = 0; i < batch_size; ++i) idx[i] = i;
      const SamBoundReport report = sam_bound_check(params, batch_from(ds, idx),
                                                    config.train.sam.rho, 64, config.train.seed,
                                                    args.threads);
      j["rho"] = config.train.sam.rho;
      j["loss_at_w"] = report.loss_at_w;
      j["grad_norm"] = report.grad_norm;
      j["beta_hat"] = report.beta_hat;
      j["lhs_max"] = report.lhs_max;
      j["rhs"] = report.rhs;
      j["satisfied"] = report.satisfied;
      j["worst_probe"] = report.worst_probe;
      j["probes"] = report.probes;
      write_json(dir / "samband.json", j);
    }
    std::cout << "diagnostic '" << args.what << "' written under " << dir.string() << "\n";
  };
  return guarded(setup, run);
}

int cmd_sweep(const SweepArgs& args) {
  RunConfig config;
  PreparedData data;
  auto setup = [&] {
    config = load_run_config(args.config);
    data = prepare_data(config);
    if (data.train.size() == 0 || data.val.size() == 0) {
      throw std::invalid_argument(args.config + ": sweep needs non-empty train and val splits");
    }
    if (config.train.rho_grid.empty()) {
      throw std::invalid_argument(args.config + ": train.rho_grid is empty");
    }
    fs::create_directories(args.out_dir);
  };
  auto run = [&] {
    TrainOptions base = train_options_from(config, data.dims, args.threads);
    const RhoSweepResult sweep =
        sweep_rho(data.train, data.val, config.train.rho_grid, base, config.train.seeds);

    const fs::path out(args.out_dir);
    auto csv = open_csv(out / "sweep.csv", "sastnet.sweep.v1",
                        "rho,runs,mean_val_hard,std_val_hard,mean_val_surrogate,"
                        "std_val_surrogate,mean_delta_val");
    json jrows = json::array();
    for (const RhoSweepRow& row : sweep.rows) {
      csv << fmt_double(row.rho) << ',' << row.runs << ',' << fmt_double(row.mean_val_hard) << ','
          << fmt_double(row.std_val_hard) << ',' << fmt_double(row.mean_val_surrogate) << ','
          << fmt_double(row.std_val_surrogate) << ',' << fmt_double(row.mean_delta_val) << "\n";
      jrows.push_back({{"rho", row.rho},
                       {"runs", row.runs},
                       {"mean_val_hard", row.mean_val_hard},
                       {"std_val_hard", row.std_val_hard},
                       {"mean_val_surrogate", row.mean_val_surrogate},
                       {"std_val_surrogate", row.std_val_surrogate},
                       {"mean_delta_val", row.mean_delta_val},
                       {"per_seed_hard", row.per_seed_hard},
                       {"per_seed_surrogate", row.per_seed_surrogate}});
    }
    json j;
    j["schema"] = "sastnet.sweep.v1";
    j["config"] = config_json(config);
    j["seeds"] = config.train.seeds;
    j["rows"] = jrows;
    j["best_rho"] = sweep.best_rho;
    j["std_kind"] = "population";
    write_json(out / "sweep.json", j);

    // Persist the per-run best checkpoints for later test-set evaluation.
    for (std::size_t r = 0; r < sweep.rows.size(); ++r) {
      for (std::size_t s = 0; s < config.train.seeds.size(); ++s) {
        if (r < sweep.rows.size() && s < sweep.rows[r].checkpoints.size()) {
          char name[64];
          std::snprintf(name, sizeof(name), "rho_%g_seed_%llu", sweep.rows[r].rho,
                        static_cast<unsigned long long>(config.train.seeds[s]));
          const fs::path run_dir = out / "runs" / name;
          fs::create_directories(run_dir);
          save_checkpoint((run_dir / "checkpoint.bin").string(), sweep.rows[r].checkpoints[s]);
        }
      }
    }
    std::cout << "sweep finished; best rho " << sweep.best_rho << "\n";
  };
  return guarded(setup, run);
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Surrogate-forward spiking network training with sharpness-aware updates"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a network from a run config");
  train_cmd->add_option("--config", train_args.config, "Run config file")->required();
  train_cmd->add_option("--out", train_args.out_dir, "Output directory")->required();
  train_cmd->add_option("--threads", train_args.threads, "Worker cap (0 = all cores)");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval_cmd->add_option("--config", eval_args.config, "Run config file")->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--out", eval_args.out_dir, "Output directory")->required();
  eval_cmd->add_option("--split", eval_args.split, "train | val | test (default test)");
  eval_cmd->add_option("--mode", eval_args.mode, "surrogate | hard | both (default both)");
  eval_cmd->add_option("--corrupt", eval_args.corrupt, "Event-drop probabilities")->delimiter(',');
  eval_cmd->add_option("--threads", eval_args.threads, "Worker cap (0 = all cores)");

  EvalArgs corrupt_args;
  auto* corrupt_cmd =
      app.add_subcommand("corrupt-eval", "Event-drop robustness sweep (eval --corrupt)");
  corrupt_cmd->add_option("--config", corrupt_args.config, "Run config file")->required();
  corrupt_cmd->add_option("--checkpoint", corrupt_args.checkpoint, "Checkpoint file")->required();
  corrupt_cmd->add_option("--out", corrupt_args.out_dir, "Output directory")->required();
  corrupt_cmd->add_option("--split", corrupt_args.split, "train | val | test (default test)");
  corrupt_cmd->add_option("--mode", corrupt_args.mode, "surrogate | hard (default hard)");
  corrupt_cmd->add_option("--corrupt", corrupt_args.corrupt, "Event-drop probabilities")
      ->delimiter(',');
  corrupt_cmd->add_option("--threads", corrupt_args.threads, "Worker cap (0 = all cores)");

  HwSimArgs hw_args;
  double hw_reference = -1.0;
  auto* hw_cmd = app.add_subcommand("hw-sim", "Hardware-aware fixed-point inference");
  hw_cmd->add_option("--config", hw_args.config, "Run config file")->required();
  hw_cmd->add_option("--checkpoint", hw_args.checkpoint, "Checkpoint file")->required();
  hw_cmd->add_option("--out", hw_args.out_dir, "Output directory")->required();
  hw_cmd->add_option("--profile", hw_args.profile,
                     "loihi_like | aggressive | path to a custom profile file");
  hw_cmd->add_option("--reference", hw_reference, "Reference kSynOps for the ops ratio");
  hw_cmd->add_option("--threads", hw_args.threads, "Worker cap (0 = all cores)");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep-rho", "Train over the configured rho grid and seeds");
  sweep_cmd->add_option("--config", sweep_args.config, "Run config file")->required();
  sweep_cmd->add_option("--out", sweep_args.out_dir, "Output directory")->required();
  sweep_cmd->add_option("--threads", sweep_args.threads, "Worker cap (0 = all cores)");

  DiagnoseArgs diag_args;
  auto* diag_cmd = app.add_subcommand("diagnose", "Theory diagnostics for a checkpoint");
  diag_cmd->add_option("--config", diag_args.config, "Run config file")->required();
  diag_cmd->add_option("--checkpoint", diag_args.checkpoint, "Checkpoint file")->required();
  diag_cmd->add_option("--out", diag_args.out_dir, "Output directory")->required();
  diag_cmd->add_option("--what", diag_args.what, "gamma | lipschitz | margins | samband")
      ->required();
  diag_cmd->add_option("--split", diag_args.split, "train | val | test (default val)");
  diag_cmd->add_option("--threads", diag_args.threads, "Worker cap (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*train_cmd) return cmd_train(train_args);
  if (*eval_cmd) return cmd_eval(eval_args);
  if (*corrupt_cmd) {
    if (corrupt_args.corrupt.empty()) corrupt_args.corrupt = {0.0, 0.1, 0.2, 0.3, 0.4};
    if (corrupt_args.mode == "both") corrupt_args.mode = "hard";
    return cmd_eval(corrupt_args);
  }
  if (*hw_cmd) {
    if (hw_reference > 0.0) hw_args.reference_ksynops = hw_reference;
    return cmd_hwsim(hw_args);
  }
  if (*sweep_cmd) return cmd_sweep(sweep_args);
  if (*diag_cmd) return cmd_diagnose(diag_args);
  return 2;
}

}  // namespace sast::cli
