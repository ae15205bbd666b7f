#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sast/bptt.hpp"
#include "sast/network.hpp"

namespace sast {

struct SAMConfig {
  double rho = 0.0;     // ascent perturbation radius; 0 degenerates to a plain step
  double delta = 1e-12; // stabilization constant added to the gradient norm
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  Gradient first_moment;
  Gradient second_moment;
  long step_count = 0;
  AdamConfig adam;
  double current_lr = 1e-3;

  static OptimizerState create(const NetworkParams& params, const AdamConfig& adam);
};

/// epsilon = rho * g / (||g||_2 + delta); zero gradient maps to zero.
Gradient ascent_perturbation(const Gradient& g, const SAMConfig& cfg);

/// Bias-corrected Adam step at opt.current_lr.
void adam_update(NetworkParams& params, OptimizerState& opt, const Gradient& g);

/// Cosine annealing: lr(epoch) = base * (1 + cos(pi * epoch / total)) / 2.
double cosine_lr(double base_lr, int epoch, int total_epochs);

struct StepRow {
  double loss = 0.0;       // surrogate loss at w on the first batch seen
  double grad_norm = 0.0;  // ||g||_2 at w
  int grad_evals = 0;      // exactly 2 for a SAM step, 1 for a plain step
};

struct EpochRow {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  double mean_grad_norm = 0.0;
  double val_surrogate_acc = 0.0;
  double val_hard_acc = 0.0;
  double wall_s = 0.0;  // excluded from determinism comparisons
  long grad_evals_cum = 0;
};

struct TrainRecord {
  std::string method;
  double rho = 0.0;
  std::vector<StepRow> steps;
  std::vector<EpochRow> epochs;
  long total_grad_evals = 0;
  int best_epoch = -1;
  double best_val_hard_acc = 0.0;
  double best_val_surrogate_acc = 0.0;
  int dropped_tail_batches = 0;
};

/// Two-pass step: gradient g at w on B, ascent point w + eps, fresh-state
/// gradient g' at w + eps on the independent batch B', Adam update of w
/// (never of w + eps) using g'. Counts exactly 2 gradient evaluations.
StepRow sast_step(NetworkParams& params, OptimizerState& opt, const SAMConfig& cfg, const Batch& batch,
                  const Batch& batch_prime, int threads = 1);

/// Single-pass step: gradient at w, Adam update. One gradient evaluation.
StepRow baseline_step(NetworkParams& params, OptimizerState& opt, const Batch& batch,
                      int threads = 1);

enum class Method { Baseline, Sast };

const char* method_name(Method m);

struct TrainOptions {
  std::vector<int> dims;  // [input, hidden..., classes]
  double leak = 0.5;
  double threshold = 1.0;
  SurrogateConfig surrogate;
  Method method = Method::Baseline;
  SAMConfig sam;
  AdamConfig adam;
  int epochs = 1;
  int batch_size = 32;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct TrainResult {
  NetworkParams best;         // highest validation hard-spike accuracy, earliest epoch on ties
  NetworkParams final_params;
  TrainRecord record;
};

/// Epoch loop with a seeded per-epoch reshuffle. SAM steps pair each batch
/// with the next one in the shuffle as B'; the validation split is evaluated
/// in both modes after every epoch. Test data never enters here.
TrainResult train(const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainOptions& options);

struct RhoSweepRow {
  double rho = 0.0;
  int runs = 0;
  double mean_val_hard = 0.0;
  double std_val_hard = 0.0;
  double mean_val_surrogate = 0.0;
  double std_val_surrogate = 0.0;
  double mean_delta_val = 0.0;
  std::vector<double> per_seed_hard;
  std::vector<double> per_seed_surrogate;
  std::vector<NetworkParams> checkpoints;  // per-seed validation-selected parameters
};

struct RhoSweepResult {
  std::vector<RhoSweepRow> rows;
  double best_rho = 0.0;  // highest mean validation hard accuracy, first in grid on ties
};

/// One train() per (rho, seed); selection is validation-only.
RhoSweepResult sweep_rho(const LabeledDataset& train_set, const LabeledDataset& val_set,
                         const std::vector<double>& grid, const TrainOptions& base,
                         const std::vector<std::uint64_t>& seeds);

double mean_of(const std::vector<double>& v);
/// Population standard deviation (divide by n).
double population_std(const std::vector<double>& v);

}  // namespace sast
