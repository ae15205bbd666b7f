#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sast/event_data.hpp"
#include "sast/network.hpp"
#include "sast/optim.hpp"

namespace sast {

struct EvalResult {
  double acc_surrogate = 0.0;
  double acc_hard = 0.0;
  double delta_transfer = 0.0;  // acc_surrogate - acc_hard, may be negative
};

/// Fraction of samples whose argmax logit equals the label; argmax ties go
/// to the lowest class index. Hard mode is the swap-only evaluation.
double evaluate(const NetworkParams& params, const LabeledDataset& ds, Mode mode, int threads = 1);

int predicted_class(const Vec& logits);

EvalResult transfer_gap(const NetworkParams& params, const LabeledDataset& ds, int threads = 1);

struct CorruptionRow {
  double p = 0.0;
  double accuracy = 0.0;
};

/// Event-drop sweep: corruption happens on raw event streams which are then
/// re-binned. Per-sample drop seeds are seed ^ sample_index.
std::vector<CorruptionRow> corruption_sweep(const NetworkParams& params, const EventDataset& events,
                                            int steps, const std::vector<double>& grid,
                                            std::uint64_t seed, Mode mode, int threads = 1);

struct ComputeMatchedRow {
  std::string method;
  int epochs_trained = 0;
  int best_epoch = -1;
  long grad_evals = 0;
  double test_surrogate = 0.0;
  double test_hard = 0.0;
  double delta_transfer = 0.0;
};

struct ComputeMatchedReport {
  ComputeMatchedRow baseline;
  ComputeMatchedRow sast;
  bool budget_matched = false;  // baseline gradient evaluations >= SAST's
  std::string note;
};

/// Compares validation-selected checkpoints on held-out data under a
/// gradient-evaluation budget (the countable stand-in for wall-clock
/// matching). A budget mismatch is flagged, not fatal.
ComputeMatchedReport compute_matched_report(const TrainRecord& baseline_record,
                                            const NetworkParams& baseline_best,
                                            const TrainRecord& sast_record,
                                            const NetworkParams& sast_best,
                                            const LabeledDataset& test_set, int threads = 1);

}  // namespace sast
