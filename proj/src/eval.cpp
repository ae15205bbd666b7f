#include "sast/eval.hpp"

#include <cmath>

#include "sast/parallel.hpp"

namespace sast {

int predicted_class(const Vec& logits) {
  int best = 0;
  for (int j = 1; j < logits.size(); ++j) {
    if (logits[j] > logits[best]) best = j;
  }
  return best;
}

double evaluate(const NetworkParams& params, const LabeledDataset& ds, Mode mode, int threads) {
  if (ds.size() == 0) throw std::invalid_argument("evaluate: dataset is empty");
  std::vector<char> correct(ds.size(), 0);
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    const ForwardTrace trace = forward(params, ds.frames[i], mode);
    correct[i] = predicted_class(trace.logits) == ds.labels[i] ? 1 : 0;
  });
  long hits = 0;
  for (const char c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

EvalResult transfer_gap(const NetworkParams& params, const LabeledDataset& ds, int threads) {
  EvalResult result;
  result.acc_surrogate = evaluate(params, ds, Mode::Surrogate, threads);
  result.acc_hard = evaluate(params, ds, Mode::Hard, threads);
  result.delta_transfer = result.acc_surrogate - result.acc_hard;
  return result;
}

std::vector<CorruptionRow> corruption_sweep(const NetworkParams& params, const EventDataset& events,
                                            int steps, const std::vector<double>& grid,
                                            std::uint64_t seed, Mode mode, int threads) {
  if (grid.empty()) throw std::invalid_argument("corruption_sweep: probability grid is empty");
  if (events.size() == 0) throw std::invalid_argument("corruption_sweep: dataset is empty");

  std::vector<CorruptionRow> rows;
  rows.reserve(grid.size());
  for (const double p : grid) {
    LabeledDataset corrupted;
    corrupted.num_classes = events.num_classes;
    corrupted.steps = steps;
    corrupted.dim = 2 * events.height * events.width;
    corrupted.labels = events.labels;
    corrupted.frames.resize(events.size());
    parallel_for(events.size(), threads, [&](std::size_t i) {
      const EventStream dropped =
          drop_events(events.streams[i], p, seed ^ static_cast<std::uint64_t>(i));
      corrupted.frames[i] = bin_events(dropped, steps);
    });
    rows.push_back({p, evaluate(params, corrupted, mode, threads)});
  }
  return rows;
}

ComputeMatchedReport compute_matched_report(const TrainRecord& baseline_record,
                                            const NetworkParams& baseline_best,
                                            const TrainRecord& sast_record,
                                            const NetworkParams& sast_best,
                                            const LabeledDataset& test_set, int threads) {
  auto make_row = [&](const TrainRecord& record, const NetworkParams& params) {
    ComputeMatchedRow row;
    row.method = record.method;
    row.epochs_trained = static_cast<int>(record.epochs.size());
    row.best_epoch = record.best_epoch;
    row.grad_evals = record.total_grad_evals;
    const EvalResult r = transfer_gap(params, test_set, threads);
    row.test_surrogate = r.acc_surrogate;
    row.test_hard = r.acc_hard;
    row.delta_transfer = r.delta_transfer;
    return row;
  };

  ComputeMatchedReport report;
  report.baseline = make_row(baseline_record, baseline_best);
  report.sast = make_row(sast_record, sast_best);
  report.budget_matched = report.baseline.grad_evals >= report.sast.grad_evals;
  if (!report.budget_matched) {
    report.note = "baseline gradient-evaluation budget (" +
                  std::to_string(report.baseline.grad_evals) +
                  ") is below the SAST budget (" + std::to_string(report.sast.grad_evals) + ")";
  }
  return report;
}

}  // namespace sast
