#pragma once

// Independent reference implementations used as test oracles. Everything here
// deliberately avoids the library's forward/backward code paths: plain loops
// over std::vector, no Eigen products.

#include <cstdint>
#include <vector>

#include "sast/bptt.hpp"
#include "sast/event_data.hpp"
#include "sast/hw_sim.hpp"
#include "sast/network.hpp"

namespace oracles {

struct NaiveTrace {
  // [layer][t][neuron]
  std::vector<std::vector<std::vector<double>>> membrane;
  std::vector<std::vector<std::vector<double>>> spikes;
  std::vector<double> logits;
};

/// Scalar triple-loop unroll of the dynamics; no matrix ops.
NaiveTrace naive_forward(const sast::NetworkParams& params, const sast::FrameTensor& frames,
                         sast::Mode mode);

/// Central finite differences of the mean cross-entropy over a batch w.r.t.
/// every flattened parameter coordinate.
sast::Vec fd_gradient(const sast::NetworkParams& params, const sast::Batch& batch, double step);

struct FdCompare {
  bool ok = true;
  double worst_rel = 0.0;  // over coordinates held to the relative tolerance
  double worst_abs = 0.0;  // over near-zero coordinates held to the absolute tolerance
  int worst_index = -1;
};

/// Mixed tolerance: coordinates with magnitude below magnitude_floor must
/// agree within abs_tol, everything else within rel_tol relative error.
FdCompare compare_gradients(const sast::Vec& analytic, const sast::Vec& numeric, double rel_tol,
                            double magnitude_floor, double abs_tol);

/// Event-count recount with plain nested loops (bin, polarity, y, x).
std::vector<std::vector<double>> brute_force_counts(const sast::EventStream& stream, int steps);

/// SynOps recount from a spike raster: every spike of layer l adds the
/// downstream in-degree walked from the quantized connectivity.
std::int64_t recount_synops(const sast::QuantizedNetwork& qnet,
                            const std::vector<Eigen::MatrixXi>& spikes);

}  // namespace oracles
