#pragma once

#include <utility>
#include <vector>

#include "sast/network.hpp"
#include "sast/types.hpp"

namespace sast {

struct LayerGradient {
  Mat weight;
  Vec bias;
};

/// Gradient of the surrogate objective w.r.t. all learnable parameters.
/// No threshold block: thresholds are fixed. The flat view uses the same
/// ordering as flatten_params.
struct Gradient {
  std::vector<LayerGradient> layers;
  Mat readout_weight;
  Vec readout_bias;

  static Gradient zeros_like(const NetworkParams& params);

  double squared_norm() const;
  double norm() const;
  Vec flatten() const;

  void scale(double a);
  /// this += a * other
  void axpy(double a, const Gradient& other);
};

/// params += scale * direction (used for SAM perturbations and updates).
void apply_direction(NetworkParams& params, const Gradient& direction, double scale);

struct LossValue {
  double value = 0.0;
  std::vector<double> per_sample;
};

/// -log softmax(logits)[label], computed with the max-shifted log-sum-exp.
double cross_entropy(const Vec& logits, int label);

/// d loss / d logits = softmax(logits) - onehot(label).
Vec cross_entropy_grad(const Vec& logits, int label);

/// Reverse pass through the unrolled dynamics given the adjoint of the
/// logits. Propagates both recurrent paths: the leak (d u_t / d u_{t-1} =
/// alpha) and the delayed reset (d u_t / d s_{t-1} = -theta).
Gradient backward_from_dlogits(const ForwardTrace& trace, const NetworkParams& params,
                               const Vec& dlogits);

/// Loss and exact gradient of cross_entropy(forward(params, frames), label).
/// Rejects hard-mode traces: the step nonlinearity has no usable gradient.
std::pair<double, Gradient> backward(const ForwardTrace& trace, const NetworkParams& params,
                                     int label);

struct SampleView {
  const FrameTensor* frames = nullptr;
  int label = 0;
};

using Batch = std::vector<SampleView>;

Batch batch_from(const LabeledDataset& ds, const std::vector<int>& indices);
Batch batch_all(const LabeledDataset& ds);

/// Mean loss and gradient over the batch; per-sample passes may run on
/// several threads, the reduction is a fixed-order fold over sample indices.
std::pair<LossValue, Gradient> batch_gradient(const NetworkParams& params, const Batch& batch,
                                              int threads = 1);

}  // namespace sast
