#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sast/event_data.hpp"
#include "sast/types.hpp"

namespace sast {

enum class SurrogateKind {
  Arctan,  // sigma(z) = 1/2 + atan(k z) / pi
  Step,    // exact Heaviside; makes surrogate mode coincide with hard mode (tests, debugging)
};

struct SurrogateConfig {
  SurrogateKind kind = SurrogateKind::Arctan;
  double slope = 25.0;
};

double surrogate_value(double z, const SurrogateConfig& cfg);
double surrogate_deriv(double z, const SurrogateConfig& cfg);

struct LIFLayerParams {
  Mat weight;     // out_dim x in_dim
  Vec bias;       // out_dim
  Vec threshold;  // out_dim, positive; fixed, not trained

  Eigen::Index out_dim() const { return weight.rows(); }
  Eigen::Index in_dim() const { return weight.cols(); }
};

struct NetworkParams {
  std::vector<LIFLayerParams> layers;
  Mat readout_weight;  // classes x last hidden dim
  Vec readout_bias;
  double leak = 0.5;  // network-global membrane decay, in (0, 1)
  SurrogateConfig surrogate;

  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  Eigen::Index num_classes() const { return readout_weight.rows(); }
  std::vector<int> dims() const;
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero, constant thresholds.
/// dims = [input, hidden..., classes] with at least one hidden layer.
NetworkParams init_network(const std::vector<int>& dims, double leak, double threshold,
                           const SurrogateConfig& surrogate, std::uint64_t seed);

/// Weights and biases only; thresholds are stored constants, counted apart.
std::size_t learnable_param_count(const NetworkParams& params);
std::size_t threshold_count(const NetworkParams& params);

enum class Mode { Surrogate, Hard };

struct NetworkState {
  std::vector<Vec> membrane;     // u per layer
  std::vector<Vec> prev_spikes;  // s from the previous step, per layer
};

NetworkState fresh_state(const NetworkParams& params);

/// Everything one unrolled pass produced, enough for exact BPTT.
struct ForwardTrace {
  Mode mode = Mode::Surrogate;
  Mat frames;                   // T x D input
  std::vector<Mat> membrane;    // per layer: T x out_dim
  std::vector<Mat> spikes;      // per layer: T x out_dim
  std::vector<Vec> thresholds;  // per layer copy, for margin readouts
  Vec rate;                     // mean spike vector of the top layer
  Vec logits;

  int steps() const { return static_cast<int>(frames.rows()); }
};

/// One membrane update with the delayed-reset order: the reset term uses the
/// previous step's spikes, then spikes are computed from the new membrane.
/// Hard mode fires at u - theta >= 0 (boundary included).
std::pair<Vec, Vec> step_layer(const Vec& membrane_prev, const Vec& spikes_prev, const Vec& input,
                               const LIFLayerParams& layer, double leak,
                               const SurrogateConfig& surrogate, Mode mode);

/// Unrolls the network over all steps from a fresh zero state. Layer l at
/// step t consumes layer l-1's step-t spikes; logits = W_out * mean spike
/// rate + b_out. Hard mode differs only in the spike nonlinearity.
ForwardTrace forward(const NetworkParams& params, const FrameTensor& frames, Mode mode);

/// All membrane margins u - theta, flattened layer-major then step then neuron.
std::vector<double> membrane_margins(const ForwardTrace& trace);

/// Fixed parameter ordering used everywhere a flat view is needed:
/// per layer weight (column-major), bias; then readout weight, readout bias.
Vec flatten_params(const NetworkParams& params);
void unflatten_params(const Vec& flat, NetworkParams& params);

/// Versioned binary checkpoint; floats round-trip bit-exactly.
void save_checkpoint(const std::string& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::string& path);

}  // namespace sast
