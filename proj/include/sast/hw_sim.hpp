#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sast/event_data.hpp"
#include "sast/network.hpp"

namespace sast {

/// Signed Qm.n fixed point: step 2^-n, range [-2^(m-1), 2^(m-1) - 2^-n].
/// All conversions round half to even; arithmetic saturates, never wraps.
struct FixedPointFormat {
  int integer_bits = 8;   // m, including the sign bit
  int fraction_bits = 8;  // n

  std::int64_t raw_min() const {
    return -(std::int64_t{1} << (integer_bits + fraction_bits - 1));
  }
  std::int64_t raw_max() const {
    return (std::int64_t{1} << (integer_bits + fraction_bits - 1)) - 1;
  }
  double step() const { return std::ldexp(1.0, -fraction_bits); }
  double min_value() const { return static_cast<double>(raw_min()) * step(); }
  double max_value() const { return static_cast<double>(raw_max()) * step(); }

  std::int64_t saturate(std::int64_t raw) const;
  std::int64_t from_double(double x) const;
  double to_double(std::int64_t raw) const { return static_cast<double>(raw) * step(); }
  /// Fixed-point product (a * b) >> n with round-half-to-even, saturated.
  std::int64_t multiply(std::int64_t a, std::int64_t b) const;
  std::int64_t add(std::int64_t a, std::int64_t b) const { return saturate(a + b); }
};

struct QuantProfile {
  std::string name = "custom";
  int weight_bits = 8;
  FixedPointFormat membrane;
};

/// Named operating points: "loihi_like" = INT8 + Q8.8, "aggressive" = INT4 +
/// Q4.4. Anything else is looked up as a custom profile config file with
/// keys weight_bits / integer_bits / fraction_bits.
QuantProfile profile_by_name(const std::string& name_or_path);

struct QuantizedLayer {
  Eigen::MatrixXi weight_int;  // clamped to +-(2^(b-1) - 1)
  double weight_scale = 1.0;   // dequantized weight = int * scale
  std::vector<std::int64_t> bias_raw;       // membrane fixed point
  std::vector<std::int64_t> threshold_raw;  // membrane fixed point
};

struct QuantizedNetwork {
  std::vector<QuantizedLayer> layers;
  Eigen::MatrixXi readout_int;
  double readout_scale = 1.0;
  Vec readout_bias;  // readout runs in double precision
  FixedPointFormat membrane;
  int weight_bits = 8;
  std::int64_t leak_raw = 0;  // alpha in membrane fraction bits
  int input_dim = 0;
  int num_classes = 0;
  std::string profile_name;

  std::vector<int> dims() const;
};

/// Per-tensor symmetric quantization: scale = max|w| / (2^(b-1) - 1),
/// integers round-half-to-even and clamp; an all-zero tensor gets scale 1.
/// Biases and thresholds move to the membrane fixed point.
QuantizedNetwork quantize_weights(const NetworkParams& params, const QuantProfile& profile);

/// Fan-out per presynaptic neuron: the downstream in-degree (next hidden
/// layer's width, or the class count for the last hidden layer).
std::vector<Eigen::VectorXi> fanout_table(const QuantizedNetwork& qnet);

struct HwForwardResult {
  int predicted = 0;
  std::int64_t synops = 0;
  std::vector<Mat> margins;            // per layer: T x dim, dequantized u - theta
  std::vector<Eigen::MatrixXi> spikes; // per layer: T x dim, 0/1
};

/// Hard-spike inference in fixed point: leaked (post-reset) membrane plus the
/// step's synaptic drive and bias, spike at u >= theta, reset by subtraction.
/// Layer-0 inputs are the frames snapped to the membrane grid and do not
/// count toward SynOps; every hidden spike adds its fan-out.
HwForwardResult hw_forward(const QuantizedNetwork& qnet, const FrameTensor& frames);

struct HwEvalResult {
  double accuracy = 0.0;
  double mean_ksynops = 0.0;  // 1e-3 * mean SynOps per sample-sequence
  std::optional<double> ops_ratio;  // kSynOps / reference kSynOps
};

HwEvalResult hw_evaluate(const QuantizedNetwork& qnet, const LabeledDataset& ds,
                         std::optional<double> reference_ksynops = std::nullopt, int threads = 1);

/// Versioned binary export; integer tensors, scales and formats round-trip
/// bit-exactly.
void save_quantized_network(const std::string& path, const QuantizedNetwork& qnet);
QuantizedNetwork load_quantized_network(const std::string& path);

}  // namespace sast
