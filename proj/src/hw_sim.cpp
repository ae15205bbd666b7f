#include "sast/hw_sim.hpp"

#include <cassert>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sast/kv_file.hpp"
#include "sast/parallel.hpp"

namespace sast {

namespace {

void validate_format(const FixedPointFormat& fmt) {
  if (fmt.integer_bits < 1 || fmt.fraction_bits < 0 ||
      fmt.integer_bits + fmt.fraction_bits > 62) {
    throw std::invalid_argument("fixed-point format: need m >= 1, n >= 0, m + n <= 62");
  }
}

}  // namespace

std::int64_t FixedPointFormat::saturate(std::int64_t raw) const {
  const std::int64_t lo = raw_min();
  const std::int64_t hi = raw_max();
  return raw < lo ? lo : (raw > hi ? hi : raw);
}

std::int64_t FixedPointFormat::from_double(double x) const {
  if (!std::isfinite(x)) {
    throw std::invalid_argument("fixed-point conversion of a non-finite value");
  }
  // nearbyint under the default rounding mode is round-half-to-even.
  const double scaled = std::nearbyint(x * std::ldexp(1.0, fraction_bits));
  if (scaled >= static_cast<double>(raw_max())) return raw_max();
  if (scaled <= static_cast<double>(raw_min())) return raw_min();
  return static_cast<std::int64_t>(scaled);
}

std::int64_t FixedPointFormat::multiply(std::int64_t a, std::int64_t b) const {
  const std::int64_t product = a * b;
  if (fraction_bits == 0) return saturate(product);
  const std::int64_t floor_part = product >> fraction_bits;  // arithmetic shift
  const std::int64_t remainder = product - (floor_part << fraction_bits);
  const std::int64_t half = std::int64_t{1} << (fraction_bits - 1);
  std::int64_t rounded = floor_part;
  if (remainder > half || (remainder == half && (floor_part & 1))) rounded += 1;
  return saturate(rounded);
}

QuantProfile profile_by_name(const std::string& name_or_path) {
  QuantProfile profile;
  if (name_or_path == "loihi_like") {
    profile.name = "loihi_like";
    profile.weight_bits = 8;
    profile.membrane = {8, 8};
    return profile;
  }
  if (name_or_path == "aggressive") {
    profile.name = "aggressive";
    profile.weight_bits = 4;
    profile.membrane = {4, 4};
    return profile;
  }
  if (!std::filesystem::exists(name_or_path)) {
    throw std::invalid_argument("unknown quantization profile: " + name_or_path +
                                " (expected loihi_like, aggressive, or a profile file)");
  }
  const KvFile kv = parse_kv_file(name_or_path);
  profile.name = kv.get_string("name", "custom");
  profile.weight_bits = static_cast<int>(kv.get_int("weight_bits"));
  profile.membrane.integer_bits = static_cast<int>(kv.get_int("integer_bits"));
  profile.membrane.fraction_bits = static_cast<int>(kv.get_int("fraction_bits"));
  if (profile.weight_bits < 2 || profile.weight_bits > 32) {
    throw std::invalid_argument(name_or_path + ": weight_bits must be in [2, 32]");
  }
  validate_format(profile.membrane);
  return profile;
}

std::vector<int> QuantizedNetwork::dims() const {
  std::vector<int> d;
  d.push_back(input_dim);
  for (const auto& layer : layers) d.push_back(static_cast<int>(layer.weight_int.rows()));
  d.push_back(num_classes);
  return d;
}

namespace {

std::pair<Eigen::MatrixXi, double> quantize_tensor(const Mat& w, int bits) {
  if (!w.allFinite()) throw std::invalid_argument("quantize_weights: non-finite weights");
  const int q_max = (1 << (bits - 1)) - 1;
  const double peak = w.cwiseAbs().maxCoeff();
  const double scale = peak > 0.0 ? peak / q_max : 1.0;
  Eigen::MatrixXi ints(w.rows(), w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      const double q = std::nearbyint(w(i, j) / scale);
      ints(i, j) = static_cast<int>(std::min(std::max(q, -static_cast<double>(q_max)),
                                             static_cast<double>(q_max)));
    }
  }
  return {std::move(ints), scale};
}

}  // namespace

QuantizedNetwork quantize_weights(const NetworkParams& params, const QuantProfile& profile) {
  validate_format(profile.membrane);
  if (profile.weight_bits < 2) throw std::invalid_argument("quantize_weights: weight_bits < 2");

  QuantizedNetwork qnet;
  qnet.membrane = profile.membrane;
  qnet.weight_bits = profile.weight_bits;
  qnet.profile_name = profile.name;
  qnet.leak_raw = profile.membrane.from_double(params.leak);
  qnet.input_dim = static_cast<int>(params.input_dim());
  qnet.num_classes = static_cast<int>(params.num_classes());

  for (const auto& layer : params.layers) {
    QuantizedLayer q;
    std::tie(q.weight_int, q.weight_scale) = quantize_tensor(layer.weight, profile.weight_bits);
    q.bias_raw.reserve(layer.bias.size());
    q.threshold_raw.reserve(layer.threshold.size());
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      if (!std::isfinite(layer.bias[i]) || !std::isfinite(layer.threshold[i])) {
        throw std::invalid_argument("quantize_weights: non-finite bias or threshold");
      }
      q.bias_raw.push_back(profile.membrane.from_double(layer.bias[i]));
      q.threshold_raw.push_back(profile.membrane.from_double(layer.threshold[i]));
    }
    qnet.layers.push_back(std::move(q));
  }
  std::tie(qnet.readout_int, qnet.readout_scale) =
      quantize_tensor(params.readout_weight, profile.weight_bits);
  if (!params.readout_bias.allFinite()) {
    throw std::invalid_argument("quantize_weights: non-finite readout bias");
  }
  qnet.readout_bias = params.readout_bias;
  return qnet;
}

std::vector<Eigen::VectorXi> fanout_table(const QuantizedNetwork& qnet) {
  std::vector<Eigen::VectorXi> table;
  table.reserve(qnet.layers.size());
  for (std::size_t l = 0; l < qnet.layers.size(); ++l) {
    const int neurons = static_cast<int>(qnet.layers[l].weight_int.rows());
    const int downstream = l + 1 < qnet.layers.size()
                               ? static_cast<int>(qnet.layers[l + 1].weight_int.rows())
                               : qnet.num_classes;
    table.push_back(Eigen::VectorXi::Constant(neurons, downstream));
  }
  return table;
}

HwForwardResult hw_forward(const QuantizedNetwork& qnet, const FrameTensor& frames) {
  if (frames.cols() != qnet.input_dim) {
    throw ShapeError("hw_forward: frame dim " + std::to_string(frames.cols()) +
                     " does not match network input dim " + std::to_string(qnet.input_dim));
  }
  const int steps = static_cast<int>(frames.rows());
  const FixedPointFormat& fmt = qnet.membrane;
  const auto fanout = fanout_table(qnet);

  // Layer-0 inputs: frames snapped to the membrane grid, used as graded currents.
  Mat input_q(frames.rows(), frames.cols());
  for (Eigen::Index r = 0; r < frames.rows(); ++r) {
    for (Eigen::Index c = 0; c < frames.cols(); ++c) {
      input_q(r, c) = fmt.to_double(fmt.from_double(frames(r, c)));
    }
  }

  HwForwardResult result;
  result.margins.reserve(qnet.layers.size());
  result.spikes.reserve(qnet.layers.size());
  std::vector<std::vector<std::int64_t>> membrane(qnet.layers.size());
  for (std::size_t l = 0; l < qnet.layers.size(); ++l) {
    const auto rows = qnet.layers[l].weight_int.rows();
    membrane[l].assign(static_cast<std::size_t>(rows), 0);
    result.margins.emplace_back(steps, rows);
    result.spikes.emplace_back(steps, rows);
  }

  Vec spike_counts = Vec::Zero(qnet.layers.back().weight_int.rows());
  for (int t = 0; t < steps; ++t) {
    Vec layer_input = input_q.row(t).transpose();
    for (std::size_t l = 0; l < qnet.layers.size(); ++l) {
      const QuantizedLayer& layer = qnet.layers[l];
      // Synaptic drive accumulates in double precision and is converted to
      // the membrane grid once per step.
      const Vec drive =
          (layer.weight_int.cast<double>() * layer_input) * layer.weight_scale;
      Vec next_input = Vec::Zero(layer.weight_int.rows());
      int spikes_here = 0;
      for (Eigen::Index i = 0; i < layer.weight_int.rows(); ++i) {
        std::int64_t u = fmt.multiply(qnet.leak_raw, membrane[l][static_cast<std::size_t>(i)]);
        u = fmt.add(u, fmt.from_double(drive[i]));
        u = fmt.add(u, layer.bias_raw[static_cast<std::size_t>(i)]);
        assert(u >= fmt.raw_min() && u <= fmt.raw_max());
        const std::int64_t theta = layer.threshold_raw[static_cast<std::size_t>(i)];
        result.margins[l](t, i) = fmt.to_double(u) - fmt.to_double(theta);
        const bool spike = u >= theta;
        result.spikes[l](t, i) = spike ? 1 : 0;
        if (spike) {
          u = fmt.saturate(u - theta);
          next_input[i] = 1.0;
          ++spikes_here;
          result.synops += fanout[l][i];
        }
        membrane[l][static_cast<std::size_t>(i)] = u;
      }
      (void)spikes_here;
      if (l + 1 == qnet.layers.size()) spike_counts += next_input;
      layer_input = std::move(next_input);
    }
  }

  const Vec rate = spike_counts / static_cast<double>(steps);
  const Vec logits =
      (qnet.readout_int.cast<double>() * rate) * qnet.readout_scale + qnet.readout_bias;
  int best = 0;
  for (int j = 1; j < logits.size(); ++j) {
    if (logits[j] > logits[best]) best = j;
  }
  result.predicted = best;
  return result;
}

HwEvalResult hw_evaluate(const QuantizedNetwork& qnet, const LabeledDataset& ds,
                         std::optional<double> reference_ksynops, int threads) {
  if (ds.size() == 0) throw std::invalid_argument("hw_evaluate: dataset is empty");
  std::vector<char> correct(ds.size(), 0);
  std::vector<std::int64_t> synops(ds.size(), 0);
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    const HwForwardResult r = hw_forward(qnet, ds.frames[i]);
    correct[i] = r.predicted == ds.labels[i] ? 1 : 0;
    synops[i] = r.synops;
  });
  HwEvalResult result;
  long hits = 0;
  double synop_sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    hits += correct[i];
    synop_sum += static_cast<double>(synops[i]);
  }
  result.accuracy = static_cast<double>(hits) / static_cast<double>(ds.size());
  result.mean_ksynops = 1e-3 * synop_sum / static_cast<double>(ds.size());
  if (reference_ksynops && *reference_ksynops > 0.0) {
    result.ops_ratio = result.mean_ksynops / *reference_ksynops;
  }
  return result;
}

namespace {

constexpr char kQnetMagic[8] = {'S', 'A', 'S', 'T', 'Q', 'N', 'T', '1'};
constexpr std::uint32_t kQnetVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_pod(std::istream& is, T& v, const std::string& path) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw MalformedFile("quantized network file truncated: " + path);
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const std::string& path) {
  std::uint32_t n = 0;
  read_pod(is, n, path);
  if (n > 4096) throw MalformedFile("implausible string length: " + path);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw MalformedFile("quantized network file truncated: " + path);
  return s;
}

}  // namespace

void save_quantized_network(const std::string& path, const QuantizedNetwork& qnet) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write quantized network: " + path);
  os.write(kQnetMagic, sizeof(kQnetMagic));
  write_pod(os, kQnetVersion);
  write_string(os, qnet.profile_name);
  write_pod(os, static_cast<std::int32_t>(qnet.weight_bits));
  write_pod(os, static_cast<std::int32_t>(qnet.membrane.integer_bits));
  write_pod(os, static_cast<std::int32_t>(qnet.membrane.fraction_bits));
  write_pod(os, qnet.leak_raw);
  write_pod(os, static_cast<std::int32_t>(qnet.input_dim));
  write_pod(os, static_cast<std::int32_t>(qnet.num_classes));
  write_pod(os, static_cast<std::uint32_t>(qnet.layers.size()));
  for (const auto& layer : qnet.layers) {
    write_pod(os, static_cast<std::int32_t>(layer.weight_int.rows()));
    write_pod(os, static_cast<std::int32_t>(layer.weight_int.cols()));
    os.write(reinterpret_cast<const char*>(layer.weight_int.data()),
             static_cast<std::streamsize>(sizeof(int) * layer.weight_int.size()));
    write_pod(os, layer.weight_scale);
    os.write(reinterpret_cast<const char*>(layer.bias_raw.data()),
             static_cast<std::streamsize>(sizeof(std::int64_t) * layer.bias_raw.size()));
    os.write(reinterpret_cast<const char*>(layer.threshold_raw.data()),
             static_cast<std::streamsize>(sizeof(std::int64_t) * layer.threshold_raw.size()));
  }
  write_pod(os, static_cast<std::int32_t>(qnet.readout_int.rows()));
  write_pod(os, static_cast<std::int32_t>(qnet.readout_int.cols()));
  os.write(reinterpret_cast<const char*>(qnet.readout_int.data()),
           static_cast<std::streamsize>(sizeof(int) * qnet.readout_int.size()));
  write_pod(os, qnet.readout_scale);
  os.write(reinterpret_cast<const char*>(qnet.readout_bias.data()),
           static_cast<std::streamsize>(sizeof(double) * qnet.readout_bias.size()));
  if (!os) throw std::runtime_error("quantized network write failed: " + path);
}

QuantizedNetwork load_quantized_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MalformedFile("cannot open quantized network: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kQnetMagic, sizeof(magic)) != 0) {
    throw MalformedFile("not a quantized network file: " + path);
  }
  std::uint32_t version = 0;
  read_pod(is, version, path);
  if (version != kQnetVersion) {
    throw MalformedFile("unsupported quantized network version: " + path);
  }
  QuantizedNetwork qnet;
  qnet.profile_name = read_string(is, path);
  std::int32_t weight_bits = 0, m = 0, n = 0, input_dim = 0, classes = 0;
  read_pod(is, weight_bits, path);
  read_pod(is, m, path);
  read_pod(is, n, path);
  read_pod(is, qnet.leak_raw, path);
  read_pod(is, input_dim, path);
  read_pod(is, classes, path);
  qnet.weight_bits = weight_bits;
  qnet.membrane = {m, n};
  validate_format(qnet.membrane);
  qnet.input_dim = input_dim;
  qnet.num_classes = classes;
  std::uint32_t depth = 0;
  read_pod(is, depth, path);
  if (depth == 0 || depth > 64) throw MalformedFile("implausible depth: " + path);
  qnet.layers.resize(depth);
  for (auto& layer : qnet.layers) {
    std::int32_t rows = 0, cols = 0;
    read_pod(is, rows, path);
    read_pod(is, cols, path);
    if (rows < 1 || cols < 1 || rows > (1 << 24) || cols > (1 << 24)) {
      throw MalformedFile("implausible layer shape: " + path);
    }
    layer.weight_int.resize(rows, cols);
    is.read(reinterpret_cast<char*>(layer.weight_int.data()),
            static_cast<std::streamsize>(sizeof(int) * layer.weight_int.size()));
    read_pod(is, layer.weight_scale, path);
    layer.bias_raw.resize(static_cast<std::size_t>(rows));
    layer.threshold_raw.resize(static_cast<std::size_t>(rows));
    is.read(reinterpret_cast<char*>(layer.bias_raw.data()),
            static_cast<std::streamsize>(sizeof(std::int64_t) * layer.bias_raw.size()));
    is.read(reinterpret_cast<char*>(layer.threshold_raw.data()),
            static_cast<std::streamsize>(sizeof(std::int64_t) * layer.threshold_raw.size()));
    if (!is) throw MalformedFile("quantized network file truncated: " + path);
  }
  std::int32_t rrows = 0, rcols = 0;
  read_pod(is, rrows, path);
  read_pod(is, rcols, path);
  if (rrows < 1 || rcols < 1 || rrows > (1 << 24) || rcols > (1 << 24)) {
    throw MalformedFile("implausible readout shape: " + path);
  }
  qnet.readout_int.resize(rrows, rcols);
  is.read(reinterpret_cast<char*>(qnet.readout_int.data()),
          static_cast<std::streamsize>(sizeof(int) * qnet.readout_int.size()));
  read_pod(is, qnet.readout_scale, path);
  qnet.readout_bias.resize(rrows);
  is.read(reinterpret_cast<char*>(qnet.readout_bias.data()),
          static_cast<std::streamsize>(sizeof(double) * qnet.readout_bias.size()));
  if (!is) throw MalformedFile("quantized network file truncated: " + path);
  return qnet;
}

}  // namespace sast
