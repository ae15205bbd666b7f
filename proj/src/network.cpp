#include "sast/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "sast/rng.hpp"

namespace sast {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_layer_shapes(const NetworkParams& params) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    if (layer.bias.size() != layer.out_dim() || layer.threshold.size() != layer.out_dim()) {
      throw ShapeError("layer " + std::to_string(l) + ": bias/threshold size mismatch");
    }
    if (l > 0 && layer.in_dim() != params.layers[l - 1].out_dim()) {
      throw ShapeError("layer " + std::to_string(l) + ": input dim does not chain");
    }
  }
  if (params.readout_weight.cols() != params.layers.back().out_dim() ||
      params.readout_bias.size() != params.readout_weight.rows()) {
    throw ShapeError("readout dimensions do not match the last layer");
  }
}

}  // namespace

double surrogate_value(double z, const SurrogateConfig& cfg) {
  switch (cfg.kind) {
    case SurrogateKind::Arctan:
      return 0.5 + std::atan(cfg.slope * z) / kPi;
    case SurrogateKind::Step:
      return z >= 0.0 ? 1.0 : 0.0;
  }
  throw std::invalid_argument("unknown surrogate kind");
}

double surrogate_deriv(double z, const SurrogateConfig& cfg) {
  switch (cfg.kind) {
    case SurrogateKind::Arctan: {
      const double kz = cfg.slope * z;
      return (cfg.slope / kPi) / (1.0 + kz * kz);
    }
    case SurrogateKind::Step:
      return 0.0;
  }
  throw std::invalid_argument("unknown surrogate kind");
}

std::vector<int> NetworkParams::dims() const {
  std::vector<int> d;
  d.push_back(static_cast<int>(input_dim()));
  for (const auto& layer : layers) d.push_back(static_cast<int>(layer.out_dim()));
  d.push_back(static_cast<int>(num_classes()));
  return d;
}

NetworkParams init_network(const std::vector<int>& dims, double leak, double threshold,
                           const SurrogateConfig& surrogate, std::uint64_t seed) {
  if (dims.size() < 3) {
    throw std::invalid_argument("init_network: dims must be [input, hidden..., classes]");
  }
  for (const int d : dims) {
    if (d < 1) throw std::invalid_argument("init_network: all dims must be positive");
  }
  if (!(leak > 0.0 && leak < 1.0)) {
    throw std::invalid_argument("init_network: leak must lie in (0, 1)");
  }
  if (!(threshold > 0.0)) throw std::invalid_argument("init_network: threshold must be positive");
  if (!(surrogate.slope > 0.0)) {
    throw std::invalid_argument("init_network: surrogate slope must be positive");
  }

  Rng rng = stream_rng(seed, Stream::Init);
  auto uniform_matrix = [&rng](Eigen::Index rows, Eigen::Index cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) {
        m(i, j) = rng.uniform(-bound, bound);
      }
    }
    return m;
  };

  NetworkParams params;
  params.leak = leak;
  params.surrogate = surrogate;
  const std::size_t hidden_count = dims.size() - 2;
  params.layers.reserve(hidden_count);
  for (std::size_t l = 0; l < hidden_count; ++l) {
    LIFLayerParams layer;
    layer.weight = uniform_matrix(dims[l + 1], dims[l]);
    layer.bias = Vec::Zero(dims[l + 1]);
    layer.threshold = Vec::Constant(dims[l + 1], threshold);
    params.layers.push_back(std::move(layer));
  }
  params.readout_weight = uniform_matrix(dims.back(), dims[dims.size() - 2]);
  params.readout_bias = Vec::Zero(dims.back());
  check_layer_shapes(params);
  return params;
}

std::size_t learnable_param_count(const NetworkParams& params) {
  std::size_t n = 0;
  for (const auto& layer : params.layers) {
    n += static_cast<std::size_t>(layer.weight.size()) + static_cast<std::size_t>(layer.bias.size());
  }
  n += static_cast<std::size_t>(params.readout_weight.size());
  n += static_cast<std::size_t>(params.readout_bias.size());
  return n;
}

std::size_t threshold_count(const NetworkParams& params) {
  std::size_t n = 0;
  for (const auto& layer : params.layers) n += static_cast<std::size_t>(layer.threshold.size());
  return n;
}

NetworkState fresh_state(const NetworkParams& params) {
  NetworkState state;
  state.membrane.reserve(params.layers.size());
  state.prev_spikes.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    state.membrane.push_back(Vec::Zero(layer.out_dim()));
    state.prev_spikes.push_back(Vec::Zero(layer.out_dim()));
  }
  return state;
}

std::pair<Vec, Vec> step_layer(const Vec& membrane_prev, const Vec& spikes_prev, const Vec& input,
                               const LIFLayerParams& layer, double leak,
                               const SurrogateConfig& surrogate, Mode mode) {
  if (input.size() != layer.in_dim()) {
    throw ShapeError("step_layer: input size " + std::to_string(input.size()) +
                     " does not match layer in_dim " + std::to_string(layer.in_dim()));
  }
  if (membrane_prev.size() != layer.out_dim() || spikes_prev.size() != layer.out_dim()) {
    throw ShapeError("step_layer: state size does not match layer out_dim");
  }
  Vec membrane = leak * membrane_prev + layer.bias - layer.threshold.cwiseProduct(spikes_prev);
  membrane.noalias() += layer.weight * input;
  Vec spikes(layer.out_dim());
  const Vec offset = membrane - layer.threshold;
  if (mode == Mode::Surrogate) {
    for (Eigen::Index i = 0; i < offset.size(); ++i) {
      spikes[i] = surrogate_value(offset[i], surrogate);
    }
  } else {
    for (Eigen::Index i = 0; i < offset.size(); ++i) {
      spikes[i] = offset[i] >= 0.0 ? 1.0 : 0.0;
    }
  }
  return {std::move(membrane), std::move(spikes)};
}

ForwardTrace forward(const NetworkParams& params, const FrameTensor& frames, Mode mode) {
  check_layer_shapes(params);
  if (frames.cols() != params.input_dim()) {
    throw ShapeError("forward: frame dim " + std::to_string(frames.cols()) +
                     " does not match network input dim " + std::to_string(params.input_dim()));
  }
  const int steps = static_cast<int>(frames.rows());
  if (steps < 1) throw ShapeError("forward: need at least one time step");

  ForwardTrace trace;
  trace.mode = mode;
  trace.frames = frames;
  const std::size_t depth = params.layers.size();
  trace.membrane.reserve(depth);
  trace.spikes.reserve(depth);
  trace.thresholds.reserve(depth);
  for (const auto& layer : params.layers) {
    trace.membrane.emplace_back(steps, layer.out_dim());
    trace.spikes.emplace_back(steps, layer.out_dim());
    trace.thresholds.push_back(layer.threshold);
  }

  NetworkState state = fresh_state(params);
  for (int t = 0; t < steps; ++t) {
    Vec input = frames.row(t).transpose();
    for (std::size_t l = 0; l < depth; ++l) {
      auto [membrane, spikes] = step_layer(state.membrane[l], state.prev_spikes[l], input,
                                           params.layers[l], params.leak, params.surrogate, mode);
      trace.membrane[l].row(t) = membrane.transpose();
      trace.spikes[l].row(t) = spikes.transpose();
      state.membrane[l] = std::move(membrane);
      input = spikes;
      state.prev_spikes[l] = std::move(spikes);
    }
  }

  trace.rate = trace.spikes.back().colwise().mean().transpose();
  trace.logits = params.readout_weight * trace.rate + params.readout_bias;
  return trace;
}

std::vector<double> membrane_margins(const ForwardTrace& trace) {
  std::vector<double> margins;
  std::size_t total = 0;
  for (const auto& m : trace.membrane) total += static_cast<std::size_t>(m.size());
  margins.reserve(total);
  for (std::size_t l = 0; l < trace.membrane.size(); ++l) {
    const Mat& membrane = trace.membrane[l];
    const Vec& threshold = trace.thresholds[l];
    for (Eigen::Index t = 0; t < membrane.rows(); ++t) {
      for (Eigen::Index n = 0; n < membrane.cols(); ++n) {
        margins.push_back(membrane(t, n) - threshold[n]);
      }
    }
  }
  return margins;
}

Vec flatten_params(const NetworkParams& params) {
  std::size_t total = learnable_param_count(params);
  Vec flat(static_cast<Eigen::Index>(total));
  Eigen::Index at = 0;
  auto put = [&flat, &at](const double* data, Eigen::Index n) {
    std::memcpy(flat.data() + at, data, sizeof(double) * static_cast<std::size_t>(n));
    at += n;
  };
  for (const auto& layer : params.layers) {
    put(layer.weight.data(), layer.weight.size());
    put(layer.bias.data(), layer.bias.size());
  }
  put(params.readout_weight.data(), params.readout_weight.size());
  put(params.readout_bias.data(), params.readout_bias.size());
  return flat;
}

void unflatten_params(const Vec& flat, NetworkParams& params) {
  if (flat.size() != static_cast<Eigen::Index>(learnable_param_count(params))) {
    throw ShapeError("unflatten_params: flat size does not match parameter count");
  }
  Eigen::Index at = 0;
  auto take = [&flat, &at](double* data, Eigen::Index n) {
    std::memcpy(data, flat.data() + at, sizeof(double) * static_cast<std::size_t>(n));
    at += n;
  };
  for (auto& layer : params.layers) {
    take(layer.weight.data(), layer.weight.size());
    take(layer.bias.data(), layer.bias.size());
  }
  take(params.readout_weight.data(), params.readout_weight.size());
  take(params.readout_bias.data(), params.readout_bias.size());
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'A', 'S', 'T', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_pod(std::istream& is, T& v, const std::string& path) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw MalformedFile("checkpoint truncated: " + path);
}

void write_doubles(std::ostream& os, const double* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& is, double* data, std::size_t n, const std::string& path) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw MalformedFile("checkpoint truncated: " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params) {
  check_layer_shapes(params);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod(os, kCheckpointVersion);
  write_pod(os, static_cast<std::uint32_t>(params.surrogate.kind));
  write_pod(os, params.surrogate.slope);
  write_pod(os, params.leak);
  const auto dims = params.dims();
  write_pod(os, static_cast<std::uint32_t>(dims.size()));
  for (const int d : dims) write_pod(os, static_cast<std::uint32_t>(d));
  for (const auto& layer : params.layers) {
    write_doubles(os, layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    write_doubles(os, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    write_doubles(os, layer.threshold.data(), static_cast<std::size_t>(layer.threshold.size()));
  }
  write_doubles(os, params.readout_weight.data(),
                static_cast<std::size_t>(params.readout_weight.size()));
  write_doubles(os, params.readout_bias.data(),
                static_cast<std::size_t>(params.readout_bias.size()));
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MalformedFile("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw MalformedFile("not a checkpoint file: " + path);
  }
  std::uint32_t version = 0;
  read_pod(is, version, path);
  if (version != kCheckpointVersion) {
    throw MalformedFile("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  }
  NetworkParams params;
  std::uint32_t kind = 0;
  read_pod(is, kind, path);
  if (kind > static_cast<std::uint32_t>(SurrogateKind::Step)) {
    throw MalformedFile("unknown surrogate kind in checkpoint: " + path);
  }
  params.surrogate.kind = static_cast<SurrogateKind>(kind);
  read_pod(is, params.surrogate.slope, path);
  read_pod(is, params.leak, path);
  std::uint32_t dim_count = 0;
  read_pod(is, dim_count, path);
  if (dim_count < 3 || dim_count > 64) {
    throw MalformedFile("implausible layer count in checkpoint: " + path);
  }
  std::vector<int> dims(dim_count);
  for (auto& d : dims) {
    std::uint32_t v = 0;
    read_pod(is, v, path);
    if (v == 0 || v > (1u << 24)) throw MalformedFile("implausible dimension in checkpoint: " + path);
    d = static_cast<int>(v);
  }
  const std::size_t hidden_count = dims.size() - 2;
  params.layers.resize(hidden_count);
  for (std::size_t l = 0; l < hidden_count; ++l) {
    auto& layer = params.layers[l];
    layer.weight.resize(dims[l + 1], dims[l]);
    layer.bias.resize(dims[l + 1]);
    layer.threshold.resize(dims[l + 1]);
    read_doubles(is, layer.weight.data(), static_cast<std::size_t>(layer.weight.size()), path);
    read_doubles(is, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()), path);
    read_doubles(is, layer.threshold.data(), static_cast<std::size_t>(layer.threshold.size()), path);
  }
  params.readout_weight.resize(dims.back(), dims[dims.size() - 2]);
  params.readout_bias.resize(dims.back());
  read_doubles(is, params.readout_weight.data(),
               static_cast<std::size_t>(params.readout_weight.size()), path);
  read_doubles(is, params.readout_bias.data(),
               static_cast<std::size_t>(params.readout_bias.size()), path);
  check_layer_shapes(params);
  return params;
}

}  // namespace sast
