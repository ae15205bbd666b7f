#include "oracles.hpp"

#include <cmath>

namespace oracles {

using sast::Mode;

NaiveTrace naive_forward(const sast::NetworkParams& params, const sast::FrameTensor& frames,
                         sast::Mode mode) {
  const int steps = static_cast<int>(frames.rows());
  const std::size_t depth = params.layers.size();

  NaiveTrace trace;
  trace.membrane.resize(depth);
  trace.spikes.resize(depth);

  std::vector<std::vector<double>> membrane(depth);
  std::vector<std::vector<double>> prev_spikes(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t n = static_cast<std::size_t>(params.layers[l].out_dim());
    membrane[l].assign(n, 0.0);
    prev_spikes[l].assign(n, 0.0);
    trace.membrane[l].assign(steps, std::vector<double>(n, 0.0));
    trace.spikes[l].assign(steps, std::vector<double>(n, 0.0));
  }

  for (int t = 0; t < steps; ++t) {
    std::vector<double> input(static_cast<std::size_t>(frames.cols()));
    for (std::size_t j = 0; j < input.size(); ++j) input[j] = frames(t, static_cast<int>(j));
    for (std::size_t l = 0; l < depth; ++l) {
      const auto& layer = params.layers[l];
      const std::size_t n = membrane[l].size();
      std::vector<double> spikes(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double drive = 0.0;
        for (std::size_t j = 0; j < input.size(); ++j) {
          drive += layer.weight(static_cast<int>(i), static_cast<int>(j)) * input[j];
        }
        const double u = params.leak * membrane[l][i] + drive + layer.bias[static_cast<int>(i)] -
                         layer.threshold[static_cast<int>(i)] * prev_spikes[l][i];
        const double offset = u - layer.threshold[static_cast<int>(i)];
        const double s = mode == Mode::Surrogate
                             ? sast::surrogate_value(offset, params.surrogate)
                             : (offset >= 0.0 ? 1.0 : 0.0);
        membrane[l][i] = u;
        spikes[i] = s;
        trace.membrane[l][t][i] = u;
        trace.spikes[l][t][i] = s;
      }
      prev_spikes[l] = spikes;
      input = spikes;
    }
  }

  const std::size_t top = static_cast<std::size_t>(params.layers.back().out_dim());
  std::vector<double> rate(top, 0.0);
  for (int t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < top; ++i) rate[i] += trace.spikes[depth - 1][t][i];
  }
  for (std::size_t i = 0; i < top; ++i) rate[i] /= steps;

  trace.logits.assign(static_cast<std::size_t>(params.num_classes()), 0.0);
  for (std::size_t c = 0; c < trace.logits.size(); ++c) {
    double v = params.readout_bias[static_cast<int>(c)];
    for (std::size_t i = 0; i < top; ++i) {
      v += params.readout_weight(static_cast<int>(c), static_cast<int>(i)) * rate[i];
    }
    trace.logits[c] = v;
  }
  return trace;
}

namespace {

double batch_loss(const sast::NetworkParams& params, const sast::Batch& batch) {
  double sum = 0.0;
  for (const auto& sample : batch) {
    const sast::ForwardTrace trace = sast::forward(params, *sample.frames, Mode::Surrogate);
    sum += sast::cross_entropy(trace.logits, sample.label);
  }
  return sum / static_cast<double>(batch.size());
}

}  // namespace

sast::Vec fd_gradient(const sast::NetworkParams& params, const sast::Batch& batch, double step) {
  sast::NetworkParams scratch = params;
  sast::Vec flat = sast::flatten_params(params);
  sast::Vec grad(flat.size());
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    const double saved = flat[i];
    flat[i] = saved + step;
    sast::unflatten_params(flat, scratch);
    const double plus = batch_loss(scratch, batch);
    flat[i] = saved - step;
    sast::unflatten_params(flat, scratch);
    const double minus = batch_loss(scratch, batch);
    flat[i] = saved;
    grad[i] = (plus - minus) / (2.0 * step);
  }
  sast::unflatten_params(flat, scratch);
  return grad;
}

FdCompare compare_gradients(const sast::Vec& analytic, const sast::Vec& numeric, double rel_tol,
                            double magnitude_floor, double abs_tol) {
  FdCompare result;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double diff = std::abs(a - n);
    const double magnitude = std::max(std::abs(a), std::abs(n));
    if (magnitude < magnitude_floor) {
      if (diff > result.worst_abs) {
        result.worst_abs = diff;
        if (diff > abs_tol) result.worst_index = static_cast<int>(i);
      }
      if (diff > abs_tol) result.ok = false;
    } else {
      const double rel = diff / magnitude;
      if (rel > result.worst_rel) {
        result.worst_rel = rel;
        if (rel > rel_tol) result.worst_index = static_cast<int>(i);
      }
      if (rel > rel_tol) result.ok = false;
    }
  }
  return result;
}

std::vector<std::vector<double>> brute_force_counts(const sast::EventStream& stream, int steps) {
  const int cells = stream.width * stream.height;
  std::vector<std::vector<double>> counts(static_cast<std::size_t>(steps),
                                          std::vector<double>(2 * cells, 0.0));
  for (const sast::Event& e : stream.events) {
    long long bin = 0;
    if (stream.duration_us > 0) {
      bin = static_cast<long long>(e.timestamp_us) * steps / stream.duration_us;
      if (bin > steps - 1) bin = steps - 1;
    }
    counts[static_cast<std::size_t>(bin)]
          [static_cast<std::size_t>(e.polarity * cells + e.y * stream.width + e.x)] += 1.0;
  }
  return counts;
}

std::int64_t recount_synops(const sast::QuantizedNetwork& qnet,
                            const std::vector<Eigen::MatrixXi>& spikes) {
  std::int64_t total = 0;
  for (std::size_t l = 0; l < spikes.size(); ++l) {
    // Downstream in-degree: rows of the next weight matrix, or the class count.
    const std::int64_t fanout = l + 1 < qnet.layers.size()
                                    ? qnet.layers[l + 1].weight_int.rows()
                                    : qnet.num_classes;
    for (Eigen::Index t = 0; t < spikes[l].rows(); ++t) {
      for (Eigen::Index n = 0; n < spikes[l].cols(); ++n) {
        if (spikes[l](t, n) != 0) total += fanout;
      }
    }
  }
  return total;
}

}  // namespace oracles
