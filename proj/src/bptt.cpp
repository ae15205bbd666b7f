#include "sast/bptt.hpp"

#include <cmath>

#include "sast/parallel.hpp"

namespace sast {

Gradient Gradient::zeros_like(const NetworkParams& params) {
  Gradient g;
  g.layers.reserve(params.layers.size());
  for (const auto& layer : params.layers) {
    g.layers.push_back({Mat::Zero(layer.weight.rows(), layer.weight.cols()),
                        Vec::Zero(layer.bias.size())});
  }
  g.readout_weight = Mat::Zero(params.readout_weight.rows(), params.readout_weight.cols());
  g.readout_bias = Vec::Zero(params.readout_bias.size());
  return g;
}

double Gradient::squared_norm() const {
  double total = 0.0;
  for (const auto& layer : layers) {
    total += layer.weight.squaredNorm() + layer.bias.squaredNorm();
  }
  total += readout_weight.squaredNorm() + readout_bias.squaredNorm();
  return total;
}

double Gradient::norm() const { return std::sqrt(squared_norm()); }

Vec Gradient::flatten() const {
  Eigen::Index total = readout_weight.size() + readout_bias.size();
  for (const auto& layer : layers) total += layer.weight.size() + layer.bias.size();
  Vec flat(total);
  Eigen::Index at = 0;
  auto put = [&](const auto& block) {
    flat.segment(at, block.size()) = Eigen::Map<const Vec>(block.data(), block.size());
    at += block.size();
  };
  for (const auto& layer : layers) {
    put(layer.weight);
    put(layer.bias);
  }
  put(readout_weight);
  put(readout_bias);
  return flat;
}

void Gradient::scale(double a) {
  for (auto& layer : layers) {
    layer.weight *= a;
    layer.bias *= a;
  }
  readout_weight *= a;
  readout_bias *= a;
}

void Gradient::axpy(double a, const Gradient& other) {
  if (layers.size() != other.layers.size()) throw ShapeError("gradient axpy: layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight.noalias() += a * other.layers[l].weight;
    layers[l].bias.noalias() += a * other.layers[l].bias;
  }
  readout_weight.noalias() += a * other.readout_weight;
  readout_bias.noalias() += a * other.readout_bias;
}

void apply_direction(NetworkParams& params, const Gradient& direction, double scale) {
  if (params.layers.size() != direction.layers.size()) {
    throw ShapeError("apply_direction: layer count mismatch");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    params.layers[l].weight.noalias() += scale * direction.layers[l].weight;
    params.layers[l].bias.noalias() += scale * direction.layers[l].bias;
  }
  params.readout_weight.noalias() += scale * direction.readout_weight;
  params.readout_bias.noalias() += scale * direction.readout_bias;
}

double cross_entropy(const Vec& logits, int label) {
  if (label < 0 || label >= logits.size()) {
    throw std::invalid_argument("cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(logits.size()) + " classes");
  }
  const double peak = logits.maxCoeff();
  const double lse = std::log((logits.array() - peak).exp().sum()) + peak;
  return lse - logits[label];
}

Vec cross_entropy_grad(const Vec& logits, int label) {
  if (label < 0 || label >= logits.size()) {
    throw std::invalid_argument("cross_entropy_grad: label " + std::to_string(label) +
                                " out of range for " + std::to_string(logits.size()) + " classes");
  }
  const double peak = logits.maxCoeff();
  Vec soft = (logits.array() - peak).exp();
  soft /= soft.sum();
  soft[label] -= 1.0;
  return soft;
}

Gradient backward_from_dlogits(const ForwardTrace& trace, const NetworkParams& params,
                               const Vec& dlogits) {
  if (trace.mode != Mode::Surrogate) {
    throw std::invalid_argument("backward: trace was recorded in hard mode; "
                                "gradients require a surrogate-mode trace");
  }
  if (dlogits.size() != params.num_classes()) {
    throw ShapeError("backward: dlogits size does not match class count");
  }
  const std::size_t depth = params.layers.size();
  if (trace.membrane.size() != depth) {
    throw ShapeError("backward: trace depth does not match network depth");
  }
  const int steps = trace.steps();

  Gradient grad = Gradient::zeros_like(params);
  grad.readout_weight.noalias() = dlogits * trace.rate.transpose();
  grad.readout_bias = dlogits;

  // Adjoint of the top layer's mean spike rate, shared by every step.
  const Vec rate_adjoint = params.readout_weight.transpose() * dlogits / static_cast<double>(steps);

  std::vector<Vec> membrane_adjoint_next(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    membrane_adjoint_next[l] = Vec::Zero(params.layers[l].out_dim());
  }

  std::vector<Vec> membrane_adjoint(depth);
  for (int t = steps - 1; t >= 0; --t) {
    for (int l = static_cast<int>(depth) - 1; l >= 0; --l) {
      const auto& layer = params.layers[l];
      Vec spike_adjoint = static_cast<std::size_t>(l) + 1 == depth
                              ? rate_adjoint
                              : Vec(params.layers[l + 1].weight.transpose() * membrane_adjoint[l + 1]);
      // Delayed reset: spikes at t enter step t+1 as -theta (.) s_t.
      spike_adjoint.noalias() -= layer.threshold.cwiseProduct(membrane_adjoint_next[l]);

      Vec offset = trace.membrane[l].row(t).transpose() - layer.threshold;
      for (Eigen::Index i = 0; i < offset.size(); ++i) {
        offset[i] = surrogate_deriv(offset[i], params.surrogate);
      }
      membrane_adjoint[l] = spike_adjoint.cwiseProduct(offset);
      membrane_adjoint[l].noalias() += params.leak * membrane_adjoint_next[l];

      const auto input = l == 0 ? trace.frames.row(t) : trace.spikes[l - 1].row(t);
      grad.layers[l].weight.noalias() += membrane_adjoint[l] * input;
      grad.layers[l].bias.noalias() += membrane_adjoint[l];
    }
    for (std::size_t l = 0; l < depth; ++l) membrane_adjoint_next[l] = membrane_adjoint[l];
  }
  return grad;
}

std::pair<double, Gradient> backward(const ForwardTrace& trace, const NetworkParams& params,
                                     int label) {
  const double loss = cross_entropy(trace.logits, label);
  Gradient grad = backward_from_dlogits(trace, params, cross_entropy_grad(trace.logits, label));
  return {loss, std::move(grad)};
}

Batch batch_from(const LabeledDataset& ds, const std::vector<int>& indices) {
  Batch batch;
  batch.reserve(indices.size());
  for (const int i : indices) {
    batch.push_back({&ds.frames.at(i), ds.labels.at(i)});
  }
  return batch;
}

Batch batch_all(const LabeledDataset& ds) {
  Batch batch;
  batch.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    batch.push_back({&ds.frames[i], ds.labels[i]});
  }
  return batch;
}

std::pair<LossValue, Gradient> batch_gradient(const NetworkParams& params, const Batch& batch,
                                              int threads) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: batch is empty");

  std::vector<Gradient> per_sample(batch.size());
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    const ForwardTrace trace = forward(params, *batch[i].frames, Mode::Surrogate);
    auto [loss, grad] = backward(trace, params, batch[i].label);
    losses[i] = loss;
    per_sample[i] = std::move(grad);
  });

  Gradient total = std::move(per_sample[0]);
  for (std::size_t i = 1; i < per_sample.size(); ++i) total.axpy(1.0, per_sample[i]);
  const double inv = 1.0 / static_cast<double>(batch.size());
  total.scale(inv);

  LossValue loss;
  loss.per_sample = std::move(losses);
  double sum = 0.0;
  for (const double v : loss.per_sample) sum += v;
  loss.value = sum * inv;
  return {std::move(loss), std::move(total)};
}

}  // namespace sast
