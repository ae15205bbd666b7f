#include "sast/diagnostics.hpp"

#include <cmath>

#include "sast/parallel.hpp"
#include "sast/rng.hpp"

namespace sast {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct SampleMax {
  double value = -1.0;
  ArgMaxLocation at;
};

Vec random_unit_direction(Eigen::Index n, Rng& rng) {
  Vec d(n);
  for (Eigen::Index i = 0; i < n; ++i) d[i] = rng.normal();
  const double norm = d.norm();
  if (norm == 0.0) {
    d.setZero();
    d[0] = 1.0;
    return d;
  }
  return d / norm;
}

}  // namespace

ContractionReport contraction_proxy(const NetworkParams& params, const LabeledDataset& ds,
                                    int threads) {
  if (ds.size() == 0) throw std::invalid_argument("contraction_proxy: dataset is empty");

  std::vector<SampleMax> maxima(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    const ForwardTrace trace = forward(params, ds.frames[i], Mode::Surrogate);
    SampleMax local;
    for (std::size_t l = 0; l < trace.membrane.size(); ++l) {
      const Mat& membrane = trace.membrane[l];
      const Vec& threshold = trace.thresholds[l];
      for (Eigen::Index t = 0; t < membrane.rows(); ++t) {
        for (Eigen::Index n = 0; n < membrane.cols(); ++n) {
          const double slope =
              std::abs(surrogate_deriv(membrane(t, n) - threshold[n], params.surrogate));
          if (slope > local.value) {
            local.value = slope;
            local.at = {static_cast<int>(l), static_cast<int>(t), static_cast<int>(i)};
          }
        }
      }
    }
    maxima[i] = local;
  });

  ContractionReport report;
  double best = -1.0;
  for (const SampleMax& m : maxima) {
    if (m.value > best) {
      best = m.value;
      report.argmax = m.at;
    }
  }
  report.b1_hat = best;
  report.m_theta_hat = 0.0;
  for (const auto& layer : params.layers) {
    report.m_theta_hat = std::max(report.m_theta_hat, layer.threshold.cwiseAbs().maxCoeff());
  }
  report.gamma_hat = params.leak + report.m_theta_hat * report.b1_hat;
  report.contraction = report.gamma_hat < 1.0;
  return report;
}

double operator_norm(const Mat& m) {
  return Eigen::BDCSVD<Mat>(m).singularValues()(0);
}

TheoryConstants measure_theory_constants(const NetworkParams& params, const LabeledDataset& ds,
                                         int threads) {
  TheoryConstants consts;
  consts.alpha = params.leak;
  consts.steps = ds.steps;
  consts.depth = static_cast<int>(params.layers.size());
  for (const auto& layer : params.layers) {
    consts.max_layer_norm = std::max(consts.max_layer_norm, operator_norm(layer.weight));
    consts.max_threshold = std::max(consts.max_threshold, layer.threshold.cwiseAbs().maxCoeff());
  }
  consts.readout_norm = operator_norm(params.readout_weight);
  const double k = params.surrogate.slope;
  consts.b1_global = k / kPi;
  consts.b2_global = 3.0 * std::sqrt(3.0) * k * k / (8.0 * kPi);

  const ContractionReport contraction = contraction_proxy(params, ds, threads);
  consts.b1_local = contraction.b1_hat;

  // Local second-derivative bound on the same visited states.
  std::vector<double> b2(ds.size(), 0.0);
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    const ForwardTrace trace = forward(params, ds.frames[i], Mode::Surrogate);
    double local = 0.0;
    for (const double margin : membrane_margins(trace)) {
      const double kz = k * margin;
      const double second = 2.0 * k * k * k * std::abs(margin) / (kPi * (1.0 + kz * kz) * (1.0 + kz * kz));
      local = std::max(local, second);
    }
    b2[i] = local;
  });
  for (const double v : b2) consts.b2_local = std::max(consts.b2_local, v);
  return consts;
}

double geometric_gain(double gamma, int steps) {
  if (std::abs(1.0 - gamma) < 1e-12) return static_cast<double>(steps);
  return (1.0 - std::pow(gamma, steps)) / (1.0 - gamma);
}

double lipschitz_bound(double readout_norm, double b1, double max_layer_norm, double gamma,
                       int steps, int depth) {
  const double per_layer_gain = b1 * max_layer_norm * geometric_gain(gamma, steps);
  return readout_norm * std::pow(per_layer_gain, depth) / std::sqrt(static_cast<double>(steps));
}

double lipschitz_bound(const TheoryConstants& consts, double b1) {
  const double gamma = consts.alpha + consts.max_threshold * b1;
  return lipschitz_bound(consts.readout_norm, b1, consts.max_layer_norm, gamma, consts.steps,
                         consts.depth);
}

LipschitzProbeReport lipschitz_probe(const NetworkParams& params, const LabeledDataset& ds,
                                     double b1, int pairs, std::uint64_t seed, int threads) {
  if (ds.size() == 0) throw std::invalid_argument("lipschitz_probe: dataset is empty");
  if (pairs < 1) throw std::invalid_argument("lipschitz_probe: need at least one pair");

  TheoryConstants consts;
  consts.alpha = params.leak;
  consts.steps = ds.steps;
  consts.depth = static_cast<int>(params.layers.size());
  for (const auto& layer : params.layers) {
    consts.max_layer_norm = std::max(consts.max_layer_norm, operator_norm(layer.weight));
    consts.max_threshold = std::max(consts.max_threshold, layer.threshold.cwiseAbs().maxCoeff());
  }
  consts.readout_norm = operator_norm(params.readout_weight);
  const double bound = lipschitz_bound(consts, b1);

  Rng rng = stream_rng(seed, Stream::Probe);
  struct Pair {
    std::size_t sample;
    Mat noise;
  };
  std::vector<Pair> probes(static_cast<std::size_t>(pairs));
  for (auto& p : probes) {
    p.sample = static_cast<std::size_t>(rng.below(ds.size()));
    p.noise = Mat(ds.steps, ds.dim);
    const double scale = rng.uniform(0.01, 0.2);
    for (Eigen::Index r = 0; r < p.noise.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.noise.cols(); ++c) {
        p.noise(r, c) = scale * rng.normal();
      }
    }
  }

  std::vector<double> ratios(probes.size(), 0.0);
  parallel_for(probes.size(), threads, [&](std::size_t i) {
    const Mat& x = ds.frames[probes[i].sample];
    Mat x_perturbed = (x + probes[i].noise).cwiseMax(0.0).cwiseMin(1.0);
    const double input_dist = (x_perturbed - x).norm();
    if (input_dist == 0.0) return;
    const Vec f_a = forward(params, x, Mode::Surrogate).logits;
    const Vec f_b = forward(params, x_perturbed, Mode::Surrogate).logits;
    ratios[i] = (f_a - f_b).norm() / input_dist;
  });

  LipschitzProbeReport report;
  report.bound = bound;
  for (const double r : ratios) report.max_ratio = std::max(report.max_ratio, r);
  report.satisfied = report.max_ratio <= bound;
  return report;
}

double estimate_beta(const FlatLossFn& loss, const Vec& w, int directions, double step,
                     std::uint64_t seed) {
  if (directions < 1) throw std::invalid_argument("estimate_beta: need at least one direction");
  if (!(step > 0.0)) throw std::invalid_argument("estimate_beta: step must be positive");
  Rng rng = stream_rng(seed, Stream::Probe, 0xBE7A);
  const double center = loss(w);
  double beta = 0.0;
  for (int d = 0; d < directions; ++d) {
    const Vec dir = random_unit_direction(w.size(), rng);
    const double plus = loss(w + step * dir);
    const double minus = loss(w - step * dir);
    beta = std::max(beta, std::abs(plus - 2.0 * center + minus) / (step * step));
  }
  return beta;
}

SamBoundReport sam_bound_probe(const FlatLossFn& loss, const Vec& w, const Vec& grad, double rho,
                               int probes, std::uint64_t seed, double beta) {
  if (probes < 1) throw std::invalid_argument("sam_bound_probe: need at least one probe");
  SamBoundReport report;
  report.probes = probes;
  report.loss_at_w = loss(w);
  report.grad_norm = grad.norm();
  report.beta_hat = beta >= 0.0 ? beta : estimate_beta(loss, w, 32, 1e-3, seed);

  Rng rng = stream_rng(seed, Stream::Probe, 0x5A11);
  report.lhs_max = report.loss_at_w;
  for (int i = 0; i < probes; ++i) {
    Vec eps;
    if (i == 0) {
      eps = rho == 0.0 || report.grad_norm == 0.0
                ? Vec(Vec::Zero(w.size()))
                : Vec(rho * grad / (report.grad_norm + 1e-12));
    } else {
      eps = rho * random_unit_direction(w.size(), rng);
    }
    const double value = loss(w + eps);
    if (value > report.lhs_max) {
      report.lhs_max = value;
      report.worst_probe = i;
    }
  }
  report.rhs = report.loss_at_w + rho * report.grad_norm + report.beta_hat * rho * rho / 2.0;
  report.satisfied = report.lhs_max <= report.rhs;
  return report;
}

SamBoundReport sam_bound_check(const NetworkParams& params, const Batch& batch, double rho,
                               int probes, std::uint64_t seed, int threads) {
  NetworkParams scratch = params;
  const FlatLossFn loss = [&scratch, &batch, threads](const Vec& flat) {
    unflatten_params(flat, scratch);
    double sum = 0.0;
    std::vector<double> values(batch.size());
    parallel_for(batch.size(), threads, [&](std::size_t i) {
      const ForwardTrace trace = forward(scratch, *batch[i].frames, Mode::Surrogate);
      values[i] = cross_entropy(trace.logits, batch[i].label);
    });
    for (const double v : values) sum += v;
    return sum / static_cast<double>(batch.size());
  };

  const Vec w = flatten_params(params);
  auto [loss_value, grad] = batch_gradient(params, batch, threads);
  (void)loss_value;
  SamBoundReport report = sam_bound_probe(loss, w, grad.flatten(), rho, probes, seed);
  unflatten_params(w, scratch);
  return report;
}

double convergence_bound_rhs(double loss_initial, double loss_optimal, double eta, long steps,
                             double beta, double rho, double sigma_noise_sq) {
  if (!(eta > 0.0) || steps < 1) {
    throw std::invalid_argument("convergence_bound_rhs: eta must be positive and steps >= 1");
  }
  return 4.0 * (loss_initial - loss_optimal) / (eta * static_cast<double>(steps)) +
         3.0 * beta * beta * rho * rho + 2.0 * eta * beta * sigma_noise_sq;
}

ConvergenceReport convergence_monitor(const TrainRecord& record, const TheoryConstants& consts) {
  if (record.steps.empty()) throw std::invalid_argument("convergence_monitor: record is empty");
  ConvergenceReport report;
  report.steps = static_cast<long>(record.steps.size());
  double acc = 0.0;
  for (const StepRow& row : record.steps) acc += row.grad_norm * row.grad_norm;
  report.mean_sq_grad_norm = acc / static_cast<double>(record.steps.size());
  report.floor = 3.0 * consts.beta_hat * consts.beta_hat * consts.rho * consts.rho;
  const long K = consts.step_budget > 0 ? consts.step_budget : report.steps;
  report.bound_rhs = consts.eta > 0.0
                         ? convergence_bound_rhs(consts.loss_initial, consts.loss_optimal,
                                                 consts.eta, K, consts.beta_hat, consts.rho,
                                                 consts.sigma_noise_sq)
                         : report.floor;
  return report;
}

double estimate_gradient_noise(const NetworkParams& params, const LabeledDataset& ds,
                               int batch_size, int batches, std::uint64_t seed, int threads) {
  if (batches < 2) throw std::invalid_argument("estimate_gradient_noise: need at least 2 batches");
  if (batch_size < 1 || ds.size() < static_cast<std::size_t>(batch_size)) {
    throw std::invalid_argument("estimate_gradient_noise: dataset smaller than one batch");
  }
  Rng rng = stream_rng(seed, Stream::Probe, 0x401E);
  std::vector<Vec> grads;
  grads.reserve(static_cast<std::size_t>(batches));
  for (int b = 0; b < batches; ++b) {
    std::vector<int> idx(static_cast<std::size_t>(batch_size));
    for (auto& i : idx) i = static_cast<int>(rng.below(ds.size()));
    auto [loss, grad] = batch_gradient(params, batch_from(ds, idx), threads);
    (void)loss;
    grads.push_back(grad.flatten());
  }
  Vec mean = Vec::Zero(grads[0].size());
  for (const Vec& g : grads) mean += g;
  mean /= static_cast<double>(grads.size());
  double acc = 0.0;
  for (const Vec& g : grads) acc += (g - mean).squaredNorm();
  return acc / static_cast<double>(grads.size() - 1);
}

MarginStatistic margin_statistic(const NetworkParams& params, const LabeledDataset& ds,
                                 double window, int threads) {
  if (!(window > 0.0)) throw std::invalid_argument("margin_statistic: window must be positive");
  if (ds.size() == 0) throw std::invalid_argument("margin_statistic: dataset is empty");

  constexpr double kEdge = 3.0;
  constexpr double kBinWidth = 0.05;
  const int bins = static_cast<int>(std::llround(2.0 * kEdge / kBinWidth));

  MarginStatistic stat;
  stat.window = std::min(window, kEdge);
  stat.bin_centers.resize(bins);
  stat.bin_mass.assign(bins, 0.0);
  for (int b = 0; b < bins; ++b) stat.bin_centers[b] = -kEdge + (b + 0.5) * kBinWidth;

  std::vector<std::vector<double>> per_sample(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    per_sample[i] = membrane_margins(forward(params, ds.frames[i], Mode::Hard));
  });

  std::size_t within = 0;
  for (const auto& margins : per_sample) {
    for (const double m : margins) {
      ++stat.margin_count;
      if (std::abs(m) <= stat.window) ++within;
      int bin = static_cast<int>(std::floor((m + kEdge) / kBinWidth));
      bin = std::min(std::max(bin, 0), bins - 1);
      stat.bin_mass[static_cast<std::size_t>(bin)] += 1.0;
    }
  }
  if (stat.margin_count > 0) {
    for (double& mass : stat.bin_mass) mass /= static_cast<double>(stat.margin_count);
    stat.fraction_within = static_cast<double>(within) / static_cast<double>(stat.margin_count);
  }
  return stat;
}

}  // namespace sast
