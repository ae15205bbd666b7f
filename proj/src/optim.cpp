#include "sast/optim.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "sast/eval.hpp"
#include "sast/rng.hpp"

namespace sast {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

OptimizerState OptimizerState::create(const NetworkParams& params, const AdamConfig& adam) {
  OptimizerState opt;
  opt.first_moment = Gradient::zeros_like(params);
  opt.second_moment = Gradient::zeros_like(params);
  opt.adam = adam;
  opt.current_lr = adam.lr;
  return opt;
}

Gradient ascent_perturbation(const Gradient& g, const SAMConfig& cfg) {
  if (!(cfg.rho >= 0.0)) throw std::invalid_argument("ascent_perturbation: rho must be >= 0");
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("ascent_perturbation: delta must be > 0");
  Gradient eps = g;
  eps.scale(cfg.rho / (g.norm() + cfg.delta));
  return eps;
}

namespace {

void adam_update_block(Mat& param, Mat& m, Mat& v, const Mat& g, const AdamConfig& cfg, double lr,
                       double bias1, double bias2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  param.array() -= lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + cfg.eps);
}

void adam_update_block(Vec& param, Vec& m, Vec& v, const Vec& g, const AdamConfig& cfg, double lr,
                       double bias1, double bias2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  param.array() -= lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + cfg.eps);
}

}  // namespace

void adam_update(NetworkParams& params, OptimizerState& opt, const Gradient& g) {
  if (g.layers.size() != params.layers.size()) throw ShapeError("adam_update: layer count mismatch");
  opt.step_count += 1;
  const double bias1 = 1.0 - std::pow(opt.adam.beta1, static_cast<double>(opt.step_count));
  const double bias2 = 1.0 - std::pow(opt.adam.beta2, static_cast<double>(opt.step_count));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    adam_update_block(params.layers[l].weight, opt.first_moment.layers[l].weight,
                      opt.second_moment.layers[l].weight, g.layers[l].weight, opt.adam,
                      opt.current_lr, bias1, bias2);
    adam_update_block(params.layers[l].bias, opt.first_moment.layers[l].bias,
                      opt.second_moment.layers[l].bias, g.layers[l].bias, opt.adam, opt.current_lr,
                      bias1, bias2);
  }
  adam_update_block(params.readout_weight, opt.first_moment.readout_weight,
                    opt.second_moment.readout_weight, g.readout_weight, opt.adam, opt.current_lr,
                    bias1, bias2);
  adam_update_block(params.readout_bias, opt.first_moment.readout_bias,
                    opt.second_moment.readout_bias, g.readout_bias, opt.adam, opt.current_lr, bias1,
                    bias2);
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
  if (total_epochs <= 0) return base_lr;
  return base_lr * (1.0 + std::cos(kPi * static_cast<double>(epoch) / total_epochs)) / 2.0;
}

StepRow sast_step(NetworkParams& params, OptimizerState& opt, const SAMConfig& cfg,
                  const Batch& batch, const Batch& batch_prime, int threads) {
  auto [loss, g] = batch_gradient(params, batch, threads);
  const Gradient eps = ascent_perturbation(g, cfg);

  NetworkParams ascent_point = params;
  apply_direction(ascent_point, eps, 1.0);
  // Fresh state per forward pass is guaranteed by forward(); nothing carries
  // over between the two passes.
  auto [loss_prime, g_prime] = batch_gradient(ascent_point, batch_prime, threads);
  (void)loss_prime;

  adam_update(params, opt, g_prime);
  return {loss.value, g.norm(), 2};
}

StepRow baseline_step(NetworkParams& params, OptimizerState& opt, const Batch& batch, int threads) {
  auto [loss, g] = batch_gradient(params, batch, threads);
  adam_update(params, opt, g);
  return {loss.value, g.norm(), 1};
}

const char* method_name(Method m) { return m == Method::Baseline ? "baseline" : "sast"; }

TrainResult train(const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainOptions& options) {
  if (train_set.size() == 0) throw std::invalid_argument("train: training split is empty");
  if (val_set.size() == 0) throw std::invalid_argument("train: validation split is empty");
  if (options.epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (options.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");

  NetworkParams params = init_network(options.dims, options.leak, options.threshold,
                                      options.surrogate, options.seed);
  OptimizerState opt = OptimizerState::create(params, options.adam);

  TrainResult result;
  result.record.method = method_name(options.method);
  result.record.rho = options.method == Method::Sast ? options.sam.rho : 0.0;
  result.best = params;

  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = stream_rng(options.seed, Stream::Shuffle, 1);

  double best_hard = -1.0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    opt.current_lr = cosine_lr(options.adam.lr, epoch, options.epochs);
    shuffle_rng.shuffle(order);

    std::vector<std::vector<int>> batches;
    for (std::size_t at = 0; at < order.size(); at += options.batch_size) {
      const std::size_t end = std::min(at + options.batch_size, order.size());
      batches.emplace_back(order.begin() + at, order.begin() + end);
    }

    double loss_sum = 0.0;
    double gnorm_sum = 0.0;
    int steps_this_epoch = 0;
    if (options.method == Method::Baseline) {
      for (const auto& idx : batches) {
        const Batch batch = batch_from(train_set, idx);
        const StepRow row = baseline_step(params, opt, batch, options.threads);
        result.record.steps.push_back(row);
        result.record.total_grad_evals += row.grad_evals;
        loss_sum += row.loss;
        gnorm_sum += row.grad_norm;
        ++steps_this_epoch;
      }
    } else {
      if (batches.size() < 2) {
        throw std::invalid_argument(
            "train: SAM needs at least two minibatches per epoch for a disjoint B'");
      }
      for (std::size_t i = 0; i < batches.size(); ++i) {
        const Batch batch = batch_from(train_set, batches[i]);
        const Batch batch_prime = batch_from(train_set, batches[(i + 1) % batches.size()]);
        const StepRow row = sast_step(params, opt, options.sam, batch, batch_prime, options.threads);
        result.record.steps.push_back(row);
        result.record.total_grad_evals += row.grad_evals;
        loss_sum += row.loss;
        gnorm_sum += row.grad_norm;
        ++steps_this_epoch;
      }
    }

    EpochRow row;
    row.epoch = epoch;
    row.lr = opt.current_lr;
    row.mean_loss = loss_sum / steps_this_epoch;
    row.mean_grad_norm = gnorm_sum / steps_this_epoch;
    row.val_surrogate_acc = evaluate(params, val_set, Mode::Surrogate, options.threads);
    row.val_hard_acc = evaluate(params, val_set, Mode::Hard, options.threads);
    row.grad_evals_cum = result.record.total_grad_evals;
    row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    result.record.epochs.push_back(row);

    if (row.val_hard_acc > best_hard) {
      best_hard = row.val_hard_acc;
      result.best = params;
      result.record.best_epoch = epoch;
      result.record.best_val_hard_acc = row.val_hard_acc;
      result.record.best_val_surrogate_acc = row.val_surrogate_acc;
    }
  }

  result.final_params = std::move(params);
  return result;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double mu = mean_of(v);
  double acc = 0.0;
  for (const double x : v) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

RhoSweepResult sweep_rho(const LabeledDataset& train_set, const LabeledDataset& val_set,
                         const std::vector<double>& grid, const TrainOptions& base,
                         const std::vector<std::uint64_t>& seeds) {
  if (grid.empty()) throw std::invalid_argument("sweep_rho: rho grid is empty");
  if (seeds.empty()) throw std::invalid_argument("sweep_rho: seed list is empty");

  RhoSweepResult result;
  double best_mean = -1.0;
  for (const double rho : grid) {
    RhoSweepRow row;
    row.rho = rho;
    std::vector<double> deltas;
    for (const std::uint64_t seed : seeds) {
      TrainOptions options = base;
      options.method = Method::Sast;
      options.sam.rho = rho;
      options.seed = seed;
      TrainResult run = train(train_set, val_set, options);
      row.per_seed_hard.push_back(run.record.best_val_hard_acc);
      row.per_seed_surrogate.push_back(run.record.best_val_surrogate_acc);
      deltas.push_back(run.record.best_val_surrogate_acc - run.record.best_val_hard_acc);
      row.checkpoints.push_back(std::move(run.best));
    }
    row.runs = static_cast<int>(seeds.size());
    row.mean_val_hard = mean_of(row.per_seed_hard);
    row.std_val_hard = population_std(row.per_seed_hard);
    row.mean_val_surrogate = mean_of(row.per_seed_surrogate);
    row.std_val_surrogate = population_std(row.per_seed_surrogate);
    row.mean_delta_val = mean_of(deltas);
    if (row.mean_val_hard > best_mean) {
      best_mean = row.mean_val_hard;
      result.best_rho = rho;
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace sast
