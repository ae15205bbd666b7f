#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sast/bptt.hpp"
#include "sast/network.hpp"
#include "sast/optim.hpp"

namespace sast {

/// Constants entering the stability/smoothness bounds. Measured fields come
/// from a checkpoint plus an evaluation set; the rest are analytic or
/// user-supplied analysis inputs.
struct TheoryConstants {
  // measured
  double max_layer_norm = 0.0;      // max over layers of ||A||_2
  double max_threshold = 0.0;       // max ||theta||_inf
  double readout_norm = 0.0;        // ||W_out||_2
  double b1_local = 0.0;            // max |sigma'| on visited states
  double b2_local = 0.0;            // max |sigma''| on visited states
  // analytic
  double b1_global = 0.0;           // k / pi
  double b2_global = 0.0;           // 3 sqrt(3) k^2 / (8 pi)
  double alpha = 0.0;
  int steps = 0;                    // T
  int depth = 0;                    // L
  // assumed / estimated analysis inputs
  double input_bound = 1.0;         // R_x; 1 after normalization
  double beta_hat = 0.0;            // probed smoothness estimate
  double rho = 0.0;
  double eta = 0.0;
  long step_budget = 0;             // K
  double sigma_noise_sq = 0.0;
  std::string sigma_noise_source = "assumed";
  double loss_initial = 0.0;        // surrogate objective at w_0
  double loss_optimal = 0.0;        // lower bound 0 for cross-entropy
};

struct ArgMaxLocation {
  int layer = 0;
  int step = 0;
  int sample = 0;
};

struct ContractionReport {
  double b1_hat = 0.0;
  double m_theta_hat = 0.0;
  double gamma_hat = 0.0;  // alpha + m_theta_hat * b1_hat
  bool contraction = false;
  ArgMaxLocation argmax;
};

/// Surrogate forward over every sample; b1_hat is the max |sigma'(u - theta)|
/// over layers, steps, neurons and samples (first attaining location wins).
ContractionReport contraction_proxy(const NetworkParams& params, const LabeledDataset& ds,
                                    int threads = 1);

/// Largest singular value.
double operator_norm(const Mat& m);

/// Fills the measured and analytic fields from one evaluation pass.
TheoryConstants measure_theory_constants(const NetworkParams& params, const LabeledDataset& ds,
                                         int threads = 1);

/// Geometric gain S_T(gamma) = (1 - gamma^T) / (1 - gamma), with the limit T
/// at gamma -> 1.
double geometric_gain(double gamma, int steps);

/// L_x = M_out * (B1 * M_A * S_T(gamma))^L / sqrt(T).
double lipschitz_bound(double readout_norm, double b1, double max_layer_norm, double gamma,
                       int steps, int depth);

/// Convenience overload; gamma = alpha + max_threshold * b1.
double lipschitz_bound(const TheoryConstants& consts, double b1);

struct LipschitzProbeReport {
  double bound = 0.0;
  double max_ratio = 0.0;
  bool satisfied = false;
};

/// Random input-perturbation pairs; the observed output/input ratio must stay
/// below the bound computed with the given B1.
LipschitzProbeReport lipschitz_probe(const NetworkParams& params, const LabeledDataset& ds,
                                     double b1, int pairs, std::uint64_t seed, int threads = 1);

using FlatLossFn = std::function<double(const Vec&)>;

/// max |f(w + h d) - 2 f(w) + f(w - h d)| / h^2 over random unit directions.
double estimate_beta(const FlatLossFn& loss, const Vec& w, int directions, double step,
                     std::uint64_t seed);

struct SamBoundReport {
  double loss_at_w = 0.0;
  double grad_norm = 0.0;
  double beta_hat = 0.0;
  double lhs_max = 0.0;  // max probed loss at w + eps, ||eps||_2 <= rho
  double rhs = 0.0;      // loss + rho ||g|| + beta rho^2 / 2
  bool satisfied = false;
  int worst_probe = -1;  // index of the probe attaining lhs_max (0 = ascent direction)
  int probes = 0;
};

/// Generic probe of the first-order SAM upper bound for any flat objective;
/// beta may be supplied (analytic) or left negative to be estimated.
SamBoundReport sam_bound_probe(const FlatLossFn& loss, const Vec& w, const Vec& grad, double rho,
                               int probes, std::uint64_t seed, double beta = -1.0);

/// SAM bound probe on the network's batch objective. Reported, not asserted:
/// the probed beta_hat can under-estimate the true smoothness constant.
SamBoundReport sam_bound_check(const NetworkParams& params, const Batch& batch, double rho,
                               int probes, std::uint64_t seed, int threads = 1);

struct ConvergenceReport {
  double mean_sq_grad_norm = 0.0;   // (1/K) sum ||g_k||^2 over recorded steps
  double floor = 0.0;               // 3 beta^2 rho^2
  double bound_rhs = 0.0;           // full right-hand side of the convergence bound
  long steps = 0;
};

/// Right-hand side: 4 (L0 - L*) / (eta K) + 3 beta^2 rho^2 + 2 eta beta sigma^2.
double convergence_bound_rhs(double loss_initial, double loss_optimal, double eta, long steps,
                             double beta, double rho, double sigma_noise_sq);

/// Juxtaposes the recorded gradient norms with the theoretical floor.
/// Observational only.
ConvergenceReport convergence_monitor(const TrainRecord& record, const TheoryConstants& consts);

/// Empirical variance of minibatch gradients around their mean at fixed
/// parameters; an estimate for the noise term in the convergence bound.
double estimate_gradient_noise(const NetworkParams& params, const LabeledDataset& ds,
                               int batch_size, int batches, std::uint64_t seed, int threads = 1);

struct MarginStatistic {
  double fraction_within = 0.0;
  double window = 0.0;  // effective window (capped at 3)
  std::vector<double> bin_centers;
  std::vector<double> bin_mass;  // sums to 1
  std::size_t margin_count = 0;
};

/// Hard-mode membrane margins over the dataset; fraction with |u - theta| <=
/// window plus a fixed histogram (width 0.05 over [-3, 3], outliers clamped
/// into the end bins).
MarginStatistic margin_statistic(const NetworkParams& params, const LabeledDataset& ds,
                                 double window, int threads = 1);

}  // namespace sast
