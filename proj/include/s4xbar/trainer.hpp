#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s4xbar/dataset.hpp"
#include "s4xbar/quantizer.hpp"
#include "s4xbar/ssm.hpp"

namespace s4xbar {

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  QuantMap quant;

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;      // per epoch
  std::vector<double> train_accuracy;  // per epoch
  std::vector<double> test_accuracy;   // per epoch
  double final_test_accuracy = 0.0;    // of the returned (best) parameters
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
};

// Model with all quantized tensors replaced by their lattice values and the
// kernels discretized; this is the network the forward pass actually runs.
struct EffectiveModel {
  Vec encoder_w, encoder_b;
  std::vector<DiscreteKernel> kernels;
  Mat mixer_w;
  Vec mixer_b;
  Mat decoder_w;
  Vec decoder_b;
  QuantSpec state_quant = QuantSpec::off();
  // retained for the backward chain through discretization
  std::vector<CVec> a_quant;  // quantized continuous A per kernel
  std::vector<double> dt;     // per kernel
};

EffectiveModel make_effective(const ModelParams& p, const QuantMap& q);

// Everything the backward pass needs, cached during one sample's forward.
struct ForwardCache {
  Vec u;                      // input sequence
  Mat encoder_out;            // L x H
  std::vector<Mat> state_re;  // per kernel: L x N
  std::vector<Mat> state_im;  // per kernel: L x N
  Mat kernel_out;             // L x H (real parts)
  Mat mixer_pre;              // L x H (before GELU)
  Vec pooled;                 // H
  Vec scores;                 // n_classes
};

// Forward pass with quantized parameters (straight-through estimator
// training: quantized forward, full-precision updates).
Vec forward_quantized(const ModelParams& p, const QuantMap& q, const Vec& u);
Vec forward_effective(const EffectiveModel& m, const Vec& u);
ForwardCache forward_with_cache(const ModelParams& p, const EffectiveModel& m, const Vec& u);

// Gradient of the softmax cross-entropy loss with respect to every trainable
// tensor. Quantization nodes pass gradients through unchanged; b is fixed.
struct Gradients {
  Vec encoder_w, encoder_b;
  Vec log_dt;                     // one scalar per kernel
  Mat rho_re, a_im, c_re, c_im;   // H x N
  Mat mixer_w;
  Vec mixer_b;
  Mat decoder_w;
  Vec decoder_b;

  static Gradients zero(const ModelParams& p);
  void add_scaled(const Gradients& g, double s);
  bool all_finite() const;
};

double softmax_cross_entropy(const Vec& scores, int target, Vec* dscores);

// Backpropagation through time over the full sequence for one sample;
// accumulates into grads (scaled by weight).
double backward(const ModelParams& p, const EffectiveModel& m, const ForwardCache& cache,
                int target, Gradients& grads, double weight = 1.0);

struct TrainingDivergence : NumericError {
  TrainingDivergence(const std::string& msg, TrainReport partial)
      : NumericError(msg), report(std::move(partial)) {}
  TrainReport report;
};

// Minibatch Adam over the dataset; deterministic given cfg.seed. Returns the
// parameters with the best test accuracy seen and the full report.
std::pair<ModelParams, TrainReport> train(const Dataset& ds, const ModelConfig& config,
                                          const TrainConfig& cfg);

double evaluate_accuracy(const ModelParams& p, const QuantMap& q,
                         const std::vector<Sequence>& split);

struct SweepResult {
  int bits = 0;
  std::string f_scale;  // numeric value or "dynamic"
  std::uint64_t seed = 0;
  double accuracy = 0.0;  // NaN when the run failed
};

// Trains one model per (bits, f_scale) pair, applying the pair to the A
// components (and bits at the fixed default range to C). Failures are
// recorded as NaN and the sweep continues.
std::vector<SweepResult> sweep_quantization(const Dataset& ds, const ModelConfig& config,
                                            const std::vector<int>& bit_list,
                                            const std::vector<std::string>& f_scale_list,
                                            const TrainConfig& base_cfg);

// Quant map used for QAT deployments: A swept, C on the same bit lattice at
// the fixed unit range, digital layers at 8-bit dynamic.
QuantMap make_quant_map(int bits, const std::string& f_scale);

}  // namespace s4xbar
