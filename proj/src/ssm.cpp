#include "s4xbar/ssm.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "s4xbar/rng.hpp"

namespace s4xbar {

CVec KernelParams::a() const {
  CVec out(rho_re.size());
  for (Index i = 0; i < rho_re.size(); ++i)
    out[i] = Complex(-std::exp(rho_re[i]), a_im[i]);
  return out;
}

CVec KernelParams::c() const {
  CVec out(c_re.size());
  for (Index i = 0; i < c_re.size(); ++i) out[i] = Complex(c_re[i], c_im[i]);
  return out;
}

void ModelConfig::validate() const {
  if (n_layers != 1) throw ConfigError("ModelConfig: only n_layers = 1 is supported");
  if (h < 1) throw ConfigError("ModelConfig: h must be >= 1");
  if (n < 1) throw ConfigError("ModelConfig: n must be >= 1");
  if (n_classes < 2) throw ConfigError("ModelConfig: n_classes must be >= 2");
  if (sequence_length < 1) throw ConfigError("ModelConfig: sequence_length must be >= 1");
}

void ModelParams::validate() const {
  config.validate();
  const Index h = config.h;
  if (encoder_w.size() != h || encoder_b.size() != h)
    throw ConfigError("ModelParams: encoder shape mismatch");
  if (static_cast<Index>(kernels.size()) != h)
    throw ConfigError("ModelParams: kernel count mismatch");
  for (const auto& k : kernels)
    if (k.state_dim() != config.n || k.a_im.size() != config.n ||
        k.c_re.size() != config.n || k.c_im.size() != config.n ||
        k.b_re.size() != config.n)
      throw ConfigError("ModelParams: kernel state dimension mismatch");
  if (mixer_w.rows() != h || mixer_w.cols() != h || mixer_b.size() != h)
    throw ConfigError("ModelParams: mixer shape mismatch");
  if (decoder_w.rows() != config.n_classes || decoder_w.cols() != h ||
      decoder_b.size() != config.n_classes)
    throw ConfigError("ModelParams: decoder shape mismatch");
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  const double Phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  return Phi + x * phi;
}

KernelParams init_kernel(Index n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("init_kernel: state dimension must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> log_dt_dist(std::log(0.001), std::log(0.1));

  KernelParams k;
  k.log_dt = log_dt_dist(rng);
  k.rho_re = Vec::Constant(n, std::log(0.5));  // Re(a_n) = -1/2
  k.a_im.resize(n);
  for (Index i = 0; i < n; ++i) k.a_im[i] = std::numbers::pi * static_cast<double>(i);
  k.c_re.resize(n);
  k.c_im.resize(n);
  for (Index i = 0; i < n; ++i) k.c_re[i] = normal(rng);
  for (Index i = 0; i < n; ++i) k.c_im[i] = normal(rng);
  k.b_re = Vec::Ones(n);
  return k;
}

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  const Index h = config.h;

  p.kernels.reserve(h);
  for (Index i = 0; i < h; ++i)
    p.kernels.push_back(init_kernel(config.n, derive_seed(seed, "kernel", i)));

  std::mt19937_64 rng(derive_seed(seed, "linear"));
  std::normal_distribution<double> normal(0.0, 1.0);
  p.encoder_w.resize(h);
  for (Index i = 0; i < h; ++i) p.encoder_w[i] = normal(rng);
  p.encoder_b = Vec::Zero(h);

  const double mixer_std = 1.0 / std::sqrt(static_cast<double>(h));
  p.mixer_w.resize(h, h);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < h; ++c) p.mixer_w(r, c) = mixer_std * normal(rng);
  p.mixer_b = Vec::Zero(h);

  p.decoder_w.resize(config.n_classes, h);
  for (Index r = 0; r < config.n_classes; ++r)
    for (Index c = 0; c < h; ++c) p.decoder_w(r, c) = mixer_std * normal(rng);
  p.decoder_b = Vec::Zero(config.n_classes);
  return p;
}

Complex cexpm1(Complex w) {
  const double er = std::expm1(w.real());
  const double s = std::sin(0.5 * w.imag());
  return {er * std::cos(w.imag()) - 2.0 * s * s,
          (er + 1.0) * std::sin(w.imag())};
}

DiscreteKernel zoh_discretize(double dt, const CVec& a, const Vec& b, const CVec& c) {
  if (!std::isfinite(dt)) throw NumericError("zoh_discretize: non-finite dt");
  const Index n = a.size();
  DiscreteKernel dk;
  dk.a_bar.resize(n);
  dk.b_bar.resize(n);
  dk.c_bar = c;
  for (Index i = 0; i < n; ++i) {
    const Complex an = a[i];
    if (!std::isfinite(an.real()) || !std::isfinite(an.imag()) || !std::isfinite(b[i]))
      throw NumericError("zoh_discretize: non-finite kernel parameter");
    const Complex w = dt * an;
    dk.a_bar[i] = std::exp(w);
    dk.b_bar[i] = an == 0.0 ? Complex(dt * b[i], 0.0) : cexpm1(w) / an * b[i];
  }
  return dk;
}

DiscreteKernel zoh_discretize(const KernelParams& k) {
  if (!std::isfinite(k.log_dt)) throw NumericError("zoh_discretize: non-finite log_dt");
  return zoh_discretize(std::exp(k.log_dt), k.a(), k.b_re, k.c());
}

std::pair<StateVector, Complex> kernel_step(const DiscreteKernel& dk,
                                            const StateVector& x_prev, double u) {
  StateVector x = dk.a_bar.cwiseProduct(x_prev) + dk.b_bar * u;
  const Complex y = (dk.c_bar.array() * x.array()).sum();
  return {std::move(x), y};
}

CVec kernel_conv_unroll(const DiscreteKernel& dk, const Vec& u) {
  const Index len = u.size();
  if (len < 1) throw ConfigError("kernel_conv_unroll: empty input");
  // Materialize k_t = sum_n c_n a_n^t b_n, then convolve directly.
  CVec taps(len);
  CVec pow = CVec::Ones(dk.state_dim());
  for (Index t = 0; t < len; ++t) {
    taps[t] = (dk.c_bar.array() * pow.array() * dk.b_bar.array()).sum();
    pow = pow.cwiseProduct(dk.a_bar);
  }
  CVec y(len);
  for (Index t = 0; t < len; ++t) {
    Complex acc = 0.0;
    for (Index k = 0; k <= t; ++k) acc += taps[k] * u[t - k];
    y[t] = acc;
  }
  return y;
}

Vec model_forward(const ModelParams& p, const Vec& u) {
  p.validate();
  const Index len = u.size();
  if (len < 1) throw ConfigError("model_forward: empty input sequence");
  const Index h = p.config.h;

  std::vector<DiscreteKernel> dks;
  dks.reserve(h);
  for (const auto& k : p.kernels) dks.push_back(zoh_discretize(k));

  std::vector<StateVector> x(h);
  for (Index i = 0; i < h; ++i) x[i] = StateVector::Zero(p.config.n);

  Vec pooled = Vec::Zero(h);
  Vec y(h);
  for (Index t = 0; t < len; ++t) {
    for (Index i = 0; i < h; ++i) {
      const double e = p.encoder_w[i] * u[t] + p.encoder_b[i];
      auto [xt, yt] = kernel_step(dks[i], x[i], e);
      x[i] = std::move(xt);
      y[i] = yt.real();
    }
    Vec m = p.mixer_w * y + p.mixer_b;
    pooled += m.unaryExpr([](double v) { return gelu(v); });
  }
  pooled /= static_cast<double>(len);
  return p.decoder_w * pooled + p.decoder_b;
}

}  // namespace s4xbar
