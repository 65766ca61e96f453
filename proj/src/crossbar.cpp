#include "s4xbar/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "s4xbar/dataset.hpp"
#include "s4xbar/rng.hpp"
#include "s4xbar/trainer.hpp"

namespace s4xbar {

void CrossbarLayout::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("CrossbarLayout: empty array");
  if (n < 1) throw ConfigError("CrossbarLayout: n must be >= 1");
  if (4 + 4 * n > rows || 4 * n + 4 > cols)
    throw ConfigError("CrossbarLayout: state dimension " + std::to_string(n) +
                      " does not fit a " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " array");
}

void DeviceModel::validate() const {
  if (sigma_write < 0.0) throw ConfigError("DeviceModel: sigma_write must be >= 0");
  if (p_stuck < 0.0 || p_stuck > 1.0) throw ConfigError("DeviceModel: p_stuck in [0,1]");
  if (g_min > g_max) throw ConfigError("DeviceModel: empty conductance range");
}

double default_stuck_probability(int n) { return 2.0 / (4.0 * (8.0 * n + 4.0)); }

void PeripheryModel::validate() const {
  if (!(v_max > 0.0)) throw ConfigError("PeripheryModel: v_max must be > 0");
  if (!(state_range > 0.0)) throw ConfigError("PeripheryModel: state_range must be > 0");
  if (dac_bits < 0 || adc_bits < 0) throw ConfigError("PeripheryModel: negative bit width");
}

Eigen::Matrix2d expand_complex(Complex m) {
  if (!std::isfinite(m.real()) || !std::isfinite(m.imag()))
    throw NumericError("expand_complex: non-finite value");
  Eigen::Matrix2d out;
  out << m.real(), -m.imag(), m.imag(), m.real();
  return out;
}

std::pair<double, double> weight_to_pair(double w, double w_max) {
  if (!(w_max > 0.0)) throw ConfigError("weight_to_pair: w_max must be > 0");
  if (!std::isfinite(w) || std::abs(w) > w_max * (1.0 + 1e-12))
    throw NumericError("weight_to_pair: |w| exceeds w_max");
  const double up = std::max(w, 0.0) / w_max;
  const double dn = std::max(-w, 0.0) / w_max;
  return {kGOff + up * kGSpan, kGOff + dn * kGSpan};
}

Eigen::Matrix4d expand_to_block(Complex m, double w_max) {
  const auto [grp, grm] = weight_to_pair(m.real(), w_max);
  const auto [gip, gim] = weight_to_pair(m.imag(), w_max);
  // Rows carry the expanded voltages (r+, r-, i+, i-), columns collect the
  // expanded currents in the same order, so the array holds the transpose of
  // the mathematical 4x4 matrix.
  Eigen::Matrix4d b;
  b << grp, grm, gip, gim,
       grm, grp, gim, gip,
       gim, gip, grp, grm,
       gip, gim, grm, grp;
  return b;
}

Complex block_readout(const Eigen::Matrix4d& block, double w_max) {
  const double re = (block(0, 0) - block(0, 1)) / kGSpan * w_max;
  const double im = (block(0, 2) - block(0, 3)) / kGSpan * w_max;
  return {re, im};
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> ConductanceProgram::programmed_mask()
    const {
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(layout.rows,
                                                                    layout.cols, false);
  for (int k = 0; k < layout.n; ++k) {
    mask.block<4, 4>(layout.input_row0(), layout.state_col0() + 4 * k).setConstant(true);
    mask.block<4, 4>(layout.state_row0() + 4 * k, layout.state_col0() + 4 * k)
        .setConstant(true);
    mask.block<4, 4>(layout.state_row0() + 4 * k, layout.output_col0()).setConstant(true);
  }
  return mask;
}

ConductanceProgram map_kernel(const DiscreteKernel& dk, const CrossbarLayout& layout) {
  layout.validate();
  if (dk.state_dim() != layout.n)
    throw ConfigError("map_kernel: kernel state dimension does not match layout");

  double w_max = 0.0;
  auto track = [&w_max](const CVec& v) {
    for (Index i = 0; i < v.size(); ++i)
      w_max = std::max({w_max, std::abs(v[i].real()), std::abs(v[i].imag())});
  };
  track(dk.a_bar);
  track(dk.b_bar);
  track(dk.c_bar);
  if (w_max == 0.0) w_max = 1.0;

  ConductanceProgram cp;
  cp.layout = layout;
  cp.w_max = w_max;
  cp.target = Mat::Zero(layout.rows, layout.cols);
  for (int k = 0; k < layout.n; ++k) {
    cp.target.block<4, 4>(layout.input_row0(), 4 * k) = expand_to_block(dk.b_bar[k], w_max);
    cp.target.block<4, 4>(layout.state_row0() + 4 * k, 4 * k) =
        expand_to_block(dk.a_bar[k], w_max);
    cp.target.block<4, 4>(layout.state_row0() + 4 * k, layout.output_col0()) =
        expand_to_block(dk.c_bar[k], w_max);
  }
  return cp;
}

XbarState program(const ConductanceProgram& cp, const DeviceModel& dev, std::uint64_t seed) {
  dev.validate();
  XbarState st;
  st.program = cp;
  st.actual = cp.target;
  st.state_voltage = CVec::Zero(cp.layout.n);

  const auto mask = cp.programmed_mask();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  // Noise first, then faults, each in row-major device order.
  for (int r = 0; r < cp.layout.rows; ++r)
    for (int c = 0; c < cp.layout.cols; ++c)
      if (mask(r, c)) {
        const double g = cp.target(r, c) + dev.sigma_write * noise(rng);
        st.actual(r, c) = std::clamp(g, dev.g_min, dev.g_max);
      }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int r = 0; r < cp.layout.rows; ++r)
    for (int c = 0; c < cp.layout.cols; ++c)
      if (mask(r, c) && unif(rng) < dev.p_stuck) {
        st.actual(r, c) = dev.g_stuck;
        st.stuck.emplace_back(r, c);
      }
  return st;
}

void XbarState::reset_state() { state_voltage.setZero(); }

void XbarState::restore_devices(const std::vector<std::pair<int, int>>& devices) {
  for (auto [r, c] : devices) {
    actual(r, c) = program.target(r, c);
    std::erase(stuck, std::make_pair(r, c));
  }
}

Vec xbar_vmm(XbarState& state, const Vec& v, double v_max) {
  Vec vin = v;
  for (Index i = 0; i < vin.size(); ++i) {
    if (std::abs(vin[i]) > v_max) {
      vin[i] = std::clamp(vin[i], -v_max, v_max);
      ++state.clip_events;
    }
  }
  return state.actual.transpose() * vin;  // uS * V = uA
}

namespace {

inline void sign_split(double v, double& plus, double& minus) {
  plus = std::max(v, 0.0);
  minus = std::max(-v, 0.0);
}

}  // namespace

Complex xbar_kernel_step(XbarState& state, const PeripheryModel& periphery, double u) {
  periphery.validate();
  const CrossbarLayout& lay = state.program.layout;
  const double alpha = periphery.volts_per_unit();
  const double beta = state.program.w_max / kGSpan;  // V per uA

  double e_volts = u * alpha;
  if (periphery.dac_bits > 0)
    e_volts = quantize(e_volts, QuantSpec::fixed_range(periphery.dac_bits, periphery.v_max));
  if (std::abs(e_volts) > periphery.v_max) {
    e_volts = std::clamp(e_volts, -periphery.v_max, periphery.v_max);
    ++state.clip_events;
  }

  Vec v = Vec::Zero(lay.rows);
  sign_split(e_volts, v[0], v[1]);  // real input; imaginary rows stay 0
  for (int k = 0; k < lay.n; ++k) {
    const Complex s = state.state_voltage[k];
    sign_split(s.real(), v[lay.state_row0() + 4 * k], v[lay.state_row0() + 4 * k + 1]);
    sign_split(s.imag(), v[lay.state_row0() + 4 * k + 2], v[lay.state_row0() + 4 * k + 3]);
  }

  const Vec i = xbar_vmm(state, v, periphery.v_max);

  const QuantSpec adc = QuantSpec::fixed_range(std::max(periphery.adc_bits, 2), periphery.v_max);
  for (int k = 0; k < lay.n; ++k) {
    double vr = beta * (i[4 * k] - i[4 * k + 1]);
    double vi = beta * (i[4 * k + 2] - i[4 * k + 3]);
    if (std::abs(vr) > periphery.v_max) ++state.clip_events;
    if (std::abs(vi) > periphery.v_max) ++state.clip_events;
    vr = std::clamp(vr, -periphery.v_max, periphery.v_max);
    vi = std::clamp(vi, -periphery.v_max, periphery.v_max);
    if (periphery.adc_bits > 0) {
      vr = quantize(vr, adc);
      vi = quantize(vi, adc);
    }
    state.state_voltage[k] = Complex(vr, vi);
  }

  const int oc = lay.output_col0();
  const double yr = beta * (i[oc] - i[oc + 1]) / alpha;
  const double yi = beta * (i[oc + 2] - i[oc + 3]) / alpha;
  return {yr, yi};
}

DeployedModel::DeployedModel(const ModelParams& p, const QuantMap& q, const DeviceModel& dev,
                             const PeripheryModel& periphery, std::uint64_t seed,
                             int n_arrays)
    : periphery_(periphery) {
  p.validate();
  periphery_.validate();
  if (p.config.h > n_arrays)
    throw ConfigError("deploy: model needs " + std::to_string(p.config.h) +
                      " arrays but only " + std::to_string(n_arrays) + " are available");

  EffectiveModel m = make_effective(p, q);
  encoder_w_ = m.encoder_w;
  encoder_b_ = m.encoder_b;
  mixer_w_ = m.mixer_w;
  mixer_b_ = m.mixer_b;
  decoder_w_ = m.decoder_w;
  decoder_b_ = m.decoder_b;

  CrossbarLayout layout;
  layout.n = p.config.n;
  for (Index i = 0; i < p.config.h; ++i) {
    ConductanceProgram cp = map_kernel(m.kernels[i], layout);
    arrays_.push_back(program(cp, dev, derive_seed(seed, "array", i)));
  }
}

Vec DeployedModel::forward(const Vec& u) {
  const Index len = u.size();
  const auto h = static_cast<Index>(arrays_.size());
  if (len < 1) throw ConfigError("deploy forward: empty input sequence");

  // Crossbar outputs lag one step; an extra drain step recovers y[len-1].
  Mat y(len, h);
  for (Index i = 0; i < h; ++i) {
    XbarState& xb = arrays_[i];
    xb.reset_state();
    for (Index t = 0; t < len; ++t) {
      const double e = encoder_w_[i] * u[t] + encoder_b_[i];
      const Complex out = xbar_kernel_step(xb, periphery_, e);
      if (t > 0) y(t - 1, i) = out.real();
    }
    y(len - 1, i) = xbar_kernel_step(xb, periphery_, 0.0).real();
  }

  Vec pooled = Vec::Zero(h);
  for (Index t = 0; t < len; ++t) {
    const Vec mix = mixer_w_ * y.row(t).transpose() + mixer_b_;
    pooled += mix.unaryExpr([](double v) { return gelu(v); });
  }
  pooled /= static_cast<double>(len);
  return decoder_w_ * pooled + decoder_b_;
}

double DeployedModel::accuracy(const std::vector<Sequence>& split) {
  if (split.empty()) return 0.0;
  int correct = 0;
  for (const auto& s : split) {
    Index best = 0;
    forward(s.samples).maxCoeff(&best);
    if (static_cast<int>(best) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

std::vector<int> DeployedModel::predictions(const std::vector<Sequence>& split) {
  std::vector<int> out;
  out.reserve(split.size());
  for (const auto& s : split) {
    Index best = 0;
    forward(s.samples).maxCoeff(&best);
    out.push_back(static_cast<int>(best));
  }
  return out;
}

long DeployedModel::clip_events() const {
  long total = 0;
  for (const auto& a : arrays_) total += a.clip_events;
  return total;
}

std::vector<std::vector<std::pair<int, int>>> DeployedModel::stuck_devices() const {
  std::vector<std::vector<std::pair<int, int>>> out;
  for (const auto& a : arrays_) out.push_back(a.stuck);
  return out;
}

void DeployedModel::restore_stuck_devices() {
  for (auto& a : arrays_) {
    const auto devices = a.stuck;
    a.restore_devices(devices);
  }
}

}  // namespace s4xbar
