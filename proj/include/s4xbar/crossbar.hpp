#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "s4xbar/common.hpp"
#include "s4xbar/dataset.hpp"
#include "s4xbar/quantizer.hpp"
#include "s4xbar/ssm.hpp"

namespace s4xbar {

inline constexpr double kGOff = 7.0;    // uS
inline constexpr double kGOn = 200.0;   // uS
inline constexpr double kGSpan = kGOn - kGOff;

// Band layout of one kernel on a 64x64 array: four input rows on top, the
// B blocks along them, the A blocks on the diagonal of the state sub-array,
// and the C blocks in a four-column output band.
struct CrossbarLayout {
  int rows = 64;
  int cols = 64;
  int n = 14;  // states mapped on this array

  int input_row0() const { return 0; }
  int state_row0() const { return 4; }
  int state_col0() const { return 0; }
  int output_col0() const { return 4 * n; }

  void validate() const;
};

struct ConductanceProgram {
  Mat target;  // rows x cols, uS; unprogrammed devices are 0
  double w_max = 1.0;
  CrossbarLayout layout;

  // True for devices covered by an A/B/C block.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> programmed_mask() const;
};

struct DeviceModel {
  double sigma_write = 0.0;  // uS
  double p_stuck = 0.0;
  double g_stuck = 300.0;    // uS
  double g_min = 0.0;        // physical clip range
  double g_max = 300.0;

  void validate() const;
};

// Expected one to three permanently-high devices per kernel.
double default_stuck_probability(int n);

struct PeripheryModel {
  double v_max = 0.2;        // V
  double state_range = 8.0;  // |x| mapped onto +-v_max
  int dac_bits = 0;          // 0 = off
  int adc_bits = 8;          // 0 = off

  double volts_per_unit() const { return v_max / state_range; }
  void validate() const;
};

// A programmed array plus the analog state it carries between steps.
struct XbarState {
  ConductanceProgram program;
  Mat actual;                                // post write-noise/faults, uS
  std::vector<std::pair<int, int>> stuck;    // device coordinates
  CVec state_voltage;                        // N complex state values, V
  long clip_events = 0;

  void reset_state();
  // Clears the listed faults back to their programmed targets.
  void restore_devices(const std::vector<std::pair<int, int>>& devices);
};

// Real 2x2 embedding of complex multiplication: [[re, -im], [im, re]].
Eigen::Matrix2d expand_complex(Complex m);

// Differential pair for a signed weight; the span g_on - g_off carries |w| up
// to w_max.
std::pair<double, double> weight_to_pair(double w, double w_max);

// 4x4 conductance block combining the complex expansion with differential
// pairs. Column j collects sum_i block(i,j) * v_i, so the stored block is the
// transpose of the mathematical matrix acting on (v_r+, v_r-, v_i+, v_i-).
Eigen::Matrix4d expand_to_block(Complex m, double w_max);

// Reads the signed complex weight back from a block via differential sums.
Complex block_readout(const Eigen::Matrix4d& block, double w_max);

// Places a_bar on the state diagonal, b_bar along the input rows and c_bar in
// the output column band. w_max is the largest component magnitude.
ConductanceProgram map_kernel(const DiscreteKernel& dk, const CrossbarLayout& layout);

// Applies Gaussian write noise then independent stuck-at-g_stuck faults to
// every programmed device; deterministic in seed.
XbarState program(const ConductanceProgram& cp, const DeviceModel& dev, std::uint64_t seed);

// Column currents (uA) for a row voltage vector (V); ideal wires. Voltages
// beyond +-v_max clip and count.
Vec xbar_vmm(XbarState& state, const Vec& v, double v_max);

// One in-memory kernel step: drives the expanded input and state voltages,
// reads all columns once, converts state-column currents into next-state
// voltages and returns the (one step delayed) kernel output in model units.
Complex xbar_kernel_step(XbarState& state, const PeripheryModel& periphery, double u);

// Hybrid deployment: kernels on programmed arrays, encoder/mixer/decoder on
// the quantized digital path.
class DeployedModel {
 public:
  DeployedModel(const ModelParams& p, const QuantMap& q, const DeviceModel& dev,
                const PeripheryModel& periphery, std::uint64_t seed, int n_arrays = 3);

  // Class scores; evaluation API matches model_forward. Arrays run one extra
  // drain step so the delayed output sequence aligns exactly.
  Vec forward(const Vec& u);

  double accuracy(const std::vector<Sequence>& split);
  std::vector<int> predictions(const std::vector<Sequence>& split);

  std::vector<XbarState>& arrays() { return arrays_; }
  const PeripheryModel& periphery() const { return periphery_; }
  long clip_events() const;
  // All injected faults, across arrays.
  std::vector<std::vector<std::pair<int, int>>> stuck_devices() const;
  void restore_stuck_devices();

 private:
  PeripheryModel periphery_;
  Vec encoder_w_, encoder_b_;
  Mat mixer_w_;
  Vec mixer_b_;
  Mat decoder_w_;
  Vec decoder_b_;
  std::vector<XbarState> arrays_;
};

}  // namespace s4xbar
