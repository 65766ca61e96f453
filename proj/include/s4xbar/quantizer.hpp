#pragma once

#include <cmath>
#include <map>
#include <string>

#include "s4xbar/common.hpp"

namespace s4xbar {

enum class QuantMode { Off, Fixed, Dynamic };

// Bit width plus dynamic range for one quantized tensor. A fixed f_scale is a
// training-time constant shared by all components of the tensor (real and
// imaginary parts of a complex tensor included); dynamic mode recomputes
// f_scale per tensor as max|x|.
struct QuantSpec {
  int bits = 8;
  double f_scale = 1.0;
  QuantMode mode = QuantMode::Off;

  static QuantSpec off() { return {8, 1.0, QuantMode::Off}; }
  static QuantSpec fixed_range(int bits, double f_scale) {
    return {bits, f_scale, QuantMode::Fixed};
  }
  static QuantSpec dynamic_range(int bits) { return {bits, 1.0, QuantMode::Dynamic}; }

  // Symmetric lattice with 2*n_levels + 1 representable values including zero.
  double n_levels() const { return std::exp2(bits - 1); }

  void validate() const;
};

// Maps x to the nearest lattice point k * f_scale/n_levels with
// |k| <= n_levels; values beyond +-f_scale clamp to the range edge.
// Rounds half away from zero. spec.mode must not be Off.
double quantize(double x, const QuantSpec& spec);

// Resolves a dynamic spec against the observed max magnitude (an all-zero
// tensor falls back to f_scale = 1). Fixed and Off specs pass through.
QuantSpec resolve_dynamic(const QuantSpec& spec, double max_abs);

// Elementwise quantization of an Eigen vector/matrix expression. Dynamic mode
// resolves f_scale over this tensor alone; Off returns the input unchanged.
template <typename Derived>
typename Derived::PlainObject quantize_tensor(const Eigen::MatrixBase<Derived>& xs,
                                              const QuantSpec& spec) {
  if (spec.mode == QuantMode::Off) return xs;
  const QuantSpec s = resolve_dynamic(spec, xs.size() > 0 ? xs.cwiseAbs().maxCoeff() : 0.0);
  return xs.unaryExpr([&s](double x) { return quantize(x, s); });
}

// Quantizes the real/imaginary components of one complex tensor with a shared
// dynamic range, as required when both components feed the same analog signal
// path.
void quantize_complex_pair(Vec& re, Vec& im, const QuantSpec& spec);

using QuantMap = std::map<std::string, QuantSpec>;

// Tensor names understood by the trainer and the checkpoint format.
inline constexpr const char* kQuantTensorNames[] = {"a", "c", "encoder", "mixer",
                                                    "decoder", "state"};

// Missing entries mean Off.
const QuantSpec& quant_spec_for(const QuantMap& q, const std::string& name);

}  // namespace s4xbar
