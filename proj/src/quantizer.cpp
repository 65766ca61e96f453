#include "s4xbar/quantizer.hpp"

#include <algorithm>

namespace s4xbar {

void QuantSpec::validate() const {
  if (bits < 2) throw ConfigError("QuantSpec: bits must be >= 2, got " + std::to_string(bits));
  if (mode == QuantMode::Fixed && !(f_scale > 0.0))
    throw ConfigError("QuantSpec: fixed mode requires f_scale > 0");
}

double quantize(double x, const QuantSpec& spec) {
  if (spec.mode == QuantMode::Off)
    throw ConfigError("quantize: spec.mode is off");
  if (!std::isfinite(x)) throw NumericError("quantize: non-finite input");
  spec.validate();
  const double n = spec.n_levels();
  const double k = std::clamp(std::round(x * n / spec.f_scale), -n, n);
  return k * spec.f_scale / n;
}

QuantSpec resolve_dynamic(const QuantSpec& spec, double max_abs) {
  if (spec.mode != QuantMode::Dynamic) return spec;
  if (!std::isfinite(max_abs)) throw NumericError("resolve_dynamic: non-finite range");
  QuantSpec s = spec;
  s.mode = QuantMode::Fixed;
  s.f_scale = max_abs > 0.0 ? max_abs : 1.0;
  return s;
}

void quantize_complex_pair(Vec& re, Vec& im, const QuantSpec& spec) {
  if (spec.mode == QuantMode::Off) return;
  const double max_abs =
      std::max(re.size() > 0 ? re.cwiseAbs().maxCoeff() : 0.0,
               im.size() > 0 ? im.cwiseAbs().maxCoeff() : 0.0);
  const QuantSpec s = resolve_dynamic(spec, max_abs);
  re = quantize_tensor(re, s);
  im = quantize_tensor(im, s);
}

const QuantSpec& quant_spec_for(const QuantMap& q, const std::string& name) {
  static const QuantSpec off = QuantSpec::off();
  auto it = q.find(name);
  return it == q.end() ? off : it->second;
}

}  // namespace s4xbar
