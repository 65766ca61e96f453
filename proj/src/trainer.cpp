#include "s4xbar/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "s4xbar/rng.hpp"

namespace s4xbar {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  for (const auto& [name, spec] : quant)
    if (spec.mode != QuantMode::Off) spec.validate();
}

EffectiveModel make_effective(const ModelParams& p, const QuantMap& q) {
  const QuantSpec& qa = quant_spec_for(q, "a");
  const QuantSpec& qc = quant_spec_for(q, "c");
  const QuantSpec& qe = quant_spec_for(q, "encoder");
  const QuantSpec& qm = quant_spec_for(q, "mixer");
  const QuantSpec& qd = quant_spec_for(q, "decoder");

  EffectiveModel m;
  m.state_quant = quant_spec_for(q, "state");
  if (m.state_quant.mode == QuantMode::Dynamic)
    throw ConfigError("state quantization must be fixed or off");
  m.encoder_w = quantize_tensor(p.encoder_w, qe);
  m.encoder_b = quantize_tensor(p.encoder_b, qe);
  m.mixer_w = quantize_tensor(p.mixer_w, qm);
  m.mixer_b = quantize_tensor(p.mixer_b, qm);
  m.decoder_w = quantize_tensor(p.decoder_w, qd);
  m.decoder_b = quantize_tensor(p.decoder_b, qd);

  for (const auto& k : p.kernels) {
    Vec a_re = (-k.rho_re.array().exp()).matrix();
    Vec a_im = k.a_im;
    if (qa.mode == QuantMode::Fixed) {
      // Fixed dynamic range: one constant f_scale shared by both components.
      a_re = quantize_tensor(a_re, qa);
      a_im = quantize_tensor(a_im, qa);
    } else if (qa.mode == QuantMode::Dynamic) {
      // Conventional QAT: each component scaled to its own max.
      a_re = quantize_tensor(a_re, qa);
      a_im = quantize_tensor(a_im, qa);
    }
    Vec c_re = k.c_re;
    Vec c_im = k.c_im;
    if (qc.mode == QuantMode::Dynamic) {
      quantize_complex_pair(c_re, c_im, qc);
    } else if (qc.mode == QuantMode::Fixed) {
      c_re = quantize_tensor(c_re, qc);
      c_im = quantize_tensor(c_im, qc);
    }

    CVec a(a_re.size()), c(c_re.size());
    for (Index i = 0; i < a_re.size(); ++i) a[i] = Complex(a_re[i], a_im[i]);
    for (Index i = 0; i < c_re.size(); ++i) c[i] = Complex(c_re[i], c_im[i]);

    const double dt = std::exp(k.log_dt);
    m.kernels.push_back(zoh_discretize(dt, a, k.b_re, c));
    m.a_quant.push_back(std::move(a));
    m.dt.push_back(dt);
  }
  return m;
}

namespace {

// Shared step loop; caches are optional.
Vec run_forward(const EffectiveModel& m, const Vec& u, ForwardCache* cache) {
  const QuantSpec& qs = m.state_quant;
  const Index len = u.size();
  const auto h = static_cast<Index>(m.kernels.size());
  if (len < 1) throw ConfigError("forward: empty input sequence");

  if (cache) {
    cache->u = u;
    cache->encoder_out.resize(len, h);
    cache->kernel_out.resize(len, h);
    cache->mixer_pre.resize(len, h);
    cache->state_re.assign(h, Mat(len, m.kernels.empty() ? 0 : m.kernels[0].state_dim()));
    cache->state_im.assign(h, Mat(len, m.kernels.empty() ? 0 : m.kernels[0].state_dim()));
  }

  std::vector<CVec> x(h);
  for (Index i = 0; i < h; ++i) x[i] = CVec::Zero(m.kernels[i].state_dim());

  Vec pooled = Vec::Zero(h);
  Vec y(h), mix(h);
  for (Index t = 0; t < len; ++t) {
    for (Index i = 0; i < h; ++i) {
      const DiscreteKernel& dk = m.kernels[i];
      const double e = m.encoder_w[i] * u[t] + m.encoder_b[i];
      const Index n = dk.state_dim();
      Complex acc = 0.0;
      for (Index j = 0; j < n; ++j) {
        Complex xj = dk.a_bar[j] * x[i][j] + dk.b_bar[j] * e;
        if (qs.mode != QuantMode::Off)
          xj = Complex(quantize(xj.real(), qs), quantize(xj.imag(), qs));
        x[i][j] = xj;
        acc += dk.c_bar[j] * xj;
      }
      y[i] = acc.real();
      if (cache) {
        cache->encoder_out(t, i) = e;
        cache->kernel_out(t, i) = y[i];
        for (Index j = 0; j < n; ++j) {
          cache->state_re[i](t, j) = x[i][j].real();
          cache->state_im[i](t, j) = x[i][j].imag();
        }
      }
    }
    mix = m.mixer_w * y + m.mixer_b;
    if (cache) cache->mixer_pre.row(t) = mix.transpose();
    pooled += mix.unaryExpr([](double v) { return gelu(v); });
  }
  pooled /= static_cast<double>(len);
  Vec scores = m.decoder_w * pooled + m.decoder_b;
  if (cache) {
    cache->pooled = pooled;
    cache->scores = scores;
  }
  return scores;
}

}  // namespace

Vec forward_effective(const EffectiveModel& m, const Vec& u) {
  return run_forward(m, u, nullptr);
}

Vec forward_quantized(const ModelParams& p, const QuantMap& q, const Vec& u) {
  p.validate();
  EffectiveModel m = make_effective(p, q);
  return run_forward(m, u, nullptr);
}

ForwardCache forward_with_cache(const ModelParams& p, const EffectiveModel& m, const Vec& u) {
  (void)p;
  ForwardCache cache;
  run_forward(m, u, &cache);
  return cache;
}

Gradients Gradients::zero(const ModelParams& p) {
  const Index h = p.config.h;
  const Index n = p.config.n;
  Gradients g;
  g.encoder_w = Vec::Zero(h);
  g.encoder_b = Vec::Zero(h);
  g.log_dt = Vec::Zero(h);
  g.rho_re = Mat::Zero(h, n);
  g.a_im = Mat::Zero(h, n);
  g.c_re = Mat::Zero(h, n);
  g.c_im = Mat::Zero(h, n);
  g.mixer_w = Mat::Zero(h, h);
  g.mixer_b = Vec::Zero(h);
  g.decoder_w = Mat::Zero(p.config.n_classes, h);
  g.decoder_b = Vec::Zero(p.config.n_classes);
  return g;
}

void Gradients::add_scaled(const Gradients& g, double s) {
  encoder_w += s * g.encoder_w;
  encoder_b += s * g.encoder_b;
  log_dt += s * g.log_dt;
  rho_re += s * g.rho_re;
  a_im += s * g.a_im;
  c_re += s * g.c_re;
  c_im += s * g.c_im;
  mixer_w += s * g.mixer_w;
  mixer_b += s * g.mixer_b;
  decoder_w += s * g.decoder_w;
  decoder_b += s * g.decoder_b;
}

bool Gradients::all_finite() const {
  auto ok = [](const auto& t) { return t.allFinite(); };
  return ok(encoder_w) && ok(encoder_b) && ok(log_dt) && ok(rho_re) && ok(a_im) &&
         ok(c_re) && ok(c_im) && ok(mixer_w) && ok(mixer_b) && ok(decoder_w) &&
         ok(decoder_b);
}

double softmax_cross_entropy(const Vec& scores, int target, Vec* dscores) {
  const double mx = scores.maxCoeff();
  const double lse = mx + std::log((scores.array() - mx).exp().sum());
  if (dscores) {
    *dscores = (scores.array() - lse).exp().matrix();
    (*dscores)[target] -= 1.0;
  }
  return lse - scores[target];
}

double backward(const ModelParams& p, const EffectiveModel& m, const ForwardCache& cache,
                int target, Gradients& grads, double weight) {
  const Index len = cache.u.size();
  const Index h = p.config.h;
  const double inv_len = 1.0 / static_cast<double>(len);

  Vec dscores;
  const double loss = softmax_cross_entropy(cache.scores, target, &dscores);
  dscores *= weight;

  grads.decoder_w += dscores * cache.pooled.transpose();
  grads.decoder_b += dscores;
  const Vec dpooled = m.decoder_w.transpose() * dscores;

  // Mixer/GELU are position-wise; the pooled gradient spreads uniformly.
  Mat gy(len, h);
  Vec dmix(h);
  for (Index t = 0; t < len; ++t) {
    for (Index i = 0; i < h; ++i)
      dmix[i] = dpooled[i] * inv_len * gelu_grad(cache.mixer_pre(t, i));
    grads.mixer_w += dmix * cache.kernel_out.row(t);
    grads.mixer_b += dmix;
    gy.row(t) = (m.mixer_w.transpose() * dmix).transpose();
  }

  // BPTT through each kernel. Complex adjoints x_adj hold
  // (dL/dRe x) + i (dL/dIm x); for holomorphic maps the chain rule is
  // multiplication by the conjugated derivative.
  for (Index i = 0; i < h; ++i) {
    const DiscreteKernel& dk = m.kernels[i];
    const CVec& a_q = m.a_quant[i];
    const double dt = m.dt[i];
    const Index n = dk.state_dim();
    const Mat& xr = cache.state_re[i];
    const Mat& xi = cache.state_im[i];

    CVec x_adj = CVec::Zero(n);
    CVec g_a_bar = CVec::Zero(n);
    CVec g_b_bar = CVec::Zero(n);
    Vec g_c_re = Vec::Zero(n);
    Vec g_c_im = Vec::Zero(n);
    double g_enc_w = 0.0, g_enc_b = 0.0;

    for (Index t = len - 1; t >= 0; --t) {
      const double gy_t = gy(t, i);
      const double e_t = cache.encoder_out(t, i);
      double ge_t = 0.0;
      for (Index j = 0; j < n; ++j) {
        const Complex adj =
            gy_t * std::conj(dk.c_bar[j]) + std::conj(dk.a_bar[j]) * x_adj[j];
        x_adj[j] = adj;
        const Complex x_prev =
            t > 0 ? Complex(xr(t - 1, j), xi(t - 1, j)) : Complex(0.0, 0.0);
        g_a_bar[j] += std::conj(x_prev) * adj;
        g_b_bar[j] += e_t * adj;
        ge_t += dk.b_bar[j].real() * adj.real() + dk.b_bar[j].imag() * adj.imag();
        g_c_re[j] += gy_t * xr(t, j);
        g_c_im[j] -= gy_t * xi(t, j);
      }
      g_enc_w += ge_t * cache.u[t];
      g_enc_b += ge_t;
    }

    // Through discretization back to (a, dt): a_bar = exp(dt a),
    // b_bar = (a_bar - 1) b / a.
    double g_dt = 0.0;
    const Vec& rho = p.kernels[i].rho_re;
    for (Index j = 0; j < n; ++j) {
      const Complex a = a_q[j];
      const double b = p.kernels[i].b_re[j];
      const Complex da_bar_da = dt * dk.a_bar[j];
      const Complex db_bar_da =
          a == 0.0 ? Complex(0.5 * dt * dt * b, 0.0) : (dt * dk.a_bar[j] * b - dk.b_bar[j]) / a;
      const Complex g_a =
          std::conj(da_bar_da) * g_a_bar[j] + std::conj(db_bar_da) * g_b_bar[j];
      g_dt += (std::conj(a * dk.a_bar[j]) * g_a_bar[j]).real() +
              (std::conj(dk.a_bar[j] * b) * g_b_bar[j]).real();
      // STE through the A lattice, then Re(a) = -exp(rho).
      grads.rho_re(i, j) += g_a.real() * (-std::exp(rho[j]));
      grads.a_im(i, j) += g_a.imag();
    }
    grads.log_dt[i] += g_dt * dt;
    grads.c_re.row(i) += g_c_re.transpose();
    grads.c_im.row(i) += g_c_im.transpose();
    grads.encoder_w[i] += g_enc_w;
    grads.encoder_b[i] += g_enc_b;
  }
  return loss;
}

namespace {

struct AdamState {
  Gradients m, v;
  long step = 0;
};

void adam_update(ModelParams& p, const Gradients& g, AdamState& st, const TrainConfig& cfg) {
  ++st.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  const double lr = cfg.learning_rate;

  auto upd = [&](auto&& param, const auto& grad, auto&& m, auto&& v) {
    m = b1 * m + (1.0 - b1) * grad;
    v = (b2 * v.array() + (1.0 - b2) * grad.array().square()).matrix();
    param.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.adam_eps);
  };

  upd(p.encoder_w, g.encoder_w, st.m.encoder_w, st.v.encoder_w);
  upd(p.encoder_b, g.encoder_b, st.m.encoder_b, st.v.encoder_b);
  upd(p.mixer_w, g.mixer_w, st.m.mixer_w, st.v.mixer_w);
  upd(p.mixer_b, g.mixer_b, st.m.mixer_b, st.v.mixer_b);
  upd(p.decoder_w, g.decoder_w, st.m.decoder_w, st.v.decoder_w);
  upd(p.decoder_b, g.decoder_b, st.m.decoder_b, st.v.decoder_b);

  const Index h = p.config.h;
  for (Index i = 0; i < h; ++i) {
    KernelParams& k = p.kernels[i];
    // scalar Adam for log_dt
    double& mm = st.m.log_dt[i];
    double& vv = st.v.log_dt[i];
    mm = b1 * mm + (1.0 - b1) * g.log_dt[i];
    vv = b2 * vv + (1.0 - b2) * g.log_dt[i] * g.log_dt[i];
    k.log_dt -= lr * (mm / bc1) / (std::sqrt(vv / bc2) + cfg.adam_eps);

    upd(k.rho_re.transpose(), g.rho_re.row(i), st.m.rho_re.row(i), st.v.rho_re.row(i));
    upd(k.a_im.transpose(), g.a_im.row(i), st.m.a_im.row(i), st.v.a_im.row(i));
    upd(k.c_re.transpose(), g.c_re.row(i), st.m.c_re.row(i), st.v.c_re.row(i));
    upd(k.c_im.transpose(), g.c_im.row(i), st.m.c_im.row(i), st.v.c_im.row(i));
  }
}

int argmax(const Vec& v) {
  Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

double evaluate_accuracy(const ModelParams& p, const QuantMap& q,
                         const std::vector<Sequence>& split) {
  if (split.empty()) return 0.0;
  EffectiveModel m = make_effective(p, q);
  int correct = 0;
  for (const auto& s : split) {
    const Vec scores = run_forward(m, s.samples, nullptr);
    if (argmax(scores) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

std::pair<ModelParams, TrainReport> train(const Dataset& ds, const ModelConfig& config,
                                          const TrainConfig& cfg) {
  cfg.validate();
  config.validate();
  if (ds.train.empty()) throw DataError("train: empty training split");
  if (ds.class_counts(ds.train).size() < 2)
    throw DataError("train: training split must contain at least 2 classes");

  const auto t_start = std::chrono::steady_clock::now();
  ModelParams params = init_model(config, derive_seed(cfg.seed, "init"));
  AdamState adam{Gradients::zero(params), Gradients::zero(params), 0};

  TrainReport report;
  report.seed = cfg.seed;

  ModelParams best = params;
  double best_acc = -1.0;

  std::vector<Index> order(ds.train.size());
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    int seen = 0, correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);

      Gradients grads = Gradients::zero(params);
      double batch_loss = 0.0;
      try {
        EffectiveModel m = make_effective(params, cfg.quant);
        for (std::size_t k = start; k < stop; ++k) {
          const Sequence& s = ds.train[order[k]];
          ForwardCache cache = forward_with_cache(params, m, s.samples);
          batch_loss += backward(params, m, cache, s.label, grads, inv_batch);
          if (argmax(cache.scores) == s.label) ++correct;
          ++seen;
        }
      } catch (const NumericError& e) {
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        throw TrainingDivergence("train: diverged at epoch " + std::to_string(epoch) +
                                     ", step " + std::to_string(adam.step) + ": " + e.what(),
                                 report);
      }
      batch_loss *= inv_batch;
      loss_sum += batch_loss * static_cast<double>(stop - start);

      if (!std::isfinite(batch_loss) || !grads.all_finite()) {
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        throw TrainingDivergence(
            "train: non-finite loss/gradient at epoch " + std::to_string(epoch) +
                ", step " + std::to_string(adam.step),
            report);
      }
      adam_update(params, grads, adam, cfg);
    }

    report.train_loss.push_back(loss_sum / static_cast<double>(seen));
    report.train_accuracy.push_back(static_cast<double>(correct) /
                                    static_cast<double>(seen));
    const double test_acc = evaluate_accuracy(params, cfg.quant, ds.test);
    report.test_accuracy.push_back(test_acc);
    if (test_acc > best_acc) {
      best_acc = test_acc;
      best = params;
    }
  }

  report.final_test_accuracy = best_acc;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(best), report};
}

QuantMap make_quant_map(int bits, const std::string& f_scale) {
  QuantMap q;
  if (f_scale == "dynamic") {
    q["a"] = QuantSpec::dynamic_range(bits);
  } else {
    q["a"] = QuantSpec::fixed_range(bits, std::stod(f_scale));
  }
  q["c"] = QuantSpec::fixed_range(bits, 1.0);
  q["encoder"] = QuantSpec::dynamic_range(8);
  q["mixer"] = QuantSpec::dynamic_range(8);
  q["decoder"] = QuantSpec::dynamic_range(8);
  return q;
}

std::vector<SweepResult> sweep_quantization(const Dataset& ds, const ModelConfig& config,
                                            const std::vector<int>& bit_list,
                                            const std::vector<std::string>& f_scale_list,
                                            const TrainConfig& base_cfg) {
  if (bit_list.empty() || f_scale_list.empty())
    throw ConfigError("sweep_quantization: empty sweep axis");
  std::vector<SweepResult> results;
  for (int bits : bit_list) {
    for (const auto& fs : f_scale_list) {
      SweepResult r;
      r.bits = bits;
      r.f_scale = fs;
      r.seed = derive_seed(base_cfg.seed, "sweep", bits, std::string_view(fs));
      try {
        TrainConfig cfg = base_cfg;
        cfg.seed = r.seed;
        cfg.quant = make_quant_map(bits, fs);
        auto [params, report] = train(ds, config, cfg);
        r.accuracy = report.final_test_accuracy;
      } catch (const std::exception&) {
        r.accuracy = std::numeric_limits<double>::quiet_NaN();
      }
      results.push_back(std::move(r));
    }
  }
  return results;
}

}  // namespace s4xbar
