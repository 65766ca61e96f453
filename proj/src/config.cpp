#include "s4xbar/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "s4xbar/rng.hpp"

namespace s4xbar {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

QuantMode parse_mode(const std::string& s, const std::string& where) {
  if (s == "off") return QuantMode::Off;
  if (s == "fixed") return QuantMode::Fixed;
  if (s == "dynamic") return QuantMode::Dynamic;
  throw ConfigError("config: unknown quant mode '" + s + "' in " + where);
}

QuantMap parse_quant(const json& j) {
  QuantMap q;
  const std::set<std::string> names(std::begin(kQuantTensorNames),
                                    std::end(kQuantTensorNames));
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!names.count(it.key()))
      throw ConfigError("config: unknown quant tensor '" + it.key() + "'");
    reject_unknown(it.value(), {"bits", "f_scale", "mode"}, "quant." + it.key());
    QuantSpec spec;
    spec.mode = parse_mode(it.value().value("mode", "fixed"), "quant." + it.key());
    spec.bits = it.value().value("bits", 8);
    spec.f_scale = it.value().value("f_scale", 1.0);
    if (spec.mode != QuantMode::Off) spec.validate();
    q[it.key()] = spec;
  }
  return q;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }

  reject_unknown(j,
                 {"version", "experiment_id", "model", "train", "quant", "data", "device",
                  "periphery", "sweep", "out_dir", "threads", "ci_profile",
                  "noise_checkpoints"},
                 "top level");
  if (!j.contains("version")) throw ConfigError("config: missing required 'version'");

  ExperimentConfig cfg;
  cfg.version = j.at("version").get<int>();
  if (cfg.version != 1)
    throw ConfigError("config: unsupported version " + std::to_string(cfg.version));
  cfg.experiment_id = j.value("experiment_id", cfg.experiment_id);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.ci_profile = j.value("ci_profile", cfg.ci_profile);

  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, {"n_layers", "h", "n", "n_classes", "sequence_length"}, "model");
    cfg.model.n_layers = m.value("n_layers", cfg.model.n_layers);
    cfg.model.h = m.value("h", cfg.model.h);
    cfg.model.n = m.value("n", cfg.model.n);
    cfg.model.n_classes = m.value("n_classes", cfg.model.n_classes);
    cfg.model.sequence_length = m.value("sequence_length", cfg.model.sequence_length);
    cfg.model.validate();
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, {"learning_rate", "epochs", "batch_size", "seed"}, "train");
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.seed = t.value("seed", cfg.train.seed);
  }
  if (j.contains("quant")) cfg.train.quant = parse_quant(j.at("quant"));
  cfg.train.validate();

  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown(d,
                   {"source", "path", "n_per_class", "seed", "class0_cycles",
                    "class1_cycles", "n_bursts", "decay_tau", "amp_jitter", "freq_jitter",
                    "distractor_level", "noise_std", "test_fraction"},
                   "data");
    cfg.data.source = d.value("source", cfg.data.source);
    cfg.data.path = d.value("path", cfg.data.path);
    cfg.data.n_per_class = d.value("n_per_class", cfg.data.n_per_class);
    cfg.data.seed = d.value("seed", cfg.data.seed);
    cfg.data.synth.class0_cycles = d.value("class0_cycles", cfg.data.synth.class0_cycles);
    cfg.data.synth.class1_cycles = d.value("class1_cycles", cfg.data.synth.class1_cycles);
    cfg.data.synth.n_bursts = d.value("n_bursts", cfg.data.synth.n_bursts);
    cfg.data.synth.decay_tau = d.value("decay_tau", cfg.data.synth.decay_tau);
    cfg.data.synth.amp_jitter = d.value("amp_jitter", cfg.data.synth.amp_jitter);
    cfg.data.synth.freq_jitter = d.value("freq_jitter", cfg.data.synth.freq_jitter);
    cfg.data.synth.distractor_level = d.value("distractor_level", cfg.data.synth.distractor_level);
    cfg.data.synth.noise_std = d.value("noise_std", cfg.data.synth.noise_std);
    cfg.data.synth.test_fraction = d.value("test_fraction", cfg.data.synth.test_fraction);
    if (cfg.data.source != "synth" && cfg.data.source != "cache" &&
        cfg.data.source != "manifest")
      throw ConfigError("config: data.source must be synth|cache|manifest");
  }

  if (j.contains("device")) {
    const json& d = j.at("device");
    reject_unknown(d, {"sigma_write", "p_stuck", "g_stuck", "g_min", "g_max"}, "device");
    cfg.device.sigma_write = d.value("sigma_write", cfg.device.sigma_write);
    cfg.device.p_stuck = d.value("p_stuck", cfg.device.p_stuck);
    cfg.device.g_stuck = d.value("g_stuck", cfg.device.g_stuck);
    cfg.device.g_min = d.value("g_min", cfg.device.g_min);
    cfg.device.g_max = d.value("g_max", cfg.device.g_max);
    cfg.device.validate();
  }

  if (j.contains("periphery")) {
    const json& p = j.at("periphery");
    reject_unknown(p, {"v_max", "state_range", "dac_bits", "adc_bits"}, "periphery");
    cfg.periphery.v_max = p.value("v_max", cfg.periphery.v_max);
    cfg.periphery.state_range = p.value("state_range", cfg.periphery.state_range);
    cfg.periphery.dac_bits = p.value("dac_bits", cfg.periphery.dac_bits);
    cfg.periphery.adc_bits = p.value("adc_bits", cfg.periphery.adc_bits);
    cfg.periphery.validate();
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    reject_unknown(s, {"bits", "f_scales", "sigmas", "instantiations"}, "sweep");
    if (s.contains("bits")) cfg.sweep.bits = s.at("bits").get<std::vector<int>>();
    if (s.contains("f_scales")) {
      cfg.sweep.f_scales.clear();
      for (const auto& f : s.at("f_scales"))
        cfg.sweep.f_scales.push_back(f.is_string() ? f.get<std::string>()
                                                   : json(f).dump());
    }
    if (s.contains("sigmas")) cfg.sweep.sigmas = s.at("sigmas").get<std::vector<double>>();
    cfg.sweep.instantiations = s.value("instantiations", cfg.sweep.instantiations);
    cfg.sweep.noise_seeds = cfg.sweep.instantiations;
  }

  if (j.contains("noise_checkpoints")) {
    for (auto it = j.at("noise_checkpoints").begin(); it != j.at("noise_checkpoints").end();
         ++it)
      cfg.noise_checkpoints.emplace_back(std::stoi(it.key()), it.value().get<std::string>());
  }

  if (cfg.ci_profile) {
    cfg.sweep.instantiations = std::min(cfg.sweep.instantiations, 10);
    cfg.sweep.noise_seeds = cfg.sweep.instantiations;
  }
  if (cfg.threads < 1) throw ConfigError("config: threads must be >= 1");
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["version"] = version;
  j["experiment_id"] = experiment_id;
  j["model"] = {{"n_layers", model.n_layers}, {"h", model.h}, {"n", model.n},
                {"n_classes", model.n_classes}, {"sequence_length", model.sequence_length}};
  j["train"] = {{"learning_rate", train.learning_rate}, {"epochs", train.epochs},
                {"batch_size", train.batch_size}, {"seed", train.seed}};
  json q = json::object();
  for (const auto& [name, spec] : train.quant)
    q[name] = {{"bits", spec.bits}, {"f_scale", spec.f_scale},
               {"mode", spec.mode == QuantMode::Off
                            ? "off"
                            : (spec.mode == QuantMode::Fixed ? "fixed" : "dynamic")}};
  j["quant"] = q;
  j["data"] = {{"source", data.source}, {"path", data.path},
               {"n_per_class", data.n_per_class}, {"seed", data.seed},
               {"class0_cycles", data.synth.class0_cycles},
               {"class1_cycles", data.synth.class1_cycles},
               {"n_bursts", data.synth.n_bursts},
               {"decay_tau", data.synth.decay_tau},
               {"amp_jitter", data.synth.amp_jitter},
               {"freq_jitter", data.synth.freq_jitter},
               {"distractor_level", data.synth.distractor_level},
               {"noise_std", data.synth.noise_std},
               {"test_fraction", data.synth.test_fraction}};
  j["device"] = {{"sigma_write", device.sigma_write}, {"p_stuck", device.p_stuck},
                 {"g_stuck", device.g_stuck}, {"g_min", device.g_min},
                 {"g_max", device.g_max}};
  j["periphery"] = {{"v_max", periphery.v_max}, {"state_range", periphery.state_range},
                    {"dac_bits", periphery.dac_bits}, {"adc_bits", periphery.adc_bits}};
  j["sweep"] = {{"bits", sweep.bits}, {"f_scales", sweep.f_scales},
                {"sigmas", sweep.sigmas}, {"instantiations", sweep.instantiations}};
  j["out_dir"] = out_dir;
  j["threads"] = threads;
  j["ci_profile"] = ci_profile;
  json nc = json::object();
  for (const auto& [bits, path] : noise_checkpoints) nc[std::to_string(bits)] = path;
  j["noise_checkpoints"] = nc;
  return j.dump();
}

std::uint64_t ExperimentConfig::config_hash() const {
  return seed_tag(std::string_view(canonical_json()));
}

Dataset load_data(const DataConfig& cfg) {
  if (cfg.source == "synth") return synth_dataset(cfg.n_per_class, cfg.seed, cfg.synth);
  if (cfg.source == "cache") return load_dataset(cfg.path);
  if (cfg.source == "manifest") return build_dataset(DatasetManifest::load(cfg.path));
  throw ConfigError("load_data: unknown source '" + cfg.source + "'");
}

}  // namespace s4xbar
