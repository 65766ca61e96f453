#include "s4xbar/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace s4xbar {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;
constexpr int kProgramVersion = 1;

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& a) {
  Vec v(a.size());
  Index i = 0;
  for (const auto& x : a) v[i++] = x.get<double>();
  return v;
}

json mat_to_json(const Mat& m) {  // row-major flat
  json a = json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

Mat mat_from_json(const json& a, Index rows, Index cols) {
  if (static_cast<Index>(a.size()) != rows * cols)
    throw DataError("checkpoint: tensor size mismatch");
  Mat m(rows, cols);
  Index i = 0;
  for (const auto& x : a) {
    m(i / cols, i % cols) = x.get<double>();
    ++i;
  }
  return m;
}

// Kernel tensors stack over kernels row-major.
json stacked(const std::vector<KernelParams>& ks, Vec KernelParams::*field) {
  json a = json::array();
  for (const auto& k : ks)
    for (Index i = 0; i < (k.*field).size(); ++i) a.push_back((k.*field)[i]);
  return a;
}

void unstack(const json& a, std::vector<KernelParams>& ks, Vec KernelParams::*field,
             Index n) {
  if (static_cast<Index>(a.size()) != static_cast<Index>(ks.size()) * n)
    throw DataError("checkpoint: kernel tensor size mismatch");
  Index i = 0;
  for (auto& k : ks) {
    (k.*field).resize(n);
    for (Index j = 0; j < n; ++j) (k.*field)[j] = a[i++].get<double>();
  }
}

std::string mode_name(QuantMode m) {
  switch (m) {
    case QuantMode::Off: return "off";
    case QuantMode::Fixed: return "fixed";
    case QuantMode::Dynamic: return "dynamic";
  }
  return "off";
}

QuantMode mode_from_name(const std::string& s) {
  if (s == "off") return QuantMode::Off;
  if (s == "fixed") return QuantMode::Fixed;
  if (s == "dynamic") return QuantMode::Dynamic;
  throw DataError("checkpoint: unknown quant mode '" + s + "'");
}

json quant_to_json(const QuantMap& q) {
  json out = json::object();
  for (const auto& [name, spec] : q)
    out[name] = {{"bits", spec.bits}, {"f_scale", spec.f_scale}, {"mode", mode_name(spec.mode)}};
  return out;
}

QuantMap quant_from_json(const json& j) {
  QuantMap q;
  for (auto it = j.begin(); it != j.end(); ++it) {
    QuantSpec spec;
    spec.bits = it.value().at("bits").get<int>();
    spec.f_scale = it.value().at("f_scale").get<double>();
    spec.mode = mode_from_name(it.value().at("mode").get<std::string>());
    q[it.key()] = spec;
  }
  return q;
}

json load_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string(what) + ": cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError(std::string(what) + ": parse error in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j, const char* what) {
  std::ofstream out(path);
  if (!out) throw DataError(std::string(what) + ": cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& p, const QuantMap& q) {
  p.validate();
  json j;
  j["version"] = kCheckpointVersion;
  j["config"] = {{"n_layers", p.config.n_layers}, {"h", p.config.h},
                 {"n", p.config.n},               {"n_classes", p.config.n_classes},
                 {"sequence_length", p.config.sequence_length}};
  json log_dt = json::array();
  for (const auto& k : p.kernels) log_dt.push_back(k.log_dt);
  j["params"] = {{"log_dt", log_dt},
                 {"rho_re", stacked(p.kernels, &KernelParams::rho_re)},
                 {"a_im", stacked(p.kernels, &KernelParams::a_im)},
                 {"c_re", stacked(p.kernels, &KernelParams::c_re)},
                 {"c_im", stacked(p.kernels, &KernelParams::c_im)},
                 {"encoder_w", vec_to_json(p.encoder_w)},
                 {"encoder_b", vec_to_json(p.encoder_b)},
                 {"mixer_w", mat_to_json(p.mixer_w)},
                 {"mixer_b", vec_to_json(p.mixer_b)},
                 {"decoder_w", mat_to_json(p.decoder_w)},
                 {"decoder_b", vec_to_json(p.decoder_b)}};
  j["quant"] = quant_to_json(q);
  write_json_file(path, j, "checkpoint");
}

std::pair<ModelParams, QuantMap> load_checkpoint(const std::string& path) {
  const json j = load_json_file(path, "checkpoint");
  if (j.value("version", -1) != kCheckpointVersion)
    throw DataError("checkpoint: unsupported version in " + path);

  ModelParams p;
  const json& cfg = j.at("config");
  p.config.n_layers = cfg.at("n_layers").get<int>();
  p.config.h = cfg.at("h").get<int>();
  p.config.n = cfg.at("n").get<int>();
  p.config.n_classes = cfg.at("n_classes").get<int>();
  p.config.sequence_length = cfg.at("sequence_length").get<int>();
  p.config.validate();

  const json& t = j.at("params");
  p.kernels.resize(p.config.h);
  const json& log_dt = t.at("log_dt");
  if (static_cast<int>(log_dt.size()) != p.config.h)
    throw DataError("checkpoint: log_dt size mismatch");
  for (int i = 0; i < p.config.h; ++i) p.kernels[i].log_dt = log_dt[i].get<double>();
  unstack(t.at("rho_re"), p.kernels, &KernelParams::rho_re, p.config.n);
  unstack(t.at("a_im"), p.kernels, &KernelParams::a_im, p.config.n);
  unstack(t.at("c_re"), p.kernels, &KernelParams::c_re, p.config.n);
  unstack(t.at("c_im"), p.kernels, &KernelParams::c_im, p.config.n);
  for (auto& k : p.kernels) k.b_re = Vec::Ones(p.config.n);
  p.encoder_w = vec_from_json(t.at("encoder_w"));
  p.encoder_b = vec_from_json(t.at("encoder_b"));
  p.mixer_w = mat_from_json(t.at("mixer_w"), p.config.h, p.config.h);
  p.mixer_b = vec_from_json(t.at("mixer_b"));
  p.decoder_w = mat_from_json(t.at("decoder_w"), p.config.n_classes, p.config.h);
  p.decoder_b = vec_from_json(t.at("decoder_b"));
  p.validate();

  return {std::move(p), quant_from_json(j.value("quant", json::object()))};
}

void save_train_report(const std::string& path, const TrainReport& report) {
  json j;
  j["version"] = 1;
  j["seed"] = report.seed;
  j["train_loss"] = report.train_loss;
  j["train_accuracy"] = report.train_accuracy;
  j["test_accuracy"] = report.test_accuracy;
  j["final_test_accuracy"] = report.final_test_accuracy;
  j["wall_seconds"] = report.wall_seconds;
  write_json_file(path, j, "train report");
}

void save_programs(const std::string& path, const std::vector<ConductanceProgram>& programs) {
  json j;
  j["version"] = kProgramVersion;
  json arr = json::array();
  for (const auto& cp : programs) {
    json pj;
    pj["layout"] = {{"rows", cp.layout.rows}, {"cols", cp.layout.cols}, {"n", cp.layout.n}};
    pj["w_max"] = cp.w_max;
    pj["target_uS"] = mat_to_json(cp.target);
    arr.push_back(std::move(pj));
  }
  j["programs"] = std::move(arr);
  write_json_file(path, j, "program");
}

std::vector<ConductanceProgram> load_programs(const std::string& path) {
  const json j = load_json_file(path, "program");
  if (j.value("version", -1) != kProgramVersion)
    throw DataError("program: unsupported version in " + path);
  std::vector<ConductanceProgram> out;
  for (const auto& pj : j.at("programs")) {
    ConductanceProgram cp;
    cp.layout.rows = pj.at("layout").at("rows").get<int>();
    cp.layout.cols = pj.at("layout").at("cols").get<int>();
    cp.layout.n = pj.at("layout").at("n").get<int>();
    cp.layout.validate();
    cp.w_max = pj.at("w_max").get<double>();
    cp.target = mat_from_json(pj.at("target_uS"), cp.layout.rows, cp.layout.cols);
    out.push_back(std::move(cp));
  }
  return out;
}

}  // namespace s4xbar
