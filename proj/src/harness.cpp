#include "s4xbar/harness.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "s4xbar/rng.hpp"
#include "s4xbar/trainer.hpp"

namespace s4xbar {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int n_workers = std::min(threads, count);
  pool.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

void summarize(NoisePoint& pt) {
  std::vector<double> sorted = pt.accuracies;
  std::sort(sorted.begin(), sorted.end());
  pt.median = quantile_sorted(sorted, 0.5);
  pt.q25 = quantile_sorted(sorted, 0.25);
  pt.q75 = quantile_sorted(sorted, 0.75);
}

}  // namespace

std::vector<NoisePoint> run_noise_sweep(const ExperimentConfig& cfg) {
  if (cfg.noise_checkpoints.empty())
    throw ConfigError("noise sweep: no checkpoints configured");

  // Validate every checkpoint before any simulation.
  std::vector<std::pair<int, std::pair<ModelParams, QuantMap>>> models;
  for (const auto& [bits, path] : cfg.noise_checkpoints) {
    if (!fs::exists(path))
      throw DataError("noise sweep: missing checkpoint for " + std::to_string(bits) +
                      " bits: " + path);
    models.emplace_back(bits, load_checkpoint(path));
  }

  const Dataset ds = load_data(cfg.data);
  ensure_dir(cfg.out_dir);
  ResultWriter raw((fs::path(cfg.out_dir) / "noise_raw.csv").string());
  ResultWriter summary((fs::path(cfg.out_dir) / "noise_summary.csv").string());
  const std::string stamp = iso_timestamp();

  std::vector<NoisePoint> points;
  for (const auto& [bits, model] : models) {
    for (double sigma : cfg.sweep.sigmas) {
      NoisePoint pt;
      pt.bits = bits;
      pt.sigma = sigma;
      pt.accuracies.assign(cfg.sweep.instantiations, 0.0);

      DeviceModel dev = cfg.device;
      dev.sigma_write = sigma;
      const auto& [params, quant] = model;
      parallel_for(cfg.sweep.instantiations, cfg.threads, [&](int k) {
        DeployedModel deployed(params, quant, dev, cfg.periphery,
                               derive_seed(cfg.train.seed, "noise", bits, sigma, k));
        pt.accuracies[k] = deployed.accuracy(ds.test);
      });
      summarize(pt);

      for (int k = 0; k < cfg.sweep.instantiations; ++k)
        raw.append({cfg.experiment_id, bits, "1", sigma,
                    derive_seed(cfg.train.seed, "noise", bits, sigma, k), "test_accuracy",
                    pt.accuracies[k], stamp});
      summary.append({cfg.experiment_id, bits, "1", sigma, 0, "median", pt.median, stamp});
      summary.append({cfg.experiment_id, bits, "1", sigma, 0, "q25", pt.q25, stamp});
      summary.append({cfg.experiment_id, bits, "1", sigma, 0, "q75", pt.q75, stamp});
      points.push_back(std::move(pt));
    }
  }
  write_run_manifest(cfg, "noise-sweep",
                     {(fs::path(cfg.out_dir) / "noise_raw.csv").string(),
                      (fs::path(cfg.out_dir) / "noise_summary.csv").string()});
  return points;
}

PipelineSummary run_full_pipeline(const ExperimentConfig& cfg) {
  ensure_dir(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  PipelineSummary sum;
  std::string stage = "ingest";
  try {
    const Dataset ds = load_data(cfg.data);
    save_dataset((out / "data.bin").string(), ds);

    stage = "train";
    auto [params, report] = train(ds, cfg.model, cfg.train);
    sum.checkpoint_path = (out / "checkpoint.json").string();
    save_checkpoint(sum.checkpoint_path, params, cfg.train.quant);
    save_train_report((out / "train_report.json").string(), report);
    sum.software_accuracy = evaluate_accuracy(params, cfg.train.quant, ds.test);

    stage = "map";
    EffectiveModel m = make_effective(params, cfg.train.quant);
    CrossbarLayout layout;
    layout.n = cfg.model.n;
    std::vector<ConductanceProgram> programs;
    for (const auto& dk : m.kernels) programs.push_back(map_kernel(dk, layout));
    sum.program_path = (out / "program.json").string();
    save_programs(sum.program_path, programs);
    export_heatmap(programs, (out / "heatmap").string());

    stage = "deploy-ideal";
    PeripheryModel ideal = cfg.periphery;
    ideal.adc_bits = 0;
    ideal.dac_bits = 0;
    DeployedModel ideal_model(params, cfg.train.quant, DeviceModel{0.0, 0.0}, ideal,
                              derive_seed(cfg.train.seed, "deploy-ideal"));
    sum.ideal_crossbar_accuracy = ideal_model.accuracy(ds.test);

    stage = "deploy-noisy";
    sum.noisy_accuracies.assign(cfg.sweep.instantiations, 0.0);
    parallel_for(cfg.sweep.instantiations, cfg.threads, [&](int k) {
      DeployedModel noisy(params, cfg.train.quant, cfg.device, cfg.periphery,
                          derive_seed(cfg.train.seed, "deploy-noisy", k));
      sum.noisy_accuracies[k] = noisy.accuracy(ds.test);
    });
    std::vector<double> sorted = sum.noisy_accuracies;
    std::sort(sorted.begin(), sorted.end());
    sum.noisy_median = quantile_sorted(sorted, 0.5);
    sum.noisy_q25 = quantile_sorted(sorted, 0.25);
    sum.noisy_q75 = quantile_sorted(sorted, 0.75);

    stage = "report";
    ResultWriter results((out / "pipeline_results.csv").string());
    const std::string stamp = iso_timestamp();
    const int bits = cfg.train.quant.count("a") ? cfg.train.quant.at("a").bits : 0;
    results.append({cfg.experiment_id, bits, "1", 0.0, cfg.train.seed, "software_accuracy",
                    sum.software_accuracy, stamp});
    results.append({cfg.experiment_id, bits, "1", 0.0, cfg.train.seed,
                    "ideal_crossbar_accuracy", sum.ideal_crossbar_accuracy, stamp});
    for (int k = 0; k < cfg.sweep.instantiations; ++k)
      results.append({cfg.experiment_id, bits, "1", cfg.device.sigma_write,
                      derive_seed(cfg.train.seed, "deploy-noisy", k),
                      "noisy_crossbar_accuracy", sum.noisy_accuracies[k], stamp});

    json j;
    j["version"] = 1;
    j["software_accuracy"] = sum.software_accuracy;
    j["ideal_crossbar_accuracy"] = sum.ideal_crossbar_accuracy;
    j["noisy_crossbar"] = {{"sigma_write", cfg.device.sigma_write},
                           {"accuracies", sum.noisy_accuracies},
                           {"median", sum.noisy_median},
                           {"q25", sum.noisy_q25},
                           {"q75", sum.noisy_q75}};
    std::ofstream js((out / "summary.json").string());
    js << j.dump(2) << "\n";

    write_run_manifest(cfg, "pipeline",
                       {(out / "data.bin").string(), sum.checkpoint_path, sum.program_path,
                        (out / "pipeline_results.csv").string(),
                        (out / "summary.json").string()});
  } catch (const std::exception& e) {
    throw NumericError("pipeline stage '" + stage + "' failed: " + e.what());
  }
  return sum;
}

void export_heatmap(const std::vector<ConductanceProgram>& programs,
                    const std::string& out_dir) {
  ensure_dir(out_dir);
  json overlay;
  overlay["version"] = 1;
  json kernels = json::array();
  for (std::size_t k = 0; k < programs.size(); ++k) {
    const ConductanceProgram& cp = programs[k];
    const std::string grid_path =
        (fs::path(out_dir) / ("kernel_" + std::to_string(k) + "_grid.csv")).string();
    std::ofstream grid(grid_path);
    if (!grid) throw DataError("heatmap: cannot write " + grid_path);
    for (int r = 0; r < cp.layout.rows; ++r) {
      for (int c = 0; c < cp.layout.cols; ++c) {
        if (c) grid << ',';
        grid << format_double(cp.target(r, c));
      }
      grid << "\n";
    }

    json blocks = json::array();
    for (int n = 0; n < cp.layout.n; ++n) {
      blocks.push_back({{"kind", "B"}, {"n", n}, {"row0", cp.layout.input_row0()},
                        {"col0", 4 * n}, {"rows", 4}, {"cols", 4}});
      blocks.push_back({{"kind", "A"}, {"n", n}, {"row0", cp.layout.state_row0() + 4 * n},
                        {"col0", 4 * n}, {"rows", 4}, {"cols", 4}});
      blocks.push_back({{"kind", "C"}, {"n", n}, {"row0", cp.layout.state_row0() + 4 * n},
                        {"col0", cp.layout.output_col0()}, {"rows", 4}, {"cols", 4}});
    }
    kernels.push_back({{"index", k}, {"w_max", cp.w_max}, {"grid", grid_path},
                       {"blocks", blocks}});
  }
  overlay["kernels"] = kernels;
  std::ofstream ov((fs::path(out_dir) / "overlay.json").string());
  if (!ov) throw DataError("heatmap: cannot write overlay.json");
  ov << overlay.dump(2) << "\n";
}

void write_run_manifest(const ExperimentConfig& cfg, const std::string& command,
                        const std::vector<std::string>& artifacts) {
  ensure_dir(cfg.out_dir);
  json j;
  j["version"] = 1;
  j["command"] = command;
  j["experiment_id"] = cfg.experiment_id;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(cfg.config_hash()));
  j["config_hash"] = hex;
  j["config"] = json::parse(cfg.canonical_json());
  j["seeds"] = {{"train", cfg.train.seed}, {"data", cfg.data.seed}};
  j["artifacts"] = artifacts;
  j["timestamp"] = iso_timestamp();
  std::ofstream out((fs::path(cfg.out_dir) / ("manifest_" + command + ".json")).string());
  if (!out) throw DataError("manifest: cannot write under " + cfg.out_dir);
  out << j.dump(2) << "\n";
}

}  // namespace s4xbar
