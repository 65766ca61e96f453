// Command-line front end: dataset ingestion, QAT training, quantization and
// noise sweeps, crossbar mapping and deployment experiments.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "s4xbar/checkpoint.hpp"
#include "s4xbar/config.hpp"
#include "s4xbar/harness.hpp"
#include "s4xbar/rng.hpp"
#include "s4xbar/trainer.hpp"

namespace fs = std::filesystem;
using namespace s4xbar;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool ci_profile = false;
};

ExperimentConfig resolve_config(const GlobalOpts& g) {
  ExperimentConfig cfg =
      g.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config_path);
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.seed_set) {
    cfg.train.seed = g.seed;
    cfg.data.seed = g.seed;
  }
  if (g.threads > 0) cfg.threads = g.threads;
  if (g.ci_profile) {
    cfg.ci_profile = true;
    cfg.sweep.instantiations = std::min(cfg.sweep.instantiations, 10);
  }
  return cfg;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized S4D training and memristive crossbar deployment simulator"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOpts g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)");
  app.add_option("--out-dir", g.out_dir, "Output directory override");
  app.add_option("--seed", g.seed, "Seed override")->each([&](const std::string&) {
    g.seed_set = true;
  });
  app.add_option("--threads", g.threads, "Worker threads for independent runs");
  app.add_flag("--ci-profile", g.ci_profile, "Reduced instantiation counts for CI");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Build a dataset cache from a WAV manifest");
  std::string manifest_path, ingest_out;
  ingest->add_option("--manifest", manifest_path, "CSV manifest path,label,split")
      ->required();
  ingest->add_option("--out", ingest_out, "Output dataset cache")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic two-tone dataset");
  int synth_n = 200;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  synth->add_option("--n", synth_n, "Sequences per class");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output dataset cache")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model per the config");
  std::string train_out;
  train_cmd->add_option("--out", train_out, "Output checkpoint path")->required();

  // sweep-quant
  auto* sweep_cmd = app.add_subcommand("sweep-quant", "Bit width x dynamic range sweep");
  std::string sweep_bits = "2,3,4,5,8", sweep_fscales = "1,3,10,dynamic", sweep_out;
  sweep_cmd->add_option("--bits", sweep_bits, "Comma list of bit widths");
  sweep_cmd->add_option("--fscales", sweep_fscales, "Comma list of ranges or 'dynamic'");
  sweep_cmd->add_option("--out", sweep_out, "Results CSV")->required();

  // map
  auto* map_cmd = app.add_subcommand("map", "Map a checkpoint onto conductance programs");
  std::string map_ckpt, map_out;
  map_cmd->add_option("--checkpoint", map_ckpt, "Model checkpoint")->required();
  map_cmd->add_option("--out", map_out, "Program JSON")->required();

  // deploy
  auto* deploy_cmd = app.add_subcommand("deploy", "Evaluate crossbar deployments");
  std::string deploy_ckpt, deploy_data, deploy_out;
  double deploy_sigma = 0.0;
  int deploy_seeds = 100;
  deploy_cmd->add_option("--checkpoint", deploy_ckpt, "Model checkpoint")->required();
  deploy_cmd->add_option("--data", deploy_data, "Dataset cache")->required();
  deploy_cmd->add_option("--sigma", deploy_sigma, "Write-noise sigma (uS)");
  deploy_cmd->add_option("--seeds", deploy_seeds, "Instantiations");
  deploy_cmd->add_option("--out", deploy_out, "Accuracies CSV")->required();

  // noise-sweep
  auto* noise_cmd =
      app.add_subcommand("noise-sweep", "Write-noise robustness study from config");

  // pipeline
  auto* pipeline_cmd =
      app.add_subcommand("pipeline", "ingest -> train -> map -> deploy -> noise study");

  // export-heatmap
  auto* heat_cmd = app.add_subcommand("export-heatmap", "Plot-ready conductance grids");
  std::string heat_program, heat_out;
  heat_cmd->add_option("--program", heat_program, "Program JSON")->required();
  heat_cmd->add_option("--out", heat_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*ingest) {
      Dataset ds = build_dataset(DatasetManifest::load(manifest_path));
      save_dataset(ingest_out, ds);
      std::cout << "wrote " << ingest_out << " (" << ds.train.size() << " train, "
                << ds.test.size() << " test)\n";
      for (const auto& [label, count] : ds.class_counts(ds.train))
        std::cout << "  train class " << label << ": " << count << "\n";
      for (const auto& [label, count] : ds.class_counts(ds.test))
        std::cout << "  test class " << label << ": " << count << "\n";
    } else if (*synth) {
      ExperimentConfig cfg = resolve_config(g);
      Dataset ds = synth_dataset(synth_n, synth_seed, cfg.data.synth);
      save_dataset(synth_out, ds);
      std::cout << "wrote " << synth_out << " (" << ds.train.size() << " train, "
                << ds.test.size() << " test)\n";
    } else if (*train_cmd) {
      ExperimentConfig cfg = resolve_config(g);
      Dataset ds = load_data(cfg.data);
      auto [params, report] = train(ds, cfg.model, cfg.train);
      save_checkpoint(train_out, params, cfg.train.quant);
      save_train_report(fs::path(train_out).replace_extension(".report.json").string(),
                        report);
      std::cout << "best test accuracy " << report.final_test_accuracy << " ("
                << report.wall_seconds << " s)\n";
    } else if (*sweep_cmd) {
      ExperimentConfig cfg = resolve_config(g);
      Dataset ds = load_data(cfg.data);
      std::vector<int> bits;
      for (const auto& b : split_csv(sweep_bits)) bits.push_back(std::stoi(b));
      auto results = sweep_quantization(ds, cfg.model, bits, split_csv(sweep_fscales),
                                        cfg.train);
      ResultWriter writer(sweep_out);
      const std::string stamp = iso_timestamp();
      for (const auto& r : results) {
        writer.append({cfg.experiment_id, r.bits, r.f_scale, 0.0, r.seed, "test_accuracy",
                       r.accuracy, stamp});
        std::cout << "bits=" << r.bits << " f_scale=" << r.f_scale << " -> " << r.accuracy
                  << "\n";
      }
    } else if (*map_cmd) {
      auto [params, quant] = load_checkpoint(map_ckpt);
      EffectiveModel m = make_effective(params, quant);
      CrossbarLayout layout;
      layout.n = params.config.n;
      std::vector<ConductanceProgram> programs;
      for (const auto& dk : m.kernels) programs.push_back(map_kernel(dk, layout));
      save_programs(map_out, programs);
      std::cout << "wrote " << map_out << " (" << programs.size() << " kernels)\n";
    } else if (*deploy_cmd) {
      ExperimentConfig cfg = resolve_config(g);
      auto [params, quant] = load_checkpoint(deploy_ckpt);
      Dataset ds = load_dataset(deploy_data);
      DeviceModel dev = cfg.device;
      dev.sigma_write = deploy_sigma;
      ResultWriter writer(deploy_out);
      const std::string stamp = iso_timestamp();
      const int bits = quant.count("a") ? quant.at("a").bits : 0;
      std::vector<double> accs(deploy_seeds, 0.0);
      for (int k = 0; k < deploy_seeds; ++k) {
        DeployedModel deployed(params, quant, dev, cfg.periphery,
                               derive_seed(cfg.train.seed, "deploy", k));
        accs[k] = deployed.accuracy(ds.test);
        writer.append({cfg.experiment_id, bits, "1", deploy_sigma,
                       derive_seed(cfg.train.seed, "deploy", k), "test_accuracy", accs[k],
                       stamp});
      }
      std::cout << "median accuracy " << median(accs) << " over " << deploy_seeds
                << " instantiations\n";
    } else if (*noise_cmd) {
      ExperimentConfig cfg = resolve_config(g);
      auto points = run_noise_sweep(cfg);
      for (const auto& pt : points)
        std::cout << "bits=" << pt.bits << " sigma=" << pt.sigma
                  << " median=" << pt.median << " [" << pt.q25 << ", " << pt.q75 << "]\n";
    } else if (*pipeline_cmd) {
      ExperimentConfig cfg = resolve_config(g);
      PipelineSummary sum = run_full_pipeline(cfg);
      std::cout << "software accuracy:        " << sum.software_accuracy << "\n"
                << "ideal crossbar accuracy:  " << sum.ideal_crossbar_accuracy << "\n"
                << "noisy crossbar median:    " << sum.noisy_median << " [" << sum.noisy_q25
                << ", " << sum.noisy_q75 << "]\n";
    } else if (*heat_cmd) {
      export_heatmap(load_programs(heat_program), heat_out);
      std::cout << "wrote grids under " << heat_out << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
