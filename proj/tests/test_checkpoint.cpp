#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "s4xbar/checkpoint.hpp"
#include "s4xbar/trainer.hpp"

using namespace s4xbar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("s4xbar_ckpt_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("checkpoint roundtrip preserves every tensor exactly") {
  TempDir tmp;
  ModelConfig cfg;
  cfg.h = 3;
  cfg.n = 7;
  const ModelParams p = init_model(cfg, 2024);
  const QuantMap q = make_quant_map(3, "1");

  save_checkpoint(tmp.file("m.json"), p, q);
  const auto [back, qback] = load_checkpoint(tmp.file("m.json"));

  CHECK(back.config.h == cfg.h);
  CHECK(back.config.n == cfg.n);
  CHECK((back.encoder_w.array() == p.encoder_w.array()).all());
  CHECK((back.mixer_w.array() == p.mixer_w.array()).all());
  CHECK((back.decoder_w.array() == p.decoder_w.array()).all());
  for (int i = 0; i < cfg.h; ++i) {
    CHECK(back.kernels[i].log_dt == p.kernels[i].log_dt);
    CHECK((back.kernels[i].rho_re.array() == p.kernels[i].rho_re.array()).all());
    CHECK((back.kernels[i].a_im.array() == p.kernels[i].a_im.array()).all());
    CHECK((back.kernels[i].c_re.array() == p.kernels[i].c_re.array()).all());
    CHECK((back.kernels[i].c_im.array() == p.kernels[i].c_im.array()).all());
    CHECK((back.kernels[i].b_re.array() == 1.0).all());
  }
  CHECK(qback.at("a").bits == 3);
  CHECK(qback.at("a").mode == QuantMode::Fixed);
  CHECK(qback.at("encoder").mode == QuantMode::Dynamic);
}

TEST_CASE("checkpoint rejects unsupported versions and malformed files") {
  TempDir tmp;
  {
    std::ofstream f(tmp.file("bad.json"));
    f << "{\"version\": 99}";
  }
  CHECK_THROWS_AS(load_checkpoint(tmp.file("bad.json")), DataError);
  {
    std::ofstream f(tmp.file("junk.json"));
    f << "not json";
  }
  CHECK_THROWS_AS(load_checkpoint(tmp.file("junk.json")), DataError);
  CHECK_THROWS_AS(load_checkpoint(tmp.file("missing.json")), DataError);
}

TEST_CASE("conductance program roundtrip") {
  TempDir tmp;
  CrossbarLayout layout;
  layout.n = 5;
  const DiscreteKernel dk = zoh_discretize(init_kernel(5, 3));
  std::vector<ConductanceProgram> programs = {map_kernel(dk, layout)};
  save_programs(tmp.file("p.json"), programs);
  const auto back = load_programs(tmp.file("p.json"));
  REQUIRE(back.size() == 1);
  CHECK(back[0].w_max == programs[0].w_max);
  CHECK(back[0].layout.n == 5);
  CHECK((back[0].target - programs[0].target).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("train report serializes") {
  TempDir tmp;
  TrainReport r;
  r.seed = 9;
  r.train_loss = {1.0, 0.5};
  r.train_accuracy = {0.5, 0.75};
  r.test_accuracy = {0.5, 1.0};
  r.final_test_accuracy = 1.0;
  save_train_report(tmp.file("r.json"), r);
  std::ifstream f(tmp.file("r.json"));
  std::string text((std::istreambuf_iterator<char>(f)), {});
  CHECK(text.find("final_test_accuracy") != std::string::npos);
}
