#include <catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "cwm/cli.hpp"

using namespace cwm;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("cwm_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static inline int counter = 0;
};

}  // namespace

TEST_CASE("defaults match the documented values") {
  EsnParams p;
  CHECK(p.n_neurons == 1000);
  CHECK(p.sparsity == 0.5);
  CHECK(p.spectral_radius == 0.1);
  CHECK(p.noise_std == 0.0);
  CHECK(p.input_dim == 2);
  CHECK(p.output_dim == 1);
  TrainConfig tc;
  CHECK(tc.ridge == 1e-4);
  CHECK(tc.washout == 100);
  CHECK(tc.n_train_steps == 25000);
  CHECK(tc.teacher_forcing);
  ControllerPolicy policy;
  CHECK(policy.collect_len == 100);
  CHECK(policy.aperture == 10.0);
  CHECK(policy.release_on_trigger);
  TaskSpec ts;
  CHECK(ts.n_levels == 11);
  CHECK(ts.trigger_prob == 0.01);
}

TEST_CASE("cli usage errors") {
  CHECK(cli_dispatch({}) == 1);
  CHECK(cli_dispatch({"bogus"}) == 1);
  CHECK(cli_dispatch({"train", "--no-such-flag"}) == 1);
  CHECK(cli_dispatch({"experiment", "frobnicate", "--out", "/tmp/x"}) == 1);
}

TEST_CASE("cli train/bank/run/inspect pipeline") {
  TempDir dir;
  const std::string model = dir.file("m.cwm");
  const std::string bank = dir.file("b.cwm");
  const std::string csv = dir.file("session.csv");

  REQUIRE(cli_dispatch({"train", "--neurons", "40", "--steps", "1500", "--seed", "7",
                        "--trigger-prob", "0.02", "--out", model}) == 0);
  REQUIRE(std::filesystem::exists(model));

  SECTION("same seed gives identical model files") {
    const std::string model2 = dir.file("m2.cwm");
    REQUIRE(cli_dispatch({"train", "--neurons", "40", "--steps", "1500", "--seed", "7",
                          "--trigger-prob", "0.02", "--out", model2}) == 0);
    std::ifstream a(model, std::ios::binary), b(model2, std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string bb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    REQUIRE(ba == bb);
  }

  REQUIRE(cli_dispatch({"bank", "--model", model, "--levels", "11", "--collect", "20",
                        "--out", bank}) == 0);
  REQUIRE(std::filesystem::exists(bank));

  REQUIRE(cli_dispatch({"run", "--model", model, "--bank", bank, "--policy", "snap",
                        "--steps", "300", "--csv", csv}) == 0);
  std::ifstream f(csv);
  std::string header;
  std::getline(f, header);
  CHECK(header == "step,V,T,y,phase,conceptor_tag");
  long lines = 0;
  for (std::string line; std::getline(f, line);) ++lines;
  CHECK(lines == 300);

  SECTION("inspect prints bank metadata with 11 tags") {
    // smoke: inspect exits 0 on both container kinds
    CHECK(cli_dispatch({"inspect", "--file", bank}) == 0);
    CHECK(cli_dispatch({"inspect", "--file", model}) == 0);
  }

  SECTION("snap without bank is a usage error") {
    CHECK(cli_dispatch({"run", "--model", model, "--policy", "snap", "--csv", csv}) == 1);
  }

  SECTION("missing model file is a data error") {
    CHECK(cli_dispatch({"run", "--model", dir.file("none.cwm"), "--policy", "none",
                        "--csv", csv}) == 2);
  }

  SECTION("corrupt container is a data error") {
    const std::string bad = dir.file("bad.cwm");
    std::ofstream out(bad, std::ios::binary);
    out << "XXXX not a container";
    out.close();
    CHECK(cli_dispatch({"inspect", "--file", bad}) == 2);
  }
}

TEST_CASE("cli config file with flag override") {
  TempDir dir;
  const std::string cfg_path = dir.file("config.json");
  const std::string model = dir.file("m.cwm");
  {
    std::ofstream f(cfg_path);
    f << R"({"train": {"neurons": 40, "steps": 1500, "seed": 3, "trigger_prob": 0.02,
              "out": ")" << model << R"("}})";
  }
  REQUIRE(cli_dispatch({"train", "--config", cfg_path}) == 0);
  REQUIRE(std::filesystem::exists(model));

  // flag overrides config: a different seed gives a different file
  const std::string model2 = dir.file("m2.cwm");
  REQUIRE(cli_dispatch({"train", "--config", cfg_path, "--seed", "4", "--out", model2}) == 0);
  std::ifstream a(model, std::ios::binary), b(model2, std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string bb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(ba != bb);

  SECTION("missing config file is a data error") {
    CHECK(cli_dispatch({"train", "--config", dir.file("none.json")}) == 2);
  }
}

TEST_CASE("cli experiment produces the output tree") {
  TempDir dir;
  const std::string cfg_path = dir.file("exp.json");
  {
    std::ofstream f(cfg_path);
    f << R"({"experiment": {"n_neurons": 40, "train_steps": 1200, "trigger_prob": 0.02,
             "collect_len": 15, "relax_steps": 200, "relax_window": 80, "n_levels": 11,
             "horizon": 300}})";
  }
  REQUIRE(cli_dispatch({"experiment", "aperture", "--config", cfg_path, "--out",
                        (dir.path / "out").string(), "--seeds", "3"}) == 0);
  CHECK(std::filesystem::exists(dir.path / "out" / "aperture" / "3" / "aperture.csv"));
  CHECK(std::filesystem::exists(dir.path / "out" / "aperture" / "3" / "config.json"));
}

TEST_CASE("cli numerical failure maps to exit 3") {
  TempDir dir;
  // ridge 0 with fewer states than neurons makes the normal matrix singular
  CHECK(cli_dispatch({"train", "--neurons", "60", "--steps", "30", "--washout", "2",
                      "--ridge", "0", "--out", dir.file("m.cwm")}) == 3);
}
