#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into the captured output.
Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + TERRADEEP_CLI + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "terradeep_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("catalog, version and usage errors") {
  const Result zoo = run("zoo");
  CHECK(zoo.code == 0);
  const auto catalog = nlohmann::json::parse(zoo.out);
  CHECK(catalog.size() == 9);

  CHECK(run("--version").code == 0);
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("train --size 32 --learner slip-svm").code == 1);
  CHECK(run("train --task image --mode cooked --learner image-dnn").code == 1);

  const Result unknown = run("train --learner slip-xgb --per-class 60 --out " + workdir("unknown").string());
  CHECK(unknown.code == 1);
  CHECK(unknown.out.find("slip-svm") != std::string::npos);
}

TEST_CASE("synth, train and eval round trip") {
  const fs::path dir = workdir("roundtrip");
  const std::string data = (dir / "data").string();
  REQUIRE(run("synth --task slip --per-class 80 --seed 3 --out " + data).code == 0);
  const fs::path csv = dir / "data" / "slip.csv";
  CHECK(slurp(csv).rfind("t,torque,acc_x,pitch,acc_z,slip\n", 0) == 0);

  const std::string model_dir = (dir / "model").string();
  const Result train =
      run("train --learner slip-svm --mode filtered --data " + csv.string() + " --out " + model_dir);
  REQUIRE(train.code == 0);
  CHECK(fs::exists(dir / "model" / "model.tdml"));
  CHECK(slurp(dir / "model" / "curve.csv") == "epoch,accuracy\n");

  const Result eval = run("eval --model " + (dir / "model" / "model.tdml").string() + " --data " + csv.string() +
                          " --out " + (dir / "eval").string());
  REQUIRE(eval.code == 0);
  CHECK(eval.out.rfind("accuracy ", 0) == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "eval" / "report.json"));
  CHECK(report["learner"] == "slip-svm");
  CHECK(report["input_mode"] == "filtered");
  CHECK(report["runs"].size() == 1);

  // Data problems exit with 2.
  std::ofstream(dir / "broken.tdml") << "TDML garbage";
  CHECK(run("eval --model " + (dir / "broken.tdml").string() + " --data " + csv.string()).code == 2);
  CHECK(run("train --learner slip-svm --data " + (dir / "missing.csv").string()).code == 2);
  std::ofstream(dir / "bad.csv") << "t,torque\n0,1\n";
  CHECK(run("train --learner slip-svm --data " + (dir / "bad.csv").string()).code == 2);
  CHECK(run("train --learner slip-svm --synth --data " + csv.string()).code == 1);
}

TEST_CASE("image corpus and features") {
  const fs::path dir = workdir("images");
  REQUIRE(run("synth --task image --classes flat,rocks --per-class 2 --size 64 --out " + (dir / "img").string())
              .code == 0);
  CHECK(fs::exists(dir / "img" / "rocks" / "00001.pgm"));
  const Result feats = run("features --task image --size 64 --data " + (dir / "img").string() + " --out " +
                           (dir / "feat").string());
  REQUIRE(feats.code == 0);
  const std::string text = slurp(dir / "feat" / "features.csv");
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 5);  // header + four images
  CHECK(run("features --task slip --per-class 60 --out " + (dir / "slipfeat").string()).code == 0);
}

TEST_CASE("benchmark grid with a config file") {
  const fs::path dir = workdir("bench");
  std::ofstream(dir / "cfg.json") << R"({"task": "slip", "learner": "slip-dnn", "per_class": 60, "epochs": 2,
                                          "runs": 2, "seed": 5})";
  const std::string out = (dir / "out").string();
  // Flags win over the file.
  const Result r = run("benchmark --config " + (dir / "cfg.json").string() + " --learner slip-mlp --out " + out);
  REQUIRE(r.code == 0);
  const std::string summary = slurp(dir / "out" / "summary.csv");
  CHECK(summary.find("slip-mlp,raw,") != std::string::npos);
  CHECK(summary.find("slip-mlp,filtered,") != std::string::npos);
  CHECK(summary.find("slip-dnn") == std::string::npos);
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "slip-mlp_raw" / "report.json"));
  CHECK(report["runs"].size() == 2);
  CHECK(report["runs"][0]["epoch_curve"].size() == 2);
  CHECK(fs::exists(dir / "out" / "slip-mlp_raw" / "model_run0.tdml"));
  CHECK(fs::exists(dir / "out" / "timing.json"));

  CHECK(run("benchmark --learner image-dnn --task slip --per-class 60 --out " + out).code == 1);
  std::ofstream(dir / "typo.json") << R"({"epochz": 3})";
  CHECK(run("benchmark --config " + (dir / "typo.json").string()).code == 1);
  CHECK(run("benchmark --per-class 60 --runs 1 --learner slip-svm --out " + out, "TERRADEEP_THREADS=zero").code == 1);
}
