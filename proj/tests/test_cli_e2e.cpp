#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "vaesurv/results.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = VAESURV_CLI_PATH;

struct Workspace {
  fs::path dir;
  Workspace()
      : dir(fs::temp_directory_path() / ("vaesurv_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  return j;
}

const std::string kTinyModelFlags =
    " --latent-dim 2 --hidden 8 --epochs 30 --patience 6 --batch-size 32";

}  // namespace

TEST_CASE("cli end to end: synth, train, eval, cv, compare") {
  Workspace ws;

  // synth writes the dataset triple
  REQUIRE(run("synth --n 140 --p 3 --censoring 0.25 --seed 7 --out " + ws.p("syn")) ==
          0);
  CHECK(fs::exists(ws.p("syn.csv")));
  CHECK(fs::exists(ws.p("syn.schema.json")));
  CHECK(fs::exists(ws.p("syn.truth.json")));

  // train writes a loadable model and history
  REQUIRE(run("train --dataset " + ws.p("syn.csv") + " --schema " +
              ws.p("syn.schema.json") + " --out " + ws.p("trained") + " --seed 3" +
              kTinyModelFlags) == 0);
  CHECK(fs::exists(ws.p("trained/model.json")));
  const auto hist = read_json(ws.p("trained/history.json"));
  CHECK(hist["best_epoch"].get<int>() < static_cast<int>(hist["val_elbo"].size()));

  // eval on the training data reproduces finite metrics and echoes the unit
  REQUIRE(run("eval --model " + ws.p("trained/model.json") + " --dataset " +
              ws.p("syn.csv") + " --schema " + ws.p("syn.schema.json") + " --out " +
              ws.p("evald")) == 0);
  const auto ev = read_json(ws.p("evald/eval.json"));
  CHECK(ev["c_index"].get<double>() > 0.0);
  CHECK(ev["time_unit"].get<std::string>() == "units");
  CHECK(fs::exists(ws.p("evald/predictions.csv")));

  // evaluating twice is deterministic
  REQUIRE(run("eval --model " + ws.p("trained/model.json") + " --dataset " +
              ws.p("syn.csv") + " --schema " + ws.p("syn.schema.json") + " --out " +
              ws.p("evald2")) == 0);
  CHECK(read_json(ws.p("evald2/eval.json")) == ev);

  // a mismatched schema is rejected
  {
    auto schema = read_json(ws.p("syn.schema.json"));
    schema["time_unit"] = "weeks";
    std::ofstream out(ws.p("other.schema.json"));
    out << schema.dump(2);
  }
  CHECK(run("eval --model " + ws.p("trained/model.json") + " --dataset " +
            ws.p("syn.csv") + " --schema " + ws.p("other.schema.json") + " --out " +
            ws.p("evalbad")) != 0);

  // cv produces a results file; rerunning overwrites it with identical
  // canonical content (only the meta block may differ)
  const std::string cv_args = "cv --dataset " + ws.p("syn.csv") + " --schema " +
                              ws.p("syn.schema.json") + " --k 3 --seeds 2 --best 1" +
                              " --seed 11 --jobs 1" + kTinyModelFlags + " --out " +
                              ws.p("cv1");
  REQUIRE(run(cv_args) == 0);
  const auto r1 = vaesurv::ResultsFile::load(ws.p("cv1/results.json"));
  REQUIRE(run(cv_args) == 0);
  const auto r2 = vaesurv::ResultsFile::load(ws.p("cv1/results.json"));
  CHECK(r1.canonical_content() == r2.canonical_content());
  CHECK(r1.status == "ok");

  // compare against a synthetic baseline CSV
  {
    std::ofstream out(ws.p("baselines.csv"));
    out << "model,dataset,fold,c_index,ibs\n";
    for (const auto& f : r1.report.folds)
      out << "cox," << r1.dataset_name << "," << f.fold << "," << (f.cindex - 0.05)
          << "," << (f.ibs + 0.02) << "\n";
  }
  REQUIRE(run("compare --ours " + ws.p("cv1/results.json") + " --baselines " +
              ws.p("baselines.csv") + " --out " + ws.p("cmp")) == 0);
  const auto cmp = read_json(ws.p("cmp/compare.json"));
  CHECK(cmp["models"][0]["model"].get<std::string>() == "vaesurv");
  CHECK(cmp["models"][0]["mrr_cindex"].get<double>() == 1.0);
}

TEST_CASE("cli config file with flag precedence and env default output") {
  Workspace ws;
  REQUIRE(run("synth --n 120 --p 2 --censoring 0.2 --seed 9 --out " + ws.p("syn")) ==
          0);

  {
    std::ofstream out(ws.p("run.ini"));
    out << "[cv]\n"
        << "k=3\n"
        << "seeds=2\n"
        << "best=2\n"
        << "latent-dim=2\n"
        << "hidden=8\n"
        << "epochs=20\n"
        << "patience=4\n"
        << "batch-size=32\n";
  }
  // --seeds on the command line overrides the config file; k comes from it.
  REQUIRE(run("--config " + ws.p("run.ini") + " cv --dataset " + ws.p("syn.csv") +
              " --schema " + ws.p("syn.schema.json") + " --seeds 1 --best 1" +
              " --jobs 1 --out " + ws.p("cfg_out")) == 0);
  const auto res = vaesurv::ResultsFile::load(ws.p("cfg_out/results.json"));
  CHECK(res.config.k_folds == 3);
  CHECK(res.config.seed_count == 1);

  // VAESURV_OUT supplies the default output directory.
  const std::string cmd = "VAESURV_OUT=" + ws.p("env_out") + " " + kCli +
                          " synth --n 50 --p 2 --seed 4 > /dev/null 2>&1";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(fs::exists(ws.p("env_out.csv")));
}

TEST_CASE("cli rejects bad invocations with nonzero exit") {
  Workspace ws;
  CHECK(run("cv --dataset missing.csv --schema missing.json") != 0);
  CHECK(run("eval --model nope.json --dataset nope.csv --schema nope.json") != 0);
  CHECK(run("synth --censoring 1.5 --out " + ws.p("bad")) != 0);
}
