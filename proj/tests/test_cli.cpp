#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "hyperfit_cli_test.log";
  const std::string cmd = std::string("\"") + HYPERFIT_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

/// Fresh directory with a small generated strip/notched pair (3 x 6 elements, 10 steps).
struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / "hyperfit_cli_ws";
    fs::remove_all(root);
    fs::create_directories(root / "data");
    std::ofstream(root / "gen.json") << R"({"generate": {"material": {"kind": "neo_hookean", "mu": 0.4, "lambda": 4},
      "programs": [
        {"name": "strip", "geometry": {"kind": "strip", "width": 6, "height": 12, "nx": 3, "ny": 6},
         "stretches": [1.03, 1.06, 1.09, 1.12, 1.15, 1.18, 1.21, 1.24, 1.27, 1.3]},
        {"name": "notched", "geometry": {"kind": "notched", "width": 6, "height": 12, "nx": 3, "ny": 6, "removed": [[0, 3]]},
         "stretches": [1.05, 1.1, 1.15, 1.2]}]},
      "split": {"n_train": 6, "n_val": 2}})";
    const auto r = cli("generate --config " + q(root / "gen.json") + " --output-dir " + q(root / "data"));
    REQUIRE(r.code == 0);
  }
  fs::path fresh(const std::string& name) const {
    fs::create_directories(root / name);
    return root / name;
  }
  std::string common() const { return "--config " + q(root / "gen.json") + " --data-dir " + q(root / "data"); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help lists every flag") {
    const auto r = cli("--help");
    CHECK(r.code == 0);
    for (const char* flag : {"--config", "--output-dir", "--data-dir", "--mode", "--threads", "--deterministic",
                             "--lambda-r", "--learning-rate", "--max-epochs", "--seed", "--model-in", "--model-out",
                             "--input", "--substeps"})
      CHECK_MESSAGE(r.output.find(flag) != std::string::npos, flag);
    for (const char* cmd : {"generate", "split", "train", "sweep", "evaluate", "predict", "continuity-scan"})
      CHECK_MESSAGE(r.output.find(cmd) != std::string::npos, cmd);
  }

  TEST_CASE("usage errors exit 2") {
    CHECK(cli("generate --no-such-flag").code == 2);
    CHECK(cli("").code == 2);
    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("generate --output-dir /nonexistent/hyperfit/dir").code == 2);
    CHECK(cli("generate --mode plane_stress --output-dir .").code == 2);
  }

  TEST_CASE("default generate writes both experiments") {
    const fs::path dir = fs::temp_directory_path() / "hyperfit_cli_default";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto r = cli("generate --output-dir " + q(dir));
    REQUIRE(r.code == 0);
    for (const char* name : {"strip", "notched"}) {
      CHECK(fs::exists(dir / (std::string(name) + ".mesh.json")));
      CHECK(fs::exists(dir / (std::string(name) + ".dataset.json")));
      CHECK(fs::exists(dir / (std::string(name) + ".truth.json")));
    }
    CHECK(r.output.find("strip: 26 steps") != std::string::npos);
    CHECK(r.output.find("max local stretch") != std::string::npos);
  }

  TEST_CASE("unsolvable program exits 3 with the last converged stretch") {
    const fs::path dir = fs::temp_directory_path() / "hyperfit_cli_s50";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "c.json") << R"({"generate": {"geometry": {"nx": 2, "ny": 4}, "stretches": [50]}})";
    const auto r = cli("generate --config " + q(dir / "c.json") + " --output-dir " + q(dir));
    CHECK(r.code == 3);
    CHECK(r.output.find("last converged stretch") != std::string::npos);
  }

  TEST_CASE("bad config exits 2") {
    const fs::path dir = fs::temp_directory_path() / "hyperfit_cli_badcfg";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "typo.json") << R"({"optim": {"learning_rat": 0.1}})";
    std::ofstream(dir / "broken.json") << R"({"optim": )";
    CHECK(cli("split --config " + q(dir / "typo.json") + " --output-dir " + q(dir)).code == 2);
    CHECK(cli("split --config " + q(dir / "broken.json") + " --output-dir " + q(dir)).code == 2);
    CHECK(cli("split --output-dir " + q(dir)).code == 2);  // no experiment files there
  }

  TEST_CASE("pipeline") {
    const Workspace ws;

    SUBCASE("split") {
      const auto out = ws.fresh("split");
      REQUIRE(cli("split " + ws.common() + " --output-dir " + q(out)).code == 0);
      const auto rows = lines(out / "split.csv");
      REQUIRE(rows.size() == 15);
      CHECK(rows[0] == "experiment,step,step_id,role");
    }

    SUBCASE("train neo-hookean, then evaluate, predict and scan") {
      const auto out = ws.fresh("nh");
      std::ofstream(ws.root / "nh.json") << R"({"model": {"kind": "neo_hookean"}, "split": {"n_train": 6, "n_val": 2},
        "optim": {"learning_rate": 0.05, "max_epochs": 40}})";
      REQUIRE(cli("train --config " + q(ws.root / "nh.json") + " --data-dir " + q(ws.root / "data") +
                  " --output-dir " + q(out))
                  .code == 0);
      const auto model = slurp(out / "model.json");
      CHECK(model.find("\"neo_hookean\"") != std::string::npos);
      const auto history = lines(out / "history.csv");
      CHECK(history.front() == "epoch,train_loss,val_loss");
      CHECK(history.size() == 41);
      const auto metrics = lines(out / "metrics.csv");
      REQUIRE(metrics.size() == 3);
      CHECK(metrics[0] == "statistic,inner_residual,boundary_residual,loss");
      CHECK(lines(out / "residuals.csv").front() == "node,x,y,fx,fy");
      CHECK(lines(out / "curve.csv").size() == 7);  // header + 2 strip and 4 notched test steps

      const auto ev = ws.fresh("ev");
      CHECK(cli("evaluate " + ws.common() + " --model-in " + q(out / "model.json") + " --output-dir " + q(ev)).code == 0);
      CHECK(slurp(ev / "metrics.csv") == slurp(out / "metrics.csv"));

      std::ofstream(ws.root / "F.csv") << "F11,F12,F21,F22\n1,0,0,1\n1.1,0.05,0,0.95\n";
      const auto pr = ws.fresh("pr");
      REQUIRE(cli("predict --model-in " + q(out / "model.json") + " --input " + q(ws.root / "F.csv") +
                  " --output-dir " + q(pr))
                  .code == 0);
      const auto pred = lines(pr / "predictions.csv");
      REQUIRE(pred.size() == 3);
      CHECK(pred[0] == "F11,F12,F21,F22,W,P11,P12,P21,P22");
      CHECK(pred[1] == "1,0,0,1,0,0,0,0,0");

      std::ofstream(ws.root / "bad.csv") << "a,b\n";
      CHECK(cli("predict --model-in " + q(out / "model.json") + " --input " + q(ws.root / "bad.csv") +
                " --output-dir " + q(pr))
                .code == 2);
      CHECK(cli("predict --input " + q(ws.root / "F.csv") + " --output-dir " + q(pr)).code == 2);

      const auto sc = ws.fresh("scan");
      REQUIRE(cli("continuity-scan " + ws.common() + " --model-in " + q(out / "model.json") +
                  " --substeps 20 --output-dir " + q(sc))
                  .code == 0);
      const auto scan = lines(sc / "continuity.csv");
      CHECK(scan.size() == 21);
      CHECK(scan[0] == "stretch,reaction_x,reaction_y");
    }

    SUBCASE("sweep selects exactly one") {
      const auto out = ws.fresh("sweep");
      REQUIRE(cli("sweep " + ws.common() + " --max-epochs 2 --output-dir " + q(out)).code == 0);
      const auto rows = lines(out / "sweep.csv");
      REQUIRE(rows.size() == 11);
      CHECK(rows[0] == "arch_id,params,train_loss,val_loss,selected");
      int selected = 0;
      for (std::size_t i = 1; i < rows.size(); ++i) selected += rows[i].back() == '1' ? 1 : 0;
      CHECK(selected == 1);
    }

    SUBCASE("idempotent outputs") {
      const auto a = ws.fresh("run_a");
      const auto b = ws.fresh("run_b");
      for (const auto& d : {a, b})
        REQUIRE(cli("train " + ws.common() + " --max-epochs 5 --deterministic --output-dir " + q(d)).code == 0);
      for (const char* f : {"model.json", "history.csv", "metrics.csv", "curve.csv", "residuals.csv"}) {
        CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
        CHECK(!slurp(a / f).empty());
      }
      const auto c = ws.fresh("run_c");
      REQUIRE(cli("train " + ws.common() + " --max-epochs 5 --threads 3 --output-dir " + q(c)).code == 0);
      CHECK(slurp(a / "model.json") == slurp(c / "model.json"));
    }

    SUBCASE("non-finite loss exits 4") {
      const auto out = ws.fresh("blown");
      std::ofstream(ws.root / "blown.json") << R"({"model": {"kind": "neo_hookean", "mu": 1e300, "lambda": 1e300},
        "split": {"n_train": 6, "n_val": 2}})";
      const auto r = cli("train --config " + q(ws.root / "blown.json") + " --data-dir " + q(ws.root / "data") +
                         " --output-dir " + q(out));
      CHECK(r.code == 4);
      CHECK(r.output.find("numerical error") != std::string::npos);
    }
  }
}
