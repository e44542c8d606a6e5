#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include <json.hpp>

#include "cli_helpers.hpp"

namespace fs = std::filesystem;
using rfkit_test::run_cli;
using rfkit_test::slurp;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "rfkit_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char ch : text)
    if (ch == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("gen-data writes the declared number of rows") {
  fs::path dir = fresh_dir("gen");
  auto res = run_cli("gen-data --dim 2 --m 100 --seed 1 --out " + (dir / "d.csv").string(), dir);
  REQUIRE(res.code == 0);
  std::string csv = slurp(dir / "d.csv");
  REQUIRE(count_lines(csv) == 101);  // header + 100 rows
  REQUIRE(csv.rfind("y,x1,x2\n", 0) == 0);
}

TEST_CASE("missing inputs and bad flags exit with code 2") {
  fs::path dir = fresh_dir("errors");
  auto res = run_cli("train --data " + (dir / "nope.csv").string() +
                         " --lambda 0.1 --n-features 2 --out " + (dir / "m.json").string(),
                     dir);
  REQUIRE(res.code == 2);
  REQUIRE(res.err.find("nope.csv") != std::string::npos);

  auto unknown = run_cli("gen-data --m 10 --out x.csv --no-such-flag", dir);
  REQUIRE(unknown.code == 2);

  auto no_sub = run_cli("", dir);
  REQUIRE(no_sub.code == 2);

  auto bad_m = run_cli("gen-data --dim 2 --m -5 --out " + (dir / "d.csv").string(), dir);
  REQUIRE(bad_m.code == 2);
}

TEST_CASE("help enumerates subcommands") {
  fs::path dir = fresh_dir("help");
  auto res = run_cli("--help", dir);
  REQUIRE(res.code == 0);
  for (const char* sub :
       {"gen-data", "select", "train", "predict", "evaluate", "spectrum", "plan", "sweep",
        "curve"})
    REQUIRE(res.out.find(sub) != std::string::npos);
}

TEST_CASE("plan emits theorem-2 parameters as JSON") {
  fs::path dir = fresh_dir("plan");
  auto res = run_cli("plan --theorem 2 --m 1000000 --tau 0.2 --d 2 --delta 0.1", dir);
  REQUIRE(res.code == 0);
  auto j = nlohmann::json::parse(res.out);
  REQUIRE(std::abs(j.at("gamma").get<double>() - 0.0538) < 1e-4);
  REQUIRE(j.at("lambda").get<double>() == 1e-6);
}

TEST_CASE("pipeline: gen-data, select, train, evaluate, predict") {
  fs::path dir = fresh_dir("pipeline");
  std::string data = (dir / "train.csv").string();
  REQUIRE(run_cli("gen-data --dim 2 --m 200 --seed 5 --out " + data, dir).code == 0);

  std::string feats = (dir / "features.json").string();
  std::string scores = (dir / "scores.csv").string();
  auto sel = run_cli("select --data " + data +
                         " --pool-size 300 --probe-count 40 --target 6 --seed 2 --out " + feats +
                         " --scores-out " + scores,
                     dir);
  REQUIRE(sel.code == 0);
  REQUIRE(fs::exists(feats));
  REQUIRE(count_lines(slurp(scores)) == 301);  // header + one row per pool feature

  std::string model = (dir / "model.json").string();
  auto train = run_cli("train --data " + data + " --features " + feats +
                           " --lambda 0.01 --epochs 30 --seed 3 --loss-report --out " + model,
                       dir);
  REQUIRE(train.code == 0);
  auto report = nlohmann::json::parse(train.out);
  REQUIRE(report.contains("hinge"));
  REQUIRE(report.at("objective").get<double>() >= report.at("hinge").get<double>());

  auto eval = run_cli("evaluate --model " + model + " --data " + data, dir);
  REQUIRE(eval.code == 0);
  auto risks = nlohmann::json::parse(eval.out);
  REQUIRE(risks.at("zero_one").get<double>() >= 0.0);
  REQUIRE(risks.at("accuracy").get<double>() ==
          Catch::Approx(1.0 - risks.at("zero_one").get<double>()).margin(1e-15));
  REQUIRE(risks.at("zero_one").get<double>() <= risks.at("clipped_hinge").get<double>());
  REQUIRE(risks.at("clipped_hinge").get<double>() <= risks.at("hinge").get<double>());

  std::string preds = (dir / "preds.csv").string();
  auto pred = run_cli("predict --model " + model + " --data " + data + " --out " + preds, dir);
  REQUIRE(pred.code == 0);
  REQUIRE(count_lines(slurp(preds)) == 201);
}

TEST_CASE("ksvm training through the cli") {
  fs::path dir = fresh_dir("ksvm");
  std::string data = (dir / "train.csv").string();
  REQUIRE(run_cli("gen-data --dim 2 --m 80 --seed 6 --out " + data, dir).code == 0);
  std::string model = (dir / "model.json").string();
  auto train = run_cli("train --data " + data +
                           " --method ksvm --lambda 0.001 --epochs 40 --seed 1 --out " + model,
                       dir);
  REQUIRE(train.code == 0);
  auto eval = run_cli("evaluate --model " + model + " --data " + data, dir);
  REQUIRE(eval.code == 0);
  auto risks = nlohmann::json::parse(eval.out);
  REQUIRE(risks.at("accuracy").get<double>() > 0.6);
}

TEST_CASE("spectrum subcommand writes eigenvalues and a plan") {
  fs::path dir = fresh_dir("spectrum");
  std::string data = (dir / "d.csv").string();
  REQUIRE(run_cli("gen-data --dim 2 --m 150 --seed 2 --out " + data, dir).code == 0);
  std::string eig = (dir / "eig.csv").string();
  std::string plan = (dir / "plan.json").string();
  auto res = run_cli("spectrum --data " + data + " --gamma 0.5 --fit subexp --delta 0.1" +
                         " --eigenvalues-out " + eig + " --plan-out " + plan,
                     dir);
  REQUIRE(res.code == 0);
  REQUIRE(count_lines(slurp(eig)) == 151);
  auto pj = nlohmann::json::parse(slurp(dir / "plan.json"));
  REQUIRE(pj.at("fit").at("kind") == "subexponential");
  REQUIRE(pj.at("mu_grid").size() == 6);
  REQUIRE(pj.contains("plan_realizable"));
}

TEST_CASE("identical invocations produce byte-identical outputs") {
  fs::path dir_a = fresh_dir("repro_a");
  fs::path dir_b = fresh_dir("repro_b");
  for (const fs::path& dir : {dir_a, dir_b}) {
    std::string data = (dir / "d.csv").string();
    REQUIRE(run_cli("gen-data --dim 2 --m 120 --seed 9 --out " + data, dir).code == 0);
    REQUIRE(run_cli("select --data " + data +
                        " --pool-size 200 --probe-count 30 --target 5 --seed 4 --out " +
                        (dir / "f.json").string(),
                    dir)
                .code == 0);
    REQUIRE(run_cli("train --data " + data + " --features " + (dir / "f.json").string() +
                        " --lambda 0.1 --epochs 10 --seed 5 --out " + (dir / "m.json").string(),
                    dir)
                .code == 0);
    REQUIRE(run_cli("evaluate --model " + (dir / "m.json").string() + " --data " + data +
                        " --out " + (dir / "r.json").string(),
                    dir)
                .code == 0);
  }
  for (const char* name : {"d.csv", "f.json", "m.json", "r.json"})
    REQUIRE(slurp(dir_a / name) == slurp(dir_b / name));
}

TEST_CASE("sweep subcommand writes results, summary, and manifest") {
  fs::path dir = fresh_dir("sweep");
  nlohmann::json cfg = {{"task", "sweep"},   {"methods", {"rfsvm-unif"}}, {"m", 40},
                        {"lambda_grid", {0.1, 1.0}}, {"n_features", 3},  {"repeats", 2},
                        {"test_size", 150}, {"epochs", 4},               {"seed", 12},
                        {"threads", 1}};
  std::ofstream(dir / "cfg.json") << cfg.dump();
  auto res = run_cli("sweep --config " + (dir / "cfg.json").string() + " --out-dir " +
                         (dir / "out").string(),
                     dir);
  REQUIRE(res.code == 0);
  REQUIRE(count_lines(slurp(dir / "out" / "results.csv")) == 5);  // header + 2x2 rows
  REQUIRE(count_lines(slurp(dir / "out" / "summary.csv")) == 3);
  auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  REQUIRE(manifest.at("rows").get<int>() == 4);

  nlohmann::json bad = cfg;
  bad["task"] = "curve";
  std::ofstream(dir / "bad.json") << bad.dump();
  auto mismatch = run_cli("sweep --config " + (dir / "bad.json").string() + " --out-dir " +
                              (dir / "out2").string(),
                          dir);
  REQUIRE(mismatch.code == 2);

  std::ofstream(dir / "broken.json") << "{ not json";
  auto broken = run_cli("sweep --config " + (dir / "broken.json").string() + " --out-dir " +
                            (dir / "out3").string(),
                        dir);
  REQUIRE(broken.code == 2);
}
