// Acceptance suite: runs every toolkit-level criterion at its stated
// tolerance and prints one pass/fail line per criterion. Exits nonzero if
// any criterion fails. The heavier experiment criteria reuse the same
// harness entry points the CLI exposes.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracle_svm.hpp"
#include "rfkit/rfkit.hpp"

namespace fs = std::filesystem;
using namespace rfkit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << v;
  return ss.str();
}

// ---------- 1. kernel approximation ----------
Outcome criterion_kernel_approx() {
  const double gamma = 1.0;
  FeatureSet fs = sample_features(FeatureSpec::gaussian(2, gamma), 4096, 2024);
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    Eigen::VectorXd x(2), y(2);
    x << unif(gen), unif(gen);
    y << unif(gen), unif(gen);
    worst = std::max(worst, std::abs(kernel_approx(fs, x, y) - kernel_exact(x, y, gamma)));
  }
  Eigen::VectorXd x(2);
  x << 0.4, -0.2;
  double self_err = std::abs(kernel_approx(fs, x, x) - 1.0);
  Outcome o;
  o.pass = worst <= 0.05 && self_err <= 1e-12;
  o.detail = "max |k_N - k_gamma| = " + fmt(worst) + " (<= 0.05), |k_N(x,x) - 1| = " +
             fmt(self_err, 2) + " (<= 1e-12)";
  return o;
}

// ---------- 2. leverage-score correctness ----------
Outcome criterion_leverage() {
  std::mt19937_64 seed_gen(101);
  std::normal_distribution<double> normal;
  double worst_elem = 0.0, worst_trace = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    int rows = 2 + int(seed_gen() % 7);
    int cols = 2 + int(seed_gen() % 11);
    double mu = 0.05 + double(seed_gen() % 100) / 100.0;
    std::mt19937_64 gen(seed_gen());
    Eigen::MatrixXd phi(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) phi(i, j) = normal(gen);
    LeverageScores lev = compute_leverage(phi, mu);
    Eigen::MatrixXd s = phi * phi.transpose();
    Eigen::MatrixXd inv = (s + mu * Eigen::MatrixXd::Identity(rows, rows)).inverse();
    Eigen::VectorXd oracle = (s * inv).diagonal();
    for (int i = 0; i < rows; ++i)
      worst_elem = std::max(worst_elem, std::abs(lev.scores[std::size_t(i)] - oracle(i)));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    double trace = (eig.eigenvalues().array().cwiseMax(0.0) /
                    (eig.eigenvalues().array().cwiseMax(0.0) + mu))
                       .sum();
    worst_trace = std::max(worst_trace, std::abs(empirical_dof(lev) - trace));
  }
  Outcome o;
  o.pass = worst_elem < 1e-10 && worst_trace < 1e-8;
  o.detail = "max elementwise gap vs dense inverse = " + fmt(worst_elem, 2) +
             " (< 1e-10), max trace gap = " + fmt(worst_trace, 2) + " (< 1e-8)";
  return o;
}

// ---------- 3. resampling unbiasedness ----------
Outcome criterion_unbiasedness() {
  std::mt19937_64 gen(2025);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst = 0.0;
  for (int m : {2, 3, 4, 5, 6, 7, 8}) {
    FeatureSet pool = sample_features(FeatureSpec::gaussian(2, 1.0), m, std::uint64_t(m) + 7);
    Eigen::MatrixXd probes(3, 2);
    probes << 0.1, 0.2, -0.4, 0.9, 0.8, -0.5;
    LeverageScores lev = compute_leverage(build_probe_matrix(pool, probes), 0.05);
    std::vector<double> p = resampling_probabilities(pool, lev);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd x(2), y(2);
      x << unif(gen), unif(gen);
      y << unif(gen), unif(gen);
      double expected = 0.0;
      for (int i = 0; i < m; ++i) {
        FeatureSet single;
        single.spec = pool.spec;
        single.frequencies = pool.frequencies.row(i);
        single.weights =
            Eigen::VectorXd::Constant(1, 1.0 / std::sqrt(double(m) * p[std::size_t(i)]));
        expected += p[std::size_t(i)] * kernel_approx(single, x, y);
      }
      worst = std::max(worst, std::abs(expected - kernel_approx(pool, x, y)));
    }
  }
  Outcome o;
  o.pass = worst < 1e-12;
  o.detail = "max |E[reweighted 1-feature kernel] - k_M| = " + fmt(worst, 2) + " (< 1e-12)";
  return o;
}

// ---------- 4. solver oracle equivalence ----------
Outcome criterion_solver_oracle() {
  std::mt19937_64 seed_gen(404);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst_gap = 0.0, worst_ratio = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    int m = 3 + int(seed_gen() % 18);
    int n = 1 + int(seed_gen() % 2);
    double lambda = 0.3 + double(seed_gen() % 100) / 58.0;
    std::mt19937_64 gen(seed_gen());
    LabeledDataset ds;
    ds.points.resize(m, 2);
    ds.labels.resize(m);
    for (int i = 0; i < m; ++i) {
      ds.points(i, 0) = unif(gen);
      ds.points(i, 1) = unif(gen);
      ds.labels(i) = gen() % 2 == 0 ? 1 : -1;
    }
    FeatureSet fsset = sample_features(FeatureSpec::gaussian(2, 1.0), n, seed_gen());
    TrainConfig cfg;
    cfg.lambda = lambda;
    cfg.epochs = static_cast<int>(2000000 / m);
    cfg.seed = seed_gen();
    cfg.tolerance = 1e-12;
    Model model = train_rfsvm(ds, fsset, cfg);
    worst_ratio = std::max(worst_ratio, model.max_norm_ratio);
    double oracle =
        rfkit_test::oracle_min_objective(embed_all(fsset, ds.points), ds.labels, lambda, 400000);
    worst_gap = std::max(worst_gap, std::abs(model.objective - oracle));
  }
  Outcome o;
  o.pass = worst_gap <= 1e-4 && worst_ratio <= 1.0 + 1e-9;
  o.detail = "max |objective - oracle| = " + fmt(worst_gap, 3) +
             " (<= 1e-4), max iterate |w|^2/(2/lambda) = " + fmt(worst_ratio, 10) + " (<= 1)";
  return o;
}

// ---------- 5. synthetic bayes risk ----------
Outcome criterion_bayes_risk() {
  SyntheticSpec spec;
  LabeledDataset ds = gen_circle_annulus(spec, 100000, 77);
  int wrong = 0;
  for (int i = 0; i < ds.size(); ++i)
    if (bayes_classify(ds.points.row(i).transpose()) != ds.labels(i)) ++wrong;
  double risk = double(wrong) / ds.size();
  Outcome o;
  o.pass = std::abs(risk - 0.100) <= 0.005;
  o.detail = "bayes zero-one risk on 1e5 samples = " + fmt(risk) + " (0.100 +- 0.005)";
  return o;
}

double best_lambda_accuracy(const std::vector<RunResult>& results, Method method) {
  double best = -1.0;
  for (const auto& r : results)
    if (r.method == method) best = std::max(best, r.mean_accuracy);
  return best;
}

// ---------- 6. sweep reproduction ----------
Outcome criterion_sweep() {
  ExperimentConfig cfg;
  cfg.task = "sweep";
  cfg.methods = {Method::Ksvm, Method::RfsvmUnif, Method::RfsvmOpt};
  cfg.m_grid = {1000};
  cfg.n_features = 20;
  cfg.repeats = 10;
  cfg.test_size = 100000;
  cfg.seed = 20240601;
  cfg.epochs = 50;
  LabeledDataset test = gen_circle_annulus(cfg.data, cfg.test_size,
                                           rng::derive(cfg.seed, rng::stream::test_set));
  auto at20 = run_sweep(cfg, &test);
  ExperimentConfig cfg1 = cfg;
  cfg1.n_features = 1;
  cfg1.methods = {Method::RfsvmUnif, Method::RfsvmOpt};
  auto at1 = run_sweep(cfg1, &test);

  double ksvm = best_lambda_accuracy(at20, Method::Ksvm);
  double unif20 = best_lambda_accuracy(at20, Method::RfsvmUnif);
  double opt20 = best_lambda_accuracy(at20, Method::RfsvmOpt);
  double unif1 = best_lambda_accuracy(at1, Method::RfsvmUnif);
  double opt1 = best_lambda_accuracy(at1, Method::RfsvmOpt);

  bool a = ksvm >= 0.87;
  bool b = unif20 >= ksvm - 0.02 && opt20 >= ksvm - 0.02;
  bool c = unif20 >= unif1 && opt20 >= opt1;
  bool d = opt20 >= unif20 - 0.005;
  Outcome o;
  o.pass = a && b && c && d;
  o.detail = "ksvm = " + fmt(ksvm) + " (>= 0.87); N=20 unif/opt = " + fmt(unif20) + "/" +
             fmt(opt20) + " (>= ksvm - 0.02); N=1 unif/opt = " + fmt(unif1) + "/" + fmt(opt1) +
             " (<= N=20); opt >= unif - 0.005 at N=20: " + (d ? "yes" : "no");
  return o;
}

// ---------- 7. learning-curve trend ----------
Outcome criterion_curve() {
  ExperimentConfig cfg;
  cfg.task = "curve";
  cfg.methods = {Method::RfsvmUnif, Method::RfsvmOpt};
  cfg.m_grid = {500, 1000, 2000, 4000};
  cfg.n_features = 0;  // N = ceil(2 ln^2 m)
  cfg.features_log_sq_coeff = 2.0;
  cfg.repeats = 10;
  cfg.test_size = 100000;
  cfg.seed = 424242;
  cfg.epochs = 20;
  auto results = run_learning_curve(cfg);

  auto excess_series = [&](Method method) {
    std::vector<double> xs;
    for (int m : cfg.m_grid)
      for (const auto& r : results)
        if (r.method == method && r.m == m) xs.push_back(r.mean_excess);
    return xs;
  };
  auto inversions = [](const std::vector<double>& xs) {
    int inv = 0;
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (xs[i] >= xs[i - 1]) ++inv;
    return inv;
  };
  std::vector<double> unif = excess_series(Method::RfsvmUnif);
  std::vector<double> opt = excess_series(Method::RfsvmOpt);
  int inv_unif = inversions(unif);
  int inv_opt = inversions(opt);
  bool trend = inv_unif <= 1 && inv_opt <= 1;
  bool opt_wins = opt.back() <= unif.back();
  Outcome o;
  o.pass = trend && opt_wins;
  std::string series = "unif excess = [";
  for (std::size_t i = 0; i < unif.size(); ++i) series += (i ? " " : "") + fmt(unif[i], 3);
  series += "], opt excess = [";
  for (std::size_t i = 0; i < opt.size(); ++i) series += (i ? " " : "") + fmt(opt[i], 3);
  series += "]";
  o.detail = series + "; inversions unif/opt = " + std::to_string(inv_unif) + "/" +
             std::to_string(inv_opt) + " (<= 1); opt <= unif at m=4000: " +
             (opt_wins ? "yes" : "no");
  return o;
}

// ---------- 8. spectral diagnostics ----------
Outcome criterion_spectral() {
  SpectrumEstimate poly;
  poly.eigenvalues.resize(60);
  for (int i = 0; i < 60; ++i) poly.eigenvalues(i) = 2.0 * std::pow(i + 1.0, -3.0);
  poly.sample_count = 60;
  DecayFit pf = fit_decay(poly, DecayKind::Polynomial);
  bool fit_poly = std::abs(pf.c1 - 2.0) < 1e-6 && std::abs(pf.c2 - 3.0) < 1e-6;

  SpectrumEstimate sub;
  sub.eigenvalues.resize(25);
  for (int i = 0; i < 25; ++i) sub.eigenvalues(i) = std::exp(-(i + 1.0));
  sub.sample_count = 25;
  DecayFit sf = fit_decay(sub, DecayKind::Subexponential, 1);
  bool fit_sub = std::abs(sf.c3 - 1.0) < 1e-6 && std::abs(sf.c4 - 1.0) < 1e-6;

  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd pts(500, 2);
  for (int i = 0; i < 500; ++i) pts.row(i) << unif(gen), unif(gen);
  SpectrumEstimate est = empirical_spectrum(pts, 0.5);
  DecayFit gp = fit_decay(est, DecayKind::Polynomial);
  DecayFit gs = fit_decay(est, DecayKind::Subexponential, 2);
  bool residuals = gs.residual < gp.residual;

  bool monotone = true, convex = true;
  std::vector<double> vals;
  for (int k = 0; k < 10; ++k) vals.push_back(degrees_of_freedom(est, 0.001 + 0.002 * k));
  for (std::size_t k = 1; k < vals.size(); ++k)
    if (!(vals[k] < vals[k - 1])) monotone = false;
  for (std::size_t k = 1; k + 1 < vals.size(); ++k)
    if (vals[k - 1] + vals[k + 1] - 2.0 * vals[k] < -1e-12) convex = false;

  Outcome o;
  o.pass = fit_poly && fit_sub && residuals && monotone && convex;
  o.detail = std::string("fit recovery poly/subexp: ") + (fit_poly ? "ok" : "FAIL") + "/" +
             (fit_sub ? "ok" : "FAIL") + "; gaussian subexp residual " + fmt(gs.residual, 3) +
             " < poly " + fmt(gp.residual, 3) + ": " + (residuals ? "yes" : "no") +
             "; d(mu) decreasing/convex: " + (monotone && convex ? "yes" : "no");
  return o;
}

// ---------- 9. planner arithmetic ----------
Outcome criterion_planner() {
  bool fc = feature_count(10.0, 0.1) == 369;
  DecayFit fit;
  fit.kind = DecayKind::Polynomial;
  fit.c1 = 1.0;
  fit.c2 = 2.0;
  FeatureCountPlan p1 = plan_realizable(10000, fit, 0.1);
  bool lam = std::abs(p1.lambda - 0.01) < 1e-12;
  FeatureCountPlan p2 = plan_separation(1000000, 0.2, 2, 0.1);
  bool gam = std::abs(*p2.gamma - 0.0538) <= 1e-4;
  Outcome o;
  o.pass = fc && lam && gam;
  o.detail = "feature_count(10, 0.1) = " + std::to_string(feature_count(10.0, 0.1)) +
             " (= 369); plan_realizable lambda = " + fmt(p1.lambda) +
             " (= 0.01); plan_separation gamma = " + fmt(*p2.gamma, 6) + " (0.0538 +- 1e-4)";
  return o;
}

// ---------- 10. determinism and atomicity ----------
struct Shell {
  std::string bin;
  int run(const std::string& args, const fs::path& dir) {
    fs::create_directories(dir);
    std::string cmd = bin + " " + args + " >" + (dir / "out.log").string() + " 2>" +
                      (dir / "err.log").string();
    int status = std::system(cmd.c_str());
    return status < 0 ? status : WEXITSTATUS(status);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_wall_ms(const std::string& csv) {
  // Drop the wall_ms column (index 7) from every row.
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    int field = 0;
    std::string kept;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t next = line.find(',', pos);
      if (next == std::string::npos) next = line.size();
      if (field != 7) {
        if (!kept.empty()) kept += ',';
        kept += line.substr(pos, next - pos);
      }
      ++field;
      pos = next + 1;
      if (next == line.size()) break;
    }
    out += kept + '\n';
  }
  return out;
}

Outcome criterion_determinism() {
  const char* bin = std::getenv("RFKIT_BIN");
  Outcome o;
  if (!bin) {
    o.detail = "RFKIT_BIN not set";
    return o;
  }
  Shell sh{bin};
  fs::path root = fs::temp_directory_path() / "rfkit_acceptance_10";
  fs::remove_all(root);

  // (a) Two identical full pipeline runs: byte-identical outputs.
  bool pipeline_ok = true;
  for (const char* side : {"a", "b"}) {
    fs::path dir = root / side;
    std::string data = (dir / "d.csv").string();
    pipeline_ok &= sh.run("gen-data --dim 2 --m 300 --seed 11 --out " + data, dir) == 0;
    pipeline_ok &= sh.run("select --data " + data +
                              " --pool-size 400 --probe-count 90 --target 8 --seed 3 --out " +
                              (dir / "f.json").string() + " --scores-out " +
                              (dir / "s.csv").string(),
                          dir) == 0;
    pipeline_ok &= sh.run("train --data " + data + " --features " + (dir / "f.json").string() +
                              " --lambda 0.01 --epochs 20 --seed 4 --out " +
                              (dir / "m.json").string(),
                          dir) == 0;
    pipeline_ok &= sh.run("evaluate --model " + (dir / "m.json").string() + " --data " + data +
                              " --out " + (dir / "r.json").string(),
                          dir) == 0;
  }
  bool bytes_equal = true;
  for (const char* name : {"d.csv", "f.json", "s.csv", "m.json", "r.json"})
    bytes_equal &= slurp(root / "a" / name) == slurp(root / "b" / name);

  // (b) Thread count must not affect numeric output.
  json cfg = {{"task", "sweep"},
              {"methods", {"rfsvm-unif", "rfsvm-opt"}},
              {"m", 200},
              {"lambda_grid", {1e-3, 1e-1}},
              {"n_features", 5},
              {"repeats", 3},
              {"test_size", 2000},
              {"epochs", 10},
              {"seed", 31}};
  fs::create_directories(root);
  std::ofstream(root / "cfg.json") << cfg.dump();
  bool sweep_ok = true;
  sweep_ok &= sh.run("sweep --config " + (root / "cfg.json").string() + " --out-dir " +
                         (root / "t1").string() + " --threads 1",
                     root / "log1") == 0;
  sweep_ok &= sh.run("sweep --config " + (root / "cfg.json").string() + " --out-dir " +
                         (root / "tmax").string() + " --threads 0",
                     root / "log2") == 0;
  bool threads_equal =
      strip_wall_ms(slurp(root / "t1" / "results.csv")) ==
      strip_wall_ms(slurp(root / "tmax" / "results.csv"));
  bool hash_equal = false;
  try {
    auto m1 = json::parse(slurp(root / "t1" / "manifest.json"));
    auto m2 = json::parse(slurp(root / "tmax" / "manifest.json"));
    hash_equal = m1.at("results_hash") == m2.at("results_hash");
  } catch (...) {
  }

  // (c) No stray temp files from the atomic-write path.
  bool no_tmp = true;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator();
       ++it)
    if (it->path().extension() == ".tmp") no_tmp = false;

  o.pass = pipeline_ok && bytes_equal && sweep_ok && threads_equal && hash_equal && no_tmp;
  o.detail = std::string("pipeline reruns byte-identical: ") + (bytes_equal ? "yes" : "NO") +
             "; threads 1 vs max numeric-identical: " + (threads_equal ? "yes" : "NO") +
             "; manifest hashes equal: " + (hash_equal ? "yes" : "NO") +
             "; no leftover temp files: " + (no_tmp ? "yes" : "NO");
  return o;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    Outcome (*fn)();
    double budget_s;
  };
  const Entry entries[] = {
      {1, "kernel approximation", criterion_kernel_approx, 5},
      {2, "leverage-score correctness", criterion_leverage, 1},
      {3, "resampling unbiasedness", criterion_unbiasedness, 1},
      {4, "solver oracle equivalence", criterion_solver_oracle, 30},
      {5, "synthetic bayes risk", criterion_bayes_risk, 5},
      {6, "sweep reproduction", criterion_sweep, 600},
      {7, "learning-curve trend", criterion_curve, 900},
      {8, "spectral diagnostics", criterion_spectral, 30},
      {9, "planner arithmetic", criterion_planner, 1},
      {10, "determinism and atomicity", criterion_determinism, 300},
  };
  bool all = true;
  for (const Entry& e : entries) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.fn();
    } catch (const std::exception& ex) {
      o.pass = false;
      o.detail = std::string("exception: ") + ex.what();
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_budget = secs <= e.budget_s;
    bool pass = o.pass && in_budget;
    all &= pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << e.id << ". " << e.name << ": " << o.detail
              << " [" << fmt(secs, 3) << "s / budget " << fmt(e.budget_s, 3) << "s]"
              << std::endl;
  }
  return all ? 0 : 1;
}
