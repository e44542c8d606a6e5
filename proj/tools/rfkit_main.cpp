// rfkit command-line tool: data generation, feature selection, training,
// evaluation, spectral analysis, planners, and experiment runs. One binary,
// subcommand style; all outputs are written atomically (temp file + rename).
//
// Exit codes: 0 success, 2 validation/usage, 3 I/O, 4 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "rfkit/rfkit.hpp"

namespace fs = std::filesystem;
using rfkit::json;

namespace {

void require_exists(const std::string& path) {
  if (!fs::exists(path)) throw rfkit::validation_error("no such file: " + path);
}

rfkit::LabeledDataset load_data(const std::string& path) {
  require_exists(path);
  return rfkit::load_dataset_csv(path);
}

double resolve_gamma(double gamma_flag, const rfkit::LabeledDataset& data, int cap,
                     std::uint64_t seed) {
  if (gamma_flag > 0.0) return gamma_flag;
  return rfkit::bandwidth_heuristic(data.points, cap, seed);
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    if (next > pos) out.push_back(rfkit::parse_f64(std::string_view(csv.data() + pos, next - pos)));
    pos = next + 1;
    if (next == csv.size()) break;
  }
  if (out.empty()) throw rfkit::validation_error("empty grid: '" + csv + "'");
  return out;
}

json fit_to_json(const rfkit::DecayFit& fit) {
  json j;
  if (fit.kind == rfkit::DecayKind::Polynomial) {
    j["kind"] = "polynomial";
    j["c1"] = fit.c1;
    j["c2"] = fit.c2;
  } else {
    j["kind"] = "subexponential";
    j["c3"] = fit.c3;
    j["c4"] = fit.c4;
    j["d"] = fit.d;
  }
  j["residual"] = fit.residual;
  return j;
}

json plan_to_json(const rfkit::FeatureCountPlan& plan) {
  json j;
  j["lambda"] = plan.lambda;
  j["n_features"] = plan.n_features;
  j["delta"] = plan.delta;
  if (plan.mu) j["mu"] = *plan.mu;
  if (plan.dof) j["dof"] = *plan.dof;
  if (plan.gamma) j["gamma"] = *plan.gamma;
  j["constant"] = plan.constant;
  return j;
}

void write_json(const std::string& path, const json& j) {
  rfkit::atomic_write_file(path, j.dump(2) + "\n");
}

struct GenDataArgs {
  int dim = 2;
  int m = 0;
  std::uint64_t seed = 0;
  std::string out;
  double flip_prob = 0.1, inner_radius = 0.9, annulus_lo = 1.1, annulus_hi = 2.0, mix = 0.5;
};

struct SelectArgs {
  std::string data, out, scores_out;
  int pool_size = 0, probe_count = 0, target = 0;
  double ridge = 0.0, gamma = 0.0;
  int bandwidth_cap = 1000;
  std::uint64_t seed = 0;
  bool unweighted = false;
};

struct TrainArgs {
  std::string data, features, method = "rfsvm", out;
  double lambda = 1.0, tolerance = 1e-6, gamma = 0.0;
  int epochs = 20, n_features = 0, bandwidth_cap = 1000;
  std::uint64_t seed = 0;
  bool loss_report = false;
};

struct PredictArgs {
  std::string model, data, out;
};

struct EvaluateArgs {
  std::string model, data, out;
};

struct SpectrumArgs {
  std::string data, fit_kind, eig_out, plan_out, mu_grid;
  double gamma = 0.0, delta = 0.1;
  int fit_d = 0, guard = rfkit::kSpectrumSampleGuard, bandwidth_cap = 1000;
  std::uint64_t seed = 0;
};

struct PlanArgs {
  int theorem = 1;
  std::string fit_kind = "poly";
  double c1 = 1.0, c2 = 2.0, c3 = 1.0, c4 = 1.0;
  double tau = 0.0, delta = 0.1, constant = 1.0;
  int d = 1;
  long long m = 0;
  std::string out;
};

struct ExperimentArgs {
  std::string config, out_dir;
  int threads = -1;  // -1: keep config value
};

int run_gen_data(const GenDataArgs& a) {
  rfkit::SyntheticSpec spec;
  spec.dim = a.dim;
  spec.flip_prob = a.flip_prob;
  spec.inner_radius = a.inner_radius;
  spec.annulus_lo = a.annulus_lo;
  spec.annulus_hi = a.annulus_hi;
  spec.mix = a.mix;
  rfkit::LabeledDataset ds = rfkit::gen_circle_annulus(spec, a.m, a.seed);
  rfkit::atomic_write_file(a.out, rfkit::dataset_to_csv(ds));
  return 0;
}

int run_select(const SelectArgs& a) {
  rfkit::LabeledDataset data = load_data(a.data);
  rfkit::SelectionConfig cfg;
  cfg.pool_size = a.pool_size;
  cfg.probe_count = a.probe_count;
  cfg.ridge = a.ridge > 0.0 ? a.ridge : 1.0 / double(data.size());
  cfg.target_count = a.target;
  cfg.seed = a.seed;
  cfg.reweight = !a.unweighted;
  double gamma = resolve_gamma(a.gamma, data, a.bandwidth_cap, a.seed);
  rfkit::FeatureSpec spec = rfkit::FeatureSpec::gaussian(data.dim(), gamma);
  rfkit::SelectionResult res = rfkit::select_features(data.points, spec, cfg);
  rfkit::atomic_write_file(a.out, rfkit::feature_set_to_json(res.features).dump(2) + "\n");
  if (!a.scores_out.empty()) {
    std::string csv = "index,r,p\n";
    const std::size_t m = res.probabilities.size();
    for (std::size_t i = 0; i < m; ++i) {
      double r = res.leverage.scores.size() == 2 * m
                     ? res.leverage.scores[i] + res.leverage.scores[m + i]
                     : res.leverage.scores[i];
      csv += std::to_string(i) + ',' + rfkit::format_f64(r) + ',' +
             rfkit::format_f64(res.probabilities[i]) + '\n';
    }
    rfkit::atomic_write_file(a.scores_out, csv);
  }
  return 0;
}

int run_train(const TrainArgs& a) {
  rfkit::LabeledDataset data = load_data(a.data);
  rfkit::TrainConfig tc;
  tc.lambda = a.lambda;
  tc.epochs = a.epochs;
  tc.seed = a.seed;
  tc.tolerance = a.tolerance;
  json model_json;
  json report;
  if (a.method == "ksvm") {
    double gamma = resolve_gamma(a.gamma, data, a.bandwidth_cap, a.seed);
    rfkit::KernelModel model = rfkit::train_ksvm(data, gamma, tc);
    model_json = rfkit::model_to_json(model);
    if (a.loss_report) {
      report["hinge"] = rfkit::evaluate_risk(model, data, rfkit::Loss::Hinge);
      report["zero_one"] = rfkit::evaluate_risk(model, data, rfkit::Loss::ZeroOne);
      report["clipped_hinge"] = rfkit::evaluate_risk(model, data, rfkit::Loss::ClippedHinge);
      report["objective"] = model.objective;
    }
  } else if (a.method == "rfsvm") {
    rfkit::FeatureSet fsset;
    if (!a.features.empty()) {
      require_exists(a.features);
      fsset = rfkit::feature_set_from_json(json::parse(rfkit::read_file(a.features)));
    } else {
      if (a.n_features < 1)
        throw rfkit::validation_error("train: need --features or a positive --n-features");
      double gamma = resolve_gamma(a.gamma, data, a.bandwidth_cap, a.seed);
      fsset = rfkit::sample_features(rfkit::FeatureSpec::gaussian(data.dim(), gamma),
                                     a.n_features, a.seed);
    }
    rfkit::Model model = rfkit::train_rfsvm(data, fsset, tc);
    model_json = rfkit::model_to_json(model);
    if (a.loss_report) {
      report["hinge"] = rfkit::evaluate_risk(model, data, rfkit::Loss::Hinge);
      report["zero_one"] = rfkit::evaluate_risk(model, data, rfkit::Loss::ZeroOne);
      report["clipped_hinge"] = rfkit::evaluate_risk(model, data, rfkit::Loss::ClippedHinge);
      report["objective"] = model.objective;
    }
  } else {
    throw rfkit::validation_error("train: method must be rfsvm or ksvm");
  }
  rfkit::atomic_write_file(a.out, model_json.dump(2) + "\n");
  if (a.loss_report) std::cout << report.dump() << "\n";
  return 0;
}

json load_model_json(const std::string& path) {
  require_exists(path);
  try {
    return json::parse(rfkit::read_file(path));
  } catch (const json::exception& e) {
    throw rfkit::validation_error("model JSON parse error in " + path + ": " + e.what());
  }
}

int run_predict(const PredictArgs& a) {
  json mj = load_model_json(a.model);
  rfkit::LabeledDataset data = load_data(a.data);
  Eigen::VectorXd scores;
  if (mj.value("type", "") == "ksvm")
    scores = rfkit::decision_scores(rfkit::kernel_model_from_json(mj), data.points);
  else
    scores = rfkit::decision_scores(rfkit::model_from_json(mj), data.points);
  std::string csv = "score,label\n";
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    csv += rfkit::format_f64(scores(i)) + ',' +
           std::to_string(rfkit::sign_label(scores(i))) + '\n';
  rfkit::atomic_write_file(a.out, csv);
  return 0;
}

int run_evaluate(const EvaluateArgs& a) {
  json mj = load_model_json(a.model);
  rfkit::LabeledDataset data = load_data(a.data);
  json out;
  auto fill = [&](const auto& model) {
    out["hinge"] = rfkit::evaluate_risk(model, data, rfkit::Loss::Hinge);
    out["zero_one"] = rfkit::evaluate_risk(model, data, rfkit::Loss::ZeroOne);
    out["clipped_hinge"] = rfkit::evaluate_risk(model, data, rfkit::Loss::ClippedHinge);
    out["accuracy"] = 1.0 - out["zero_one"].get<double>();
    out["objective"] = rfkit::objective_value(model, data);
  };
  if (mj.value("type", "") == "ksvm")
    fill(rfkit::kernel_model_from_json(mj));
  else
    fill(rfkit::model_from_json(mj));
  if (a.out.empty())
    std::cout << out.dump() << "\n";
  else
    write_json(a.out, out);
  return 0;
}

int run_spectrum(const SpectrumArgs& a) {
  rfkit::LabeledDataset data = load_data(a.data);
  double gamma = resolve_gamma(a.gamma, data, a.bandwidth_cap, a.seed);
  rfkit::SpectrumEstimate est = rfkit::empirical_spectrum(data.points, gamma, a.guard);
  std::string csv = "index,value\n";
  for (Eigen::Index i = 0; i < est.eigenvalues.size(); ++i)
    csv += std::to_string(i + 1) + ',' + rfkit::format_f64(est.eigenvalues(i)) + '\n';
  rfkit::atomic_write_file(a.eig_out, csv);

  json plan;
  plan["kernel"] = est.kernel;
  plan["sample_count"] = est.sample_count;
  rfkit::DecayKind kind = rfkit::decay_kind_from_string(a.fit_kind);
  int d = a.fit_d > 0 ? a.fit_d : data.dim();
  rfkit::DecayFit fit = rfkit::fit_decay(est, kind, d);
  plan["fit"] = fit_to_json(fit);
  std::vector<double> mus = a.mu_grid.empty()
                                ? std::vector<double>{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1}
                                : parse_grid(a.mu_grid);
  json grid = json::array();
  for (double mu : mus) {
    json row;
    row["mu"] = mu;
    row["dof"] = rfkit::degrees_of_freedom(est, mu);
    bool in_range = false;
    row["dof_bound"] = rfkit::dof_bound(fit, mu, &in_range);
    row["bound_in_range"] = in_range;
    row["n_features"] = rfkit::feature_count(std::max(row["dof"].get<double>(), 1e-12), a.delta);
    grid.push_back(std::move(row));
  }
  plan["mu_grid"] = std::move(grid);
  plan["plan_realizable"] = plan_to_json(rfkit::plan_realizable(data.size(), fit, a.delta));
  write_json(a.plan_out, plan);
  return 0;
}

int run_plan(const PlanArgs& a) {
  rfkit::FeatureCountPlan plan;
  if (a.theorem == 1) {
    rfkit::DecayFit fit;
    fit.kind = rfkit::decay_kind_from_string(a.fit_kind);
    fit.c1 = a.c1;
    fit.c2 = a.c2;
    fit.c3 = a.c3;
    fit.c4 = a.c4;
    fit.d = a.d;
    plan = rfkit::plan_realizable(a.m, fit, a.delta);
  } else if (a.theorem == 2) {
    if (!(a.tau > 0.0)) throw rfkit::validation_error("plan: theorem 2 needs --tau > 0");
    plan = rfkit::plan_separation(a.m, a.tau, a.d, a.delta, a.constant);
  } else {
    throw rfkit::validation_error("plan: --theorem must be 1 or 2");
  }
  json j = plan_to_json(plan);
  if (a.out.empty())
    std::cout << j.dump() << "\n";
  else
    write_json(a.out, j);
  return 0;
}

int run_experiment(const ExperimentArgs& a, const std::string& task) {
  require_exists(a.config);
  json cj;
  try {
    cj = json::parse(rfkit::read_file(a.config));
  } catch (const json::exception& e) {
    throw rfkit::validation_error("config parse error in " + a.config + ": " + e.what());
  }
  rfkit::ExperimentConfig cfg = rfkit::experiment_config_from_json(cj);
  if (cfg.task != task)
    throw rfkit::validation_error("config error at /task: config says '" + cfg.task +
                                  "' but the '" + task + "' subcommand was invoked");
  if (a.threads >= 0) cfg.threads = a.threads;
  rfkit::LabeledDataset test = rfkit::gen_circle_annulus(
      cfg.data, cfg.test_size, rfkit::rng::derive(cfg.seed, rfkit::rng::stream::test_set));
  std::vector<rfkit::RunResult> results =
      task == "sweep" ? rfkit::run_sweep(cfg, &test) : rfkit::run_learning_curve(cfg, &test);
  fs::path dir(a.out_dir);
  rfkit::atomic_write_file(dir / "results.csv", rfkit::results_to_csv(results));
  rfkit::atomic_write_file(dir / "summary.csv",
                           rfkit::summary_to_csv(rfkit::summarize(results)));
  write_json((dir / "manifest.json").string(),
             rfkit::experiment_manifest(cfg, results, rfkit::dataset_hash(test)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rfkit: random-features kernel classification toolkit"};
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "generate a circle/annulus dataset CSV");
  gen->add_option("--dim", gd.dim, "input dimension (>= 2)");
  gen->add_option("--m", gd.m, "number of samples")->required();
  gen->add_option("--seed", gd.seed, "generator seed");
  gen->add_option("--out", gd.out, "output CSV path")->required();
  gen->add_option("--flip-prob", gd.flip_prob, "label flip probability");
  gen->add_option("--inner-radius", gd.inner_radius, "inner ball radius");
  gen->add_option("--annulus-lo", gd.annulus_lo, "annulus inner radius");
  gen->add_option("--annulus-hi", gd.annulus_hi, "annulus outer radius");
  gen->add_option("--mix", gd.mix, "probability of the inner class");

  SelectArgs se;
  auto* sel = app.add_subcommand("select", "leverage-score reweighted feature selection");
  sel->add_option("--data", se.data, "training dataset CSV")->required();
  sel->add_option("--pool-size", se.pool_size, "candidate pool size M")->required();
  sel->add_option("--probe-count", se.probe_count, "leverage probe points L")->required();
  sel->add_option("--ridge", se.ridge, "leverage ridge mu (default 1/m)");
  sel->add_option("--target", se.target, "features to resample N")->required();
  sel->add_option("--seed", se.seed, "selection seed");
  sel->add_option("--gamma", se.gamma, "bandwidth (default: mean-distance heuristic)");
  sel->add_option("--bandwidth-cap", se.bandwidth_cap, "heuristic subsample cap");
  sel->add_option("--out", se.out, "output FeatureSet JSON")->required();
  sel->add_option("--scores-out", se.scores_out, "scores CSV (index,r,p)");
  sel->add_flag("--unweighted", se.unweighted, "skip importance reweighting");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train an RFSVM or KSVM classifier");
  train->add_option("--data", tr.data, "training dataset CSV")->required();
  train->add_option("--method", tr.method, "rfsvm | ksvm");
  train->add_option("--features", tr.features, "FeatureSet JSON (rfsvm)");
  train->add_option("--n-features", tr.n_features, "sample this many fresh features (rfsvm)");
  train->add_option("--gamma", tr.gamma, "bandwidth (default: mean-distance heuristic)");
  train->add_option("--bandwidth-cap", tr.bandwidth_cap, "heuristic subsample cap");
  train->add_option("--lambda", tr.lambda, "regularization strength")->required();
  train->add_option("--epochs", tr.epochs, "training passes");
  train->add_option("--tolerance", tr.tolerance, "objective stall threshold");
  train->add_option("--seed", tr.seed, "solver seed");
  train->add_option("--out", tr.out, "output model JSON")->required();
  train->add_flag("--loss-report", tr.loss_report, "print training risks JSON to stdout");

  PredictArgs pr;
  auto* pred = app.add_subcommand("predict", "score a dataset with a trained model");
  pred->add_option("--model", pr.model, "model JSON")->required();
  pred->add_option("--data", pr.data, "dataset CSV")->required();
  pred->add_option("--out", pr.out, "output CSV (score,label)")->required();

  EvaluateArgs ev;
  auto* eval = app.add_subcommand("evaluate", "risks of a model on a dataset");
  eval->add_option("--model", ev.model, "model JSON")->required();
  eval->add_option("--data", ev.data, "dataset CSV")->required();
  eval->add_option("--out", ev.out, "output JSON (default: stdout)");

  SpectrumArgs sp;
  auto* spec = app.add_subcommand("spectrum", "empirical spectrum, decay fit, feature plans");
  spec->add_option("--data", sp.data, "dataset CSV")->required();
  spec->add_option("--gamma", sp.gamma, "bandwidth (default: mean-distance heuristic)");
  spec->add_option("--bandwidth-cap", sp.bandwidth_cap, "heuristic subsample cap");
  spec->add_option("--mu-grid", sp.mu_grid, "comma-separated mu values");
  spec->add_option("--fit", sp.fit_kind, "poly | subexp")->required();
  spec->add_option("--fit-d", sp.fit_d, "dimension for the subexp fit (default: data dim)");
  spec->add_option("--delta", sp.delta, "confidence level for feature counts");
  spec->add_option("--guard", sp.guard, "max sample count for the Gram eigensolve");
  spec->add_option("--seed", sp.seed, "bandwidth subsample seed");
  spec->add_option("--eigenvalues-out", sp.eig_out, "eigenvalues CSV path")->required();
  spec->add_option("--plan-out", sp.plan_out, "plan JSON path")->required();

  PlanArgs pl;
  auto* plan = app.add_subcommand("plan", "feature-count prescriptions from decay parameters");
  plan->add_option("--theorem", pl.theorem, "1 (realizable) | 2 (separation)");
  plan->add_option("--m", pl.m, "sample size")->required();
  plan->add_option("--delta", pl.delta, "confidence level");
  plan->add_option("--fit-kind", pl.fit_kind, "poly | subexp (theorem 1)");
  plan->add_option("--c1", pl.c1, "polynomial decay scale");
  plan->add_option("--c2", pl.c2, "polynomial decay exponent");
  plan->add_option("--c3", pl.c3, "subexp decay scale");
  plan->add_option("--c4", pl.c4, "subexp decay rate");
  plan->add_option("--d", pl.d, "dimension");
  plan->add_option("--tau", pl.tau, "class separation (theorem 2)");
  plan->add_option("--constant", pl.constant, "leading constant (theorem 2)");
  plan->add_option("--out", pl.out, "output JSON (default: stdout)");

  ExperimentArgs sweep_args, curve_args;
  auto* sweep = app.add_subcommand("sweep", "lambda sweep experiment from a config JSON");
  sweep->add_option("--config", sweep_args.config, "experiment config JSON")->required();
  sweep->add_option("--out-dir", sweep_args.out_dir, "output directory")->required();
  sweep->add_option("--threads", sweep_args.threads, "worker threads (0 = hardware)");
  auto* curve = app.add_subcommand("curve", "learning-curve experiment from a config JSON");
  curve->add_option("--config", curve_args.config, "experiment config JSON")->required();
  curve->add_option("--out-dir", curve_args.out_dir, "output directory")->required();
  curve->add_option("--threads", curve_args.threads, "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "rfkit: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen) return run_gen_data(gd);
    if (*sel) return run_select(se);
    if (*train) return run_train(tr);
    if (*pred) return run_predict(pr);
    if (*eval) return run_evaluate(ev);
    if (*spec) return run_spectrum(sp);
    if (*plan) return run_plan(pl);
    if (*sweep) return run_experiment(sweep_args, "sweep");
    if (*curve) return run_experiment(curve_args, "curve");
  } catch (const rfkit::validation_error& e) {
    std::cerr << "rfkit: " << e.what() << "\n";
    return 2;
  } catch (const rfkit::io_error& e) {
    std::cerr << "rfkit: " << e.what() << "\n";
    return 3;
  } catch (const rfkit::numeric_error& e) {
    std::cerr << "rfkit: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "rfkit: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
