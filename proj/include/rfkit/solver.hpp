#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "rfkit/common.hpp"
#include "rfkit/data.hpp"
#include "rfkit/features.hpp"

namespace rfkit {

struct TrainConfig {
  double lambda = 1.0;
  int epochs = 20;
  std::uint64_t seed = 0;
  double tolerance = 1e-6;  // objective stall threshold between epochs

  void validate() const {
    if (!(lambda > 0.0)) throw validation_error("train config: lambda must be positive");
    if (epochs < 1) throw validation_error("train config: epochs must be >= 1");
    if (!(tolerance > 0.0)) throw validation_error("train config: tolerance must be positive");
  }
};

/// Trained random-feature classifier: x -> sgn(w . phi_N(x)).
struct Model {
  FeatureSet features;
  Eigen::VectorXd weights;
  double lambda = 0.0;
  double objective = 0.0;  // achieved regularized empirical risk
  double max_norm_ratio = 0.0;  // max over iterates of |w|^2 / (2/lambda)
};

/// Kernel classifier in representer form: x -> sgn(sum_i alpha_i k(x_i, x)).
struct KernelModel {
  Eigen::MatrixXd support;  // training points, one per row
  Eigen::VectorXd alphas;
  double gamma = 0.0;
  double lambda = 0.0;
  double objective = 0.0;
  double max_norm_ratio = 0.0;
};

enum class Loss { Hinge, ZeroOne, ClippedHinge };

inline Loss loss_from_string(std::string_view s) {
  if (s == "hinge") return Loss::Hinge;
  if (s == "zero-one") return Loss::ZeroOne;
  if (s == "clipped-hinge") return Loss::ClippedHinge;
  throw validation_error("unknown loss: '" + std::string(s) + "'");
}

/// sign(0) = +1 throughout the toolkit.
inline int sign_label(double score) { return score >= 0.0 ? 1 : -1; }

inline double loss_value(Loss loss, int y, double score) {
  switch (loss) {
    case Loss::Hinge:
      return std::max(0.0, 1.0 - double(y) * score);
    case Loss::ZeroOne:
      return sign_label(score) == y ? 0.0 : 1.0;
    case Loss::ClippedHinge:
      return std::min(1.0, std::max(0.0, 1.0 - double(y) * score));
  }
  return 0.0;
}

namespace detail {

// Shared projected-subgradient loop. The problem is abstracted behind
// score(i), apply_scale(c), apply_update(i, delta), diag(i) = <phi_i, phi_i>,
// and the caller-maintained squared norm; see train_rfsvm for the concrete
// linear instance. Step eta_t = 1/(lambda t), projection onto the
// |f| <= sqrt(2/lambda) ball, tail average over the last half of the
// planned iterates, stall stop once the averaged objective moves less than
// `tolerance` between epochs.
template <typename Problem>
void pegasos(Problem& pr, int m, const Eigen::VectorXi& labels, const TrainConfig& cfg,
             double* max_norm_ratio_out) {
  const double lambda = cfg.lambda;
  const double radius_sq = 2.0 / lambda;
  const long long total = static_cast<long long>(cfg.epochs) * m;
  const long long tail_start = total / 2;  // steps strictly after this are averaged
  std::mt19937_64 gen(rng::derive(cfg.seed, rng::stream::train));
  std::uniform_int_distribution<int> pick(0, m - 1);

  double n2 = 0.0;  // running |f|^2, resynced each epoch
  double max_ratio = 0.0;
  double prev_obj = std::numeric_limits<double>::infinity();
  long long t = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int s = 0; s < m; ++s) {
      ++t;
      const int i = pick(gen);
      const double eta = 1.0 / (lambda * double(t));
      const double score = pr.score(i);
      const double y = double(labels(i));
      const double scale = 1.0 - eta * lambda;  // = 1 - 1/t
      pr.apply_scale(scale);
      n2 *= scale * scale;
      if (y * score < 1.0) {
        const double delta = eta * y;
        n2 += 2.0 * delta * (scale * score) + delta * delta * pr.diag(i);
        pr.apply_update(i, delta);
      }
      if (n2 > radius_sq) {
        pr.apply_scale(std::sqrt(radius_sq / n2));
        n2 = radius_sq;
      }
      max_ratio = std::max(max_ratio, n2 / radius_sq);
      if (t > tail_start) pr.accumulate_average();
    }
    n2 = pr.resync_norm_sq();
    max_ratio = std::max(max_ratio, n2 / radius_sq);
    if (pr.average_ready()) {
      const double obj = pr.average_objective();
      if (prev_obj - obj < cfg.tolerance) break;
      prev_obj = obj;
    }
  }
  if (max_norm_ratio_out) *max_norm_ratio_out = max_ratio;
}

struct LinearProblem {
  const Eigen::MatrixXd& phi;  // embedding_dim x m
  const Eigen::VectorXi& labels;
  double lambda;
  Eigen::VectorXd col_sqnorm;
  Eigen::VectorXd w;
  Eigen::VectorXd avg_sum;
  long long avg_count = 0;

  LinearProblem(const Eigen::MatrixXd& p, const Eigen::VectorXi& y, double lam)
      : phi(p), labels(y), lambda(lam), col_sqnorm(p.colwise().squaredNorm()),
        w(Eigen::VectorXd::Zero(p.rows())), avg_sum(Eigen::VectorXd::Zero(p.rows())) {}

  double score(int i) const { return w.dot(phi.col(i)); }
  double diag(int i) const { return col_sqnorm(i); }
  void apply_scale(double c) { w *= c; }
  void apply_update(int i, double delta) { w += delta * phi.col(i); }
  void accumulate_average() {
    avg_sum += w;
    ++avg_count;
  }
  bool average_ready() const { return avg_count > 0; }
  double resync_norm_sq() { return w.squaredNorm(); }
  Eigen::VectorXd average() const { return avg_count > 0 ? (avg_sum / double(avg_count)).eval() : w; }
  double average_objective() const {
    Eigen::VectorXd wb = average();
    double hinge = 0.0;
    for (int i = 0; i < phi.cols(); ++i)
      hinge += std::max(0.0, 1.0 - double(labels(i)) * wb.dot(phi.col(i)));
    return hinge / double(phi.cols()) + 0.5 * lambda * wb.squaredNorm();
  }
};

struct KernelProblem {
  const Eigen::MatrixXd& gram;  // m x m
  const Eigen::VectorXi& labels;
  double lambda;
  Eigen::VectorXd beta;
  Eigen::VectorXd q;  // K beta
  Eigen::VectorXd avg_beta;
  Eigen::VectorXd avg_q;
  long long avg_count = 0;

  KernelProblem(const Eigen::MatrixXd& k, const Eigen::VectorXi& y, double lam)
      : gram(k), labels(y), lambda(lam), beta(Eigen::VectorXd::Zero(k.rows())),
        q(Eigen::VectorXd::Zero(k.rows())), avg_beta(Eigen::VectorXd::Zero(k.rows())),
        avg_q(Eigen::VectorXd::Zero(k.rows())) {}

  double score(int i) const { return q(i); }
  double diag(int i) const { return gram(i, i); }
  void apply_scale(double c) {
    beta *= c;
    q *= c;
  }
  void apply_update(int i, double delta) {
    beta(i) += delta;
    q += delta * gram.col(i);
  }
  void accumulate_average() {
    avg_beta += beta;
    avg_q += q;
    ++avg_count;
  }
  bool average_ready() const { return avg_count > 0; }
  double resync_norm_sq() { return beta.dot(q); }
  double average_objective() const {
    Eigen::VectorXd bb = avg_beta / double(avg_count);
    Eigen::VectorXd qb = avg_q / double(avg_count);
    double hinge = 0.0;
    for (int i = 0; i < gram.rows(); ++i)
      hinge += std::max(0.0, 1.0 - double(labels(i)) * qb(i));
    return hinge / double(gram.rows()) + 0.5 * lambda * bb.dot(qb);
  }
};

}  // namespace detail

inline Model train_rfsvm(const LabeledDataset& data, const FeatureSet& fs,
                         const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.size() < 1) throw validation_error("train_rfsvm: empty dataset");
  Eigen::MatrixXd phi = embed_all(fs, data.points);
  if (!phi.allFinite()) throw validation_error("train_rfsvm: non-finite features");

  detail::LinearProblem pr(phi, data.labels, cfg.lambda);
  Model model;
  detail::pegasos(pr, data.size(), data.labels, cfg, &model.max_norm_ratio);
  model.features = fs;
  model.weights = pr.average();
  model.lambda = cfg.lambda;
  double hinge = 0.0;
  for (int i = 0; i < data.size(); ++i)
    hinge += std::max(0.0, 1.0 - double(data.labels(i)) * model.weights.dot(phi.col(i)));
  model.objective = hinge / double(data.size()) + 0.5 * cfg.lambda * model.weights.squaredNorm();
  if (!model.weights.allFinite()) throw numeric_error("train_rfsvm: non-finite weights");
  return model;
}

/// Gram matrix of the Gaussian kernel, one row/column per point.
inline Eigen::MatrixXd gaussian_gram(const Eigen::MatrixXd& points, double gamma) {
  if (!(gamma > 0.0)) throw validation_error("gaussian_gram: gamma must be positive");
  Eigen::VectorXd sq = points.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * points * points.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  return (-d2.cwiseMax(0.0) / (2.0 * gamma * gamma)).array().exp();
}

inline constexpr int kKsvmSampleGuard = 20000;

inline KernelModel train_ksvm(const LabeledDataset& data, double gamma, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.size() < 1) throw validation_error("train_ksvm: empty dataset");
  if (data.size() > kKsvmSampleGuard)
    throw validation_error("train_ksvm: training set exceeds the " +
                           std::to_string(kKsvmSampleGuard) + "-sample Gram guard");
  Eigen::MatrixXd gram = gaussian_gram(data.points, gamma);

  detail::KernelProblem pr(gram, data.labels, cfg.lambda);
  KernelModel model;
  detail::pegasos(pr, data.size(), data.labels, cfg, &model.max_norm_ratio);
  model.support = data.points;
  model.alphas = pr.avg_count > 0 ? (pr.avg_beta / double(pr.avg_count)).eval() : pr.beta;
  model.gamma = gamma;
  model.lambda = cfg.lambda;
  Eigen::VectorXd scores = pr.avg_count > 0 ? (pr.avg_q / double(pr.avg_count)).eval() : pr.q;
  double hinge = 0.0;
  for (int i = 0; i < data.size(); ++i)
    hinge += std::max(0.0, 1.0 - double(data.labels(i)) * scores(i));
  model.objective = hinge / double(data.size()) + 0.5 * cfg.lambda * model.alphas.dot(scores);
  if (!model.alphas.allFinite()) throw numeric_error("train_ksvm: non-finite coefficients");
  return model;
}

inline Eigen::VectorXd decision_scores(const Model& model, const Eigen::MatrixXd& points) {
  const int m = static_cast<int>(points.rows());
  Eigen::VectorXd scores(m);
  const int block = 8192;
  for (int start = 0; start < m; start += block) {
    int count = std::min(block, m - start);
    scores.segment(start, count) =
        embed_all(model.features, points.middleRows(start, count)).transpose() * model.weights;
  }
  return scores;
}

inline Eigen::VectorXd decision_scores(const KernelModel& model, const Eigen::MatrixXd& points) {
  if (points.cols() != model.support.cols())
    throw validation_error("predict: dimension mismatch");
  const int m = static_cast<int>(points.rows());
  const Eigen::VectorXd support_sq = model.support.rowwise().squaredNorm();
  Eigen::VectorXd scores(m);
  const int block = 4096;
  for (int start = 0; start < m; start += block) {
    int count = std::min(block, m - start);
    auto chunk = points.middleRows(start, count);
    Eigen::MatrixXd d2 =
        (-2.0 * chunk * model.support.transpose()).rowwise() + support_sq.transpose();
    d2.colwise() += chunk.rowwise().squaredNorm();
    scores.segment(start, count) =
        (-d2.cwiseMax(0.0) / (2.0 * model.gamma * model.gamma)).array().exp().matrix() *
        model.alphas;
  }
  return scores;
}

struct Prediction {
  double score;
  int label;
};

template <typename ModelT>
Prediction predict(const ModelT& model, const Eigen::VectorXd& x) {
  Eigen::MatrixXd row = x.transpose();
  double s = decision_scores(model, row)(0);
  return {s, sign_label(s)};
}

template <typename ModelT>
double evaluate_risk(const ModelT& model, const LabeledDataset& data, Loss loss) {
  if (data.size() < 1) throw validation_error("evaluate_risk: empty dataset");
  Eigen::VectorXd scores = decision_scores(model, data.points);
  double sum = 0.0;
  for (int i = 0; i < data.size(); ++i) sum += loss_value(loss, data.labels(i), scores(i));
  return sum / double(data.size());
}

inline double objective_value(const Model& model, const LabeledDataset& data) {
  return evaluate_risk(model, data, Loss::Hinge) +
         0.5 * model.lambda * model.weights.squaredNorm();
}

inline double objective_value(const KernelModel& model, const LabeledDataset& data) {
  Eigen::VectorXd self_scores = decision_scores(model, model.support);
  return evaluate_risk(model, data, Loss::Hinge) +
         0.5 * model.lambda * model.alphas.dot(self_scores);
}

}  // namespace rfkit
