#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "rfkit/common.hpp"
#include "rfkit/solver.hpp"

namespace rfkit {

/// Descending eigenvalues of the Gram/m discretization of the kernel
/// integral operator; negatives (rounding noise) are clipped to zero.
struct SpectrumEstimate {
  Eigen::VectorXd eigenvalues;
  int sample_count = 0;
  std::string kernel;
  double pre_clip_min = 0.0;
};

enum class DecayKind { Polynomial, Subexponential };

inline DecayKind decay_kind_from_string(std::string_view s) {
  if (s == "poly" || s == "polynomial") return DecayKind::Polynomial;
  if (s == "subexp" || s == "subexponential") return DecayKind::Subexponential;
  throw validation_error("unknown decay kind: '" + std::string(s) + "'");
}

/// lambda_i <= c1 i^{-c2}, or lambda_i <= c3 exp(-c4 i^{1/d}).
struct DecayFit {
  DecayKind kind = DecayKind::Polynomial;
  double c1 = 0.0, c2 = 0.0;
  double c3 = 0.0, c4 = 0.0;
  int d = 1;
  double residual = 0.0;  // mean squared log-domain fit error
};

/// Output of the theorem-prescription planners.
struct FeatureCountPlan {
  std::optional<double> mu;
  std::optional<double> dof;
  long long n_features = 0;
  double lambda = 0.0;
  std::optional<double> gamma;
  double delta = 0.0;
  double constant = 1.0;
};

inline constexpr int kSpectrumSampleGuard = 5000;

inline SpectrumEstimate empirical_spectrum(const Eigen::MatrixXd& points, double gamma,
                                           int guard = kSpectrumSampleGuard) {
  const int m = static_cast<int>(points.rows());
  if (m < 1) throw validation_error("empirical_spectrum: need at least one point");
  if (m > guard)
    throw validation_error("empirical_spectrum: sample count exceeds the " +
                           std::to_string(guard) + "-point guard");
  Eigen::MatrixXd gram = gaussian_gram(points, gamma) / double(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  SpectrumEstimate est;
  est.sample_count = m;
  est.kernel = "gaussian(gamma=" + format_f64(gamma) + ")";
  est.pre_clip_min = eig.eigenvalues().minCoeff();
  est.eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
  return est;
}

inline double degrees_of_freedom(const SpectrumEstimate& spec, double mu) {
  if (!(mu > 0.0)) throw validation_error("degrees_of_freedom: mu must be positive");
  return (spec.eigenvalues.array() / (spec.eigenvalues.array() + mu)).sum();
}

inline constexpr double kEigenvalueFloor = 1e-12;

/// Least squares in the log domain: log lambda_i against log i (polynomial)
/// or against i^{1/d} (sub-exponential), over eigenvalues above the floor.
inline DecayFit fit_decay(const SpectrumEstimate& spec, DecayKind kind, int d = 1) {
  if (kind == DecayKind::Subexponential && d < 1)
    throw validation_error("fit_decay: d must be >= 1");
  std::vector<double> xs, ys;
  for (int i = 0; i < spec.eigenvalues.size(); ++i) {
    double v = spec.eigenvalues(i);
    if (v > kEigenvalueFloor) {
      double rank = double(i + 1);
      xs.push_back(kind == DecayKind::Polynomial ? std::log(rank) : std::pow(rank, 1.0 / d));
      ys.push_back(std::log(v));
    }
  }
  if (xs.size() < 10)
    throw validation_error("fit_decay: need at least 10 eigenvalues above the floor");
  const double n = double(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  DecayFit fit;
  fit.kind = kind;
  fit.d = d;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double r = ys[i] - (intercept + slope * xs[i]);
    rss += r * r;
  }
  fit.residual = rss / n;
  if (kind == DecayKind::Polynomial) {
    fit.c1 = std::exp(intercept);
    fit.c2 = -slope;
  } else {
    fit.c3 = std::exp(intercept);
    fit.c4 = -slope;
  }
  return fit;
}

/// Whether mu sits inside the validity range of the closed-form d(mu) bound.
inline bool dof_bound_in_range(const DecayFit& fit, double mu) {
  if (fit.kind == DecayKind::Polynomial) return mu < fit.c1;
  double cap = fit.c3 * std::exp(-std::max(fit.c4, 1.0 / fit.c4) * double(fit.d) * double(fit.d));
  return mu < cap;
}

/// Closed-form degrees-of-freedom bound:
///   polynomial      d(mu) <= 2 c2/(c2-1) (c1/mu)^{1/c2}
///   sub-exponential d(mu) <= 5 c4^{-d} ln^d(c3/mu)
/// `in_range` (optional) reports whether mu is inside the bound's validity
/// range; outside it the formula is still evaluated but is only indicative.
inline double dof_bound(const DecayFit& fit, double mu, bool* in_range = nullptr) {
  if (!(mu > 0.0)) throw validation_error("dof_bound: mu must be positive");
  if (in_range) *in_range = dof_bound_in_range(fit, mu);
  if (fit.kind == DecayKind::Polynomial) {
    if (!(fit.c1 > 0.0) || !(fit.c2 > 1.0))
      throw validation_error("dof_bound: polynomial fit requires c1 > 0 and c2 > 1");
    return 2.0 * fit.c2 / (fit.c2 - 1.0) * std::pow(fit.c1 / mu, 1.0 / fit.c2);
  }
  if (!(fit.c3 > 0.0) || !(fit.c4 > 0.0))
    throw validation_error("dof_bound: sub-exponential fit requires c3, c4 > 0");
  double lg = std::log(fit.c3 / mu);
  if (!(lg > 0.0)) return 0.0;
  return 5.0 * std::pow(fit.c4, -double(fit.d)) * std::pow(lg, double(fit.d));
}

/// N >= 5 d(mu) ln(16 d(mu) / delta), rounded up.
inline long long feature_count(double dof, double delta) {
  if (!(dof > 0.0)) throw validation_error("feature_count: dof must be positive");
  if (!(delta > 0.0 && delta < 1.0))
    throw validation_error("feature_count: delta must lie in (0, 1)");
  return static_cast<long long>(std::ceil(5.0 * dof * std::log(16.0 * dof / delta)));
}

/// Realizable-case prescription. Polynomial spectrum: lambda = m^{-c2/(2+c2)},
/// mu = c1 m^{-2c2/(2+c2)}. Sub-exponential: lambda = 1/m, mu = c3/m^2.
/// N comes from the d(mu) bound through feature_count.
inline FeatureCountPlan plan_realizable(long long m, const DecayFit& fit, double delta) {
  if (m < 2) throw validation_error("plan_realizable: m must be >= 2");
  if (!(delta > 0.0 && delta < 1.0))
    throw validation_error("plan_realizable: delta must lie in (0, 1)");
  FeatureCountPlan plan;
  plan.delta = delta;
  if (fit.kind == DecayKind::Polynomial) {
    if (!(fit.c2 > 1.0)) throw validation_error("plan_realizable: requires c2 > 1");
    const double expo = fit.c2 / (2.0 + fit.c2);
    plan.lambda = std::pow(double(m), -expo);
    plan.mu = fit.c1 * std::pow(double(m), -2.0 * expo);
  } else {
    if (!(fit.c3 > 0.0) || !(fit.c4 > 0.0))
      throw validation_error("plan_realizable: requires c3, c4 > 0");
    plan.lambda = 1.0 / double(m);
    plan.mu = fit.c3 / (double(m) * double(m));
  }
  plan.dof = dof_bound(fit, *plan.mu);
  plan.n_features = feature_count(*plan.dof, delta);
  return plan;
}

/// Separation-case prescription: lambda = 1/m, gamma = tau/sqrt(ln m),
/// N = ceil(C ln^{2d}(m) (ln ln m + ln(1/delta))). The constant is exposed
/// because the source result leaves it unspecified; predicted N is
/// order-of-magnitude guidance.
inline FeatureCountPlan plan_separation(long long m, double tau, int d, double delta,
                                        double constant = 1.0) {
  if (m < 3) throw validation_error("plan_separation: m must be >= 3");
  if (!(tau > 0.0)) throw validation_error("plan_separation: tau must be positive");
  if (d < 1) throw validation_error("plan_separation: d must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw validation_error("plan_separation: delta must lie in (0, 1)");
  if (!(constant > 0.0)) throw validation_error("plan_separation: constant must be positive");
  FeatureCountPlan plan;
  plan.delta = delta;
  plan.constant = constant;
  const double lg = std::log(double(m));
  plan.lambda = 1.0 / double(m);
  plan.gamma = tau / std::sqrt(lg);
  plan.n_features = static_cast<long long>(
      std::ceil(constant * std::pow(lg, 2.0 * d) * (std::log(lg) + std::log(1.0 / delta))));
  return plan;
}

}  // namespace rfkit
