#include "exp_family.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace popfuse::detail {

Evaluation evaluate(const ExpFamily& family, const Eigen::VectorXd& theta) {
  Evaluation ev;
  Eigen::VectorXd exponent = family.log_base;
  if (theta.size() > 0) exponent.noalias() += family.features * theta;
  const double shift = exponent.maxCoeff();
  ev.prob = (exponent.array() - shift).exp().matrix();
  const double total = ev.prob.sum();
  ev.prob /= total;
  ev.log_partition = shift + std::log(total);
  ev.value = ev.log_partition - theta.dot(family.targets);
  ev.gradient = family.features.transpose() * ev.prob - family.targets;
  return ev;
}

Eigen::MatrixXd covariance(const ExpFamily& family, const Evaluation& at) {
  const Eigen::VectorXd mean = family.features.transpose() * at.prob;
  const Eigen::MatrixXd weighted = at.prob.asDiagonal() * family.features;
  Eigen::MatrixXd cov = family.features.transpose() * weighted;
  cov.noalias() -= mean * mean.transpose();
  return cov;
}

namespace {

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

Eigen::VectorXd restrict(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(idx[k]);
  return out;
}

// Newton direction from (H + ridge I) d = -g, escalating the ridge until the
// factorization is positive definite.
Eigen::VectorXd newton_direction(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient) {
  const double scale = 1.0 + hessian.cwiseAbs().maxCoeff();
  double ridge = 1e-10 * scale;
  const auto n = hessian.rows();
  for (int attempt = 0; attempt < 12; ++attempt, ridge *= 100.0) {
    Eigen::MatrixXd regularized = hessian;
    regularized.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(regularized);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd d = llt.solve(-gradient);
      if (d.allFinite()) return d;
    }
  }
  return -gradient / (ridge + static_cast<double>(n));
}

}  // namespace

NewtonResult minimize(const ExpFamily& family, Eigen::VectorXd theta,
                      const SolverOptions& options) {
  NewtonResult result;
  const auto dim = family.targets.size();

  // Coordinates whose feature vanishes on the support cannot move the
  // distribution; they stay where they are.
  std::vector<Eigen::Index> live;
  bool unsupported_target = false;
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (family.features.col(j).cwiseAbs().maxCoeff() > 0.0) {
      live.push_back(j);
    } else if (std::abs(family.targets(j)) > options.gradient_tolerance) {
      unsupported_target = true;
    }
  }

  Evaluation ev = evaluate(family, theta);
  result.theta = theta;
  result.max_gradient = max_abs(ev.gradient);
  if (unsupported_target) {
    result.outcome = NewtonOutcome::Diverged;
    return result;
  }

  for (int iter = 0;; ++iter) {
    result.theta = theta;
    result.iterations = iter;
    result.max_gradient = max_abs(ev.gradient);
    if (result.max_gradient <= options.gradient_tolerance) {
      result.outcome = NewtonOutcome::Converged;
      return result;
    }
    if (theta.norm() > options.divergence_norm) {
      result.outcome = NewtonOutcome::Diverged;
      return result;
    }
    if (iter >= options.max_iterations) {
      result.outcome = NewtonOutcome::IterationCap;
      return result;
    }

    const Eigen::MatrixXd full_cov = covariance(family, ev);
    Eigen::MatrixXd hessian(static_cast<Eigen::Index>(live.size()),
                            static_cast<Eigen::Index>(live.size()));
    for (std::size_t a = 0; a < live.size(); ++a) {
      for (std::size_t b = 0; b < live.size(); ++b) {
        hessian(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            full_cov(live[a], live[b]);
      }
    }
    const Eigen::VectorXd g = restrict(ev.gradient, live);
    Eigen::VectorXd d = newton_direction(hessian, g);
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = -g.squaredNorm();
    }

    Eigen::VectorXd step = Eigen::VectorXd::Zero(dim);
    for (std::size_t k = 0; k < live.size(); ++k) step(live[k]) = d(static_cast<Eigen::Index>(k));

    // Backtracking with an Armijo condition. Once the dual decrease drops
    // below rounding, a step that shrinks the gradient is accepted instead.
    const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(ev.value));
    bool accepted = false;
    for (double t = 1.0; t > 1e-20; t *= 0.5) {
      Eigen::VectorXd candidate = theta + t * step;
      Evaluation trial = evaluate(family, candidate);
      if (!std::isfinite(trial.value) || !trial.gradient.allFinite()) continue;
      const bool armijo = trial.value <= ev.value + 1e-4 * t * slope;
      const bool flat = trial.value <= ev.value + roundoff &&
                        max_abs(trial.gradient) < result.max_gradient;
      if (armijo || flat) {
        theta = std::move(candidate);
        ev = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.outcome = NewtonOutcome::Stalled;
      return result;
    }
  }
}

}  // namespace popfuse::detail
