#pragma once

// Minimal exponential-family dual shared by every estimator.
//
//   p(c) = m(c) exp(F(c,:) theta) / Z(theta)
//   D(theta) = log Z(theta) - theta . targets
//
// over the active cells c only. grad D = E_p[F] - targets and the Hessian is
// the feature covariance under p.

#include <Eigen/Dense>

#include "popfuse/maxent.hpp"

namespace popfuse::detail {

struct ExpFamily {
  Eigen::MatrixXd features;  // active cells x dimension
  Eigen::VectorXd log_base;  // active cells
  Eigen::VectorXd targets;   // dimension
};

struct Evaluation {
  double value = 0.0;
  double log_partition = 0.0;
  Eigen::VectorXd prob;
  Eigen::VectorXd gradient;
};

Evaluation evaluate(const ExpFamily& family, const Eigen::VectorXd& theta);

Eigen::MatrixXd covariance(const ExpFamily& family, const Evaluation& at);

enum class NewtonOutcome { Converged, Diverged, IterationCap, Stalled };

struct NewtonResult {
  Eigen::VectorXd theta;
  int iterations = 0;
  double max_gradient = 0.0;
  NewtonOutcome outcome = NewtonOutcome::Converged;
};

NewtonResult minimize(const ExpFamily& family, Eigen::VectorXd theta, const SolverOptions& options);

}  // namespace popfuse::detail
