#pragma once

// Constrained maximum-entropy estimation of a population distribution.
//
// The estimate maximizes the entropy of the joint (observed bin x selection
// category) mass subject to
//   * moment constraints      sum_cells rho(i,s) f_k(i,s) = target_k
//   * the observation          sum_s rho(i,s) sel(i,s)   = rate * shape(i)
// and has the exponential-family form
//   rho(i,s) = exp(sum_k lambda_k f_k(i,s) + lambda_obs(i) sel(i,s)) / N.
// The multipliers minimize the convex dual
//   D(lambda) = log N(lambda) - sum_k lambda_k target_k - sum_i lambda_obs(i) rho_o(i),
// whose gradient is exactly the vector of constraint violations.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "popfuse/dist.hpp"
#include "popfuse/errors.hpp"

namespace popfuse {

using CellMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Expectation constraint E[f] = target with f tabulated per grid cell.
struct MomentConstraint {
  Eigen::MatrixXd feature;
  double target = 0.0;

  /// f = bin midpoint in every category.
  static MomentConstraint mean(const Grid& grid, double target);
  /// f = squared bin midpoint in every category.
  static MomentConstraint second_moment(const Grid& grid, double target);
};

/// Mean constraint, plus a second-moment constraint mean^2 + std^2 when a
/// standard deviation is given.
std::vector<MomentConstraint> mean_std_constraints(const Grid& grid, double mean,
                                                   std::optional<double> std_dev = std::nullopt);

struct Observation {
  ObservedHistogram histogram;
  SelectionFunction selection;
};

class ConstraintSet {
public:
  ConstraintSet(Grid grid, std::vector<MomentConstraint> moments,
                std::optional<Observation> observation = std::nullopt);

  const Grid& grid() const noexcept { return grid_; }
  const std::vector<MomentConstraint>& moments() const noexcept { return moments_; }
  const std::optional<Observation>& observation() const noexcept { return observation_; }

  /// Observed mass per bin (rate * shape); empty without an observation.
  const Eigen::VectorXd& observed_mass() const noexcept { return observed_mass_; }

  std::size_t moment_count() const noexcept { return moments_.size(); }
  std::size_t dual_dimension() const noexcept {
    return moments_.size() + static_cast<std::size_t>(observed_mass_.size());
  }

private:
  Grid grid_;
  std::vector<MomentConstraint> moments_;
  std::optional<Observation> observation_;
  Eigen::VectorXd observed_mass_;
};

struct DualState {
  Eigen::VectorXd lambda_f;
  Eigen::VectorXd lambda_obs;
  /// Cells held at exactly zero mass.
  CellMask forced_zero;
};

/// Cells the observation forces to zero: bins observed empty where the
/// individual could have been sampled. Everything else is free.
CellMask support_mask(const ConstraintSet& cs);

/// Zero multipliers on the support given by support_mask.
DualState initial_state(const ConstraintSet& cs);

double dual_objective(const DualState& state, const ConstraintSet& cs);

/// Moment components first, then one component per observed bin.
Eigen::VectorXd dual_gradient(const DualState& state, const ConstraintSet& cs);

struct SolverOptions {
  double gradient_tolerance = 1e-9;
  int max_iterations = 500;
  double divergence_norm = 1e6;
};

struct DualSolution {
  DualState state;
  int iterations = 0;
  double max_gradient = 0.0;
  bool converged = false;
};

/// Damped Newton on the dual. Throws SolverError (Infeasible or
/// NotConverged) carrying the last iterate.
DualSolution solve_dual(const ConstraintSet& cs, std::optional<DualState> init = std::nullopt,
                        const SolverOptions& options = {});

BinnedJoint reconstruct_primal(const DualState& state, const ConstraintSet& cs);

struct Residuals {
  std::vector<double> moments;
  std::vector<double> observation;

  double max_moment() const noexcept;
  double max_observation() const noexcept;
  double max() const noexcept;
};

Residuals constraint_residuals(const BinnedJoint& joint, const ConstraintSet& cs);

struct Estimate {
  BinnedJoint joint;
  Marginal marginal;
  DualState dual;
  Residuals residuals;
  int iterations = 0;
  bool converged = false;
  /// Recovered fraction of population mass in the observable region
  /// (censored estimates only).
  std::optional<double> sample_weight;
};

class SolverError : public Error {
public:
  SolverError(ErrorKind kind, const std::string& message, std::optional<DualSolution> last,
              std::optional<Estimate> partial = std::nullopt)
      : Error(kind, message), last_(std::move(last)), partial_(std::move(partial)) {}

  const std::optional<DualSolution>& last() const noexcept { return last_; }
  const std::optional<Estimate>& partial() const noexcept { return partial_; }

private:
  std::optional<DualSolution> last_;
  std::optional<Estimate> partial_;
};

/// Most probable population distribution given the sample histogram, the
/// selection probabilities and prior moments.
Estimate estimate_population(const ObservedHistogram& obs, const SelectionFunction& sel,
                             std::vector<MomentConstraint> moments,
                             const SolverOptions& options = {});

/// The population is assumed to look exactly like the sample.
Marginal pure_sample_estimate(const ObservedHistogram& obs);

/// Maximum-entropy marginal under the moments alone; uniform without moments.
Marginal pure_prior_estimate(const Grid& grid, std::vector<MomentConstraint> moments,
                             const SolverOptions& options = {});

/// Estimate under deterministic selection: bins with observable[i] are fully
/// represented by `obs_shape`, the remaining bins are never sampled. The
/// sample weight W is recovered, not supplied. Moment features must have one
/// category column. The returned joint has two categories; category 1 holds
/// the sampled region.
Estimate censored_estimate(const Marginal& obs_shape, const std::vector<bool>& observable,
                           std::vector<MomentConstraint> moments,
                           const SolverOptions& options = {});

/// Observable mask for a threshold rule: a bin is observable when any part of
/// it lies strictly below (or above) `threshold`.
std::vector<bool> observable_below(const Grid& grid, double threshold);
std::vector<bool> observable_above(const Grid& grid, double threshold);

}  // namespace popfuse
