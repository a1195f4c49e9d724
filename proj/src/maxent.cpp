#include "popfuse/maxent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "exp_family.hpp"

namespace popfuse {

namespace {

using detail::ExpFamily;
using detail::NewtonOutcome;
using Cell = std::pair<Eigen::Index, Eigen::Index>;

Eigen::MatrixXd broadcast_rows(const Eigen::VectorXd& per_bin, std::size_t categories) {
  return per_bin.replicate(1, static_cast<Eigen::Index>(categories));
}

double max_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

std::vector<Cell> active_cells(const CellMask& forced_zero) {
  std::vector<Cell> cells;
  for (Eigen::Index i = 0; i < forced_zero.rows(); ++i) {
    for (Eigen::Index s = 0; s < forced_zero.cols(); ++s) {
      if (!forced_zero(i, s)) cells.emplace_back(i, s);
    }
  }
  return cells;
}

void check_state(const DualState& state, const ConstraintSet& cs) {
  const auto& grid = cs.grid();
  if (state.lambda_f.size() != static_cast<Eigen::Index>(cs.moment_count()) ||
      state.lambda_obs.size() != cs.observed_mass().size() ||
      state.forced_zero.rows() != static_cast<Eigen::Index>(grid.bins()) ||
      state.forced_zero.cols() != static_cast<Eigen::Index>(grid.categories())) {
    throw Error(ErrorKind::InvalidArgument, "dual state does not match the constraint set");
  }
  if (!state.lambda_f.allFinite() || !state.lambda_obs.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "dual state has non-finite multipliers");
  }
}

ExpFamily build_family(const ConstraintSet& cs, const std::vector<Cell>& cells) {
  if (cells.empty()) {
    throw Error(ErrorKind::Infeasible, "every cell is forced to zero mass");
  }
  const auto k_moments = static_cast<Eigen::Index>(cs.moment_count());
  const auto dim = static_cast<Eigen::Index>(cs.dual_dimension());
  ExpFamily family;
  family.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cells.size()), dim);
  family.log_base = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cells.size()));
  family.targets.resize(dim);
  for (Eigen::Index k = 0; k < k_moments; ++k) {
    family.targets(k) = cs.moments()[static_cast<std::size_t>(k)].target;
  }
  if (cs.observation()) family.targets.tail(dim - k_moments) = cs.observed_mass();

  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto [i, s] = cells[c];
    const auto row = static_cast<Eigen::Index>(c);
    for (Eigen::Index k = 0; k < k_moments; ++k) {
      family.features(row, k) = cs.moments()[static_cast<std::size_t>(k)].feature(i, s);
    }
    if (cs.observation()) {
      family.features(row, k_moments + i) = cs.observation()->selection.prob()(i, s);
    }
  }
  return family;
}

Eigen::VectorXd pack(const DualState& state) {
  Eigen::VectorXd theta(state.lambda_f.size() + state.lambda_obs.size());
  theta << state.lambda_f, state.lambda_obs;
  return theta;
}

void unpack(const Eigen::VectorXd& theta, DualState& state) {
  const auto k = state.lambda_f.size();
  state.lambda_f = theta.head(k);
  state.lambda_obs = theta.tail(theta.size() - k);
}

BinnedJoint scatter(const Grid& grid, const std::vector<Cell>& cells, const Eigen::VectorXd& prob) {
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.bins()),
                                               static_cast<Eigen::Index>(grid.categories()));
  for (std::size_t c = 0; c < cells.size(); ++c) {
    mass(cells[c].first, cells[c].second) = prob(static_cast<Eigen::Index>(c));
  }
  return BinnedJoint::from_weights(grid, std::move(mass));
}

ErrorKind failure_kind(NewtonOutcome outcome) {
  return outcome == NewtonOutcome::Diverged ? ErrorKind::Infeasible : ErrorKind::NotConverged;
}

std::string failure_message(const detail::NewtonResult& r) {
  std::ostringstream msg;
  switch (r.outcome) {
    case NewtonOutcome::Diverged:
      msg << "multipliers diverged (|lambda| = " << r.theta.norm() << ")";
      break;
    case NewtonOutcome::IterationCap:
      msg << "iteration cap reached";
      break;
    case NewtonOutcome::Stalled:
      msg << "line search stalled";
      break;
    case NewtonOutcome::Converged:
      break;
  }
  msg << " after " << r.iterations << " iterations with max gradient " << r.max_gradient;
  return msg.str();
}

Estimate assemble(const ConstraintSet& cs, const DualSolution& solution) {
  BinnedJoint joint = reconstruct_primal(solution.state, cs);
  Marginal marginal = marginalize(joint);
  Residuals residuals = constraint_residuals(joint, cs);
  return Estimate{std::move(joint),  std::move(marginal), solution.state, std::move(residuals),
                  solution.iterations, solution.converged, std::nullopt};
}

void check_moment_feature(const MomentConstraint& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.feature.rows() != rows || m.feature.cols() != cols) {
    throw Error(ErrorKind::GridMismatch, "moment feature does not match the grid");
  }
  if (!m.feature.allFinite() || !std::isfinite(m.target)) {
    throw Error(ErrorKind::InvalidArgument, "moment feature and target must be finite");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Constraints

MomentConstraint MomentConstraint::mean(const Grid& grid, double target) {
  return {broadcast_rows(grid.midpoints(), grid.categories()), target};
}

MomentConstraint MomentConstraint::second_moment(const Grid& grid, double target) {
  return {broadcast_rows(grid.midpoints().array().square().matrix(), grid.categories()), target};
}

std::vector<MomentConstraint> mean_std_constraints(const Grid& grid, double mean,
                                                   std::optional<double> std_dev) {
  std::vector<MomentConstraint> out{MomentConstraint::mean(grid, mean)};
  if (std_dev) {
    if (!(*std_dev >= 0.0)) throw Error(ErrorKind::InvalidArgument, "standard deviation must be >= 0");
    out.push_back(MomentConstraint::second_moment(grid, mean * mean + *std_dev * *std_dev));
  }
  return out;
}

ConstraintSet::ConstraintSet(Grid grid, std::vector<MomentConstraint> moments,
                             std::optional<Observation> observation)
    : grid_(std::move(grid)), moments_(std::move(moments)), observation_(std::move(observation)) {
  if (moments_.empty() && !observation_) {
    throw Error(ErrorKind::InvalidArgument, "a constraint set needs at least one constraint");
  }
  const auto rows = static_cast<Eigen::Index>(grid_.bins());
  const auto cols = static_cast<Eigen::Index>(grid_.categories());
  for (const auto& m : moments_) check_moment_feature(m, rows, cols);
  if (observation_) {
    if (!observation_->histogram.grid().same_edges(grid_) || !(observation_->selection.grid() == grid_)) {
      throw Error(ErrorKind::GridMismatch, "observation does not match the grid");
    }
    observed_mass_ = observation_->histogram.observed_mass();
  }
}

CellMask support_mask(const ConstraintSet& cs) {
  const auto& grid = cs.grid();
  CellMask mask = CellMask::Constant(static_cast<Eigen::Index>(grid.bins()),
                                     static_cast<Eigen::Index>(grid.categories()), false);
  if (!cs.observation()) return mask;
  const auto& prob = cs.observation()->selection.prob();
  const auto& observed = cs.observed_mass();
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    if (observed(i) > 0.0) continue;
    for (Eigen::Index s = 0; s < mask.cols(); ++s) mask(i, s) = prob(i, s) > 0.0;
  }
  return mask;
}

DualState initial_state(const ConstraintSet& cs) {
  return DualState{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cs.moment_count())),
                   Eigen::VectorXd::Zero(cs.observed_mass().size()), support_mask(cs)};
}

// ---------------------------------------------------------------------------
// Dual

double dual_objective(const DualState& state, const ConstraintSet& cs) {
  check_state(state, cs);
  const auto cells = active_cells(state.forced_zero);
  return detail::evaluate(build_family(cs, cells), pack(state)).value;
}

Eigen::VectorXd dual_gradient(const DualState& state, const ConstraintSet& cs) {
  check_state(state, cs);
  const auto cells = active_cells(state.forced_zero);
  return detail::evaluate(build_family(cs, cells), pack(state)).gradient;
}

DualSolution solve_dual(const ConstraintSet& cs, std::optional<DualState> init,
                        const SolverOptions& options) {
  DualState state = init ? std::move(*init) : initial_state(cs);
  check_state(state, cs);
  const auto cells = active_cells(state.forced_zero);
  const auto family = build_family(cs, cells);
  const auto result = detail::minimize(family, pack(state), options);

  DualSolution solution;
  solution.state = std::move(state);
  unpack(result.theta, solution.state);
  solution.iterations = result.iterations;
  solution.max_gradient = result.max_gradient;
  solution.converged = result.outcome == NewtonOutcome::Converged;
  if (!solution.converged) {
    throw SolverError(failure_kind(result.outcome), failure_message(result), solution);
  }
  return solution;
}

BinnedJoint reconstruct_primal(const DualState& state, const ConstraintSet& cs) {
  check_state(state, cs);
  const auto cells = active_cells(state.forced_zero);
  const auto ev = detail::evaluate(build_family(cs, cells), pack(state));
  return scatter(cs.grid(), cells, ev.prob);
}

double Residuals::max_moment() const noexcept { return max_of(moments); }
double Residuals::max_observation() const noexcept { return max_of(observation); }
double Residuals::max() const noexcept { return std::max(max_moment(), max_observation()); }

Residuals constraint_residuals(const BinnedJoint& joint, const ConstraintSet& cs) {
  if (!(joint.grid() == cs.grid())) {
    throw Error(ErrorKind::GridMismatch, "joint does not match the constraint grid");
  }
  Residuals r;
  for (const auto& m : cs.moments()) {
    r.moments.push_back(std::abs(joint.mass().cwiseProduct(m.feature).sum() - m.target));
  }
  if (cs.observation()) {
    const Eigen::VectorXd forward =
        joint.mass().cwiseProduct(cs.observation()->selection.prob()).rowwise().sum();
    const Eigen::VectorXd diff = (forward - cs.observed_mass()).cwiseAbs();
    r.observation.assign(diff.data(), diff.data() + diff.size());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Estimators

Estimate estimate_population(const ObservedHistogram& obs, const SelectionFunction& sel,
                             std::vector<MomentConstraint> moments, const SolverOptions& options) {
  if (!obs.grid().same_edges(sel.grid())) {
    throw Error(ErrorKind::GridMismatch, "sample histogram and selection function grids differ");
  }
  if (!(sel.prob().maxCoeff() > 0.0)) {
    throw Error(ErrorKind::DegenerateSelection, "no individual can ever be sampled");
  }
  ConstraintSet cs(sel.grid(), std::move(moments), Observation{obs, sel});
  try {
    return assemble(cs, solve_dual(cs, std::nullopt, options));
  } catch (const SolverError& e) {
    std::optional<Estimate> partial;
    if (e.last()) partial = assemble(cs, *e.last());
    throw SolverError(e.kind(), e.detail(), e.last(), std::move(partial));
  }
}

Marginal pure_sample_estimate(const ObservedHistogram& obs) { return obs.shape(); }

Marginal pure_prior_estimate(const Grid& grid, std::vector<MomentConstraint> moments,
                             const SolverOptions& options) {
  if (moments.empty()) return Marginal::uniform(grid);
  ConstraintSet cs(grid, std::move(moments));
  return marginalize(reconstruct_primal(solve_dual(cs, std::nullopt, options).state, cs));
}

std::vector<bool> observable_below(const Grid& grid, double threshold) {
  std::vector<bool> mask(grid.bins());
  for (std::size_t i = 0; i < grid.bins(); ++i) mask[i] = grid.lower(i) < threshold;
  return mask;
}

std::vector<bool> observable_above(const Grid& grid, double threshold) {
  std::vector<bool> mask(grid.bins());
  for (std::size_t i = 0; i < grid.bins(); ++i) mask[i] = grid.upper(i) > threshold;
  return mask;
}

// The conditional shape on the observable bins is fixed, so the whole
// observable block behaves as one cell of mass W whose entropy contribution is
// -W log W + W H(shape). That is a maximum-entropy problem over
// {censored bins} + {block} with log base measure H(shape) on the block.
Estimate censored_estimate(const Marginal& obs_shape, const std::vector<bool>& observable,
                           std::vector<MomentConstraint> moments, const SolverOptions& options) {
  const Grid& grid = obs_shape.grid();
  const auto bins = static_cast<Eigen::Index>(grid.bins());
  if (observable.size() != grid.bins()) {
    throw Error(ErrorKind::GridMismatch, "censor mask needs one entry per bin");
  }
  std::vector<Eigen::Index> censored;
  double observable_mass = 0.0;
  for (Eigen::Index i = 0; i < bins; ++i) {
    if (observable[static_cast<std::size_t>(i)]) {
      observable_mass += obs_shape.mass()(i);
    } else {
      censored.push_back(i);
      if (obs_shape.mass()(i) > 1e-12) {
        throw Error(ErrorKind::InvalidArgument, "sample shape has mass in a censored bin");
      }
    }
  }
  if (static_cast<Eigen::Index>(censored.size()) == bins || !(observable_mass > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "censor mask leaves nothing observable");
  }
  for (const auto& m : moments) check_moment_feature(m, bins, 1);

  const Eigen::VectorXd shape = [&] {
    Eigen::VectorXd s = obs_shape.mass();
    for (const auto i : censored) s(i) = 0.0;
    return Eigen::VectorXd(s / s.sum());
  }();

  const auto k_moments = static_cast<Eigen::Index>(moments.size());
  const auto n_cells = static_cast<Eigen::Index>(censored.size()) + 1;
  ExpFamily family;
  family.features.resize(n_cells, k_moments);
  family.log_base = Eigen::VectorXd::Zero(n_cells);
  family.targets.resize(k_moments);
  for (Eigen::Index k = 0; k < k_moments; ++k) {
    const auto& m = moments[static_cast<std::size_t>(k)];
    family.targets(k) = m.target;
    for (std::size_t c = 0; c < censored.size(); ++c) {
      family.features(static_cast<Eigen::Index>(c), k) = m.feature(censored[c], 0);
    }
    family.features(n_cells - 1, k) = shape.dot(m.feature.col(0));
  }
  family.log_base(n_cells - 1) = entropy(std::span<const double>(shape.data(), grid.bins()));

  const auto result = detail::minimize(family, Eigen::VectorXd::Zero(k_moments), options);
  const auto ev = detail::evaluate(family, result.theta);

  const double weight = ev.prob(n_cells - 1);
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(bins, 2);
  mass.col(1) = weight * shape;
  for (std::size_t c = 0; c < censored.size(); ++c) {
    mass(censored[c], 0) = ev.prob(static_cast<Eigen::Index>(c));
  }
  CellMask forced_zero(bins, 2);
  for (Eigen::Index i = 0; i < bins; ++i) {
    const bool obs = observable[static_cast<std::size_t>(i)];
    forced_zero(i, 0) = obs;
    forced_zero(i, 1) = !obs;
  }

  BinnedJoint joint = BinnedJoint::from_weights(grid.with_categories(2), std::move(mass));
  Marginal marginal = marginalize(joint);
  Residuals residuals;
  for (const auto& m : moments) {
    residuals.moments.push_back(std::abs(marginal.mass().dot(m.feature.col(0)) - m.target));
  }
  const double recovered = joint.mass().col(1).sum();
  for (Eigen::Index i = 0; i < bins; ++i) {
    if (!observable[static_cast<std::size_t>(i)]) continue;
    const double conditional = recovered > 0.0 ? joint.mass()(i, 1) / recovered : 0.0;
    residuals.observation.push_back(std::abs(conditional - shape(i)));
  }

  Estimate estimate{std::move(joint),
                    std::move(marginal),
                    DualState{result.theta, Eigen::VectorXd(), std::move(forced_zero)},
                    std::move(residuals),
                    result.iterations,
                    result.outcome == NewtonOutcome::Converged,
                    recovered};
  if (!estimate.converged) {
    DualSolution last{estimate.dual, result.iterations, result.max_gradient, false};
    throw SolverError(failure_kind(result.outcome), failure_message(result), std::move(last),
                      std::move(estimate));
  }
  return estimate;
}

}  // namespace popfuse
