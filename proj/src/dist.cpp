#include "popfuse/dist.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace popfuse {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::GridMismatch: return "grid mismatch";
    case ErrorKind::NotNormalized: return "not normalized";
    case ErrorKind::DegenerateSelection: return "degenerate selection";
    case ErrorKind::EmptyInput: return "empty input";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::NotConverged: return "not converged";
    case ErrorKind::EmptySample: return "empty sample";
    case ErrorKind::InsufficientUsers: return "insufficient users";
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
  }
  return "unknown";
}

namespace {

template <typename Derived>
void require_nonnegative_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        std::ostringstream msg;
        msg << what << " entry (" << i << "," << j << ") = " << v << " is negative or not finite";
        throw Error(ErrorKind::InvalidArgument, msg.str());
      }
    }
  }
}

// Renormalizes in place when within slack of one.
template <typename Derived>
void settle_normalization(Eigen::DenseBase<Derived>& m, const char* what) {
  const double total = m.sum();
  if (std::abs(total - 1.0) >= kNormalizationSlack) {
    std::ostringstream msg;
    msg << what << " sums to " << total;
    throw Error(ErrorKind::NotNormalized, msg.str());
  }
  m /= total;
}

template <typename Derived>
void normalize_weights(Eigen::DenseBase<Derived>& m, const char* what) {
  require_nonnegative_finite(m, what);
  const double total = m.sum();
  if (!(total > 0.0)) {
    throw Error(ErrorKind::EmptyInput, std::string(what) + " has no mass");
  }
  m /= total;
}

void require_shape(const Grid& grid, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (rows != static_cast<Eigen::Index>(grid.bins()) ||
      cols != static_cast<Eigen::Index>(grid.categories())) {
    std::ostringstream msg;
    msg << what << " is " << rows << "x" << cols << " but the grid is " << grid.bins() << "x"
        << grid.categories();
    throw Error(ErrorKind::GridMismatch, msg.str());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(std::vector<double> edges, std::size_t categories)
    : edges_(std::move(edges)), categories_(categories) {
  if (edges_.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "a grid needs at least two edges");
  }
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (!std::isfinite(edges_[i])) {
      throw Error(ErrorKind::InvalidArgument, "grid edges must be finite");
    }
    if (i > 0 && !(edges_[i] > edges_[i - 1])) {
      throw Error(ErrorKind::InvalidArgument, "grid edges must be strictly increasing");
    }
  }
  if (categories_ == 0) {
    throw Error(ErrorKind::InvalidArgument, "a grid needs at least one selection category");
  }
}

Grid Grid::uniform(double lo, double hi, std::size_t bins, std::size_t categories) {
  if (bins == 0) throw Error(ErrorKind::InvalidArgument, "bin count must be positive");
  if (!(hi > lo)) throw Error(ErrorKind::InvalidArgument, "empty grid range");
  std::vector<double> edges(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) edges[i] = lo + width * static_cast<double>(i);
  edges.back() = hi;
  return Grid(std::move(edges), categories);
}

Grid Grid::padded_range(double lo, double hi, std::size_t bins, std::size_t categories,
                        double padding) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
    throw Error(ErrorKind::InvalidArgument, "invalid data range");
  }
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = padding * (hi - lo);
  return uniform(lo - pad, hi + pad, bins, categories);
}

Eigen::VectorXd Grid::midpoints() const {
  Eigen::VectorXd mid(static_cast<Eigen::Index>(bins()));
  for (std::size_t i = 0; i < bins(); ++i) mid(static_cast<Eigen::Index>(i)) = midpoint(i);
  return mid;
}

std::optional<std::size_t> Grid::locate(double value) const {
  if (!(value >= edges_.front() && value <= edges_.back())) return std::nullopt;
  if (value == edges_.back()) return bins() - 1;
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), value);
  return static_cast<std::size_t>(it - edges_.begin()) - 1;
}

// ---------------------------------------------------------------------------
// Marginal

Marginal::Marginal(Grid grid, Eigen::VectorXd mass)
    : grid_(grid.with_categories(1)), mass_(std::move(mass)) {
  require_shape(grid_, mass_.rows(), 1, "marginal");
  require_nonnegative_finite(mass_, "marginal");
  settle_normalization(mass_, "marginal");
}

Marginal Marginal::from_weights(Grid grid, Eigen::VectorXd weights) {
  normalize_weights(weights, "marginal");
  return Marginal(std::move(grid), std::move(weights));
}

Marginal Marginal::uniform(Grid grid) {
  const auto n = static_cast<Eigen::Index>(grid.bins());
  return Marginal(std::move(grid), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

double Marginal::mean() const { return grid_.midpoints().dot(mass_); }

// ---------------------------------------------------------------------------
// BinnedJoint

BinnedJoint::BinnedJoint(Grid grid, Eigen::MatrixXd mass)
    : grid_(std::move(grid)), mass_(std::move(mass)) {
  require_shape(grid_, mass_.rows(), mass_.cols(), "joint");
  require_nonnegative_finite(mass_, "joint");
  settle_normalization(mass_, "joint");
}

BinnedJoint BinnedJoint::from_weights(Grid grid, Eigen::MatrixXd weights) {
  normalize_weights(weights, "joint");
  return BinnedJoint(std::move(grid), std::move(weights));
}

BinnedJoint BinnedJoint::uniform(Grid grid) {
  const auto rows = static_cast<Eigen::Index>(grid.bins());
  const auto cols = static_cast<Eigen::Index>(grid.categories());
  const double cell = 1.0 / static_cast<double>(grid.cells());
  return BinnedJoint(std::move(grid), Eigen::MatrixXd::Constant(rows, cols, cell));
}

// ---------------------------------------------------------------------------
// SelectionFunction

SelectionFunction::SelectionFunction(Grid grid, Eigen::MatrixXd prob)
    : grid_(std::move(grid)), prob_(std::move(prob)) {
  require_shape(grid_, prob_.rows(), prob_.cols(), "selection function");
  for (Eigen::Index j = 0; j < prob_.cols(); ++j) {
    for (Eigen::Index i = 0; i < prob_.rows(); ++i) {
      const double p = prob_(i, j);
      if (!(p >= 0.0 && p <= 1.0)) {
        std::ostringstream msg;
        msg << "selection probability (" << i << "," << j << ") = " << p << " outside [0,1]";
        throw Error(ErrorKind::InvalidArgument, msg.str());
      }
    }
  }
}

SelectionFunction SelectionFunction::constant(Grid grid, double prob) {
  const auto rows = static_cast<Eigen::Index>(grid.bins());
  const auto cols = static_cast<Eigen::Index>(grid.categories());
  return SelectionFunction(std::move(grid), Eigen::MatrixXd::Constant(rows, cols, prob));
}

SelectionFunction SelectionFunction::per_category(Grid grid, std::span<const double> probs) {
  if (probs.size() != grid.categories()) {
    throw Error(ErrorKind::GridMismatch, "need one selection probability per category");
  }
  Eigen::MatrixXd prob(static_cast<Eigen::Index>(grid.bins()),
                       static_cast<Eigen::Index>(grid.categories()));
  for (Eigen::Index s = 0; s < prob.cols(); ++s) {
    prob.col(s).setConstant(probs[static_cast<std::size_t>(s)]);
  }
  return SelectionFunction(std::move(grid), std::move(prob));
}

// ---------------------------------------------------------------------------
// ObservedHistogram

ObservedHistogram::ObservedHistogram(Marginal shape, double inclusion_rate)
    : shape_(std::move(shape)), inclusion_rate_(inclusion_rate) {
  if (!(inclusion_rate_ > 0.0 && inclusion_rate_ <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "inclusion rate must lie in (0,1]");
  }
}

// ---------------------------------------------------------------------------
// Operations

Marginal marginalize(const BinnedJoint& joint) {
  return Marginal(joint.grid(), joint.mass().rowwise().sum());
}

ObservedHistogram forward_observe(const BinnedJoint& joint, const SelectionFunction& sel) {
  if (!(joint.grid() == sel.grid())) {
    throw Error(ErrorKind::GridMismatch, "joint and selection function grids differ");
  }
  const Eigen::VectorXd raw = joint.mass().cwiseProduct(sel.prob()).rowwise().sum();
  const double rate = raw.sum();
  if (!(rate > 0.0)) {
    throw Error(ErrorKind::DegenerateSelection, "no individual can ever be sampled");
  }
  return ObservedHistogram(Marginal(joint.grid(), raw / rate), std::min(rate, 1.0));
}

double entropy(std::span<const double> mass) {
  double h = 0.0;
  for (const double p : mass) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double entropy(const Marginal& dist) {
  return entropy(std::span<const double>(dist.mass().data(), dist.size()));
}

double entropy(const BinnedJoint& dist) {
  const auto& m = dist.mass();
  return entropy(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

double tv_error(const Marginal& estimate, const Marginal& truth) {
  if (!estimate.grid().same_edges(truth.grid())) {
    throw Error(ErrorKind::GridMismatch, "cannot compare distributions on different grids");
  }
  return 0.5 * (estimate.mass() - truth.mass()).cwiseAbs().sum();
}

BinnedSamples bin_samples(std::span<const double> values, const Grid& grid, OutOfRange policy) {
  std::vector<std::size_t> counts(grid.bins(), 0);
  std::size_t clamped = 0;
  std::size_t discarded = 0;
  const auto edges = grid.edges();
  for (const double v : values) {
    if (std::isnan(v)) {
      ++discarded;
      continue;
    }
    if (auto bin = grid.locate(v)) {
      ++counts[*bin];
    } else if (policy == OutOfRange::Clamp) {
      ++counts[v < edges.front() ? 0 : grid.bins() - 1];
      ++clamped;
    } else {
      ++discarded;
    }
  }
  const std::size_t binned = values.size() - discarded;
  if (binned == 0) {
    throw Error(ErrorKind::EmptyInput, "no value falls inside the grid");
  }
  Eigen::VectorXd weights(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i) {
    weights(static_cast<Eigen::Index>(i)) = static_cast<double>(counts[i]);
  }
  return BinnedSamples{Marginal::from_weights(grid, std::move(weights)), std::move(counts), binned,
                       clamped, discarded};
}

}  // namespace popfuse
