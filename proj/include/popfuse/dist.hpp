#pragma once

// Discrete distributions over an observed-bin x selection-category grid.
//
// Every stored distribution is normalized. Construction from a vector whose
// sum is within 1e-9 of one renormalizes it exactly; anything further off
// throws NotNormalized. Use the from_weights factories to normalize
// arbitrary nonnegative mass.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "popfuse/errors.hpp"

namespace popfuse {

inline constexpr double kNormalizationSlack = 1e-9;
inline constexpr std::size_t kDefaultBins = 100;
inline constexpr double kDefaultPadding = 0.01;

/// Bin edges of the observed variable plus the number of selection categories.
class Grid {
public:
  Grid(std::vector<double> edges, std::size_t categories = 1);

  static Grid uniform(double lo, double hi, std::size_t bins, std::size_t categories = 1);

  /// `bins` equal-width bins over [lo, hi] widened by `padding` of the span on
  /// each side. A zero-width range is widened to unit width first.
  static Grid padded_range(double lo, double hi, std::size_t bins = kDefaultBins,
                           std::size_t categories = 1, double padding = kDefaultPadding);

  std::span<const double> edges() const noexcept { return edges_; }
  std::size_t bins() const noexcept { return edges_.size() - 1; }
  std::size_t categories() const noexcept { return categories_; }
  std::size_t cells() const noexcept { return bins() * categories_; }

  double lower(std::size_t bin) const { return edges_.at(bin); }
  double upper(std::size_t bin) const { return edges_.at(bin + 1); }
  double midpoint(std::size_t bin) const { return 0.5 * (lower(bin) + upper(bin)); }
  Eigen::VectorXd midpoints() const;

  Grid with_categories(std::size_t categories) const { return Grid(edges_, categories); }

  /// Bin holding `value`; interior edges belong to the bin on their right and
  /// the last edge is inclusive.
  std::optional<std::size_t> locate(double value) const;

  bool same_edges(const Grid& other) const noexcept { return edges_ == other.edges_; }
  bool operator==(const Grid& other) const noexcept = default;

private:
  std::vector<double> edges_;
  std::size_t categories_;
};

/// One-axis distribution over the observed bins.
class Marginal {
public:
  Marginal(Grid grid, Eigen::VectorXd mass);

  static Marginal from_weights(Grid grid, Eigen::VectorXd weights);
  static Marginal uniform(Grid grid);

  const Grid& grid() const noexcept { return grid_; }
  const Eigen::VectorXd& mass() const noexcept { return mass_; }
  double operator[](std::size_t bin) const { return mass_(static_cast<Eigen::Index>(bin)); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(mass_.size()); }

  /// Mean of the bin midpoints under this distribution.
  double mean() const;

private:
  Grid grid_;
  Eigen::VectorXd mass_;
};

/// Joint mass over (observed bin, selection category); rows are bins.
class BinnedJoint {
public:
  BinnedJoint(Grid grid, Eigen::MatrixXd mass);

  static BinnedJoint from_weights(Grid grid, Eigen::MatrixXd weights);
  static BinnedJoint uniform(Grid grid);

  const Grid& grid() const noexcept { return grid_; }
  const Eigen::MatrixXd& mass() const noexcept { return mass_; }
  double operator()(std::size_t bin, std::size_t category) const {
    return mass_(static_cast<Eigen::Index>(bin), static_cast<Eigen::Index>(category));
  }

private:
  Grid grid_;
  Eigen::MatrixXd mass_;
};

/// Per-cell inclusion probabilities.
class SelectionFunction {
public:
  SelectionFunction(Grid grid, Eigen::MatrixXd prob);

  static SelectionFunction constant(Grid grid, double prob);
  /// The same probability in every bin for a given category.
  static SelectionFunction per_category(Grid grid, std::span<const double> probs);

  const Grid& grid() const noexcept { return grid_; }
  const Eigen::MatrixXd& prob() const noexcept { return prob_; }
  double operator()(std::size_t bin, std::size_t category) const {
    return prob_(static_cast<Eigen::Index>(bin), static_cast<Eigen::Index>(category));
  }

private:
  Grid grid_;
  Eigen::MatrixXd prob_;
};

/// Sample histogram shape plus the sample-to-population size ratio. The
/// observed mass per bin is inclusion_rate * shape.
class ObservedHistogram {
public:
  ObservedHistogram(Marginal shape, double inclusion_rate);

  const Marginal& shape() const noexcept { return shape_; }
  double inclusion_rate() const noexcept { return inclusion_rate_; }
  const Grid& grid() const noexcept { return shape_.grid(); }
  Eigen::VectorXd observed_mass() const { return inclusion_rate_ * shape_.mass(); }

private:
  Marginal shape_;
  double inclusion_rate_;
};

Marginal marginalize(const BinnedJoint& joint);

/// Histogram a population would produce under `sel`, split into shape and rate.
/// Throws DegenerateSelection when no individual can ever be sampled.
ObservedHistogram forward_observe(const BinnedJoint& joint, const SelectionFunction& sel);

/// Shannon entropy in nats with 0 log 0 = 0.
double entropy(std::span<const double> mass);
double entropy(const Marginal& dist);
double entropy(const BinnedJoint& dist);

/// Half the L1 distance: the fraction of mass placed in the wrong bin.
double tv_error(const Marginal& estimate, const Marginal& truth);

enum class OutOfRange { Discard, Clamp };

struct BinnedSamples {
  Marginal histogram;
  std::vector<std::size_t> counts;
  std::size_t binned = 0;
  std::size_t clamped = 0;
  std::size_t discarded = 0;
};

/// Empirical histogram of `values` on the observed axis of `grid`. NaNs are
/// always discarded. Throws EmptyInput when nothing lands in range.
BinnedSamples bin_samples(std::span<const double> values, const Grid& grid,
                          OutOfRange policy = OutOfRange::Discard);

}  // namespace popfuse
