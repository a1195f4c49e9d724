#pragma once

// Simulated population/sample pairs and the replicated estimator benchmark.
//
// Each replica draws a Gaussian-mixture population, assigns every component
// a random inclusion probability, thins the population into a sample, and
// scores the estimators against the binned population histogram. Replica i
// depends only on (rng_seed, i), so replicas can run in any order on any
// number of threads.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "popfuse/dist.hpp"
#include "popfuse/maxent.hpp"
#include "popfuse/random.hpp"
#include "popfuse/report.hpp"

namespace popfuse {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct MixtureComponent {
  double mean = 0.0;
  double std_dev = 0.0;
  double weight = 0.0;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;
};

inline constexpr std::size_t kMaxSampleAttempts = 10;

struct ReplicaConfig {
  std::size_t n_replicas = 2000;
  std::size_t population_size = 10000;
  std::size_t components = 4;
  Interval mean_range{-5.0, 5.0};
  Interval std_range{0.0, 1.0};
  Interval selection_range{0.0, 1.0};
  std::uint64_t rng_seed = 0;
  std::size_t bins = kDefaultBins;
  /// Worker threads; 0 uses every core. Results do not depend on it.
  unsigned jobs = 0;

  /// Throws InvalidArgument on non-positive counts or invalid ranges.
  void validate() const;
};

struct Population {
  MixtureSpec spec;
  std::vector<double> individuals;
  /// Generating component of each individual (the selection variable).
  std::vector<std::size_t> labels;
};

/// Equal-weight mixture with means and standard deviations uniform on the
/// configured ranges, and its individuals.
Population draw_population(const ReplicaConfig& cfg, std::size_t replica_index);

struct Sample {
  std::vector<double> values;
  std::vector<std::size_t> labels;
};

/// Independent Bernoulli thinning with the probability of each individual's
/// category. Throws EmptySample when nobody is selected.
Sample draw_sample(std::span<const double> individuals, std::span<const std::size_t> labels,
                   std::span<const double> selection_probs, std::uint64_t seed);

/// Everything one replica hands to the estimators.
struct ReplicaProblem {
  Grid grid;  // observed bins x categories
  Marginal truth;
  ObservedHistogram observed;
  SelectionFunction selection;
  std::vector<MomentConstraint> prior;
};

/// Bins the population and the sample on `grid`, takes the inclusion rate
/// from the known population size and the mean of the binned population as the prior.
ReplicaProblem make_replica_problem(const Grid& grid, std::span<const double> population,
                                    std::span<const double> sample,
                                    std::span<const double> selection_probs);

/// One record per estimator; failures are recorded, never thrown.
std::vector<ReplicaRecord> score_estimators(std::size_t replica, const ReplicaProblem& problem,
                                            std::span<const Estimator> estimators,
                                            const SolverOptions& options = {});

struct SampledReplica {
  std::vector<ReplicaRecord> records;
  std::size_t redraws = 0;
};

/// Draws per-category selection probabilities on `selection_range`, thins
/// the fixed population and scores the estimators. An empty sample is redrawn
/// from the next substream, up to kMaxSampleAttempts times; after that every
/// estimator is recorded as failed. Shared by the mixture and corpus
/// benchmarks.
SampledReplica run_sampled_replica(std::size_t replica, std::span<const double> population,
                                   std::span<const std::size_t> labels, const Grid& grid,
                                   Interval selection_range, std::uint64_t seed,
                                   std::span<const Estimator> estimators,
                                   const SolverOptions& options = {});

BenchmarkReport run_benchmark(const ReplicaConfig& cfg,
                              const std::vector<Estimator>& estimators = {
                                  Estimator::PurePrior, Estimator::PureSample,
                                  Estimator::PriorSample});

}  // namespace popfuse
