#include "popfuse/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "popfuse/parallel.hpp"

namespace popfuse {

namespace {

bool valid_interval(Interval r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi; }

double draw_uniform(Rng& rng, Interval r) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

void ReplicaConfig::validate() const {
  if (n_replicas == 0) throw Error(ErrorKind::InvalidArgument, "replica count must be positive");
  if (population_size == 0) throw Error(ErrorKind::InvalidArgument, "population size must be positive");
  if (components == 0) throw Error(ErrorKind::InvalidArgument, "component count must be positive");
  if (bins == 0) throw Error(ErrorKind::InvalidArgument, "bin count must be positive");
  if (!valid_interval(mean_range)) throw Error(ErrorKind::InvalidArgument, "invalid mean range");
  if (!valid_interval(std_range) || std_range.lo < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "invalid standard deviation range");
  }
  if (!valid_interval(selection_range) || selection_range.lo < 0.0 || selection_range.hi > 1.0) {
    throw Error(ErrorKind::InvalidArgument, "selection range must lie within [0,1]");
  }
}

Population draw_population(const ReplicaConfig& cfg, std::size_t replica_index) {
  cfg.validate();
  Rng rng = make_stream(cfg.rng_seed, replica_index, 0);
  Population pop;
  const double weight = 1.0 / static_cast<double>(cfg.components);
  for (std::size_t c = 0; c < cfg.components; ++c) {
    const double mean = draw_uniform(rng, cfg.mean_range);
    const double sd = draw_uniform(rng, cfg.std_range);
    pop.spec.components.push_back({mean, sd, weight});
  }

  std::vector<double> weights;
  for (const auto& c : pop.spec.components) weights.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> standard(0.0, 1.0);
  pop.individuals.reserve(cfg.population_size);
  pop.labels.reserve(cfg.population_size);
  for (std::size_t n = 0; n < cfg.population_size; ++n) {
    const std::size_t k = pick(rng);
    const auto& c = pop.spec.components[k];
    pop.labels.push_back(k);
    pop.individuals.push_back(c.mean + c.std_dev * standard(rng));
  }
  return pop;
}

Sample draw_sample(std::span<const double> individuals, std::span<const std::size_t> labels,
                   std::span<const double> selection_probs, std::uint64_t seed) {
  if (individuals.size() != labels.size()) {
    throw Error(ErrorKind::InvalidArgument, "one label per individual is required");
  }
  for (const double p : selection_probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "selection probability outside [0,1]");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Sample sample;
  for (std::size_t n = 0; n < individuals.size(); ++n) {
    const std::size_t k = labels[n];
    if (k >= selection_probs.size()) {
      throw Error(ErrorKind::InvalidArgument, "label without a selection probability");
    }
    if (coin(rng) < selection_probs[k]) {
      sample.values.push_back(individuals[n]);
      sample.labels.push_back(k);
    }
  }
  if (sample.values.empty()) throw Error(ErrorKind::EmptySample, "no individual was selected");
  return sample;
}

ReplicaProblem make_replica_problem(const Grid& grid, std::span<const double> population,
                                    std::span<const double> sample,
                                    std::span<const double> selection_probs) {
  const Grid axis = grid.with_categories(1);
  Marginal truth = bin_samples(population, axis).histogram;
  auto sampled = bin_samples(sample, axis);
  const double rate = static_cast<double>(sampled.binned) / static_cast<double>(population.size());
  ObservedHistogram observed(std::move(sampled.histogram), std::min(rate, 1.0));
  // The survey mean is measured on the same bins the estimator works with.
  const double mean = truth.mean();
  return ReplicaProblem{grid, std::move(truth), std::move(observed),
                        SelectionFunction::per_category(grid, selection_probs),
                        mean_std_constraints(grid, mean)};
}

std::vector<ReplicaRecord> score_estimators(std::size_t replica, const ReplicaProblem& problem,
                                            std::span<const Estimator> estimators,
                                            const SolverOptions& options) {
  std::vector<ReplicaRecord> records;
  for (const auto e : estimators) {
    ReplicaRecord rec;
    rec.replica = replica;
    rec.estimator = e;
    try {
      switch (e) {
        case Estimator::PurePrior: {
          const auto est = pure_prior_estimate(problem.grid, problem.prior, options);
          rec.error = tv_error(est, problem.truth);
          for (const auto& m : problem.prior) {
            rec.moment_residual = std::max(
                rec.moment_residual, std::abs(est.mass().dot(m.feature.col(0)) - m.target));
          }
          break;
        }
        case Estimator::PureSample:
          rec.error = tv_error(pure_sample_estimate(problem.observed), problem.truth);
          break;
        case Estimator::PriorSample: {
          const auto est =
              estimate_population(problem.observed, problem.selection, problem.prior, options);
          rec.error = tv_error(est.marginal, problem.truth);
          rec.moment_residual = est.residuals.max_moment();
          rec.observation_residual = est.residuals.max_observation();
          rec.iterations = est.iterations;
          break;
        }
      }
      rec.converged = true;
    } catch (const Error&) {
      rec.error = std::numeric_limits<double>::quiet_NaN();
      rec.converged = false;
    }
    records.push_back(rec);
  }
  return records;
}

SampledReplica run_sampled_replica(std::size_t replica, std::span<const double> population,
                                   std::span<const std::size_t> labels, const Grid& grid,
                                   Interval selection_range, std::uint64_t seed,
                                   std::span<const Estimator> estimators,
                                   const SolverOptions& options) {
  SampledReplica out;
  for (std::size_t attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
    Rng rng = make_stream(seed, replica, attempt + 1);
    std::vector<double> probs(grid.categories());
    for (auto& p : probs) p = draw_uniform(rng, selection_range);
    try {
      const auto sample = draw_sample(population, labels, probs, rng());
      const auto problem = make_replica_problem(grid, population, sample.values, probs);
      out.records = score_estimators(replica, problem, estimators, options);
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptySample) throw;
      ++out.redraws;
    }
  }
  for (const auto e : estimators) {
    out.records.push_back(
        ReplicaRecord{replica, e, std::numeric_limits<double>::quiet_NaN(), false, 0.0, 0.0, 0});
  }
  return out;
}

BenchmarkReport run_benchmark(const ReplicaConfig& cfg, const std::vector<Estimator>& estimators) {
  cfg.validate();
  std::vector<SampledReplica> results(cfg.n_replicas);
  parallel_for(cfg.n_replicas, cfg.jobs, [&](std::size_t i) {
    const auto pop = draw_population(cfg, i);
    const auto [lo, hi] = std::minmax_element(pop.individuals.begin(), pop.individuals.end());
    const Grid grid = Grid::padded_range(*lo, *hi, cfg.bins, cfg.components);
    results[i] = run_sampled_replica(i, pop.individuals, pop.labels, grid, cfg.selection_range,
                                     cfg.rng_seed, estimators);
  });

  std::vector<ReplicaRecord> records;
  std::size_t redraws = 0;
  for (auto& r : results) {
    redraws += r.redraws;
    records.insert(records.end(), r.records.begin(), r.records.end());
  }
  return aggregate(estimators, std::move(records), cfg.n_replicas, redraws);
}

}  // namespace popfuse
