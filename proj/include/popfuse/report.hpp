#pragma once

// Benchmark bookkeeping: per-replica errors, summary statistics, relative
// gains, and their CSV / JSON / SVG renderings.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace popfuse {

enum class Estimator { PurePrior, PureSample, PriorSample };

std::string_view estimator_name(Estimator e) noexcept;
std::optional<Estimator> parse_estimator(std::string_view name) noexcept;

/// Quantile by linear interpolation between order statistics:
/// position q (n - 1) in the sorted values. Throws EmptyInput when empty.
double quantile(std::span<const double> values, double q);

struct SummaryStats {
  std::size_t count = 0;
  double mean = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};

SummaryStats summarize(std::span<const double> values);

/// Distribution of the per-replica relative gain 1 - error/baseline_error.
/// The best quartile of gains is q75, the worst is q25.
struct GainStats {
  Estimator estimator{};
  Estimator baseline{};
  SummaryStats gain;
};

struct ReplicaRecord {
  std::size_t replica = 0;
  Estimator estimator{};
  double error = 0.0;  // NaN when the estimator failed
  bool converged = false;
  double moment_residual = 0.0;
  double observation_residual = 0.0;
  int iterations = 0;
};

struct BenchmarkReport {
  std::vector<Estimator> estimators;
  std::size_t replicas = 0;
  /// Sample redraws caused by empty samples.
  std::size_t redraws = 0;
  /// Replica-major, estimator order within a replica.
  std::vector<ReplicaRecord> records;
  std::vector<std::pair<Estimator, SummaryStats>> summary;
  std::vector<GainStats> gains;

  /// Errors of converged runs of `e`, in replica order.
  std::vector<double> errors(Estimator e) const;
  std::size_t failures(Estimator e) const;
  const SummaryStats& stats(Estimator e) const;
  const GainStats* gain(Estimator e, Estimator baseline) const;
  double max_moment_residual() const;
  double max_observation_residual() const;
  bool all_converged() const;
};

/// Sorts records by (replica, estimator order) and computes the summaries
/// plus the gains of Prior+Sample over every other estimator present.
/// Replicas whose baseline error is zero are left out of that gain.
BenchmarkReport aggregate(std::vector<Estimator> estimators, std::vector<ReplicaRecord> records,
                          std::size_t replicas, std::size_t redraws);

/// `replica,estimator,error,converged`
std::string replicas_csv(const BenchmarkReport& report);

nlohmann::ordered_json summary_json(const BenchmarkReport& report);

/// Overlaid step histograms of the per-estimator error distributions on [0,1].
std::string errors_svg(const BenchmarkReport& report, std::size_t bins = 50);

}  // namespace popfuse
