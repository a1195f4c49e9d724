#include "popfuse/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "popfuse/csv_io.hpp"
#include "popfuse/errors.hpp"

namespace popfuse {

std::string_view estimator_name(Estimator e) noexcept {
  switch (e) {
    case Estimator::PurePrior: return "pure_prior";
    case Estimator::PureSample: return "pure_sample";
    case Estimator::PriorSample: return "prior_sample";
  }
  return "unknown";
}

std::optional<Estimator> parse_estimator(std::string_view name) noexcept {
  for (auto e : {Estimator::PurePrior, Estimator::PureSample, Estimator::PriorSample}) {
    if (estimator_name(e) == name) return e;
  }
  return std::nullopt;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "quantile of an empty list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "nothing to summarize");
  SummaryStats s;
  s.count = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.q25 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q75 = quantile(values, 0.75);
  return s;
}

namespace {

std::size_t order_of(const std::vector<Estimator>& estimators, Estimator e) {
  return static_cast<std::size_t>(std::find(estimators.begin(), estimators.end(), e) -
                                  estimators.begin());
}

SummaryStats summarize_or_empty(const std::vector<double>& values) {
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return SummaryStats{0, nan, nan, nan, nan};
  }
  return summarize(values);
}

nlohmann::ordered_json stats_json(const SummaryStats& s) {
  nlohmann::ordered_json j;
  j["count"] = s.count;
  const auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(); };
  j["mean"] = num(s.mean);
  j["q25"] = num(s.q25);
  j["median"] = num(s.median);
  j["q75"] = num(s.q75);
  return j;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::vector<double> BenchmarkReport::errors(Estimator e) const {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.estimator == e && r.converged) out.push_back(r.error);
  }
  return out;
}

std::size_t BenchmarkReport::failures(Estimator e) const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const auto& r) {
    return r.estimator == e && !r.converged;
  }));
}

const SummaryStats& BenchmarkReport::stats(Estimator e) const {
  for (const auto& [est, s] : summary) {
    if (est == e) return s;
  }
  throw Error(ErrorKind::InvalidArgument, "estimator not part of this report");
}

const GainStats* BenchmarkReport::gain(Estimator e, Estimator baseline) const {
  for (const auto& g : gains) {
    if (g.estimator == e && g.baseline == baseline) return &g;
  }
  return nullptr;
}

double BenchmarkReport::max_moment_residual() const {
  double m = 0.0;
  for (const auto& r : records) {
    if (r.converged) m = std::max(m, r.moment_residual);
  }
  return m;
}

double BenchmarkReport::max_observation_residual() const {
  double m = 0.0;
  for (const auto& r : records) {
    if (r.converged) m = std::max(m, r.observation_residual);
  }
  return m;
}

bool BenchmarkReport::all_converged() const {
  return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.converged; });
}

BenchmarkReport aggregate(std::vector<Estimator> estimators, std::vector<ReplicaRecord> records,
                          std::size_t replicas, std::size_t redraws) {
  BenchmarkReport report;
  report.estimators = std::move(estimators);
  report.replicas = replicas;
  report.redraws = redraws;
  std::stable_sort(records.begin(), records.end(), [&](const auto& a, const auto& b) {
    if (a.replica != b.replica) return a.replica < b.replica;
    return order_of(report.estimators, a.estimator) < order_of(report.estimators, b.estimator);
  });
  report.records = std::move(records);

  for (const auto e : report.estimators) {
    report.summary.emplace_back(e, summarize_or_empty(report.errors(e)));
  }

  const auto target = Estimator::PriorSample;
  if (order_of(report.estimators, target) == report.estimators.size()) return report;
  for (const auto baseline : report.estimators) {
    if (baseline == target) continue;
    // Pair up by replica.
    std::vector<double> own(replicas, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> base(replicas, std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : report.records) {
      if (!r.converged || r.replica >= replicas) continue;
      if (r.estimator == target) own[r.replica] = r.error;
      if (r.estimator == baseline) base[r.replica] = r.error;
    }
    std::vector<double> gains;
    for (std::size_t i = 0; i < replicas; ++i) {
      if (std::isfinite(own[i]) && std::isfinite(base[i]) && base[i] > 0.0) {
        gains.push_back(1.0 - own[i] / base[i]);
      }
    }
    report.gains.push_back(GainStats{target, baseline, summarize_or_empty(gains)});
  }
  return report;
}

std::string replicas_csv(const BenchmarkReport& report) {
  std::ostringstream out;
  out << "replica,estimator,error,converged\n";
  for (const auto& r : report.records) {
    out << r.replica << ',' << estimator_name(r.estimator) << ','
        << (r.converged ? format_double(r.error) : std::string("nan")) << ','
        << (r.converged ? 1 : 0) << '\n';
  }
  return out.str();
}

nlohmann::ordered_json summary_json(const BenchmarkReport& report) {
  nlohmann::ordered_json j;
  j["replicas"] = report.replicas;
  j["sample_redraws"] = report.redraws;
  nlohmann::ordered_json est = nlohmann::ordered_json::object();
  for (const auto& [e, s] : report.summary) {
    auto entry = stats_json(s);
    entry["failed"] = report.failures(e);
    est[std::string(estimator_name(e))] = std::move(entry);
  }
  j["estimators"] = std::move(est);
  nlohmann::ordered_json gains = nlohmann::ordered_json::array();
  for (const auto& g : report.gains) {
    nlohmann::ordered_json entry;
    entry["estimator"] = estimator_name(g.estimator);
    entry["baseline"] = estimator_name(g.baseline);
    entry["relative_gain"] = stats_json(g.gain);
    gains.push_back(std::move(entry));
  }
  j["gains"] = std::move(gains);
  j["max_moment_residual"] = report.max_moment_residual();
  j["max_observation_residual"] = report.max_observation_residual();
  return j;
}

std::string errors_svg(const BenchmarkReport& report, std::size_t bins) {
  constexpr double width = 640.0;
  constexpr double height = 400.0;
  constexpr double margin = 48.0;
  constexpr const char* colors[] = {"#c0392b", "#2471a3", "#229954"};

  std::vector<std::vector<double>> density;
  double peak = 0.0;
  for (const auto e : report.estimators) {
    std::vector<double> counts(bins, 0.0);
    const auto errs = report.errors(e);
    for (const double v : errs) {
      const auto b = std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, v) * static_cast<double>(bins)));
      counts[b] += 1.0;
    }
    for (auto& c : counts) {
      c = errs.empty() ? 0.0 : c / static_cast<double>(errs.size());
      peak = std::max(peak, c);
    }
    density.push_back(std::move(counts));
  }
  if (peak <= 0.0) peak = 1.0;

  const double plot_w = width - 2 * margin;
  const double plot_h = height - 2 * margin;
  const auto x_of = [&](double v) { return margin + v * plot_w; };
  const auto y_of = [&](double v) { return height - margin - v / peak * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 10; t += 2) {
    const double v = t / 10.0;
    svg << "<text x=\"" << fixed(x_of(v)) << "\" y=\"" << height - margin + 16
        << "\" text-anchor=\"middle\">" << fixed(v, 1) << "</text>\n";
  }
  svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\">estimation error</text>\n";

  for (std::size_t k = 0; k < density.size(); ++k) {
    std::ostringstream pts;
    pts << fixed(x_of(0.0)) << ',' << fixed(y_of(0.0));
    for (std::size_t b = 0; b < bins; ++b) {
      const double x0 = static_cast<double>(b) / static_cast<double>(bins);
      const double x1 = static_cast<double>(b + 1) / static_cast<double>(bins);
      pts << ' ' << fixed(x_of(x0)) << ',' << fixed(y_of(density[k][b])) << ' ' << fixed(x_of(x1))
          << ',' << fixed(y_of(density[k][b]));
    }
    pts << ' ' << fixed(x_of(1.0)) << ',' << fixed(y_of(0.0));
    svg << "<polyline fill=\"none\" stroke=\"" << colors[k % 3] << "\" stroke-width=\"1.5\" points=\""
        << pts.str() << "\"/>\n";
    svg << "<text x=\"" << width - margin - 120 << "\" y=\"" << margin + 16.0 * static_cast<double>(k)
        << "\" fill=\"" << colors[k % 3] << "\">" << estimator_name(report.estimators[k]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace popfuse
