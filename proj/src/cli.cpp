#include "popfuse/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "popfuse/csv_io.hpp"
#include "popfuse/dist.hpp"
#include "popfuse/maxent.hpp"
#include "popfuse/report.hpp"
#include "popfuse/sentiment.hpp"
#include "popfuse/simgen.hpp"

namespace popfuse::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

void write_json(const fs::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

Interval to_interval(const std::vector<double>& v) { return {v.at(0), v.at(1)}; }

void merge_into(Json& dst, const Json& src) {
  for (auto it = src.begin(); it != src.end(); ++it) dst[it.key()] = it.value();
}

Json interval_json(Interval r) { return Json::array({r.lo, r.hi}); }

Json vector_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Json estimate_json(const Estimate& est) {
  Json j;
  j["converged"] = est.converged;
  j["iterations"] = est.iterations;
  j["residuals"] = {{"moments", est.residuals.moments},
                    {"max_moment", est.residuals.max_moment()},
                    {"max_observation", est.residuals.max_observation()}};
  j["multipliers"] = {{"moments", vector_json(est.dual.lambda_f)},
                      {"observation", vector_json(est.dual.lambda_obs)}};
  j["forced_zero_cells"] = est.dual.forced_zero.count();
  if (est.sample_weight) j["sample_weight"] = *est.sample_weight;
  return j;
}

std::string status_of(ErrorKind kind) {
  return kind == ErrorKind::Infeasible ? "infeasible" : "not converged";
}

// Writes diagnostics for a failed solve; the partial estimate, when there is
// one, supplies the residuals.
int report_solver_failure(const SolverError& e, const fs::path& out, std::ostream& diag) {
  Json j;
  j["status"] = status_of(e.kind());
  j["message"] = e.what();
  if (e.partial()) {
    merge_into(j, estimate_json(*e.partial()));
  } else if (e.last()) {
    j["converged"] = false;
    j["iterations"] = e.last()->iterations;
    j["max_gradient"] = e.last()->max_gradient;
  }
  write_json(out / "diagnostics.json", j);
  diag << "error: " << e.what() << '\n';
  return kSolveFailed;
}

void print_summary(const BenchmarkReport& report, std::ostream& diag) {
  for (const auto& [e, s] : report.summary) {
    diag << estimator_name(e) << ": mean " << s.mean << "  q25 " << s.q25 << "  median "
         << s.median << "  q75 " << s.q75 << "  (" << s.count << " runs, " << report.failures(e)
         << " failed)\n";
  }
  for (const auto& g : report.gains) {
    diag << "gain " << estimator_name(g.estimator) << " vs " << estimator_name(g.baseline)
         << ": mean " << g.gain.mean << "  worst quartile " << g.gain.q25 << "  best quartile "
         << g.gain.q75 << '\n';
  }
}

void write_benchmark(const BenchmarkReport& report, Json summary, const fs::path& out, bool svg) {
  write_text_file(out / "replicas.csv", replicas_csv(report));
  merge_into(summary, summary_json(report));
  write_json(out / "summary.json", summary);
  if (svg) write_text_file(out / "errors.svg", errors_svg(report));
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  ReplicaConfig cfg;
  std::vector<double> mean_range{-5.0, 5.0};
  std::vector<double> std_range{0.0, 1.0};
  std::vector<double> selection_range{0.0, 1.0};
  std::string out;
  bool svg = false;
};

int cmd_simulate(SimulateArgs& a, std::ostream& diag) {
  a.cfg.mean_range = to_interval(a.mean_range);
  a.cfg.std_range = to_interval(a.std_range);
  a.cfg.selection_range = to_interval(a.selection_range);
  a.cfg.validate();
  const auto report = run_benchmark(a.cfg);

  Json summary;
  summary["config"] = {{"replicas", a.cfg.n_replicas},
                       {"population_size", a.cfg.population_size},
                       {"components", a.cfg.components},
                       {"mean_range", interval_json(a.cfg.mean_range)},
                       {"std_range", interval_json(a.cfg.std_range)},
                       {"selection_range", interval_json(a.cfg.selection_range)},
                       {"bins", a.cfg.bins},
                       {"seed", a.cfg.rng_seed}};
  write_benchmark(report, std::move(summary), a.out, a.svg);
  print_summary(report, diag);
  if (!report.all_converged()) {
    diag << "warning: some replicas failed; see replicas.csv\n";
    return kPartial;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string observed;
  std::string selection;
  double inclusion_rate = 0.0;
  double mean = 0.0;
  std::optional<double> std_dev;
  std::string out;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& diag) {
  const auto shape = load_marginal(a.observed);
  const auto sel = load_selection(a.selection);
  if (!shape.grid().same_edges(sel.grid())) {
    throw Error(ErrorKind::GridMismatch, "observed histogram and selection CSV use different bins");
  }
  const ObservedHistogram obs(shape, a.inclusion_rate);
  const fs::path out = a.out;
  try {
    const auto est = estimate_population(obs, sel, mean_std_constraints(sel.grid(), a.mean, a.std_dev));
    save_marginal(out / "estimate.csv", est.marginal);
    save_joint(out / "joint.csv", est.joint);
    Json j;
    j["status"] = "converged";
    merge_into(j, estimate_json(est));
    write_json(out / "diagnostics.json", j);
    diag << "converged in " << est.iterations << " iterations, max residual "
         << est.residuals.max() << '\n';
    return kOk;
  } catch (const SolverError& e) {
    return report_solver_failure(e, out, diag);
  }
}

// ---------------------------------------------------------------------------

struct CensoredArgs {
  bool demo = false;
  std::optional<std::uint64_t> seed;
  std::size_t population = 100000;
  std::size_t bins = kDefaultBins;
  std::string observed;
  std::optional<double> below;
  std::optional<double> above;
  std::optional<double> mean;
  std::optional<double> std_dev;
  std::string truth;
  std::string out;
};

int cmd_censored_demo(const CensoredArgs& a, std::ostream& diag) {
  if (!a.seed) throw Error(ErrorKind::InvalidArgument, "--demo requires --seed");
  if (a.population == 0) throw Error(ErrorKind::InvalidArgument, "population size must be positive");
  if (a.bins < 2 || a.bins % 2 != 0) {
    throw Error(ErrorKind::InvalidArgument, "--bins must be even so that 0 is a bin edge");
  }
  Rng rng = make_stream(*a.seed, 0, 0);
  std::normal_distribution<double> standard(0.0, 1.0);
  std::vector<double> pop(a.population);
  for (auto& x : pop) x = standard(rng);

  double reach = 0.0;
  for (const double x : pop) reach = std::max(reach, std::abs(x));
  reach *= 1.0 + kDefaultPadding;
  const Grid grid = Grid::uniform(-reach, reach, a.bins);
  std::vector<double> sample;
  std::copy_if(pop.begin(), pop.end(), std::back_inserter(sample), [](double x) { return x < 0.0; });

  // Survey moments of the binned population, matching the midpoint features.
  const auto truth = bin_samples(pop, grid).histogram;
  const double mean = truth.mean();
  const double sd = std::sqrt(std::max(0.0, truth.mass().dot(grid.midpoints().array().square().matrix()) - mean * mean));
  const auto shape = bin_samples(sample, grid).histogram;
  const auto mask = observable_below(grid, 0.0);
  const auto mean_only = censored_estimate(shape, mask, mean_std_constraints(grid, mean));
  const auto mean_std = censored_estimate(shape, mask, mean_std_constraints(grid, mean, sd));

  const fs::path out = a.out;
  save_marginal(out / "truth.csv", truth);
  save_marginal(out / "observed.csv", shape);
  save_marginal(out / "estimate_mean.csv", mean_only.marginal);
  save_marginal(out / "estimate_mean_std.csv", mean_std.marginal);
  Json j;
  j["population"] = {{"size", a.population}, {"mean", mean}, {"std", sd}, {"seed", *a.seed}};
  j["bins"] = a.bins;
  j["sample_size"] = sample.size();
  j["errors"] = {{"pure_sample", tv_error(shape, truth)},
                 {"mean_only", tv_error(mean_only.marginal, truth)},
                 {"mean_std", tv_error(mean_std.marginal, truth)}};
  j["sample_weight"] = {{"true", static_cast<double>(sample.size()) / static_cast<double>(pop.size())},
                        {"mean_only", *mean_only.sample_weight},
                        {"mean_std", *mean_std.sample_weight}};
  j["mean_only"] = estimate_json(mean_only);
  j["mean_std"] = estimate_json(mean_std);
  write_json(out / "summary.json", j);
  diag << "errors: pure sample " << j["errors"]["pure_sample"] << ", mean only "
       << j["errors"]["mean_only"] << ", mean+std " << j["errors"]["mean_std"] << '\n';
  return kOk;
}

int cmd_censored(const CensoredArgs& a, std::ostream& diag) {
  if (a.demo) return cmd_censored_demo(a, diag);
  if (a.observed.empty() || !a.mean) {
    throw Error(ErrorKind::InvalidArgument, "--observed and --mean are required without --demo");
  }
  if (a.below.has_value() == a.above.has_value()) {
    throw Error(ErrorKind::InvalidArgument, "give exactly one of --observable-below / --observable-above");
  }
  const auto shape = load_marginal(a.observed);
  const auto& grid = shape.grid();
  const auto mask = a.below ? observable_below(grid, *a.below) : observable_above(grid, *a.above);
  const fs::path out = a.out;
  try {
    const auto est = censored_estimate(shape, mask, mean_std_constraints(grid, *a.mean, a.std_dev));
    save_marginal(out / "estimate.csv", est.marginal);
    save_joint(out / "joint.csv", est.joint);
    Json j;
    j["status"] = "converged";
    merge_into(j, estimate_json(est));
    if (!a.truth.empty()) {
      const auto truth = load_marginal(a.truth);
      j["errors"] = {{"pure_sample", tv_error(shape, truth)}, {"estimate", tv_error(est.marginal, truth)}};
    }
    write_json(out / "diagnostics.json", j);
    diag << "recovered sample weight " << *est.sample_weight << '\n';
    return kOk;
  } catch (const SolverError& e) {
    return report_solver_failure(e, out, diag);
  }
}

// ---------------------------------------------------------------------------

struct SentimentArgs {
  CorpusConfig cfg;
  std::string corpus;
  std::string lexicon;
  bool synthesize = false;
  std::size_t users = 20;
  std::size_t docs_per_user = 600;
  double polarization = 1.5;
  bool census = false;
  std::string out;
  bool svg = false;
};

int cmd_sentiment(SentimentArgs& a, std::ostream& diag) {
  const fs::path out = a.out;
  std::vector<CorpusRecord> corpus;
  Lexicon lexicon;
  if (a.synthesize) {
    auto synthetic = synthesize_corpus(a.users, a.docs_per_user, a.polarization, a.cfg.rng_seed);
    corpus = std::move(synthetic.records);
    lexicon = std::move(synthetic.lexicon);
    std::ostringstream c;
    write_corpus(c, corpus);
    write_text_file(out / "corpus.tsv", c.str());
    std::ostringstream l;
    write_lexicon(l, lexicon);
    write_text_file(out / "lexicon.csv", l.str());
  } else {
    if (a.corpus.empty() || a.lexicon.empty()) {
      throw Error(ErrorKind::InvalidArgument, "give --corpus and --lexicon, or --synthesize");
    }
    corpus = load_corpus(a.corpus);
    lexicon = load_lexicon(a.lexicon);
  }
  if (a.census) a.cfg.selection_range = {1.0, 1.0};

  std::ostringstream scored;
  scored << "doc_id\tuser_id\tmatched\tscore\n";
  std::size_t matched = 0;
  for (const auto& record : corpus) {
    if (const auto doc = score_document(record, lexicon)) {
      ++matched;
      scored << doc->doc_id << '\t' << doc->user_id << '\t' << doc->matched_word_count << '\t'
             << format_double(doc->score) << '\n';
    }
  }
  diag << corpus.size() - matched << " of " << corpus.size() << " documents matched no lexicon word\n";
  if (matched == 0) {
    throw Error(ErrorKind::EmptyInput, "no document matched the lexicon");
  }
  write_text_file(out / "scored.tsv", scored.str());

  const auto pop = build_population(corpus, lexicon, a.cfg);
  save_marginal(out / "population.csv", bin_samples(pop.scores, sentiment_grid(a.cfg.bins)).histogram);
  std::ostringstream users;
  users << "label,user_id,documents,mean_score\n";
  for (std::size_t i = 0; i < pop.users.size(); ++i) {
    users << i << ',' << pop.users[i].user_id << ',' << pop.users[i].documents << ','
          << format_double(pop.users[i].mean_score) << '\n';
  }
  write_text_file(out / "users.csv", users.str());

  const auto report = run_corpus_benchmark(pop, a.cfg);
  Json summary;
  summary["config"] = {{"replicas", a.cfg.n_replicas},
                       {"min_docs_per_user", a.cfg.min_docs_per_user},
                       {"extreme_users_per_tail", a.cfg.extreme_users_per_tail},
                       {"selection_range", interval_json(a.cfg.selection_range)},
                       {"bins", a.cfg.bins},
                       {"seed", a.cfg.rng_seed}};
  summary["corpus"] = {{"documents", corpus.size()},
                       {"unmatched_documents", corpus.size() - matched},
                       {"eligible_users", pop.eligible_users},
                       {"population_scores", pop.scores.size()}};
  write_benchmark(report, std::move(summary), out, a.svg);
  print_summary(report, diag);
  if (!report.all_converged()) {
    diag << "warning: some replicas failed; see replicas.csv\n";
    return kPartial;
  }
  return kOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return kUsage;
    case ErrorKind::Infeasible:
    case ErrorKind::NotConverged: return kSolveFailed;
    default: return kInputError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& diag) {
  CLI::App app{"Population distribution estimation from biased samples and prior moments", "popfuse"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  // simulate
  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Replicated Gaussian-mixture benchmark");
  simulate->add_option("--replicas", sim.cfg.n_replicas, "Number of population/sample pairs")
      ->capture_default_str();
  simulate->add_option("--population", sim.cfg.population_size, "Individuals per population")
      ->capture_default_str();
  simulate->add_option("--components", sim.cfg.components, "Mixture components")->capture_default_str();
  simulate->add_option("--mean-range", sim.mean_range, "Component mean range")->expected(2);
  simulate->add_option("--std-range", sim.std_range, "Component standard deviation range")->expected(2);
  simulate->add_option("--selection-range", sim.selection_range, "Inclusion probability range")->expected(2);
  simulate->add_option("--seed", sim.cfg.rng_seed, "RNG seed")->required();
  simulate->add_option("--bins", sim.cfg.bins, "Histogram bins")->capture_default_str();
  simulate->add_option("--jobs", sim.cfg.jobs, "Worker threads (0 = all cores)");
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_flag("--svg", sim.svg, "Also write errors.svg");

  // estimate
  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Estimate a population from a sample histogram");
  estimate->add_option("--observed", est.observed, "Sample histogram CSV (bin_lo,bin_hi,mass)")
      ->required()->check(CLI::ExistingFile);
  estimate->add_option("--selection", est.selection, "Selection CSV (bin_lo,bin_hi,category,prob)")
      ->required()->check(CLI::ExistingFile);
  estimate->add_option("--inclusion-rate", est.inclusion_rate, "Sample size / population size")
      ->required();
  estimate->add_option("--mean", est.mean, "Prior population mean")->required();
  estimate->add_option("--std", est.std_dev, "Prior population standard deviation");
  estimate->add_option("--out", est.out, "Output directory")->required();

  // censored
  CensoredArgs cen;
  auto* censored = app.add_subcommand("censored", "Estimate under a deterministic censoring rule");
  censored->add_flag("--demo", cen.demo, "Run the synthetic standard-normal demonstration");
  censored->add_option("--seed", cen.seed, "RNG seed (demo)");
  censored->add_option("--population", cen.population, "Demo population size")->capture_default_str();
  censored->add_option("--bins", cen.bins, "Demo histogram bins")->capture_default_str();
  censored->add_option("--observed", cen.observed, "Sample shape CSV")->check(CLI::ExistingFile);
  censored->add_option("--observable-below", cen.below, "Bins below this value are sampled");
  censored->add_option("--observable-above", cen.above, "Bins above this value are sampled");
  censored->add_option("--mean", cen.mean, "Prior population mean");
  censored->add_option("--std", cen.std_dev, "Prior population standard deviation");
  censored->add_option("--truth", cen.truth, "True population CSV for error reporting")
      ->check(CLI::ExistingFile);
  censored->add_option("--out", cen.out, "Output directory")->required();

  // sentiment
  SentimentArgs sen;
  auto* sentiment = app.add_subcommand("sentiment", "Lexicon scoring and polarized-corpus benchmark");
  sentiment->add_option("--corpus", sen.corpus, "Corpus TSV (doc_id, user_id, text)")
      ->check(CLI::ExistingFile);
  sentiment->add_option("--lexicon", sen.lexicon, "Lexicon CSV (word,score)")->check(CLI::ExistingFile);
  sentiment->add_flag("--synthesize", sen.synthesize, "Generate a synthetic corpus instead");
  sentiment->add_option("--users", sen.users, "Synthetic users")->capture_default_str();
  sentiment->add_option("--docs-per-user", sen.docs_per_user, "Synthetic documents per user")
      ->capture_default_str();
  sentiment->add_option("--polarization", sen.polarization, "Synthetic user-mean spread")
      ->capture_default_str();
  sentiment->add_option("--min-docs", sen.cfg.min_docs_per_user, "Minimum scored documents per user")
      ->capture_default_str();
  sentiment->add_option("--tail-users", sen.cfg.extreme_users_per_tail, "Users kept per tail")
      ->capture_default_str();
  sentiment->add_option("--replicas", sen.cfg.n_replicas, "Random samples")->capture_default_str();
  sentiment->add_option("--seed", sen.cfg.rng_seed, "RNG seed")->required();
  sentiment->add_option("--bins", sen.cfg.bins, "Histogram bins")->capture_default_str();
  sentiment->add_option("--jobs", sen.cfg.jobs, "Worker threads (0 = all cores)");
  sentiment->add_flag("--census", sen.census, "Select every document (probability 1)");
  sentiment->add_option("--out", sen.out, "Output directory")->required();
  sentiment->add_flag("--svg", sen.svg, "Also write errors.svg");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream help;
    const int code = app.exit(e, help, diag);
    if (code == 0) {
      std::cout << help.str();
      return kOk;
    }
    return kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim, diag);
    if (*estimate) return cmd_estimate(est, diag);
    if (*censored) return cmd_censored(cen, diag);
    if (*sentiment) return cmd_sentiment(sen, diag);
  } catch (const Error& e) {
    diag << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    diag << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kUsage;
}

}  // namespace popfuse::cli
