#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "oracles.hpp"
#include "popfuse/cli.hpp"
#include "popfuse/csv_io.hpp"
#include "popfuse/maxent.hpp"
#include "popfuse/report.hpp"

using namespace popfuse;
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("popfuse_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

struct Outcome {
  int code;
  std::string diag;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream diag;
  const int code = cli::run(args, diag);
  return {code, diag.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& p) { return Json::parse(slurp(p)); }

double tv(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return 0.5 * (a - b).cwiseAbs().sum(); }

std::string num(double v) { return format_double(v); }

}  // namespace

TEST_CASE("simulate writes a complete benchmark") {
  Scratch s("simulate");
  const auto r = run({"simulate", "--replicas", "200", "--seed", "1", "--svg", "--out", s / "out"});
  CHECK(r.code == cli::kOk);
  for (const char* f : {"replicas.csv", "summary.json", "errors.svg"}) CHECK(fs::exists(s.dir / "out" / f));
  const auto j = read_json(s.dir / "out" / "summary.json");
  CHECK(j["config"]["replicas"] == 200);
  const double pp = j["estimators"]["pure_prior"]["mean"].get<double>();
  const double ps = j["estimators"]["pure_sample"]["mean"].get<double>();
  const double fused = j["estimators"]["prior_sample"]["mean"].get<double>();
  CHECK(fused < ps);
  CHECK(ps < pp);
  CHECK(r.diag.find("prior_sample") != std::string::npos);
}

TEST_CASE("bad flags and configurations exit with the usage status") {
  Scratch s("usage");
  CHECK(run({"simulate", "--replicas", "0", "--seed", "1", "--out", s / "o"}).code == cli::kUsage);
  CHECK(run({"simulate", "--seed", "1"}).code == cli::kUsage);
  CHECK(run({"simulate", "--seed", "1", "--out", s / "o", "--std-range", "1", "0"}).code == cli::kUsage);
  CHECK(run({"frobnicate"}).code == cli::kUsage);
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"censored", "--demo", "--out", s / "o"}).code == cli::kUsage);
  CHECK(run({"censored", "--demo", "--seed", "1", "--bins", "7", "--out", s / "o"}).code == cli::kUsage);
}

TEST_CASE("the installed executable reports exit statuses") {
  auto status = [](const std::string& args) {
    const int raw = std::system((std::string(POPFUSE_EXE) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("--help") == cli::kOk);
  CHECK(status("simulate --help") == cli::kOk);
  CHECK(status("simulate --replicas nope --seed 1 --out /tmp/x") == cli::kUsage);
}

TEST_CASE("estimate under unbiased selection returns the sample") {
  Scratch s("census");
  const auto grid = Grid::uniform(-2.0, 2.0, 8, 2);
  Eigen::VectorXd h(8);
  h << 0.02, 0.08, 0.15, 0.25, 0.2, 0.15, 0.1, 0.05;
  const Marginal shape(grid.with_categories(1), h);
  save_marginal(s / "obs.csv", shape);
  save_selection(s / "sel.csv", SelectionFunction::constant(grid, 1.0));
  const auto r = run({"estimate", "--observed", s / "obs.csv", "--selection", s / "sel.csv",
                      "--inclusion-rate", "1", "--mean", num(shape.mean()), "--out", s / "out"});
  REQUIRE(r.code == cli::kOk);
  const auto est = load_marginal(s.dir / "out" / "estimate.csv");
  CHECK((est.mass() - h).cwiseAbs().maxCoeff() <= 1e-8);
  const auto d = read_json(s.dir / "out" / "diagnostics.json");
  CHECK(d["status"] == "converged");
  CHECK(d["residuals"]["max_observation"].get<double>() <= 1e-8);
}

TEST_CASE("an infeasible prior is reported with exit status 2") {
  Scratch s("infeasible");
  const auto grid = Grid::uniform(0.0, 1.0, 4, 2);
  save_marginal(s / "obs.csv", Marginal::uniform(grid.with_categories(1)));
  save_selection(s / "sel.csv", SelectionFunction::constant(grid, 0.5));
  const auto r = run({"estimate", "--observed", s / "obs.csv", "--selection", s / "sel.csv",
                      "--inclusion-rate", "0.5", "--mean", "5", "--out", s / "out"});
  CHECK(r.code == cli::kSolveFailed);
  CHECK(r.diag.find("infeasible") != std::string::npos);
  CHECK(read_json(s.dir / "out" / "diagnostics.json")["status"] == "infeasible");
  CHECK_FALSE(fs::exists(s.dir / "out" / "estimate.csv"));
}

TEST_CASE("malformed input files exit with the input status") {
  Scratch s("malformed");
  {
    std::ofstream(s / "obs.csv") << "bin_lo,bin_hi,mass\n0,1,0.3\n1,2,0.3\n";
    std::ofstream(s / "sel.csv") << "bin_lo,bin_hi,category,prob\n0,1,0,1\n1,2,0,1\n";
  }
  const auto r = run({"estimate", "--observed", s / "obs.csv", "--selection", s / "sel.csv",
                      "--inclusion-rate", "1", "--mean", "1", "--out", s / "out"});
  CHECK(r.code == cli::kInputError);
}

TEST_CASE("estimate through files matches the entropy reference") {
  Scratch s("oracle");
  auto inst = oracle::random_instance(5, 3, 2, false, false);
  const auto truth = marginalize(inst.truth);
  const double mean = truth.mean();
  const double sd = std::sqrt(truth.mass().dot(inst.grid.midpoints().array().square().matrix()) - mean * mean);
  inst.moments = mean_std_constraints(inst.grid, mean, sd);
  const auto ref = oracle::reference_joint(inst);
  REQUIRE(ref.converged);

  save_marginal(s / "obs.csv", inst.observed.shape());
  save_selection(s / "sel.csv", inst.selection);
  const auto r = run({"estimate", "--observed", s / "obs.csv", "--selection", s / "sel.csv",
                      "--inclusion-rate", num(inst.observed.inclusion_rate()), "--mean", num(mean),
                      "--std", num(sd), "--out", s / "out"});
  REQUIRE(r.code == cli::kOk);
  const auto joint = load_joint(s.dir / "out" / "joint.csv");
  CHECK(tv(oracle::flatten(joint.mass()), ref.p) <= 1e-6);
}

TEST_CASE("censored estimate with nothing censored keeps the sample") {
  Scratch s("uncensored");
  const auto grid = Grid::uniform(0.0, 1.0, 5);
  Eigen::VectorXd h(5);
  h << 0.1, 0.3, 0.2, 0.25, 0.15;
  const Marginal shape(grid, h);
  save_marginal(s / "obs.csv", shape);
  const auto r = run({"censored", "--observed", s / "obs.csv", "--observable-below", "2", "--mean",
                      num(shape.mean()), "--out", s / "out"});
  REQUIRE(r.code == cli::kOk);
  const auto d = read_json(s.dir / "out" / "diagnostics.json");
  CHECK(d["sample_weight"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((load_marginal(s.dir / "out" / "estimate.csv").mass() - h).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("censored estimate through files matches the reference") {
  Scratch s("censored_oracle");
  const auto inst = oracle::random_censored_instance(17, 8, 3);
  const auto ref = oracle::censored_reference(inst.grid.midpoints(), inst.shape.mass(), inst.observable, inst.mean_target);
  save_marginal(s / "obs.csv", inst.shape);
  const double threshold = inst.grid.lower(8 - 3);
  const auto r = run({"censored", "--observed", s / "obs.csv", "--observable-below", num(threshold), "--mean",
                      num(inst.mean_target), "--out", s / "out"});
  REQUIRE(r.code == cli::kOk);
  CHECK(tv(load_marginal(s.dir / "out" / "estimate.csv").mass(), ref.marginal) <= 1e-5);
  CHECK(read_json(s.dir / "out" / "diagnostics.json")["sample_weight"].get<double>() ==
        doctest::Approx(ref.W).epsilon(1e-5));

  CHECK(run({"censored", "--observed", s / "obs.csv", "--mean", "0", "--out", s / "o2"}).code == cli::kUsage);
  CHECK(run({"censored", "--observed", s / "obs.csv", "--observable-below", "0", "--observable-above", "0",
             "--mean", "0", "--out", s / "o2"})
            .code == cli::kUsage);
}

TEST_CASE("censored demonstration") {
  Scratch s("demo");
  const auto r = run({"censored", "--demo", "--seed", "3", "--population", "20000", "--out", s / "out"});
  REQUIRE(r.code == cli::kOk);
  const auto j = read_json(s.dir / "out" / "summary.json");
  const double pure = j["errors"]["pure_sample"].get<double>();
  const double m = j["errors"]["mean_only"].get<double>();
  const double ms = j["errors"]["mean_std"].get<double>();
  CHECK(m < pure);
  CHECK(ms < m);
  CHECK(ms <= 0.5 * pure);
  CHECK(j["sample_weight"]["mean_std"].get<double>() == doctest::Approx(j["sample_weight"]["true"].get<double>()).epsilon(0.02));
  for (const char* f : {"truth.csv", "observed.csv", "estimate_mean.csv", "estimate_mean_std.csv"}) {
    CHECK(fs::exists(s.dir / "out" / f));
  }
}

TEST_CASE("sentiment on a synthetic corpus") {
  Scratch s("sentiment");
  const auto r = run({"sentiment", "--synthesize", "--users", "20", "--docs-per-user", "300", "--replicas", "60",
                      "--seed", "2", "--out", s / "out"});
  REQUIRE(r.code == cli::kOk);
  for (const char* f : {"corpus.tsv", "lexicon.csv", "scored.tsv", "population.csv", "users.csv", "replicas.csv"}) {
    CHECK(fs::exists(s.dir / "out" / f));
  }
  const auto j = read_json(s.dir / "out" / "summary.json");
  CHECK(j["estimators"]["prior_sample"]["mean"].get<double>() < j["estimators"]["pure_sample"]["mean"].get<double>());
  CHECK(j["corpus"]["documents"] == 6000);

  // The written corpus and lexicon reproduce the run when read back.
  const auto again = run({"sentiment", "--corpus", s / "out/corpus.tsv", "--lexicon", s / "out/lexicon.csv",
                          "--replicas", "60", "--seed", "2", "--out", s / "again"});
  REQUIRE(again.code == cli::kOk);
  CHECK(slurp(s.dir / "again" / "replicas.csv") == slurp(s.dir / "out" / "replicas.csv"));

  const auto census = run({"sentiment", "--corpus", s / "out/corpus.tsv", "--lexicon", s / "out/lexicon.csv",
                           "--replicas", "10", "--seed", "2", "--census", "--out", s / "census"});
  REQUIRE(census.code == cli::kOk);
  const auto c = read_json(s.dir / "census" / "summary.json");
  CHECK(c["estimators"]["pure_sample"]["mean"].get<double>() == 0.0);
}

TEST_CASE("sentiment input problems") {
  Scratch s("sentiment_bad");
  {
    std::ofstream(s / "corpus.tsv") << "d1\tu1\thello world\n";
    std::ofstream(s / "empty.csv") << "";
  }
  const auto empty = run({"sentiment", "--corpus", s / "corpus.tsv", "--lexicon", s / "empty.csv", "--seed", "1",
                          "--out", s / "out"});
  CHECK(empty.code == cli::kInputError);
  CHECK(empty.diag.find("no document matched") != std::string::npos);
  CHECK(run({"sentiment", "--seed", "1", "--out", s / "out"}).code == cli::kUsage);
}

TEST_CASE("outputs are byte-identical across reruns and thread counts") {
  Scratch s("determinism");
  const std::vector<std::string> base{"simulate", "--replicas", "30", "--seed", "9"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  };
  REQUIRE(run(with({"--jobs", "1", "--out", s / "a"})).code == cli::kOk);
  REQUIRE(run(with({"--jobs", "1", "--out", s / "b"})).code == cli::kOk);
  REQUIRE(run(with({"--jobs", "4", "--out", s / "c"})).code == cli::kOk);
  for (const char* f : {"replicas.csv", "summary.json"}) {
    CHECK(slurp(s.dir / "a" / f) == slurp(s.dir / "b" / f));
    CHECK(slurp(s.dir / "a" / f) == slurp(s.dir / "c" / f));
  }
}
