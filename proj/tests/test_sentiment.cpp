#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "popfuse/sentiment.hpp"

using namespace popfuse;

namespace {

Lexicon small_lexicon() {
  Lexicon lex;
  lex.add("good", 0.8);
  lex.add("bad", -0.4);
  lex.add("great", 1.0);
  lex.add("awful", -1.0);
  lex.add("meh", 0.0);
  return lex;
}

double sample_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Corpus where user u writes `docs` documents consisting of one word whose
// score is the user's mean.
std::vector<CorpusRecord> flat_corpus(const std::vector<std::pair<std::string, std::string>>& users, std::size_t docs) {
  std::vector<CorpusRecord> corpus;
  for (const auto& [user, word] : users) {
    for (std::size_t d = 0; d < docs; ++d) corpus.push_back({user + "-" + std::to_string(d), user, word});
  }
  return corpus;
}

}  // namespace

TEST_CASE("lexicon invariants") {
  Lexicon lex;
  lex.add("  Good ", 0.5);
  CHECK(lex.find("good") == 0.5);
  CHECK_FALSE(lex.find("Good").has_value());
  CHECK_THROWS_AS(lex.add("good", 0.1), Error);
  CHECK_THROWS_AS(lex.add("over", 1.5), Error);
  CHECK_THROWS_AS(lex.add("nan", std::nan("")), Error);
  CHECK_THROWS_AS(lex.add("   ", 0.1), Error);
}

TEST_CASE("lexicon files") {
  std::istringstream empty("");
  CHECK(read_lexicon(empty).empty());
  std::istringstream ok("word,score\ngood,0.5\nBad,-0.25\n");
  const auto lex = read_lexicon(ok);
  CHECK(lex.size() == 2);
  CHECK(lex.find("bad") == -0.25);
  std::istringstream headerless("good,0.5\n");
  CHECK_THROWS_AS(read_lexicon(headerless), Error);

  std::stringstream round;
  write_lexicon(round, lex);
  CHECK(read_lexicon(round).entries() == lex.entries());
}

TEST_CASE("tokenization") {
  CHECK(tokenize("Hello, WORLD! it's 2020...") == std::vector<std::string>{"hello", "world", "it", "s"});
  CHECK(tokenize("caffè-latte") == std::vector<std::string>{"caffè", "latte"});
  CHECK(tokenize("  ").empty());
}

TEST_CASE("document scores") {
  Lexicon pm;
  pm.add("up", 1.0);
  pm.add("down", -1.0);
  CHECK(score_text("up and down", pm)->score == 0.0);

  Lexicon half;
  half.add("fine", 0.5);
  const auto ten = score_text("one two three four fine six seven eight nine ten", half);
  CHECK(ten->score == 0.5);
  CHECK(ten->matched == 1);

  Lexicon gb;
  gb.add("good", 0.8);
  gb.add("bad", -0.4);
  const auto s = score_text("good good bad", gb);
  CHECK(s->matched == 3);
  CHECK(s->score == doctest::Approx(0.4).epsilon(1e-15));

  CHECK_FALSE(score_text("nothing here", gb).has_value());
  const auto doc = score_document({"d1", "u1", "Good!"}, gb);
  REQUIRE(doc.has_value());
  CHECK(doc->doc_id == "d1");
  CHECK(doc->user_id == "u1");
  CHECK(doc->score == 0.8);
}

TEST_CASE("scores stay in range and ignore unknown words") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> score(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 29);
  Lexicon lex;
  for (int w = 0; w < 20; ++w) lex.add("w" + std::string(1, static_cast<char>('a' + w)), score(rng));
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    for (int t = 0; t < 12; ++t) text += "w" + std::string(1, static_cast<char>('a' + pick(rng))) + " ";
    const auto s = score_text(text, lex);
    if (!s) continue;
    CHECK(s->score >= -1.0);
    CHECK(s->score <= 1.0);
    const auto padded = score_text("zzz " + text + " qqq unknown", lex);
    CHECK(padded->score == s->score);
  }
}

TEST_CASE("corpus files") {
  std::istringstream in("d1\tu1\thello there\n\nd2\tu2\ttext\twith tab\r\n");
  const auto records = read_corpus(in);
  REQUIRE(records.size() == 2);
  CHECK(records[1].text == "text\twith tab");
  std::stringstream round;
  write_corpus(round, records);
  const auto back = read_corpus(round);
  CHECK(back[0].doc_id == "d1");
  CHECK(back[1].text == records[1].text);
  std::istringstream bad("d1 u1 no tabs\n");
  CHECK_THROWS_AS(read_corpus(bad), Error);
}

TEST_CASE("population building") {
  const auto lex = small_lexicon();
  CorpusConfig cfg;
  cfg.min_docs_per_user = 3;
  cfg.extreme_users_per_tail = 1;

  const auto one = flat_corpus({{"solo", "good"}}, 5);
  try {
    build_population(one, lex, cfg);
    FAIL("expected InsufficientUsers");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientUsers);
  }

  // Equal means: ties resolve by user id.
  const auto tied = flat_corpus({{"carol", "meh"}, {"alice", "meh"}, {"bob", "meh"}}, 4);
  const auto pop = build_population(tied, lex, cfg);
  REQUIRE(pop.users.size() == 2);
  CHECK(pop.users[0].user_id == "alice");
  CHECK(pop.users[1].user_id == "carol");

  // Users below the threshold are ignored; unmatched documents are counted.
  auto corpus = flat_corpus({{"hi", "great"}, {"lo", "awful"}, {"mid", "good"}}, 3);
  corpus.push_back({"x", "few", "bad"});
  corpus.push_back({"y", "hi", "no lexicon words"});
  const auto p2 = build_population(corpus, lex, cfg);
  CHECK(p2.eligible_users == 3);
  CHECK(p2.unmatched_documents == 1);
  CHECK(p2.users[0].user_id == "lo");
  CHECK(p2.users[1].user_id == "hi");
  CHECK(p2.scores.size() == 6);
  CHECK(std::count(p2.user_labels.begin(), p2.user_labels.end(), 0u) == 3);
}

TEST_CASE("selected users match a sort-and-slice reference") {
  const auto synth = synthesize_corpus(20, 150, 1.5, 9);
  CorpusConfig cfg;
  const auto pop = build_population(synth.records, synth.lexicon, cfg);

  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : synth.records) {
    if (const auto s = score_text(r.text, synth.lexicon)) {
      acc[r.user_id].first += s->score;
      acc[r.user_id].second += 1;
    }
  }
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [user, sum_n] : acc) {
    if (sum_n.second >= cfg.min_docs_per_user) ranked.emplace_back(sum_n.first / static_cast<double>(sum_n.second), user);
  }
  std::sort(ranked.begin(), ranked.end());
  std::set<std::string> expected;
  for (std::size_t k = 0; k < 5; ++k) {
    expected.insert(ranked[k].second);
    expected.insert(ranked[ranked.size() - 1 - k].second);
  }
  std::set<std::string> got;
  for (const auto& u : pop.users) got.insert(u.user_id);
  CHECK(got == expected);
  CHECK(std::is_sorted(pop.users.begin(), pop.users.end(),
                       [](const auto& a, const auto& b) { return a.mean_score < b.mean_score; }));
}

TEST_CASE("population does not depend on record order") {
  const auto synth = synthesize_corpus(14, 120, 1.5, 4);
  auto shuffled = synth.records;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CorpusConfig cfg;
  const auto a = build_population(synth.records, synth.lexicon, cfg);
  const auto b = build_population(shuffled, synth.lexicon, cfg);
  CHECK(a.scores == b.scores);
  CHECK(a.user_labels == b.user_labels);
  for (std::size_t i = 0; i < a.users.size(); ++i) CHECK(a.users[i].mean_score == b.users[i].mean_score);
}

TEST_CASE("synthetic corpora") {
  const auto a = synthesize_corpus(6, 50, 1.5, 3);
  const auto b = synthesize_corpus(6, 50, 1.5, 3);
  REQUIRE(a.records.size() == 300);
  for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].text == b.records[i].text);
  CHECK(synthetic_lexicon().size() == 201);

  const auto flat = synthesize_corpus(8, 10, 0.0, 3);
  for (const double m : flat.user_means) CHECK(m == 0.0);

  CHECK_THROWS_AS(synthesize_corpus(0, 10, 1.0, 1), Error);
  CHECK_THROWS_AS(synthesize_corpus(3, 10, -1.0, 1), Error);
}

TEST_CASE("realized user-mean spread matches the configured spread") {
  const auto synth = synthesize_corpus(10, 400, 2.0, 6);
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : synth.records) {
    if (const auto s = score_text(r.text, synth.lexicon)) {
      acc[r.user_id].first += s->score;
      acc[r.user_id].second += 1;
    }
  }
  std::vector<double> means;
  for (const auto& [user, v] : acc) means.push_back(v.first / static_cast<double>(v.second));
  const double target = synthetic_user_mean_spread(2.0);
  const double sigma = target / std::sqrt(2.0 * (static_cast<double>(means.size()) - 1.0));
  CHECK(std::abs(sample_std(means) - target) <= 3.0 * sigma);
}

TEST_CASE("corpus benchmark") {
  const auto synth = synthesize_corpus(20, 300, 1.5, 2);
  CorpusConfig cfg;
  cfg.n_replicas = 60;
  cfg.rng_seed = 2;
  const auto pop = build_population(synth.records, synth.lexicon, cfg);
  const auto report = run_corpus_benchmark(pop, cfg);
  CHECK(report.estimators == std::vector<Estimator>{Estimator::PureSample, Estimator::PriorSample});
  CHECK(report.records.size() == 120);

  cfg.selection_range = {1.0, 1.0};
  const auto census = run_corpus_benchmark(pop, cfg);
  for (const double e : census.errors(Estimator::PureSample)) CHECK(e == 0.0);
  for (const double e : census.errors(Estimator::PriorSample)) CHECK(e <= 1e-8);
}
