#include "popfuse/sentiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "popfuse/csv_io.hpp"
#include "popfuse/parallel.hpp"
#include "popfuse/random.hpp"

namespace popfuse {

namespace {

bool is_letter(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

char lower(unsigned char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c); }

std::string letters_word(std::size_t index) {
  std::string w = "senti";
  w += static_cast<char>('a' + (index / 26) % 26);
  w += static_cast<char>('a' + index % 26);
  return w;
}

constexpr std::array<const char*, 20> kFiller = {
    "the", "and", "of", "to", "in", "it", "is", "was", "for", "on",
    "with", "as", "at", "by", "this", "that", "from", "we", "you", "they"};

}  // namespace

// ---------------------------------------------------------------------------
// Lexicon

std::string normalize_word(std::string_view word) {
  const auto first = word.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = word.find_last_not_of(" \t\r\n");
  std::string out;
  for (const char c : word.substr(first, last - first + 1)) out += lower(static_cast<unsigned char>(c));
  return out;
}

void Lexicon::add(std::string_view word, double score) {
  auto key = normalize_word(word);
  if (key.empty()) throw Error(ErrorKind::InvalidArgument, "empty lexicon word");
  if (!(score >= -1.0 && score <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "lexicon score for '" + key + "' outside [-1,1]");
  }
  if (!scores_.emplace(key, score).second) {
    throw Error(ErrorKind::InvalidArgument, "duplicate lexicon word '" + key + "'");
  }
}

std::optional<double> Lexicon::find(std::string_view normalized_word) const {
  const auto it = scores_.find(normalized_word);
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

Lexicon read_lexicon(std::istream& in) {
  Lexicon lexicon;
  if (!(in >> std::ws) || in.peek() == std::char_traits<char>::eof()) return lexicon;
  const auto table = read_csv(in);
  if (table.header != std::vector<std::string>{"word", "score"}) {
    throw Error(ErrorKind::Parse, "expected header 'word,score'");
  }
  for (const auto& row : table.rows) lexicon.add(row[0], parse_double(row[1]));
  return lexicon;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return read_lexicon(in);
}

void write_lexicon(std::ostream& out, const Lexicon& lexicon) {
  out << "word,score\n";
  for (const auto& [word, score] : lexicon.entries()) out << word << ',' << format_double(score) << '\n';
}

// ---------------------------------------------------------------------------
// Scoring

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_letter(c)) {
      current += lower(c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::optional<TextScore> score_text(std::string_view text, const Lexicon& lexicon) {
  TextScore s;
  double total = 0.0;
  for (const auto& token : tokenize(text)) {
    if (const auto v = lexicon.find(token)) {
      total += *v;
      ++s.matched;
    }
  }
  if (s.matched == 0) return std::nullopt;
  s.score = std::clamp(total / static_cast<double>(s.matched), -1.0, 1.0);
  return s;
}

std::optional<ScoredDocument> score_document(const CorpusRecord& record, const Lexicon& lexicon) {
  const auto s = score_text(record.text, lexicon);
  if (!s) return std::nullopt;
  return ScoredDocument{record.doc_id, record.user_id, s->matched, s->score};
}

// ---------------------------------------------------------------------------
// Corpus files

std::vector<CorpusRecord> read_corpus(std::istream& in) {
  std::vector<CorpusRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw Error(ErrorKind::Parse, "corpus line " + std::to_string(line_no) +
                                        " needs doc_id, user_id and text separated by tabs");
    }
    records.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1)});
  }
  return records;
}

std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return read_corpus(in);
}

void write_corpus(std::ostream& out, std::span<const CorpusRecord> records) {
  for (const auto& r : records) out << r.doc_id << '\t' << r.user_id << '\t' << r.text << '\n';
}

// ---------------------------------------------------------------------------
// Population

void CorpusConfig::validate() const {
  if (min_docs_per_user == 0 || extreme_users_per_tail == 0 || n_replicas == 0 || bins == 0) {
    throw Error(ErrorKind::InvalidArgument, "corpus benchmark counts must be positive");
  }
  if (!(selection_range.lo >= 0.0 && selection_range.hi <= 1.0 && selection_range.lo <= selection_range.hi)) {
    throw Error(ErrorKind::InvalidArgument, "selection range must lie within [0,1]");
  }
}

SentimentPopulation build_population(std::span<const CorpusRecord> corpus, const Lexicon& lexicon,
                                     const CorpusConfig& cfg) {
  cfg.validate();
  SentimentPopulation pop;
  std::map<std::string, std::vector<ScoredDocument>> by_user;
  for (const auto& record : corpus) {
    if (auto doc = score_document(record, lexicon)) {
      by_user[doc->user_id].push_back(std::move(*doc));
    } else {
      ++pop.unmatched_documents;
    }
  }

  std::vector<UserSummary> eligible;
  for (auto& [user, docs] : by_user) {
    if (docs.size() < cfg.min_docs_per_user) continue;
    std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) {
      return a.doc_id != b.doc_id ? a.doc_id < b.doc_id : a.score < b.score;
    });
    double total = 0.0;
    for (const auto& d : docs) total += d.score;
    eligible.push_back({user, docs.size(), total / static_cast<double>(docs.size())});
  }
  pop.eligible_users = eligible.size();
  const std::size_t tail = cfg.extreme_users_per_tail;
  if (eligible.size() < 2 * tail) {
    throw Error(ErrorKind::InsufficientUsers,
                std::to_string(eligible.size()) + " users have at least " +
                    std::to_string(cfg.min_docs_per_user) + " scored documents, need " +
                    std::to_string(2 * tail));
  }
  std::sort(eligible.begin(), eligible.end(), [](const auto& a, const auto& b) {
    return a.mean_score != b.mean_score ? a.mean_score < b.mean_score : a.user_id < b.user_id;
  });
  pop.users.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(tail));
  pop.users.insert(pop.users.end(), eligible.end() - static_cast<std::ptrdiff_t>(tail), eligible.end());

  for (std::size_t label = 0; label < pop.users.size(); ++label) {
    for (const auto& doc : by_user[pop.users[label].user_id]) {
      pop.documents.push_back(doc);
      pop.scores.push_back(doc.score);
      pop.user_labels.push_back(label);
    }
  }
  return pop;
}

Grid sentiment_grid(std::size_t bins, std::size_t categories) {
  return Grid::padded_range(-1.0, 1.0, bins, categories);
}

BenchmarkReport run_corpus_benchmark(const SentimentPopulation& population, const CorpusConfig& cfg) {
  cfg.validate();
  if (population.scores.empty() || population.users.empty()) {
    throw Error(ErrorKind::EmptyInput, "empty sentiment population");
  }
  const std::vector<Estimator> estimators{Estimator::PureSample, Estimator::PriorSample};
  const Grid grid = sentiment_grid(cfg.bins, population.users.size());
  std::vector<SampledReplica> results(cfg.n_replicas);
  parallel_for(cfg.n_replicas, cfg.jobs, [&](std::size_t i) {
    results[i] = run_sampled_replica(i, population.scores, population.user_labels, grid,
                                     cfg.selection_range, cfg.rng_seed, estimators);
  });
  std::vector<ReplicaRecord> records;
  std::size_t redraws = 0;
  for (auto& r : results) {
    redraws += r.redraws;
    records.insert(records.end(), r.records.begin(), r.records.end());
  }
  return aggregate(estimators, std::move(records), cfg.n_replicas, redraws);
}

// ---------------------------------------------------------------------------
// Synthetic corpora

Lexicon synthetic_lexicon() {
  Lexicon lexicon;
  for (int k = -100; k <= 100; ++k) lexicon.add(letters_word(static_cast<std::size_t>(k + 100)), k / 100.0);
  return lexicon;
}

double synthetic_user_mean_spread(double polarization) {
  // Trapezoid rule over the standard normal density on [-12, 12].
  constexpr int steps = 24000;
  constexpr double lo = -12.0;
  constexpr double h = 24.0 / steps;
  double m1 = 0.0;
  double m2 = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double z = lo + h * i;
    const double w = (i == 0 || i == steps ? 0.5 : 1.0) * h * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    const double v = 0.8 * std::tanh(0.5 * polarization * z);
    m1 += w * v;
    m2 += w * v * v;
  }
  return std::sqrt(std::max(0.0, m2 - m1 * m1));
}

SyntheticCorpus synthesize_corpus(std::size_t n_users, std::size_t docs_per_user, double polarization,
                                  std::uint64_t seed) {
  if (n_users == 0 || docs_per_user == 0) {
    throw Error(ErrorKind::InvalidArgument, "user and document counts must be positive");
  }
  if (!(polarization >= 0.0)) throw Error(ErrorKind::InvalidArgument, "polarization must be >= 0");

  SyntheticCorpus corpus;
  corpus.lexicon = synthetic_lexicon();
  Rng users_rng = make_stream(seed, 0, 0);
  std::normal_distribution<double> standard(0.0, 1.0);
  for (std::size_t u = 0; u < n_users; ++u) {
    corpus.user_means.push_back(0.8 * std::tanh(0.5 * polarization * standard(users_rng)));
  }

  std::uniform_int_distribution<int> matched_count(1, 3);
  std::uniform_int_distribution<int> filler_count(2, 10);
  std::uniform_int_distribution<std::size_t> filler_pick(0, kFiller.size() - 1);
  std::bernoulli_distribution no_lexicon(0.02);
  std::normal_distribution<double> token_noise(0.0, 0.45);
  char id[64];
  for (std::size_t u = 0; u < n_users; ++u) {
    Rng rng = make_stream(seed, u + 1, 1);
    std::snprintf(id, sizeof id, "user%03zu", u);
    const std::string user_id = id;
    for (std::size_t d = 0; d < docs_per_user; ++d) {
      std::vector<std::string> tokens;
      const bool unmatched = no_lexicon(rng);
      const int n_matched = unmatched ? 0 : matched_count(rng);
      for (int t = 0; t < n_matched; ++t) {
        const double v = std::clamp(corpus.user_means[u] + token_noise(rng), -1.0, 1.0);
        tokens.push_back(letters_word(static_cast<std::size_t>(std::lround(v * 100.0) + 100)));
      }
      const int n_filler = filler_count(rng);
      for (int t = 0; t < n_filler; ++t) tokens.emplace_back(kFiller[filler_pick(rng)]);
      std::shuffle(tokens.begin(), tokens.end(), rng);
      std::string text;
      for (const auto& tok : tokens) text += (text.empty() ? "" : " ") + tok;
      std::snprintf(id, sizeof id, "%s-d%05zu", user_id.c_str(), d);
      corpus.records.push_back({id, user_id, std::move(text)});
    }
  }
  return corpus;
}

}  // namespace popfuse
