#pragma once

// Lexicon sentiment scoring and the polarized-corpus benchmark.
//
// A document's score is the mean lexicon score of its tokens that appear in
// the lexicon, counted with multiplicity. Tokens are maximal runs of letters
// (ASCII letters and any non-ASCII byte), lowercased; there is no stemming.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "popfuse/dist.hpp"
#include "popfuse/report.hpp"
#include "popfuse/simgen.hpp"

namespace popfuse {

class Lexicon {
public:
  /// Normalizes the word (trim, lowercase). Throws InvalidArgument for scores
  /// outside [-1,1], empty words and duplicates.
  void add(std::string_view word, double score);

  std::optional<double> find(std::string_view normalized_word) const;
  std::size_t size() const noexcept { return scores_.size(); }
  bool empty() const noexcept { return scores_.empty(); }
  const std::map<std::string, double, std::less<>>& entries() const noexcept { return scores_; }

private:
  std::map<std::string, double, std::less<>> scores_;
};

/// CSV `word,score` with that header. An empty stream is an empty lexicon.
Lexicon read_lexicon(std::istream& in);
Lexicon load_lexicon(const std::filesystem::path& path);
void write_lexicon(std::ostream& out, const Lexicon& lexicon);

std::string normalize_word(std::string_view word);
std::vector<std::string> tokenize(std::string_view text);

struct TextScore {
  std::size_t matched = 0;
  double score = 0.0;
};

/// nullopt when no token is in the lexicon.
std::optional<TextScore> score_text(std::string_view text, const Lexicon& lexicon);

struct CorpusRecord {
  std::string doc_id;
  std::string user_id;
  std::string text;
};

struct ScoredDocument {
  std::string doc_id;
  std::string user_id;
  std::size_t matched_word_count = 0;
  double score = 0.0;
};

std::optional<ScoredDocument> score_document(const CorpusRecord& record, const Lexicon& lexicon);

/// One record per line: doc_id TAB user_id TAB text. Blank lines are skipped.
std::vector<CorpusRecord> read_corpus(std::istream& in);
std::vector<CorpusRecord> load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, std::span<const CorpusRecord> records);

struct CorpusConfig {
  std::size_t min_docs_per_user = 100;
  std::size_t extreme_users_per_tail = 5;
  std::size_t n_replicas = 600;
  std::uint64_t rng_seed = 0;
  Interval selection_range{0.0, 1.0};
  std::size_t bins = kDefaultBins;
  unsigned jobs = 0;

  void validate() const;
};

struct UserSummary {
  std::string user_id;
  std::size_t documents = 0;
  double mean_score = 0.0;
};

struct SentimentPopulation {
  /// Kept users, lowest mean first; a document's label indexes this list.
  std::vector<UserSummary> users;
  /// Documents of kept users ordered by (label, doc_id).
  std::vector<ScoredDocument> documents;
  std::vector<double> scores;
  std::vector<std::size_t> user_labels;
  std::size_t unmatched_documents = 0;
  std::size_t eligible_users = 0;
};

/// Keeps users with at least min_docs_per_user scored documents, ranks them
/// by mean score (ties by user_id) and keeps the extreme_users_per_tail
/// lowest and highest. Independent of record order. Throws
/// InsufficientUsers when fewer than two tails' worth of users qualify.
SentimentPopulation build_population(std::span<const CorpusRecord> corpus, const Lexicon& lexicon,
                                     const CorpusConfig& cfg);

/// Score histogram grid: [-1,1] with the default padding.
Grid sentiment_grid(std::size_t bins, std::size_t categories = 1);

/// Random per-user selection probabilities, Pure Sample vs Prior+Sample with
/// the population mean score as the prior.
BenchmarkReport run_corpus_benchmark(const SentimentPopulation& population, const CorpusConfig& cfg);

struct SyntheticCorpus {
  Lexicon lexicon;
  std::vector<CorpusRecord> records;
  /// Latent mean sentiment of each generated user.
  std::vector<double> user_means;
};

/// The vocabulary used by synthesize_corpus: 201 letter-only words with
/// scores -1.00, -0.99, ..., 1.00.
Lexicon synthetic_lexicon();

/// Latent user means are 0.8 tanh(polarization z / 2) with z standard normal.
/// Each document mixes 1-3 lexicon words scattered around its user's mean
/// with out-of-vocabulary filler; about 2% of documents contain no lexicon
/// word at all.
SyntheticCorpus synthesize_corpus(std::size_t n_users, std::size_t docs_per_user,
                                  double polarization, std::uint64_t seed);

/// Standard deviation of the latent user means for a given polarization.
double synthetic_user_mean_spread(double polarization);

}  // namespace popfuse
