#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sessrank/corpus.hpp"
#include "sessrank/mining.hpp"
#include "sessrank/textproc.hpp"

namespace sessrank::augment {

enum class Strategy { mask, replace, add, random, historical, ambiguous };
enum class Difficulty { easy, medium, hard };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);
Difficulty difficulty_of(Strategy s);
const char* difficulty_name(Difficulty d);

// An altered current query, tagged with how it was constructed and the
// margin its training pairs carry.
struct AugmentedQuery {
  std::vector<std::string> tokens;
  Strategy strategy;
  Difficulty difficulty;
  double margin = 0.0;
  std::optional<std::size_t> edit_index;        // term-level: touched position/gap
  std::optional<std::string> source_query_id;   // query-level: where tokens came from
};

// Margin defaults follow the schedule: easy 1.0 > medium 0.5 > hard <= 0.4.
AugmentedQuery mask_term(std::span<const std::string> q_tokens, textproc::Rng& rng,
                         double margin = 0.5);
AugmentedQuery replace_term(std::span<const std::string> q_tokens,
                            const textproc::Vocabulary& vocab, textproc::Rng& rng,
                            double margin = 0.5);
AugmentedQuery add_term(std::span<const std::string> q_tokens,
                        const textproc::Vocabulary& vocab, textproc::Rng& rng,
                        double margin = 0.5);

// n distinct queries drawn uniformly from sessions other than
// exclude_session; queries token-equal to current_tokens are rejected.
std::vector<AugmentedQuery> sample_random_queries(std::span<const corpus::Session> sessions,
                                                  std::size_t n,
                                                  const std::string& exclude_session,
                                                  textproc::Rng& rng,
                                                  std::span<const std::string> current_tokens = {},
                                                  double margin = 1.0);

// Every history query of the context, oldest first.
std::vector<AugmentedQuery> historical_queries(const corpus::SearchContext& context,
                                               double margin = 0.5);

enum class PairKind { original, constructed };

// One pairwise training example. Both sides share the history and, for
// constructed pairs, the positive document.
struct TrainingPair {
  std::string session_id;
  std::string query_id;
  PairKind kind = PairKind::original;
  std::optional<Strategy> strategy;  // empty for original pairs
  double margin = 0.0;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> history;
  std::vector<std::string> pos_query;
  std::vector<std::string> neg_query;
  std::vector<std::string> pos_doc;
  std::vector<std::string> neg_doc;
};

struct AugmentConfig {
  std::size_t n_mask = 1;
  std::size_t n_replace = 1;
  std::size_t n_add = 1;
  std::size_t n_random = 3;
  std::size_t n_ambiguous = 4;
  double m_op = 1.0;      // original pairs
  double m_rq = 1.0;      // random queries (easy)
  double m_th = 0.5;      // term-level + historical (medium)
  double mean_m_aq = 0.2; // mean ambiguous margin (hard)
  std::size_t w_size = 50;
  std::uint64_t seed = 0;
  bool curriculum = false;  // serialize term-level pairs after all others
  // Strategy groups; ablations disable one.
  bool enable_tm = true;  // mask + replace + add
  bool enable_rq = true;  // random queries
  bool enable_hq = true;  // historical queries
  bool enable_aq = true;  // ambiguous queries

  void validate() const;
};

struct AugmentStats {
  std::size_t contexts = 0;
  std::size_t original_pairs = 0;
  std::size_t constructed_pairs = 0;
  std::size_t contexts_without_history = 0;
  std::size_t random_shortfall = 0;     // contexts with fewer than n_random picks
  std::size_t ambiguous_shortfall = 0;  // contexts with fewer than n_ambiguous matches
  std::unordered_map<std::string, std::size_t> by_strategy;
};

// Assembles the full training set: original (d_c, d_s) pairs for every
// context, plus constructed pairs (altered current query vs. the clicked
// document) for contexts with non-empty history. Deterministic per seed;
// each context draws from its own rng stream keyed by session and query id.
std::vector<TrainingPair> build_training_set(
    std::span<const corpus::SearchContext> contexts, std::span<const corpus::Session> sessions,
    const textproc::Vocabulary& vocab,
    const std::unordered_map<std::string, std::vector<mining::AmbiguousMatch>>& matches,
    const AugmentConfig& config, AugmentStats* stats = nullptr);

std::string pairs_to_jsonl(std::span<const TrainingPair> pairs, bool curriculum = false);
std::vector<TrainingPair> pairs_from_jsonl(std::string_view text);
void save_pairs(std::span<const TrainingPair> pairs, const std::string& path,
                bool curriculum = false);
std::vector<TrainingPair> load_pairs(const std::string& path);

}  // namespace sessrank::augment
