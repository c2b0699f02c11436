#pragma once

#include <cstdint>
#include <vector>

#include "sessrank/corpus.hpp"

namespace sessrank::synlog {

// Generator settings. Topic/subtopic vocabularies depend only on the counts,
// not on the seed, so corpora generated with different seeds share terms.
struct SynConfig {
  std::size_t n_topics = 12;         // also the number of subtopics
  std::size_t n_sessions = 100;
  double mix_short = 0.665;          // 2-turn sessions
  double mix_medium = 0.2724;        // 3-4 turns
  double mix_long = 0.0626;          // 5-7 turns
  std::size_t terms_per_topic = 18;  // vocabulary size per topic/subtopic
  std::size_t n_candidates = 5;      // candidates per query, 1 clicked
  std::uint64_t seed = 0;

  void validate() const;
};

// Each session draws a topic; each turn draws a subtopic. The clicked
// candidate's title combines the session topic with the current query's
// subtopic terms; distractors share exactly one of the two, so ranking the
// click first requires both the history (topic) and the current query
// (subtopic). Every turn has exactly one clicked candidate.
std::vector<corpus::Session> generate(const SynConfig& config);

// Vocabulary helpers used by self-tests: deterministic term spelling.
std::string topic_term(std::size_t topic, std::size_t index);
std::string subtopic_term(std::size_t subtopic, std::size_t index);

}  // namespace sessrank::synlog
