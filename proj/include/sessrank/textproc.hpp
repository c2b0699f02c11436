#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sessrank/corpus.hpp"

namespace sessrank::textproc {

// Reserved tokens with fixed ids; everything else is assigned by frequency.
inline constexpr std::uint32_t kClsId = 0;
inline constexpr std::uint32_t kSepId = 1;
inline constexpr std::uint32_t kEosId = 2;
inline constexpr std::uint32_t kTermDelId = 3;
inline constexpr std::uint32_t kEmptyQueryId = 4;
inline constexpr std::uint32_t kEmptyDocId = 5;
inline constexpr std::uint32_t kUnkId = 6;
inline constexpr std::size_t kReservedCount = 7;

inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kEosToken = "[EOS]";
inline constexpr const char* kTermDelToken = "[term_del]";
inline constexpr const char* kEmptyQueryToken = "[empty_q]";
inline constexpr const char* kEmptyDocToken = "[empty_d]";
inline constexpr const char* kUnkToken = "[UNK]";

const std::array<std::string, kReservedCount>& reserved_tokens();
bool is_reserved_token(std::string_view term);

// Lowercase, split on whitespace, strip leading/trailing punctuation from
// each piece, drop empties. Reserved tokens are matched case-insensitively
// and emitted in canonical form, so tokenize(join(tokenize(x))) == tokenize(x).
// Bytes outside ASCII are kept verbatim (UTF-8 input passes through).
std::vector<std::string> tokenize(std::string_view text);

// Deterministic random source; every consumer takes one of these explicitly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform draw from [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  double uniform_real();  // [0, 1)
  std::uint64_t next_u64() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

  // Independent stream for a keyed sub-task (seed xor FNV-1a of the key).
  static Rng for_key(std::uint64_t seed, std::string_view key);

 private:
  std::mt19937_64 engine_;
};

class Vocabulary {
 public:
  // Builds from raw session text: each turn's query is one counting unit, and
  // each distinct document title (first occurrence per doc_id) is one unit.
  // Terms occurring fewer than min_freq times are dropped. Ids: reserved
  // tokens first, then terms by descending frequency, ties lexicographic.
  static Vocabulary build(std::span<const corpus::Session> sessions, std::uint64_t min_freq = 1);

  std::uint32_t id_of(std::string_view term) const;  // kUnkId for unknown terms
  std::optional<std::uint32_t> find(std::string_view term) const;
  const std::string& term_of(std::uint32_t id) const;
  std::vector<std::uint32_t> ids_of(std::span<const std::string> terms) const;

  std::size_t size() const { return terms_.size(); }
  std::size_t term_count() const { return terms_.size() - kReservedCount; }
  bool is_reserved(std::uint32_t id) const { return id < kReservedCount; }

  std::uint64_t frequency_of(std::string_view term) const;      // total occurrences
  std::uint64_t doc_frequency_of(std::string_view term) const;  // counting units hit
  std::uint64_t total_term_count() const { return total_terms_; }

  std::string to_tsv() const;
  static Vocabulary from_tsv(std::string_view text);
  void save_tsv(const std::string& path) const;
  static Vocabulary load_tsv(const std::string& path);

 private:
  Vocabulary();
  void append_term(std::string term, std::uint64_t freq, std::uint64_t doc_freq);

  std::vector<std::string> terms_;  // id -> term
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::uint64_t> freq_;
  std::vector<std::uint64_t> doc_freq_;
  std::uint64_t total_terms_ = 0;
};

// Fills QueryTurn::tokens and Candidate::title_tokens in place.
void fill_tokens(std::span<corpus::Session> sessions);
void fill_tokens(corpus::SearchContext& context);

// Uniform draw over non-reserved vocabulary terms, optionally excluding one
// term. Throws if the eligible set is empty.
std::string sample_term(const Vocabulary& vocab, Rng& rng,
                        std::optional<std::string_view> exclude = std::nullopt);

}  // namespace sessrank::textproc
