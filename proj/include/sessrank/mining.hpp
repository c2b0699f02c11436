#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sessrank/corpus.hpp"
#include "sessrank/retrieval.hpp"

namespace sessrank::mining {

// The documents ranked around one query's first-clicked document.
struct NegativeWindow {
  struct Member {
    std::string doc_id;
    std::size_t window_pos;   // 1-based, top of the window first
    std::size_t global_rank;  // 1-based rank in the owner's full list
  };

  std::string owner_query_id;
  std::string owner_session_id;
  std::string center_doc_id;
  std::size_t center_rank = 0;  // 1-based rank of the center document
  std::size_t w_size = 0;
  std::vector<Member> members;  // ascending global rank; excludes the center
};

// Members are the documents at global ranks [center - w_size/2,
// center + w_size/2], excluding the center itself, clipped to list bounds.
NegativeWindow extract_window(const retrieval::RankingList& list,
                              const std::string& center_doc, std::size_t w_size);

// Windows for every query that has a first click, plus a doc_id index for
// membership lookups. Built without materializing full ranking lists.
struct WindowSet {
  std::size_t w_size = 0;
  std::vector<NegativeWindow> windows;
  std::unordered_map<std::string, std::vector<std::size_t>> by_doc;

  static WindowSet build(const retrieval::Scorer& scorer,
                         std::span<const retrieval::QueryRef> queries,
                         const corpus::DocRegistry& docs, std::size_t w_size);
  static WindowSet from_windows(std::vector<NegativeWindow> windows, std::size_t w_size);
};

enum class Band { low, medium, high };

const char* band_name(Band band);
Band band_from_name(const std::string& name);

// Thirds of the window positions: high = top third (closest to the head of
// the window), low = bottom third, medium = the rest.
Band band_of(std::size_t window_pos, std::size_t member_count);

struct AmbiguousMatch {
  std::string source_query_id;   // the query being augmented
  std::string matched_query_id;  // the window owner
  std::size_t pos = 0;           // window_pos of the source's click in that window
  std::size_t ambiguity = 0;     // |rank difference| of the two clicks in the owner's list
  double margin = 0.0;
};

// Per-match margin (pos / w_size) * 2 * mean_margin, strictly increasing in
// pos with maximum 2 * mean_margin.
double ambiguous_margin(std::size_t pos, std::size_t w_size, double mean_margin);

// Finds windows of other sessions' queries that contain the context's first
// clicked document, filters by band, sorts by ascending ambiguity (ties by
// owner query_id) and returns at most k matches.
std::vector<AmbiguousMatch> mine_ambiguous(const corpus::SearchContext& context,
                                           const WindowSet& windows, std::size_t k, Band band,
                                           double mean_margin = 0.2);

std::string matches_to_tsv(std::span<const AmbiguousMatch> matches);
std::vector<AmbiguousMatch> matches_from_tsv(std::string_view text);
void save_matches(std::span<const AmbiguousMatch> matches, const std::string& path);
std::vector<AmbiguousMatch> load_matches(const std::string& path);

}  // namespace sessrank::mining
