#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sessrank::corpus {

struct Document {
  std::string doc_id;
  std::string title;
  std::vector<std::string> title_tokens;  // filled by textproc::fill_tokens
};

// A candidate as shown for one query: a document plus click/label info.
struct Candidate {
  std::string doc_id;
  std::string title;
  bool clicked = false;
  std::optional<int> relevance;           // graded label when present
  std::vector<std::string> title_tokens;  // filled by textproc::fill_tokens

  Document to_document() const { return Document{doc_id, title, title_tokens}; }
};

struct QueryTurn {
  std::string query_id;
  std::string text;
  std::vector<std::string> tokens;  // filled by textproc::fill_tokens
  std::vector<Candidate> candidates;
  std::optional<std::string> first_click;  // doc_id of the first clicked candidate

  bool has_click() const { return first_click.has_value(); }
  // Index of the first clicked candidate, by list order.
  std::optional<std::size_t> first_click_index() const;
};

struct Session {
  std::string session_id;
  std::vector<QueryTurn> turns;
};

struct HistoryStep {
  QueryTurn query;
  Document document;  // the first clicked document of that turn
};

// One training/evaluation unit: a query together with its in-session history.
struct SearchContext {
  std::string session_id;
  std::size_t turn_index = 0;      // 1-based position within the session
  std::size_t session_length = 0;  // number of turns in the session
  std::vector<HistoryStep> history;
  QueryTurn current;
  std::vector<std::size_t> clicked;  // candidate indexes with clicked == true
  std::vector<std::size_t> skipped;  // the remaining candidate indexes

  const std::string& query_id() const { return current.query_id; }
};

enum class LogFormat { jsonl };

struct ParseError : std::runtime_error {
  ParseError(std::size_t line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
  std::size_t line;
};

std::vector<Session> load_log(const std::string& path, LogFormat format = LogFormat::jsonl);
std::vector<Session> parse_log(std::string_view text);

// Canonical single-line JSON for one session (alphabetical keys, compact).
std::string to_json_line(const Session& session);
std::string serialize_log(std::span<const Session> sessions);
void save_log(std::span<const Session> sessions, const std::string& path);

struct ContextStats {
  std::size_t contexts = 0;
  std::size_t skipped_no_click = 0;        // current turn has no clicked candidate
  std::size_t skipped_broken_history = 0;  // an earlier turn in the session has no click
  std::size_t skipped_no_history = 0;      // first turn, dropped when history is required
  std::size_t skipped_total() const {
    return skipped_no_click + skipped_broken_history + skipped_no_history;
  }
};

// Expands sessions into per-turn search contexts. A context is emitted only
// when the current turn has a click and every earlier turn in the session has
// one too (otherwise the history chain of clicked documents is incomplete).
// With require_history the first turn of each session is skipped as well.
std::vector<SearchContext> derive_contexts(std::span<const Session> sessions,
                                           bool require_history,
                                           ContextStats* stats = nullptr);

struct DocRegistry {
  std::vector<Document> docs;                            // first-seen order
  std::unordered_map<std::string, std::size_t> by_id;    // doc_id -> index

  const Document* find(const std::string& doc_id) const;
  const Document& at(std::size_t index) const { return docs.at(index); }
  std::size_t size() const { return docs.size(); }
};

// Unique documents across all candidate lists, first occurrence wins.
DocRegistry collect_documents(std::span<const Session> sessions);

// Stages that key artifacts by query_id call this to reject ambiguous logs.
void require_unique_query_ids(std::span<const Session> sessions);

}  // namespace sessrank::corpus
