#include "sessrank/corpus.hpp"

#include <nlohmann/json.hpp>

#include <unordered_set>

#include "sessrank/util.hpp"

namespace sessrank::corpus {

using json = nlohmann::ordered_json;

std::optional<std::size_t> QueryTurn::first_click_index() const {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].clicked) return i;
  }
  return std::nullopt;
}

namespace {

const json& require_field(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(line_no, std::string("missing field \"") + key + "\"");
  }
  return *it;
}

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
  const json& v = require_field(obj, key, line_no);
  if (!v.is_string()) {
    throw ParseError(line_no, std::string("field \"") + key + "\" must be a string");
  }
  return v.get<std::string>();
}

Candidate parse_candidate(const json& obj, std::size_t line_no) {
  if (!obj.is_object()) throw ParseError(line_no, "candidate must be an object");
  Candidate c;
  c.doc_id = require_string(obj, "doc_id", line_no);
  c.title = require_string(obj, "title", line_no);
  const json& clicked = require_field(obj, "clicked", line_no);
  if (!clicked.is_boolean()) throw ParseError(line_no, "field \"clicked\" must be a boolean");
  c.clicked = clicked.get<bool>();
  const json& rel = require_field(obj, "relevance", line_no);
  if (rel.is_null()) {
    c.relevance = std::nullopt;
  } else if (rel.is_number_integer()) {
    int r = rel.get<int>();
    if (r < 0 || r > 4) throw ParseError(line_no, "relevance out of range [0,4]");
    c.relevance = r;
  } else {
    throw ParseError(line_no, "field \"relevance\" must be an integer or null");
  }
  return c;
}

QueryTurn parse_turn(const json& obj, std::size_t line_no) {
  if (!obj.is_object()) throw ParseError(line_no, "turn must be an object");
  QueryTurn t;
  t.query_id = require_string(obj, "query_id", line_no);
  t.text = require_string(obj, "text", line_no);
  const json& cands = require_field(obj, "candidates", line_no);
  if (!cands.is_array()) throw ParseError(line_no, "field \"candidates\" must be an array");
  for (const json& c : cands) t.candidates.push_back(parse_candidate(c, line_no));
  if (t.candidates.empty()) {
    throw ParseError(line_no, "turn " + t.query_id + " has zero candidates");
  }
  if (auto idx = t.first_click_index()) t.first_click = t.candidates[*idx].doc_id;
  return t;
}

Session parse_session(const json& obj, std::size_t line_no) {
  if (!obj.is_object()) throw ParseError(line_no, "session must be an object");
  Session s;
  s.session_id = require_string(obj, "session_id", line_no);
  const json& turns = require_field(obj, "turns", line_no);
  if (!turns.is_array()) throw ParseError(line_no, "field \"turns\" must be an array");
  for (const json& t : turns) s.turns.push_back(parse_turn(t, line_no));
  return s;
}

bool is_blank(std::string_view line) {
  for (char c : line) {
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

json candidate_to_json(const Candidate& c) {
  json obj;
  obj["clicked"] = c.clicked;
  obj["doc_id"] = c.doc_id;
  if (c.relevance) {
    obj["relevance"] = *c.relevance;
  } else {
    obj["relevance"] = nullptr;
  }
  obj["title"] = c.title;
  return obj;
}

json turn_to_json(const QueryTurn& t) {
  json obj;
  json cands = json::array();
  for (const Candidate& c : t.candidates) cands.push_back(candidate_to_json(c));
  obj["candidates"] = std::move(cands);
  obj["query_id"] = t.query_id;
  obj["text"] = t.text;
  return obj;
}

}  // namespace

std::vector<Session> parse_log(std::string_view text) {
  std::vector<Session> sessions;
  std::unordered_set<std::string> seen_ids;
  std::vector<std::string> lines = util::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    std::size_t line_no = i + 1;
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    Session s = parse_session(obj, line_no);
    if (!seen_ids.insert(s.session_id).second) {
      throw ParseError(line_no, "duplicate session_id " + s.session_id);
    }
    sessions.push_back(std::move(s));
  }
  return sessions;
}

std::vector<Session> load_log(const std::string& path, LogFormat format) {
  (void)format;  // jsonl is the only format
  return parse_log(util::read_file(path));
}

std::string to_json_line(const Session& session) {
  json obj;
  obj["session_id"] = session.session_id;
  json turns = json::array();
  for (const QueryTurn& t : session.turns) turns.push_back(turn_to_json(t));
  obj["turns"] = std::move(turns);
  return obj.dump();
}

std::string serialize_log(std::span<const Session> sessions) {
  std::string out;
  for (const Session& s : sessions) {
    out += to_json_line(s);
    out += '\n';
  }
  return out;
}

void save_log(std::span<const Session> sessions, const std::string& path) {
  util::write_file(path, serialize_log(sessions));
}

std::vector<SearchContext> derive_contexts(std::span<const Session> sessions,
                                           bool require_history, ContextStats* stats) {
  ContextStats local;
  std::vector<SearchContext> contexts;
  for (const Session& s : sessions) {
    bool history_complete = true;  // all turns before the current one have a click
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      const QueryTurn& turn = s.turns[i];
      bool usable = true;
      if (!turn.has_click()) {
        ++local.skipped_no_click;
        usable = false;
      } else if (!history_complete) {
        ++local.skipped_broken_history;
        usable = false;
      } else if (require_history && i == 0) {
        ++local.skipped_no_history;
        usable = false;
      }
      if (usable) {
        SearchContext ctx;
        ctx.session_id = s.session_id;
        ctx.turn_index = i + 1;
        ctx.session_length = s.turns.size();
        for (std::size_t j = 0; j < i; ++j) {
          const QueryTurn& prev = s.turns[j];
          std::size_t click = *prev.first_click_index();
          ctx.history.push_back(HistoryStep{prev, prev.candidates[click].to_document()});
        }
        ctx.current = turn;
        for (std::size_t c = 0; c < turn.candidates.size(); ++c) {
          (turn.candidates[c].clicked ? ctx.clicked : ctx.skipped).push_back(c);
        }
        contexts.push_back(std::move(ctx));
        ++local.contexts;
      }
      if (!turn.has_click()) history_complete = false;
    }
  }
  if (stats) *stats = local;
  return contexts;
}

const Document* DocRegistry::find(const std::string& doc_id) const {
  auto it = by_id.find(doc_id);
  return it == by_id.end() ? nullptr : &docs[it->second];
}

DocRegistry collect_documents(std::span<const Session> sessions) {
  DocRegistry reg;
  for (const Session& s : sessions) {
    for (const QueryTurn& t : s.turns) {
      for (const Candidate& c : t.candidates) {
        if (reg.by_id.emplace(c.doc_id, reg.docs.size()).second) {
          reg.docs.push_back(c.to_document());
        }
      }
    }
  }
  return reg;
}

void require_unique_query_ids(std::span<const Session> sessions) {
  std::unordered_set<std::string> seen;
  for (const Session& s : sessions) {
    for (const QueryTurn& t : s.turns) {
      if (!seen.insert(t.query_id).second) {
        throw std::runtime_error("duplicate query_id across log: " + t.query_id);
      }
    }
  }
}

}  // namespace sessrank::corpus
