#include "sessrank/augment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <stdexcept>

#include "sessrank/util.hpp"

namespace sessrank::augment {

using json = nlohmann::ordered_json;

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::mask: return "mask";
    case Strategy::replace: return "replace";
    case Strategy::add: return "add";
    case Strategy::random: return "random";
    case Strategy::historical: return "historical";
    case Strategy::ambiguous: return "ambiguous";
  }
  throw std::invalid_argument("bad strategy");
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "mask") return Strategy::mask;
  if (name == "replace") return Strategy::replace;
  if (name == "add") return Strategy::add;
  if (name == "random") return Strategy::random;
  if (name == "historical") return Strategy::historical;
  if (name == "ambiguous") return Strategy::ambiguous;
  throw std::invalid_argument("unknown strategy: " + name);
}

Difficulty difficulty_of(Strategy s) {
  switch (s) {
    case Strategy::random: return Difficulty::easy;
    case Strategy::mask:
    case Strategy::replace:
    case Strategy::add:
    case Strategy::historical: return Difficulty::medium;
    case Strategy::ambiguous: return Difficulty::hard;
  }
  throw std::invalid_argument("bad strategy");
}

const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
  }
  throw std::invalid_argument("bad difficulty");
}

AugmentedQuery mask_term(std::span<const std::string> q_tokens, textproc::Rng& rng,
                         double margin) {
  if (q_tokens.empty()) throw std::invalid_argument("mask_term: empty query");
  std::size_t k = rng.uniform_index(q_tokens.size());
  AugmentedQuery out;
  out.tokens.assign(q_tokens.begin(), q_tokens.end());
  out.tokens[k] = textproc::kTermDelToken;
  out.strategy = Strategy::mask;
  out.difficulty = difficulty_of(out.strategy);
  out.margin = margin;
  out.edit_index = k;
  return out;
}

AugmentedQuery replace_term(std::span<const std::string> q_tokens,
                            const textproc::Vocabulary& vocab, textproc::Rng& rng,
                            double margin) {
  if (q_tokens.empty()) throw std::invalid_argument("replace_term: empty query");
  std::size_t k = rng.uniform_index(q_tokens.size());
  std::string replacement = textproc::sample_term(vocab, rng, q_tokens[k]);
  AugmentedQuery out;
  out.tokens.assign(q_tokens.begin(), q_tokens.end());
  out.tokens[k] = std::move(replacement);
  out.strategy = Strategy::replace;
  out.difficulty = difficulty_of(out.strategy);
  out.margin = margin;
  out.edit_index = k;
  return out;
}

AugmentedQuery add_term(std::span<const std::string> q_tokens,
                        const textproc::Vocabulary& vocab, textproc::Rng& rng,
                        double margin) {
  std::size_t gap = rng.uniform_index(q_tokens.size() + 1);
  std::string term = textproc::sample_term(vocab, rng);
  AugmentedQuery out;
  out.tokens.assign(q_tokens.begin(), q_tokens.end());
  out.tokens.insert(out.tokens.begin() + static_cast<std::ptrdiff_t>(gap), std::move(term));
  out.strategy = Strategy::add;
  out.difficulty = difficulty_of(out.strategy);
  out.margin = margin;
  out.edit_index = gap;
  return out;
}

namespace {

std::vector<AugmentedQuery> draw_random_queries(std::span<const corpus::Session> sessions,
                                                std::size_t n, const std::string& exclude_session,
                                                textproc::Rng& rng,
                                                std::span<const std::string> current_tokens,
                                                double margin, bool throw_on_shortfall) {
  std::vector<const corpus::QueryTurn*> pool;
  for (const corpus::Session& s : sessions) {
    if (s.session_id == exclude_session) continue;
    for (const corpus::QueryTurn& t : s.turns) pool.push_back(&t);
  }
  std::vector<AugmentedQuery> out;
  std::vector<std::string> current(current_tokens.begin(), current_tokens.end());
  while (out.size() < n && !pool.empty()) {
    std::size_t i = rng.uniform_index(pool.size());
    const corpus::QueryTurn* turn = pool[i];
    pool[i] = pool.back();
    pool.pop_back();
    std::vector<std::string> tokens =
        turn->tokens.empty() ? textproc::tokenize(turn->text) : turn->tokens;
    if (!current.empty() && tokens == current) continue;  // reject q_c look-alikes
    AugmentedQuery q;
    q.tokens = std::move(tokens);
    q.strategy = Strategy::random;
    q.difficulty = difficulty_of(q.strategy);
    q.margin = margin;
    q.source_query_id = turn->query_id;
    out.push_back(std::move(q));
  }
  if (throw_on_shortfall && out.size() < n) {
    throw std::runtime_error("sample_random_queries: pool smaller than n");
  }
  return out;
}

}  // namespace

std::vector<AugmentedQuery> sample_random_queries(std::span<const corpus::Session> sessions,
                                                  std::size_t n,
                                                  const std::string& exclude_session,
                                                  textproc::Rng& rng,
                                                  std::span<const std::string> current_tokens,
                                                  double margin) {
  return draw_random_queries(sessions, n, exclude_session, rng, current_tokens, margin, true);
}

std::vector<AugmentedQuery> historical_queries(const corpus::SearchContext& context,
                                               double margin) {
  std::vector<AugmentedQuery> out;
  for (const corpus::HistoryStep& step : context.history) {
    AugmentedQuery q;
    q.tokens = step.query.tokens.empty() ? textproc::tokenize(step.query.text) : step.query.tokens;
    q.strategy = Strategy::historical;
    q.difficulty = difficulty_of(q.strategy);
    q.margin = margin;
    q.source_query_id = step.query.query_id;
    out.push_back(std::move(q));
  }
  return out;
}

void AugmentConfig::validate() const {
  auto in_unit = [](double m) { return m > 0.0 && m <= 1.0; };
  if (!in_unit(m_op) || !in_unit(m_rq) || !in_unit(m_th) || !in_unit(mean_m_aq)) {
    throw std::invalid_argument("margins must lie in (0, 1]");
  }
  if (!(m_rq > m_th && m_th > mean_m_aq)) {
    throw std::invalid_argument("margin schedule requires m_rq > m_th > mean_m_aq");
  }
  if (w_size < 2 || w_size % 2 != 0) {
    throw std::invalid_argument("w_size must be even and >= 2");
  }
}

std::vector<TrainingPair> build_training_set(
    std::span<const corpus::SearchContext> contexts, std::span<const corpus::Session> sessions,
    const textproc::Vocabulary& vocab,
    const std::unordered_map<std::string, std::vector<mining::AmbiguousMatch>>& matches,
    const AugmentConfig& config, AugmentStats* stats) {
  config.validate();
  AugmentStats local;

  // Token lookup for query-level replacements mined by query_id.
  std::unordered_map<std::string, std::vector<std::string>> tokens_by_query;
  for (const corpus::Session& s : sessions) {
    for (const corpus::QueryTurn& t : s.turns) {
      tokens_by_query.emplace(t.query_id,
                              t.tokens.empty() ? textproc::tokenize(t.text) : t.tokens);
    }
  }

  std::vector<TrainingPair> pairs;
  for (const corpus::SearchContext& ctx : contexts) {
    ++local.contexts;
    std::vector<std::string> q_c =
        ctx.current.tokens.empty() ? textproc::tokenize(ctx.current.text) : ctx.current.tokens;

    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> history;
    for (const corpus::HistoryStep& step : ctx.history) {
      std::vector<std::string> hq =
          step.query.tokens.empty() ? textproc::tokenize(step.query.text) : step.query.tokens;
      std::vector<std::string> hd = step.document.title_tokens.empty()
                                        ? textproc::tokenize(step.document.title)
                                        : step.document.title_tokens;
      history.emplace_back(std::move(hq), std::move(hd));
    }

    auto doc_tokens = [&](const corpus::Candidate& c) {
      return c.title_tokens.empty() ? textproc::tokenize(c.title) : c.title_tokens;
    };

    TrainingPair base;
    base.session_id = ctx.session_id;
    base.query_id = ctx.query_id();
    base.history = history;
    base.pos_query = q_c;

    // Original pairs: every (clicked, skipped) combination.
    for (std::size_t ci : ctx.clicked) {
      for (std::size_t si : ctx.skipped) {
        TrainingPair p = base;
        p.kind = PairKind::original;
        p.margin = config.m_op;
        p.neg_query = q_c;
        p.pos_doc = doc_tokens(ctx.current.candidates[ci]);
        p.neg_doc = doc_tokens(ctx.current.candidates[si]);
        pairs.push_back(std::move(p));
        ++local.original_pairs;
      }
    }

    // Constructed pairs exist only for contexts with history.
    if (ctx.history.empty()) {
      ++local.contexts_without_history;
      continue;
    }

    textproc::Rng rng =
        textproc::Rng::for_key(config.seed, ctx.session_id + "\x1f" + ctx.query_id());

    std::vector<AugmentedQuery> altered;
    if (config.enable_tm) {
      for (std::size_t i = 0; i < config.n_mask && !q_c.empty(); ++i) {
        altered.push_back(mask_term(q_c, rng, config.m_th));
      }
      for (std::size_t i = 0; i < config.n_replace && !q_c.empty(); ++i) {
        if (vocab.term_count() == 0) break;
        try {
          altered.push_back(replace_term(q_c, vocab, rng, config.m_th));
        } catch (const std::runtime_error&) {
          break;  // single-term vocab with no eligible replacement
        }
      }
      for (std::size_t i = 0; i < config.n_add && vocab.term_count() > 0; ++i) {
        altered.push_back(add_term(q_c, vocab, rng, config.m_th));
      }
    }
    if (config.enable_rq) {
      std::vector<AugmentedQuery> randoms = draw_random_queries(
          sessions, config.n_random, ctx.session_id, rng, q_c, config.m_rq, false);
      if (randoms.size() < config.n_random) ++local.random_shortfall;
      for (AugmentedQuery& q : randoms) altered.push_back(std::move(q));
    }
    if (config.enable_hq) {
      for (AugmentedQuery& q : historical_queries(ctx, config.m_th)) {
        altered.push_back(std::move(q));
      }
    }
    if (config.enable_aq) {
      auto mit = matches.find(ctx.query_id());
      std::size_t taken = 0;
      if (mit != matches.end()) {
        for (const mining::AmbiguousMatch& m : mit->second) {
          if (taken == config.n_ambiguous) break;
          auto tok = tokens_by_query.find(m.matched_query_id);
          if (tok == tokens_by_query.end()) {
            throw std::runtime_error("mined query " + m.matched_query_id + " not in log");
          }
          AugmentedQuery q;
          q.tokens = tok->second;
          q.strategy = Strategy::ambiguous;
          q.difficulty = difficulty_of(q.strategy);
          q.margin = m.margin;
          q.source_query_id = m.matched_query_id;
          altered.push_back(std::move(q));
          ++taken;
        }
      }
      if (taken < config.n_ambiguous) ++local.ambiguous_shortfall;
    }

    for (const AugmentedQuery& q : altered) {
      for (std::size_t ci : ctx.clicked) {
        TrainingPair p = base;
        p.kind = PairKind::constructed;
        p.strategy = q.strategy;
        p.margin = q.margin;
        p.neg_query = q.tokens;
        p.pos_doc = doc_tokens(ctx.current.candidates[ci]);
        p.neg_doc = p.pos_doc;  // constructed negatives reuse the clicked doc
        pairs.push_back(std::move(p));
        ++local.constructed_pairs;
        ++local.by_strategy[strategy_name(q.strategy)];
      }
    }
  }

  if (stats) *stats = std::move(local);
  return pairs;
}

namespace {

json tokens_to_json(std::span<const std::string> tokens) {
  return json(util::join(tokens));
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

json pair_to_json(const TrainingPair& p) {
  json obj;
  json hist = json::array();
  for (const auto& [hq, hd] : p.history) {
    hist.push_back(json::array({tokens_to_json(hq), tokens_to_json(hd)}));
  }
  obj["history"] = std::move(hist);
  obj["kind"] = p.kind == PairKind::original ? "original" : "constructed";
  obj["margin"] = p.margin;
  obj["neg_doc"] = tokens_to_json(p.neg_doc);
  obj["neg_query"] = tokens_to_json(p.neg_query);
  obj["pos_doc"] = tokens_to_json(p.pos_doc);
  obj["pos_query"] = tokens_to_json(p.pos_query);
  obj["query_id"] = p.query_id;
  obj["session_id"] = p.session_id;
  obj["strategy"] = p.strategy ? strategy_name(*p.strategy) : "original";
  return obj;
}

bool is_term_level(const TrainingPair& p) {
  return p.strategy && (*p.strategy == Strategy::mask || *p.strategy == Strategy::replace ||
                        *p.strategy == Strategy::add);
}

}  // namespace

std::string pairs_to_jsonl(std::span<const TrainingPair> pairs, bool curriculum) {
  std::string out;
  auto emit = [&](const TrainingPair& p) {
    out += pair_to_json(p).dump();
    out += '\n';
  };
  if (!curriculum) {
    for (const TrainingPair& p : pairs) emit(p);
  } else {
    for (const TrainingPair& p : pairs) {
      if (!is_term_level(p)) emit(p);
    }
    for (const TrainingPair& p : pairs) {
      if (is_term_level(p)) emit(p);
    }
  }
  return out;
}

std::vector<TrainingPair> pairs_from_jsonl(std::string_view text) {
  std::vector<TrainingPair> pairs;
  std::vector<std::string> lines = util::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    bool blank = true;
    for (char c : line) {
      if (c != ' ' && c != '\t' && c != '\r') { blank = false; break; }
    }
    if (blank) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("training jsonl line " + std::to_string(i + 1) + ": " + e.what());
    }
    TrainingPair p;
    p.session_id = obj.at("session_id").get<std::string>();
    p.query_id = obj.at("query_id").get<std::string>();
    std::string kind = obj.at("kind").get<std::string>();
    p.kind = kind == "original" ? PairKind::original : PairKind::constructed;
    std::string strategy = obj.at("strategy").get<std::string>();
    if (strategy != "original") p.strategy = strategy_from_name(strategy);
    p.margin = obj.at("margin").get<double>();
    for (const json& h : obj.at("history")) {
      p.history.emplace_back(split_tokens(h.at(0).get<std::string>()),
                             split_tokens(h.at(1).get<std::string>()));
    }
    p.pos_query = split_tokens(obj.at("pos_query").get<std::string>());
    p.neg_query = split_tokens(obj.at("neg_query").get<std::string>());
    p.pos_doc = split_tokens(obj.at("pos_doc").get<std::string>());
    p.neg_doc = split_tokens(obj.at("neg_doc").get<std::string>());
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_pairs(std::span<const TrainingPair> pairs, const std::string& path, bool curriculum) {
  util::write_file(path, pairs_to_jsonl(pairs, curriculum));
}

std::vector<TrainingPair> load_pairs(const std::string& path) {
  return pairs_from_jsonl(util::read_file(path));
}

}  // namespace sessrank::augment
