#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sessrank/augment.hpp"
#include "sessrank/corpus.hpp"
#include "sessrank/mining.hpp"
#include "sessrank/synlog.hpp"
#include "sessrank/textproc.hpp"
#include "sessrank/util.hpp"

using namespace sessrank;
using testutil::make_session;
using testutil::make_turn;

namespace {

textproc::Vocabulary vocab_of_terms(const std::string& text) {
  std::vector<corpus::Session> sessions = {
      make_session("sv", {make_turn("qv", text, {{"dv", text, true, {}}})})};
  return textproc::Vocabulary::build(sessions);
}

const std::vector<std::string> kBurlington = {"burlington", "wisconsin"};

}  // namespace

TEST_CASE("strategies map to fixed difficulties") {
  CHECK(augment::difficulty_of(augment::Strategy::random) == augment::Difficulty::easy);
  CHECK(augment::difficulty_of(augment::Strategy::mask) == augment::Difficulty::medium);
  CHECK(augment::difficulty_of(augment::Strategy::replace) == augment::Difficulty::medium);
  CHECK(augment::difficulty_of(augment::Strategy::add) == augment::Difficulty::medium);
  CHECK(augment::difficulty_of(augment::Strategy::historical) == augment::Difficulty::medium);
  CHECK(augment::difficulty_of(augment::Strategy::ambiguous) == augment::Difficulty::hard);
}

TEST_CASE("strategy names round trip") {
  for (augment::Strategy s :
       {augment::Strategy::mask, augment::Strategy::replace, augment::Strategy::add,
        augment::Strategy::random, augment::Strategy::historical, augment::Strategy::ambiguous}) {
    CHECK(augment::strategy_from_name(augment::strategy_name(s)) == s);
  }
  CHECK_THROWS(augment::strategy_from_name("unheard-of"));
}

TEST_CASE("mask_term replaces exactly one position") {
  textproc::Rng rng(1);
  for (int i = 0; i < 30; ++i) {
    augment::AugmentedQuery out = augment::mask_term(kBurlington, rng);
    REQUIRE(out.tokens.size() == kBurlington.size());
    std::size_t masked = 0;
    for (std::size_t t = 0; t < out.tokens.size(); ++t) {
      if (out.tokens[t] == "[term_del]") {
        ++masked;
        CHECK(out.edit_index == t);
      } else {
        CHECK(out.tokens[t] == kBurlington[t]);
      }
    }
    CHECK(masked == 1);
    CHECK(out.strategy == augment::Strategy::mask);
    CHECK(out.difficulty == augment::Difficulty::medium);
  }
}

TEST_CASE("mask_term can hit the trailing position") {
  std::vector<std::string> expected = {"burlington", "[term_del]"};
  bool found = false;
  for (std::uint64_t seed = 0; seed < 64 && !found; ++seed) {
    textproc::Rng rng(seed);
    found = augment::mask_term(kBurlington, rng).tokens == expected;
  }
  CHECK(found);
}

TEST_CASE("mask_term on a single token yields just the placeholder") {
  textproc::Rng rng(5);
  std::vector<std::string> one = {"alone"};
  CHECK(augment::mask_term(one, rng).tokens == std::vector<std::string>{"[term_del]"});
  CHECK_THROWS(augment::mask_term({}, rng));
}

TEST_CASE("replace_term swaps exactly one token for a different one") {
  textproc::Vocabulary vocab = vocab_of_terms("burlington wisconsin becker school laugh");
  textproc::Rng rng(2);
  for (int i = 0; i < 30; ++i) {
    augment::AugmentedQuery out = augment::replace_term(kBurlington, vocab, rng);
    REQUIRE(out.tokens.size() == kBurlington.size());
    std::size_t changed = 0;
    for (std::size_t t = 0; t < out.tokens.size(); ++t) {
      if (out.tokens[t] != kBurlington[t]) {
        ++changed;
        CHECK(out.edit_index == t);
      }
    }
    CHECK(changed == 1);
  }
}

TEST_CASE("replace_term can produce a named substitution") {
  textproc::Vocabulary vocab = vocab_of_terms("burlington wisconsin becker");
  std::vector<std::string> expected = {"burlington", "becker"};
  bool found = false;
  for (std::uint64_t seed = 0; seed < 64 && !found; ++seed) {
    textproc::Rng rng(seed);
    found = augment::replace_term(kBurlington, vocab, rng).tokens == expected;
  }
  CHECK(found);
}

TEST_CASE("replace_term fails when no distinct term exists") {
  textproc::Vocabulary vocab = vocab_of_terms("x");
  textproc::Rng rng(3);
  std::vector<std::string> query = {"x"};
  CHECK_THROWS(augment::replace_term(query, vocab, rng));
}

TEST_CASE("add_term inserts one token at a uniformly chosen gap") {
  textproc::Vocabulary vocab = vocab_of_terms("burlington wisconsin school");
  textproc::Rng rng(4);
  std::set<std::size_t> gaps_seen;
  for (int i = 0; i < 60; ++i) {
    augment::AugmentedQuery out = augment::add_term(kBurlington, vocab, rng);
    REQUIRE(out.tokens.size() == kBurlington.size() + 1);
    REQUIRE(out.edit_index.has_value());
    std::size_t gap = *out.edit_index;
    gaps_seen.insert(gap);
    std::vector<std::string> recovered = out.tokens;
    recovered.erase(recovered.begin() + static_cast<std::ptrdiff_t>(gap));
    CHECK(recovered == kBurlington);
  }
  CHECK(gaps_seen.size() == 3);  // all of front, middle, back show up
}

TEST_CASE("add_term can prepend a named term") {
  textproc::Vocabulary vocab = vocab_of_terms("burlington wisconsin school");
  std::vector<std::string> expected = {"school", "burlington", "wisconsin"};
  bool found = false;
  for (std::uint64_t seed = 0; seed < 64 && !found; ++seed) {
    textproc::Rng rng(seed);
    found = augment::add_term(kBurlington, vocab, rng).tokens == expected;
  }
  CHECK(found);
}

TEST_CASE("add_term on an empty query emits a single token") {
  textproc::Vocabulary vocab = vocab_of_terms("solo");
  textproc::Rng rng(6);
  augment::AugmentedQuery out = augment::add_term({}, vocab, rng);
  CHECK(out.tokens == std::vector<std::string>{"solo"});
}

namespace {

std::vector<corpus::Session> pool_sessions() {
  std::vector<corpus::Session> sessions;
  for (int i = 0; i < 6; ++i) {
    std::string sid = "pool" + std::to_string(i);
    std::string text = "query number" + std::to_string(i);
    sessions.push_back(make_session(
        sid, {make_turn(sid + "_q", text, {{"d" + std::to_string(i), text, true, {}}})}));
  }
  textproc::fill_tokens(sessions);
  return sessions;
}

}  // namespace

TEST_CASE("sample_random_queries draws distinct queries from other sessions") {
  std::vector<corpus::Session> sessions = pool_sessions();
  textproc::Rng rng(7);
  std::vector<augment::AugmentedQuery> out =
      augment::sample_random_queries(sessions, 3, "pool0", rng);
  REQUIRE(out.size() == 3);
  std::set<std::string> sources;
  for (const augment::AugmentedQuery& q : out) {
    REQUIRE(q.source_query_id.has_value());
    CHECK(q.source_query_id->rfind("pool0", 0) != 0);  // never the excluded session
    CHECK(sources.insert(*q.source_query_id).second);  // without replacement
    CHECK(q.strategy == augment::Strategy::random);
    CHECK(q.difficulty == augment::Difficulty::easy);
  }
}

TEST_CASE("sample_random_queries honors n of zero and reports shortfall") {
  std::vector<corpus::Session> sessions = pool_sessions();
  textproc::Rng rng(8);
  CHECK(augment::sample_random_queries(sessions, 0, "pool0", rng).empty());
  CHECK_THROWS(augment::sample_random_queries(sessions, 6, "pool0", rng));  // only 5 others
}

TEST_CASE("sample_random_queries rejects queries equal to the current one") {
  std::vector<corpus::Session> sessions = {
      make_session("sa", {make_turn("qa", "same text", {{"da", "x", true, {}}})}),
      make_session("sb", {make_turn("qb", "same text", {{"db", "x", true, {}}})}),
      make_session("sc", {make_turn("qc", "other words", {{"dc", "x", true, {}}})}),
  };
  textproc::fill_tokens(sessions);
  std::vector<std::string> current = {"same", "text"};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    textproc::Rng rng(seed);
    std::vector<augment::AugmentedQuery> out =
        augment::sample_random_queries(sessions, 1, "sa", rng, current);
    REQUIRE(out.size() == 1);
    CHECK(out[0].source_query_id == "qc");
  }
}

TEST_CASE("historical_queries lists the history in order with medium difficulty") {
  std::vector<corpus::Session> sessions = {testutil::burlington_session()};
  textproc::fill_tokens(sessions);
  std::vector<corpus::SearchContext> contexts = corpus::derive_contexts(sessions, true);
  REQUIRE(contexts.size() == 1);
  std::vector<augment::AugmentedQuery> out = augment::historical_queries(contexts[0]);
  REQUIRE(out.size() == 1);
  CHECK(out[0].tokens == std::vector<std::string>{"racine", "county", "history"});
  CHECK(out[0].strategy == augment::Strategy::historical);
  CHECK(out[0].difficulty == augment::Difficulty::medium);
  CHECK(out[0].source_query_id == "s_b_q1");

  corpus::SearchContext no_history;
  no_history.current = contexts[0].current;
  CHECK(augment::historical_queries(no_history).empty());
}

namespace {

// One session with history plus pool sessions for random draws, and a
// synthetic match list: the standard counting scenario.
struct CountingFixture {
  static std::vector<corpus::Session> build_sessions() {
    std::vector<corpus::Session> sessions;
    sessions.push_back(make_session(
        "main",
        {make_turn("m_q1", "racine county history",
                   {{"h1", "racine county wi home", true, {}}}),
         make_turn("m_q2", "burlington wisconsin",
                   {{"c1", "burlington wi official website", true, {}},
                    {"k1", "skip one", false, {}},
                    {"k2", "skip two", false, {}},
                    {"k3", "skip three", false, {}},
                    {"k4", "skip four", false, {}}})}));
    for (int i = 0; i < 5; ++i) {
      std::string sid = "pool" + std::to_string(i);
      std::string text = "filler query" + std::to_string(i);
      sessions.push_back(make_session(
          sid,
          {make_turn(sid + "_q", text, {{"pd" + std::to_string(i), text, true, {}}})}));
    }
    textproc::fill_tokens(sessions);
    return sessions;
  }

  std::vector<corpus::Session> sessions = build_sessions();
  textproc::Vocabulary vocab = textproc::Vocabulary::build(sessions);
  std::vector<corpus::SearchContext> contexts = corpus::derive_contexts(sessions, false);
  std::unordered_map<std::string, std::vector<mining::AmbiguousMatch>> matches;

  CountingFixture() {
    for (std::size_t i = 0; i < 4; ++i) {
      matches["m_q2"].push_back(mining::AmbiguousMatch{
          "m_q2", "pool" + std::to_string(i) + "_q", 10 + i * 10, i + 1,
          mining::ambiguous_margin(10 + i * 10, 50, 0.2)});
    }
  }

  CountingFixture(const CountingFixture&) = delete;
};

std::size_t count_kind(const std::vector<augment::TrainingPair>& pairs,
                       augment::PairKind kind) {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(),
                    [&](const augment::TrainingPair& p) { return p.kind == kind; }));
}

std::map<std::string, std::size_t> strategy_histogram(
    const std::vector<augment::TrainingPair>& pairs, const std::string& query_id) {
  std::map<std::string, std::size_t> hist;
  for (const augment::TrainingPair& p : pairs) {
    if (p.query_id != query_id || p.kind != augment::PairKind::constructed) continue;
    ++hist[augment::strategy_name(*p.strategy)];
  }
  return hist;
}

}  // namespace

TEST_CASE("a one-click four-skip context with history emits 4 + 11 pairs") {
  CountingFixture fix;
  augment::AugmentConfig config;  // defaults: 1/1/1 term-level, 3 random, 4 ambiguous
  augment::AugmentStats stats;
  std::vector<augment::TrainingPair> pairs =
      augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, fix.matches, config,
                                  &stats);

  std::vector<augment::TrainingPair> for_q2;
  for (const augment::TrainingPair& p : pairs) {
    if (p.query_id == "m_q2") for_q2.push_back(p);
  }
  CHECK(count_kind(for_q2, augment::PairKind::original) == 4);
  CHECK(count_kind(for_q2, augment::PairKind::constructed) == 11);

  std::map<std::string, std::size_t> hist = strategy_histogram(pairs, "m_q2");
  CHECK(hist["mask"] == 1);
  CHECK(hist["replace"] == 1);
  CHECK(hist["add"] == 1);
  CHECK(hist["random"] == 3);
  CHECK(hist["historical"] == 1);
  CHECK(hist["ambiguous"] == 4);
}

TEST_CASE("contexts without history emit only original pairs") {
  CountingFixture fix;
  augment::AugmentConfig config;
  augment::AugmentStats stats;
  std::vector<augment::TrainingPair> pairs =
      augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, fix.matches, config,
                                  &stats);
  for (const augment::TrainingPair& p : pairs) {
    if (p.query_id == "m_q1") CHECK(p.kind == augment::PairKind::original);
  }
  CHECK(stats.contexts_without_history == 6);  // m_q1 plus the five pool turns
  CHECK(stats.contexts == fix.contexts.size());
}

TEST_CASE("original pairs pair the click against every skip with margin m_op") {
  CountingFixture fix;
  augment::AugmentConfig config;
  std::vector<augment::TrainingPair> pairs =
      augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, fix.matches, config);
  std::set<std::string> neg_docs;
  for (const augment::TrainingPair& p : pairs) {
    if (p.query_id != "m_q2" || p.kind != augment::PairKind::original) continue;
    CHECK(p.margin == config.m_op);
    CHECK(p.pos_query == p.neg_query);
    CHECK(p.pos_doc == std::vector<std::string>{"burlington", "wi", "official", "website"});
    neg_docs.insert(util::join(p.neg_doc));
  }
  CHECK(neg_docs == std::set<std::string>{"skip one", "skip two", "skip three", "skip four"});
}

TEST_CASE("constructed pairs keep the history and positive document fixed") {
  CountingFixture fix;
  augment::AugmentConfig config;
  std::vector<augment::TrainingPair> pairs =
      augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, fix.matches, config);
  for (const augment::TrainingPair& p : pairs) {
    if (p.kind != augment::PairKind::constructed) continue;
    CHECK(p.neg_doc == p.pos_doc);
    REQUIRE(p.strategy.has_value());
    switch (*p.strategy) {
      case augment::Strategy::mask:
      case augment::Strategy::replace:
        CHECK(p.neg_query.size() == p.pos_query.size());
        CHECK(p.neg_query != p.pos_query);
        break;
      case augment::Strategy::add:
        CHECK(p.neg_query.size() == p.pos_query.size() + 1);
        break;
      default:
        break;
    }
  }
}

TEST_CASE("emitted margins follow the strategy schedule") {
  CountingFixture fix;
  augment::AugmentConfig config;
  std::vector<augment::TrainingPair> pairs =
      augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, fix.matches, config);
  for (const augment::TrainingPair& p : pairs) {
    if (p.kind == augment::PairKind::original) {
      CHECK(p.margin == config.m_op);
      continue;
    }
    switch (*p.strategy) {
      case augment::Strategy::random:
        CHECK(p.margin == config.m_rq);
        break;
      case augment::Strategy::ambiguous:
        CHECK(p.margin > 0.0);
        CHECK(p.margin <= 2.0 * config.mean_m_aq);
        CHECK(p.margin < config.m_th);
        break;
      default:
        CHECK(p.margin == config.m_th);
        break;
    }
  }
}

TEST_CASE("ambiguous margins come from the match file in file order") {
  CountingFixture fix;
  augment::AugmentConfig config;
  config.n_ambiguous = 2;
  std::vector<augment::TrainingPair> pairs =
      augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, fix.matches, config);
  std::vector<double> margins;
  for (const augment::TrainingPair& p : pairs) {
    if (p.kind == augment::PairKind::constructed &&
        p.strategy == augment::Strategy::ambiguous) {
      margins.push_back(p.margin);
    }
  }
  REQUIRE(margins.size() == 2);
  CHECK(margins[0] == fix.matches.at("m_q2")[0].margin);
  CHECK(margins[1] == fix.matches.at("m_q2")[1].margin);
}

TEST_CASE("a match naming an unknown query id is an error") {
  CountingFixture fix;
  std::unordered_map<std::string, std::vector<mining::AmbiguousMatch>> bad;
  bad["m_q2"].push_back(mining::AmbiguousMatch{"m_q2", "ghost", 5, 1, 0.04});
  augment::AugmentConfig config;
  CHECK_THROWS(
      augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, bad, config));
}

TEST_CASE("strategy groups can be disabled independently") {
  CountingFixture fix;
  struct Case {
    void (*disable)(augment::AugmentConfig&);
    std::vector<std::string> gone;
  };
  std::vector<Case> cases = {
      {[](augment::AugmentConfig& c) { c.enable_tm = false; }, {"mask", "replace", "add"}},
      {[](augment::AugmentConfig& c) { c.enable_rq = false; }, {"random"}},
      {[](augment::AugmentConfig& c) { c.enable_hq = false; }, {"historical"}},
      {[](augment::AugmentConfig& c) { c.enable_aq = false; }, {"ambiguous"}},
  };
  for (const Case& test_case : cases) {
    augment::AugmentConfig config;
    test_case.disable(config);
    std::vector<augment::TrainingPair> pairs =
        augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, fix.matches, config);
    std::map<std::string, std::size_t> hist = strategy_histogram(pairs, "m_q2");
    for (const std::string& name : test_case.gone) CHECK(hist.count(name) == 0);
    CHECK(count_kind(pairs, augment::PairKind::original) > 0);  // originals unaffected
  }
}

TEST_CASE("building the training set is deterministic and order-independent") {
  CountingFixture fix;
  augment::AugmentConfig config;
  config.seed = 77;
  std::vector<augment::TrainingPair> a =
      augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, fix.matches, config);
  std::vector<augment::TrainingPair> b =
      augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, fix.matches, config);
  CHECK(augment::pairs_to_jsonl(a) == augment::pairs_to_jsonl(b));

  std::vector<corpus::SearchContext> reversed(fix.contexts.rbegin(), fix.contexts.rend());
  std::vector<augment::TrainingPair> c =
      augment::build_training_set(reversed, fix.sessions, fix.vocab, fix.matches, config);
  std::vector<std::string> lines_a = util::split_lines(augment::pairs_to_jsonl(a));
  std::vector<std::string> lines_c = util::split_lines(augment::pairs_to_jsonl(c));
  std::sort(lines_a.begin(), lines_a.end());
  std::sort(lines_c.begin(), lines_c.end());
  CHECK(lines_a == lines_c);
}

TEST_CASE("training pairs serialize with alphabetical keys and round trip") {
  CountingFixture fix;
  augment::AugmentConfig config;
  std::vector<augment::TrainingPair> pairs =
      augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, fix.matches, config);
  std::string jsonl = augment::pairs_to_jsonl(pairs);
  for (const std::string& line : util::split_lines(jsonl)) {
    CHECK(line.rfind("{\"history\":", 0) == 0);
    std::vector<std::string> keys = {"\"history\"",  "\"kind\"",     "\"margin\"",
                                     "\"neg_doc\"",  "\"neg_query\"", "\"pos_doc\"",
                                     "\"pos_query\"", "\"query_id\"", "\"session_id\"",
                                     "\"strategy\""};
    std::size_t prev = 0;
    for (const std::string& key : keys) {
      std::size_t at = line.find(key, prev);
      REQUIRE(at != std::string::npos);
      prev = at;
    }
  }
  std::vector<augment::TrainingPair> back = augment::pairs_from_jsonl(jsonl);
  CHECK(augment::pairs_to_jsonl(back) == jsonl);

  std::filesystem::path path =
      std::filesystem::temp_directory_path() / "sessrank_pairs_rt.jsonl";
  augment::save_pairs(pairs, path.string());
  CHECK(augment::pairs_to_jsonl(augment::load_pairs(path.string())) == jsonl);
  std::filesystem::remove(path);
}

TEST_CASE("curriculum ordering defers term-level pairs without changing them") {
  CountingFixture fix;
  augment::AugmentConfig config;
  std::vector<augment::TrainingPair> pairs =
      augment::build_training_set(fix.contexts, fix.sessions, fix.vocab, fix.matches, config);
  std::string plain = augment::pairs_to_jsonl(pairs, false);
  std::string deferred = augment::pairs_to_jsonl(pairs, true);

  std::vector<std::string> plain_lines = util::split_lines(plain);
  std::vector<std::string> deferred_lines = util::split_lines(deferred);
  REQUIRE(plain_lines.size() == deferred_lines.size());

  std::vector<std::string> sorted_plain = plain_lines, sorted_deferred = deferred_lines;
  std::sort(sorted_plain.begin(), sorted_plain.end());
  std::sort(sorted_deferred.begin(), sorted_deferred.end());
  CHECK(sorted_plain == sorted_deferred);  // same multiset of lines

  auto is_term_level = [](const std::string& line) {
    return line.find("\"strategy\":\"mask\"") != std::string::npos ||
           line.find("\"strategy\":\"replace\"") != std::string::npos ||
           line.find("\"strategy\":\"add\"") != std::string::npos;
  };
  bool seen_term_level = false;
  for (const std::string& line : deferred_lines) {
    if (is_term_level(line)) {
      seen_term_level = true;
    } else {
      CHECK_FALSE(seen_term_level);  // nothing non-term-level after the first term-level line
    }
  }
  CHECK(seen_term_level);
}

TEST_CASE("augment config validation enforces the margin schedule") {
  augment::AugmentConfig ok;
  CHECK_NOTHROW(ok.validate());

  augment::AugmentConfig bad_order;
  bad_order.m_th = 1.0;  // equals m_rq
  CHECK_THROWS(bad_order.validate());

  augment::AugmentConfig bad_margin;
  bad_margin.m_op = 0.0;
  CHECK_THROWS(bad_margin.validate());

  augment::AugmentConfig big_margin;
  big_margin.m_rq = 1.5;
  CHECK_THROWS(big_margin.validate());

  augment::AugmentConfig odd_window;
  odd_window.w_size = 7;
  CHECK_THROWS(odd_window.validate());
}

TEST_CASE("random draws are clamped when the pool runs short") {
  // two sessions total: the context session and one other -> at most 1 random
  std::vector<corpus::Session> sessions = {
      make_session("sa", {make_turn("qa1", "first thing", {{"a1", "alpha beta", true, {}}}),
                          make_turn("qa2", "second thing", {{"a2", "gamma delta", true, {}}})}),
      make_session("sb", {make_turn("qb1", "outside words", {{"b1", "epsilon", true, {}}})}),
  };
  textproc::fill_tokens(sessions);
  textproc::Vocabulary vocab = textproc::Vocabulary::build(sessions);
  std::vector<corpus::SearchContext> contexts = corpus::derive_contexts(sessions, false);
  std::unordered_map<std::string, std::vector<mining::AmbiguousMatch>> no_matches;

  augment::AugmentConfig config;  // n_random = 3 > 1 available
  augment::AugmentStats stats;
  std::vector<augment::TrainingPair> pairs =
      augment::build_training_set(contexts, sessions, vocab, no_matches, config, &stats);
  std::map<std::string, std::size_t> hist = strategy_histogram(pairs, "qa2");
  CHECK(hist["random"] == 1);
  CHECK(stats.random_shortfall >= 1);
  CHECK(stats.ambiguous_shortfall >= 1);
}
