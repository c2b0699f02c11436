#include "sessrank/synlog.hpp"

#include <algorithm>
#include <stdexcept>

#include "sessrank/textproc.hpp"
#include "sessrank/util.hpp"

namespace sessrank::synlog {

void SynConfig::validate() const {
  if (n_topics < 2) throw std::invalid_argument("n_topics must be >= 2");
  if (n_sessions < 1) throw std::invalid_argument("n_sessions must be >= 1");
  if (terms_per_topic < 2) throw std::invalid_argument("terms_per_topic must be >= 2");
  if (n_candidates < 1) throw std::invalid_argument("n_candidates must be >= 1");
  if (mix_short < 0 || mix_medium < 0 || mix_long < 0 ||
      mix_short + mix_medium + mix_long <= 0) {
    throw std::invalid_argument("session length mix must be non-negative and sum > 0");
  }
}

std::string topic_term(std::size_t topic, std::size_t index) {
  return "t" + std::to_string(topic) + "w" + std::to_string(index);
}

std::string subtopic_term(std::size_t subtopic, std::size_t index) {
  return "s" + std::to_string(subtopic) + "w" + std::to_string(index);
}

namespace {

// Two distinct indexes from [0, n).
std::pair<std::size_t, std::size_t> draw_two(textproc::Rng& rng, std::size_t n) {
  std::size_t a = rng.uniform_index(n);
  std::size_t b = rng.uniform_index(n - 1);
  if (b >= a) ++b;
  return {a, b};
}

std::size_t draw_other(textproc::Rng& rng, std::size_t n, std::size_t avoid) {
  std::size_t v = rng.uniform_index(n - 1);
  if (v >= avoid) ++v;
  return v;
}

}  // namespace

std::vector<corpus::Session> generate(const SynConfig& config) {
  config.validate();
  textproc::Rng rng(config.seed);
  double mix_total = config.mix_short + config.mix_medium + config.mix_long;

  std::vector<corpus::Session> sessions;
  sessions.reserve(config.n_sessions);
  for (std::size_t si = 0; si < config.n_sessions; ++si) {
    corpus::Session session;
    session.session_id = "s" + std::to_string(si);
    std::size_t topic = rng.uniform_index(config.n_topics);

    double u = rng.uniform_real() * mix_total;
    std::size_t length;
    if (u < config.mix_short) {
      length = 2;
    } else if (u < config.mix_short + config.mix_medium) {
      length = 3 + rng.uniform_index(2);  // 3 or 4
    } else {
      length = 5 + rng.uniform_index(3);  // 5, 6 or 7
    }

    for (std::size_t ti = 0; ti < length; ++ti) {
      corpus::QueryTurn turn;
      turn.query_id = session.session_id + "q" + std::to_string(ti);
      std::size_t subtopic = rng.uniform_index(config.n_topics);

      auto [qa, qb] = draw_two(rng, config.terms_per_topic);
      std::vector<std::string> query_sub = {subtopic_term(subtopic, qa),
                                            subtopic_term(subtopic, qb)};
      std::vector<std::string> query_tokens;
      if (ti == 0) {
        // The opening query states the topic; later queries rely on history.
        query_tokens.push_back(topic_term(topic, rng.uniform_index(config.terms_per_topic)));
      }
      query_tokens.insert(query_tokens.end(), query_sub.begin(), query_sub.end());
      turn.text = util::join(query_tokens);

      auto topic_pair = [&](std::size_t t) {
        auto [a, b] = draw_two(rng, config.terms_per_topic);
        return std::vector<std::string>{topic_term(t, a), topic_term(t, b)};
      };
      auto make_title = [](std::vector<std::string> topical,
                           const std::vector<std::string>& sub) {
        topical.insert(topical.end(), sub.begin(), sub.end());
        return util::join(topical);
      };

      // Candidate 0 is the click; the rest alternate between the two
      // distractor kinds. Order is shuffled before doc ids are assigned.
      std::vector<std::pair<std::string, bool>> cands;  // (title, clicked)
      cands.emplace_back(make_title(topic_pair(topic), query_sub), true);
      for (std::size_t c = 1; c < config.n_candidates; ++c) {
        if (c % 2 == 1) {
          // Right topic, wrong subtopic.
          std::size_t other_sub = draw_other(rng, config.n_topics, subtopic);
          auto [a, b] = draw_two(rng, config.terms_per_topic);
          cands.emplace_back(make_title(topic_pair(topic),
                                        {subtopic_term(other_sub, a),
                                         subtopic_term(other_sub, b)}),
                             false);
        } else {
          // Wrong topic, right subtopic.
          std::size_t other_topic = draw_other(rng, config.n_topics, topic);
          cands.emplace_back(make_title(topic_pair(other_topic), query_sub), false);
        }
      }
      std::shuffle(cands.begin(), cands.end(), rng.engine());

      for (std::size_t c = 0; c < cands.size(); ++c) {
        corpus::Candidate cand;
        cand.doc_id = turn.query_id + "d" + std::to_string(c);
        cand.title = cands[c].first;
        cand.clicked = cands[c].second;
        turn.candidates.push_back(std::move(cand));
      }
      if (auto idx = turn.first_click_index()) turn.first_click = turn.candidates[*idx].doc_id;
      session.turns.push_back(std::move(turn));
    }
    sessions.push_back(std::move(session));
  }
  return sessions;
}

}  // namespace sessrank::synlog
