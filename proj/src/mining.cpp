#include "sessrank/mining.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "sessrank/util.hpp"

namespace sessrank::mining {

namespace {

void check_w_size(std::size_t w_size) {
  if (w_size < 2 || w_size % 2 != 0) {
    throw std::invalid_argument("w_size must be even and >= 2");
  }
}

}  // namespace

NegativeWindow extract_window(const retrieval::RankingList& list,
                              const std::string& center_doc, std::size_t w_size) {
  check_w_size(w_size);
  auto it = std::find(list.doc_ids.begin(), list.doc_ids.end(), center_doc);
  if (it == list.doc_ids.end()) {
    throw std::runtime_error("center doc " + center_doc + " not in ranking list of " +
                             list.query_id);
  }
  std::size_t center_rank = static_cast<std::size_t>(it - list.doc_ids.begin()) + 1;
  std::size_t half = w_size / 2;
  std::size_t lo = center_rank > half ? center_rank - half : 1;
  std::size_t hi = std::min(list.doc_ids.size(), center_rank + half);

  NegativeWindow window;
  window.owner_query_id = list.query_id;
  window.center_doc_id = center_doc;
  window.center_rank = center_rank;
  window.w_size = w_size;
  std::size_t pos = 0;
  for (std::size_t rank = lo; rank <= hi; ++rank) {
    if (rank == center_rank) continue;
    window.members.push_back(NegativeWindow::Member{list.doc_ids[rank - 1], ++pos, rank});
  }
  return window;
}

WindowSet WindowSet::from_windows(std::vector<NegativeWindow> windows, std::size_t w_size) {
  WindowSet set;
  set.w_size = w_size;
  set.windows = std::move(windows);
  for (std::size_t i = 0; i < set.windows.size(); ++i) {
    for (const NegativeWindow::Member& m : set.windows[i].members) {
      set.by_doc[m.doc_id].push_back(i);
    }
  }
  return set;
}

WindowSet WindowSet::build(const retrieval::Scorer& scorer,
                           std::span<const retrieval::QueryRef> queries,
                           const corpus::DocRegistry& docs, std::size_t w_size) {
  check_w_size(w_size);
  if (docs.size() == 0) throw std::runtime_error("window mining: empty corpus");

  std::vector<NegativeWindow> windows;
  std::vector<std::size_t> order(docs.size());
  for (const retrieval::QueryRef& q : queries) {
    if (!q.first_click) continue;
    auto center_it = docs.by_id.find(*q.first_click);
    if (center_it == docs.by_id.end()) {
      throw std::runtime_error("clicked doc " + *q.first_click + " missing from corpus");
    }
    std::size_t center = center_it->second;
    std::vector<double> scores = scorer.score_all(q.tokens);

    auto better = [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return docs.at(a).doc_id < docs.at(b).doc_id;
    };
    // Rank of the center without sorting the whole corpus.
    std::size_t center_rank = 1;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (i != center && better(i, center)) ++center_rank;
    }
    std::size_t half = w_size / 2;
    std::size_t lo = center_rank > half ? center_rank - half : 1;
    std::size_t hi = std::min(docs.size(), center_rank + half);

    // Order only the slice of ranks [lo, hi]; nth_element pivots keep the
    // slice's elements in place, the final sort arranges just the slice.
    std::iota(order.begin(), order.end(), 0);
    if (lo > 1) {
      std::nth_element(order.begin(), order.begin() + (lo - 2), order.end(), better);
    }
    std::nth_element(order.begin() + (lo - 1), order.begin() + (hi - 1), order.end(), better);
    std::sort(order.begin() + (lo - 1), order.begin() + hi, better);

    NegativeWindow window;
    window.owner_query_id = q.query_id;
    window.owner_session_id = q.session_id;
    window.center_doc_id = *q.first_click;
    window.center_rank = center_rank;
    window.w_size = w_size;
    std::size_t pos = 0;
    for (std::size_t rank = lo; rank <= hi; ++rank) {
      std::size_t doc = order[rank - 1];
      if (doc == center) continue;
      window.members.push_back(
          NegativeWindow::Member{docs.at(doc).doc_id, ++pos, rank});
    }
    windows.push_back(std::move(window));
  }
  return from_windows(std::move(windows), w_size);
}

const char* band_name(Band band) {
  switch (band) {
    case Band::low: return "low";
    case Band::medium: return "medium";
    case Band::high: return "high";
  }
  throw std::invalid_argument("bad band");
}

Band band_from_name(const std::string& name) {
  if (name == "low") return Band::low;
  if (name == "medium") return Band::medium;
  if (name == "high") return Band::high;
  throw std::invalid_argument("unknown band: " + name);
}

Band band_of(std::size_t window_pos, std::size_t member_count) {
  if (window_pos < 1 || window_pos > member_count) {
    throw std::invalid_argument("window_pos out of range");
  }
  std::size_t third = member_count / 3;
  if (window_pos <= third) return Band::high;
  if (window_pos > member_count - third) return Band::low;
  return Band::medium;
}

double ambiguous_margin(std::size_t pos, std::size_t w_size, double mean_margin) {
  if (pos < 1 || pos > w_size) throw std::invalid_argument("pos out of [1, w_size]");
  if (mean_margin <= 0.0) throw std::invalid_argument("mean_margin must be positive");
  return (static_cast<double>(pos) / static_cast<double>(w_size)) * 2.0 * mean_margin;
}

std::vector<AmbiguousMatch> mine_ambiguous(const corpus::SearchContext& context,
                                           const WindowSet& windows, std::size_t k, Band band,
                                           double mean_margin) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::vector<AmbiguousMatch> matches;
  if (!context.current.first_click) return matches;
  const std::string& d_c = *context.current.first_click;

  auto it = windows.by_doc.find(d_c);
  if (it == windows.by_doc.end()) return matches;
  for (std::size_t wi : it->second) {
    const NegativeWindow& w = windows.windows[wi];
    if (w.owner_query_id == context.query_id()) continue;
    if (w.owner_session_id == context.session_id) continue;
    for (const NegativeWindow::Member& m : w.members) {
      if (m.doc_id != d_c) continue;
      if (band_of(m.window_pos, w.members.size()) != band) break;
      AmbiguousMatch match;
      match.source_query_id = context.query_id();
      match.matched_query_id = w.owner_query_id;
      match.pos = m.window_pos;
      match.ambiguity = m.global_rank > w.center_rank ? m.global_rank - w.center_rank
                                                      : w.center_rank - m.global_rank;
      match.margin = ambiguous_margin(m.window_pos, w.w_size, mean_margin);
      matches.push_back(std::move(match));
      break;
    }
  }
  std::sort(matches.begin(), matches.end(), [](const AmbiguousMatch& a, const AmbiguousMatch& b) {
    if (a.ambiguity != b.ambiguity) return a.ambiguity < b.ambiguity;
    return a.matched_query_id < b.matched_query_id;
  });
  if (matches.size() > k) matches.resize(k);
  return matches;
}

std::string matches_to_tsv(std::span<const AmbiguousMatch> matches) {
  std::string out = "# source_query_id\tmatched_query_id\tpos\tambiguity\tmargin\n";
  for (const AmbiguousMatch& m : matches) {
    out += m.source_query_id;
    out += '\t';
    out += m.matched_query_id;
    out += '\t';
    out += std::to_string(m.pos);
    out += '\t';
    out += std::to_string(m.ambiguity);
    out += '\t';
    out += util::format_double(m.margin);
    out += '\n';
  }
  return out;
}

std::vector<AmbiguousMatch> matches_from_tsv(std::string_view text) {
  std::vector<AmbiguousMatch> matches;
  std::vector<std::string> lines = util::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 5) {
      throw std::runtime_error("matches tsv line " + std::to_string(i + 1) +
                               ": expected 5 columns");
    }
    AmbiguousMatch m;
    m.source_query_id = cols[0];
    m.matched_query_id = cols[1];
    m.pos = std::stoul(cols[2]);
    m.ambiguity = std::stoul(cols[3]);
    m.margin = std::stod(cols[4]);
    matches.push_back(std::move(m));
  }
  return matches;
}

void save_matches(std::span<const AmbiguousMatch> matches, const std::string& path) {
  util::write_file(path, matches_to_tsv(matches));
}

std::vector<AmbiguousMatch> load_matches(const std::string& path) {
  return matches_from_tsv(util::read_file(path));
}

}  // namespace sessrank::mining
