#include "sessrank/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_set>

#include "sessrank/util.hpp"

namespace sessrank::textproc {

namespace {

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string ascii_lower_copy(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// "Word" bytes survive boundary stripping: ASCII alphanumerics plus any
// non-ASCII byte, so UTF-8 text passes through untouched.
bool is_word_byte(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

// lowercase reserved form -> canonical form
const std::unordered_map<std::string, std::string>& reserved_lookup() {
  static const std::unordered_map<std::string, std::string> map = [] {
    std::unordered_map<std::string, std::string> m;
    for (const std::string& tok : reserved_tokens()) m.emplace(ascii_lower_copy(tok), tok);
    return m;
  }();
  return map;
}

}  // namespace

const std::array<std::string, kReservedCount>& reserved_tokens() {
  static const std::array<std::string, kReservedCount> tokens = {
      kClsToken, kSepToken,        kEosToken, kTermDelToken,
      kEmptyQueryToken, kEmptyDocToken, kUnkToken};
  return tokens;
}

bool is_reserved_token(std::string_view term) {
  return reserved_lookup().count(ascii_lower_copy(term)) > 0;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) {
      std::string_view piece = text.substr(i, j - i);
      auto reserved = reserved_lookup().find(ascii_lower_copy(piece));
      if (reserved != reserved_lookup().end()) {
        out.push_back(reserved->second);
      } else {
        std::size_t lo = 0, hi = piece.size();
        while (lo < hi && !is_word_byte(piece[lo])) ++lo;
        while (hi > lo && !is_word_byte(piece[hi - 1])) --hi;
        if (hi > lo) out.push_back(ascii_lower_copy(piece.substr(lo, hi - lo)));
      }
    }
    i = j;
  }
  return out;
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

double Rng::uniform_real() {
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

Rng Rng::for_key(std::uint64_t seed, std::string_view key) {
  return Rng(seed ^ util::fnv1a64(key));
}

Vocabulary::Vocabulary() {
  for (const std::string& tok : reserved_tokens()) append_term(tok, 0, 0);
}

void Vocabulary::append_term(std::string term, std::uint64_t freq, std::uint64_t doc_freq) {
  std::uint32_t id = static_cast<std::uint32_t>(terms_.size());
  ids_.emplace(term, id);
  terms_.push_back(std::move(term));
  freq_.push_back(freq);
  doc_freq_.push_back(doc_freq);
}

Vocabulary Vocabulary::build(std::span<const corpus::Session> sessions, std::uint64_t min_freq) {
  if (min_freq < 1) throw std::invalid_argument("min_freq must be >= 1");
  std::unordered_map<std::string, std::uint64_t> freq;
  std::unordered_map<std::string, std::uint64_t> doc_freq;
  std::uint64_t total = 0;

  auto add_unit = [&](const std::vector<std::string>& tokens) {
    std::unordered_set<std::string_view> seen;
    for (const std::string& tok : tokens) {
      ++freq[tok];
      ++total;
      if (seen.insert(tok).second) ++doc_freq[tok];
    }
  };

  std::unordered_set<std::string> seen_docs;
  for (const corpus::Session& s : sessions) {
    for (const corpus::QueryTurn& t : s.turns) {
      add_unit(tokenize(t.text));
      for (const corpus::Candidate& c : t.candidates) {
        if (seen_docs.insert(c.doc_id).second) add_unit(tokenize(c.title));
      }
    }
  }

  std::vector<std::string> kept;
  for (const auto& [term, count] : freq) {
    if (count >= min_freq && !is_reserved_token(term)) kept.push_back(term);
  }
  std::sort(kept.begin(), kept.end(), [&](const std::string& a, const std::string& b) {
    std::uint64_t fa = freq[a], fb = freq[b];
    if (fa != fb) return fa > fb;
    return a < b;
  });

  Vocabulary vocab;
  for (std::size_t id = 0; id < kReservedCount; ++id) {
    const std::string& tok = vocab.terms_[id];
    auto it = freq.find(tok);
    if (it != freq.end()) {
      vocab.freq_[id] = it->second;
      vocab.doc_freq_[id] = doc_freq[tok];
    }
  }
  for (std::string& term : kept) {
    std::uint64_t f = freq[term];
    std::uint64_t df = doc_freq[term];
    vocab.append_term(std::move(term), f, df);
  }
  vocab.total_terms_ = total;
  return vocab;
}

std::uint32_t Vocabulary::id_of(std::string_view term) const {
  auto it = ids_.find(std::string(term));
  return it == ids_.end() ? kUnkId : it->second;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view term) const {
  auto it = ids_.find(std::string(term));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::term_of(std::uint32_t id) const {
  if (id >= terms_.size()) throw std::out_of_range("term id out of range");
  return terms_[id];
}

std::vector<std::uint32_t> Vocabulary::ids_of(std::span<const std::string> terms) const {
  std::vector<std::uint32_t> ids;
  ids.reserve(terms.size());
  for (const std::string& t : terms) ids.push_back(id_of(t));
  return ids;
}

std::uint64_t Vocabulary::frequency_of(std::string_view term) const {
  auto it = ids_.find(std::string(term));
  return it == ids_.end() ? 0 : freq_[it->second];
}

std::uint64_t Vocabulary::doc_frequency_of(std::string_view term) const {
  auto it = ids_.find(std::string(term));
  return it == ids_.end() ? 0 : doc_freq_[it->second];
}

std::string Vocabulary::to_tsv() const {
  std::string out;
  for (std::size_t id = 0; id < terms_.size(); ++id) {
    out += std::to_string(id);
    out += '\t';
    out += terms_[id];
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::from_tsv(std::string_view text) {
  Vocabulary vocab;
  std::vector<std::string> lines = util::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("vocab tsv line " + std::to_string(i + 1) + ": missing tab");
    }
    std::uint32_t id = static_cast<std::uint32_t>(std::stoul(line.substr(0, tab)));
    std::string term = line.substr(tab + 1);
    if (id < kReservedCount) {
      if (term != vocab.terms_[id]) {
        throw std::runtime_error("vocab tsv line " + std::to_string(i + 1) +
                                 ": reserved id mismatch");
      }
      continue;
    }
    if (id != vocab.terms_.size()) {
      throw std::runtime_error("vocab tsv line " + std::to_string(i + 1) + ": ids not dense");
    }
    vocab.append_term(std::move(term), 0, 0);
  }
  return vocab;
}

void Vocabulary::save_tsv(const std::string& path) const { util::write_file(path, to_tsv()); }

Vocabulary Vocabulary::load_tsv(const std::string& path) {
  return from_tsv(util::read_file(path));
}

void fill_tokens(std::span<corpus::Session> sessions) {
  for (corpus::Session& s : sessions) {
    for (corpus::QueryTurn& t : s.turns) {
      t.tokens = tokenize(t.text);
      for (corpus::Candidate& c : t.candidates) c.title_tokens = tokenize(c.title);
    }
  }
}

void fill_tokens(corpus::SearchContext& context) {
  auto fill_turn = [](corpus::QueryTurn& t) {
    t.tokens = tokenize(t.text);
    for (corpus::Candidate& c : t.candidates) c.title_tokens = tokenize(c.title);
  };
  for (corpus::HistoryStep& step : context.history) {
    fill_turn(step.query);
    step.document.title_tokens = tokenize(step.document.title);
  }
  fill_turn(context.current);
}

std::string sample_term(const Vocabulary& vocab, Rng& rng,
                        std::optional<std::string_view> exclude) {
  std::size_t eligible = vocab.term_count();
  std::uint32_t excluded_id = 0;
  bool has_excluded = false;
  if (exclude) {
    if (auto id = vocab.find(*exclude); id && !vocab.is_reserved(*id)) {
      excluded_id = *id;
      has_excluded = true;
      --eligible;
    }
  }
  if (eligible == 0) throw std::runtime_error("sample_term: no eligible terms");
  std::uint32_t id = static_cast<std::uint32_t>(kReservedCount + rng.uniform_index(eligible));
  if (has_excluded && id >= excluded_id) ++id;
  return vocab.term_of(id);
}

}  // namespace sessrank::textproc
