#include "sessrank/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sessrank::retrieval {

Bm25Index Bm25Index::build(const corpus::DocRegistry& docs, Bm25Params params) {
  Bm25Index index;
  index.params_ = params;
  index.doc_lengths_.reserve(docs.size());
  std::uint64_t total_len = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const corpus::Document& doc = docs.at(i);
    std::vector<std::string> tokens =
        doc.title_tokens.empty() ? textproc::tokenize(doc.title) : doc.title_tokens;
    std::unordered_map<std::string, std::uint32_t> tf;
    for (const std::string& tok : tokens) ++tf[tok];
    for (const auto& [term, count] : tf) {
      index.postings_[term].push_back(Posting{static_cast<std::uint32_t>(i), count});
    }
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total_len += tokens.size();
    index.doc_index_.emplace(doc.doc_id, i);
  }
  // Postings were appended in ascending doc order already; keep them sorted
  // regardless of map iteration details.
  for (auto& [term, list] : index.postings_) {
    std::sort(list.begin(), list.end(),
              [](const Posting& a, const Posting& b) { return a.doc < b.doc; });
  }
  index.avg_len_ =
      index.doc_lengths_.empty() ? 0.0 : static_cast<double>(total_len) / index.doc_lengths_.size();
  return index;
}

std::uint64_t Bm25Index::doc_frequency(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

double Bm25Index::idf(const std::string& term) const {
  double n = static_cast<double>(doc_count());
  double df = static_cast<double>(doc_frequency(term));
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double Bm25Index::score_index(std::span<const std::string> query_tokens,
                              std::size_t doc_index) const {
  if (doc_index >= doc_count()) throw std::out_of_range("doc index out of range");
  double score = 0.0;
  for (const std::string& term : query_tokens) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const std::vector<Posting>& list = it->second;
    auto pos = std::lower_bound(list.begin(), list.end(), doc_index,
                                [](const Posting& p, std::size_t d) { return p.doc < d; });
    if (pos == list.end() || pos->doc != doc_index) continue;
    double tf = pos->tf;
    double len_norm =
        params_.k1 * (1.0 - params_.b + params_.b * doc_lengths_[doc_index] / avg_len_);
    score += idf(term) * tf * (params_.k1 + 1.0) / (tf + len_norm);
  }
  return score;
}

double Bm25Index::score(std::span<const std::string> query_tokens,
                        const std::string& doc_id) const {
  auto it = doc_index_.find(doc_id);
  if (it == doc_index_.end()) throw std::runtime_error("unknown doc_id: " + doc_id);
  return score_index(query_tokens, it->second);
}

void Bm25Index::accumulate(std::span<const std::string> query_tokens,
                           std::vector<double>& out) const {
  for (const std::string& term : query_tokens) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    double term_idf = idf(term);
    for (const Posting& p : it->second) {
      double tf = p.tf;
      double len_norm =
          params_.k1 * (1.0 - params_.b + params_.b * doc_lengths_[p.doc] / avg_len_);
      out[p.doc] += term_idf * tf * (params_.k1 + 1.0) / (tf + len_norm);
    }
  }
}

DualEncoder::DualEncoder(std::size_t vocab_size, std::size_t dim, std::uint64_t seed)
    : vocab_size_(vocab_size), dim_(dim) {
  if (dim < 2) throw std::invalid_argument("encoder dim must be >= 2");
  table_.resize(vocab_size * dim);
  textproc::Rng rng(seed);
  double bound = 0.5 / static_cast<double>(dim);
  for (double& w : table_) w = (rng.uniform_real() * 2.0 - 1.0) * bound;
}

std::vector<double> DualEncoder::pool(std::span<const std::uint32_t> ids) const {
  std::vector<double> out(dim_, 0.0);
  if (ids.empty()) return out;
  for (std::uint32_t id : ids) {
    const double* row = &table_[id * dim_];
    for (std::size_t d = 0; d < dim_; ++d) out[d] += row[d];
  }
  double inv = 1.0 / static_cast<double>(ids.size());
  for (double& v : out) v *= inv;
  return out;
}

double DualEncoder::score_ids(std::span<const std::uint32_t> query_ids,
                              std::span<const std::uint32_t> doc_ids) const {
  std::vector<double> q = pool(query_ids);
  std::vector<double> d = pool(doc_ids);
  return std::inner_product(q.begin(), q.end(), d.begin(), 0.0);
}

double dense_score(const DualEncoder& encoder, const textproc::Vocabulary& vocab,
                   std::span<const std::string> query_tokens,
                   std::span<const std::string> doc_tokens) {
  return encoder.score_ids(vocab.ids_of(query_tokens), vocab.ids_of(doc_tokens));
}

DualEncoder DualEncoder::train(std::span<const corpus::Session> sessions,
                               const textproc::Vocabulary& vocab, const EncoderConfig& config) {
  struct Pair {
    std::vector<std::uint32_t> query;
    std::vector<std::uint32_t> doc;
  };
  std::vector<Pair> pairs;
  for (const corpus::Session& s : sessions) {
    for (const corpus::QueryTurn& t : s.turns) {
      auto click = t.first_click_index();
      if (!click) continue;
      Pair p;
      p.query = vocab.ids_of(textproc::tokenize(t.text));
      p.doc = vocab.ids_of(textproc::tokenize(t.candidates[*click].title));
      pairs.push_back(std::move(p));
    }
  }
  if (pairs.empty()) throw std::runtime_error("dual encoder: no (query, click) training pairs");

  DualEncoder encoder(vocab.size(), config.dim, config.seed);
  textproc::Rng rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::size_t dim = config.dim;
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t n = std::min(config.batch_size, order.size() - start);
      std::vector<std::vector<double>> q_vec(n), d_vec(n);
      for (std::size_t i = 0; i < n; ++i) {
        const Pair& p = pairs[order[start + i]];
        q_vec[i] = encoder.pool(p.query);
        d_vec[i] = encoder.pool(p.doc);
      }
      // Softmax cross-entropy over in-batch negatives: row i's positive is
      // column i of the dot-product matrix.
      std::vector<double> probs(n * n);
      for (std::size_t i = 0; i < n; ++i) {
        double max_s = -1e300;
        for (std::size_t j = 0; j < n; ++j) {
          double s = std::inner_product(q_vec[i].begin(), q_vec[i].end(), d_vec[j].begin(), 0.0);
          probs[i * n + j] = s;
          max_s = std::max(max_s, s);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          probs[i * n + j] = std::exp(probs[i * n + j] - max_s);
          sum += probs[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= sum;
      }
      // grad wrt pooled vectors; then scatter through mean pooling.
      std::vector<std::vector<double>> q_grad(n, std::vector<double>(dim, 0.0));
      std::vector<std::vector<double>> d_grad(n, std::vector<double>(dim, 0.0));
      double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double g = (probs[i * n + j] - (i == j ? 1.0 : 0.0)) * inv_n;
          for (std::size_t d = 0; d < dim; ++d) {
            q_grad[i][d] += g * d_vec[j][d];
            d_grad[j][d] += g * q_vec[i][d];
          }
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        const Pair& p = pairs[order[start + i]];
        if (!p.query.empty()) {
          double scale = config.lr / static_cast<double>(p.query.size());
          for (std::uint32_t id : p.query) {
            double* row = &encoder.table_[id * dim];
            for (std::size_t d = 0; d < dim; ++d) row[d] -= scale * q_grad[i][d];
          }
        }
        if (!p.doc.empty()) {
          double scale = config.lr / static_cast<double>(p.doc.size());
          for (std::uint32_t id : p.doc) {
            double* row = &encoder.table_[id * dim];
            for (std::size_t d = 0; d < dim; ++d) row[d] -= scale * d_grad[i][d];
          }
        }
      }
    }
  }
  return encoder;
}

std::vector<QueryRef> collect_queries(std::span<const corpus::Session> sessions) {
  std::vector<QueryRef> out;
  for (const corpus::Session& s : sessions) {
    for (const corpus::QueryTurn& t : s.turns) {
      QueryRef q;
      q.query_id = t.query_id;
      q.session_id = s.session_id;
      q.tokens = t.tokens.empty() ? textproc::tokenize(t.text) : t.tokens;
      q.first_click = t.first_click;
      out.push_back(std::move(q));
    }
  }
  return out;
}

std::vector<double> Scorer::score_all(std::span<const std::string> query_tokens) const {
  std::vector<double> out(doc_count(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = score(query_tokens, i);
  return out;
}

double Bm25Scorer::score(std::span<const std::string> query_tokens, std::size_t doc_index) const {
  return index_.score_index(query_tokens, doc_index);
}

std::vector<double> Bm25Scorer::score_all(std::span<const std::string> query_tokens) const {
  std::vector<double> out(index_.doc_count(), 0.0);
  index_.accumulate(query_tokens, out);
  return out;
}

DenseScorer::DenseScorer(DualEncoder encoder, const textproc::Vocabulary& vocab,
                         const corpus::DocRegistry& docs)
    : encoder_(std::move(encoder)), vocab_(vocab) {
  doc_vectors_.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const corpus::Document& doc = docs.at(i);
    std::vector<std::string> tokens =
        doc.title_tokens.empty() ? textproc::tokenize(doc.title) : doc.title_tokens;
    doc_vectors_.push_back(encoder_.pool(vocab_.ids_of(tokens)));
  }
}

double DenseScorer::score(std::span<const std::string> query_tokens,
                          std::size_t doc_index) const {
  std::vector<double> q = encoder_.pool(vocab_.ids_of(query_tokens));
  const std::vector<double>& d = doc_vectors_[doc_index];
  return std::inner_product(q.begin(), q.end(), d.begin(), 0.0);
}

std::vector<RankingList> build_ranking_lists(const Scorer& scorer,
                                             std::span<const QueryRef> queries,
                                             const corpus::DocRegistry& docs,
                                             std::size_t top_k) {
  if (docs.size() == 0) throw std::runtime_error("build_ranking_lists: empty corpus");
  std::vector<RankingList> lists;
  lists.reserve(queries.size());
  for (const QueryRef& q : queries) {
    std::vector<double> scores = scorer.score_all(q.tokens);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return docs.at(a).doc_id < docs.at(b).doc_id;
    });
    if (top_k > 0 && order.size() > top_k) order.resize(top_k);
    RankingList list;
    list.query_id = q.query_id;
    list.doc_ids.reserve(order.size());
    list.scores.reserve(order.size());
    for (std::size_t idx : order) {
      list.doc_ids.push_back(docs.at(idx).doc_id);
      list.scores.push_back(scores[idx]);
    }
    lists.push_back(std::move(list));
  }
  return lists;
}

}  // namespace sessrank::retrieval
