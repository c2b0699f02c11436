#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sessrank/corpus.hpp"
#include "sessrank/textproc.hpp"

namespace sessrank::retrieval {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// Okapi BM25 over document titles.
class Bm25Index {
 public:
  static Bm25Index build(const corpus::DocRegistry& docs, Bm25Params params = {});

  double score(std::span<const std::string> query_tokens, const std::string& doc_id) const;
  double score_index(std::span<const std::string> query_tokens, std::size_t doc_index) const;
  // Adds every nonzero contribution of query_tokens into out (sized doc_count).
  void accumulate(std::span<const std::string> query_tokens, std::vector<double>& out) const;

  std::size_t doc_count() const { return doc_lengths_.size(); }
  double avg_doc_length() const { return avg_len_; }
  std::uint64_t doc_frequency(const std::string& term) const;
  double idf(const std::string& term) const;
  const Bm25Params& params() const { return params_; }

 private:
  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
  };
  std::unordered_map<std::string, std::vector<Posting>> postings_;  // doc ascending
  std::vector<std::uint32_t> doc_lengths_;
  std::unordered_map<std::string, std::size_t> doc_index_;
  double avg_len_ = 0.0;
  Bm25Params params_;
};

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t epochs = 5;
  double lr = 0.05;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

// Single shared embedding table scoring query/document pairs by the dot
// product of mean-pooled token embeddings. Trained with in-batch softmax
// cross-entropy over (query, first-clicked document) pairs.
class DualEncoder {
 public:
  DualEncoder(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);

  static DualEncoder train(std::span<const corpus::Session> sessions,
                           const textproc::Vocabulary& vocab, const EncoderConfig& config);

  std::vector<double> pool(std::span<const std::uint32_t> ids) const;
  double score_ids(std::span<const std::uint32_t> query_ids,
                   std::span<const std::uint32_t> doc_ids) const;

  std::size_t dim() const { return dim_; }
  std::size_t vocab_size() const { return vocab_size_; }
  double weight(std::uint32_t id, std::size_t component) const {
    return table_[id * dim_ + component];
  }
  const std::vector<double>& table() const { return table_; }

 private:
  std::size_t vocab_size_;
  std::size_t dim_;
  std::vector<double> table_;  // row-major vocab_size x dim
};

double dense_score(const DualEncoder& encoder, const textproc::Vocabulary& vocab,
                   std::span<const std::string> query_tokens,
                   std::span<const std::string> doc_tokens);

struct RankingList {
  std::string query_id;
  std::vector<std::string> doc_ids;  // best first; ties by ascending doc_id
  std::vector<double> scores;        // non-increasing, parallel to doc_ids
};

// A query as ranking/mining sees it: id, owning session, tokens, first click.
struct QueryRef {
  std::string query_id;
  std::string session_id;
  std::vector<std::string> tokens;
  std::optional<std::string> first_click;
};

std::vector<QueryRef> collect_queries(std::span<const corpus::Session> sessions);

// Uniform scoring interface over one document corpus.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(std::span<const std::string> query_tokens, std::size_t doc_index) const = 0;
  // Scores of the query against every corpus document, in registry order.
  virtual std::vector<double> score_all(std::span<const std::string> query_tokens) const;
  virtual std::size_t doc_count() const = 0;
};

class Bm25Scorer : public Scorer {
 public:
  explicit Bm25Scorer(Bm25Index index) : index_(std::move(index)) {}
  double score(std::span<const std::string> query_tokens, std::size_t doc_index) const override;
  std::vector<double> score_all(std::span<const std::string> query_tokens) const override;
  std::size_t doc_count() const override { return index_.doc_count(); }
  const Bm25Index& index() const { return index_; }

 private:
  Bm25Index index_;
};

class DenseScorer : public Scorer {
 public:
  DenseScorer(DualEncoder encoder, const textproc::Vocabulary& vocab,
              const corpus::DocRegistry& docs);
  double score(std::span<const std::string> query_tokens, std::size_t doc_index) const override;
  std::size_t doc_count() const override { return doc_vectors_.size(); }

 private:
  DualEncoder encoder_;
  const textproc::Vocabulary& vocab_;
  std::vector<std::vector<double>> doc_vectors_;  // pre-pooled per document
};

enum class Backend { bm25, dense };

// Scores every query against every corpus document and returns fully sorted
// lists (descending score, ties by ascending doc_id), in query order.
std::vector<RankingList> build_ranking_lists(const Scorer& scorer,
                                             std::span<const QueryRef> queries,
                                             const corpus::DocRegistry& docs,
                                             std::size_t top_k = 0);  // 0 = full list

}  // namespace sessrank::retrieval
