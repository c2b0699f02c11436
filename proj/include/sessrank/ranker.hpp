#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sessrank/augment.hpp"
#include "sessrank/corpus.hpp"
#include "sessrank/retrieval.hpp"
#include "sessrank/textproc.hpp"

namespace sessrank::ranker {

// Token ids of [CLS] q_1 [EOS] d_1 [EOS] ... q_n [EOS] d_n [EOS] q_c [EOS]
// [SEP] d [EOS] [SEP], with the three segment extents recorded.
struct SequenceInput {
  std::vector<std::uint32_t> ids;
  std::size_t history_begin = 0, history_end = 0;  // history pairs region
  std::size_t query_begin = 0, query_end = 0;      // current query + its [EOS]
  std::size_t doc_begin = 0, doc_end = 0;          // candidate + its [EOS]
};

using IdPair = std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>;

// Builds the sequence, dropping whole (q_i, d_i) pairs oldest-first when the
// result would exceed max_len. Throws if it cannot fit even with no history.
SequenceInput assemble_sequence(std::span<const IdPair> history,
                                std::span<const std::uint32_t> query,
                                std::span<const std::uint32_t> doc, std::size_t max_len);

struct ModelConfig {
  std::size_t dim = 64;
  std::size_t hidden = 32;
  std::uint64_t seed = 0;
};

// Mean-pooled embedding of the whole sequence fed through a one-hidden-layer
// tanh MLP. Weights are doubles in memory, float32 on disk.
class RankerModel {
 public:
  RankerModel(std::size_t vocab_size, const ModelConfig& config);

  double score(const SequenceInput& input) const;
  std::vector<double> pool(std::span<const std::uint32_t> ids) const;

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t dim() const { return dim_; }
  std::size_t hidden() const { return hidden_; }

  // Flat parameter view in block order: embedding, w1, b1, w2, b2.
  std::size_t param_count() const;
  double param(std::size_t index) const;
  void set_param(std::size_t index, double value);

  void save(const std::string& path) const;
  static RankerModel load(const std::string& path);

  // row-major |V| x dim
  std::vector<double> embedding;
  // row-major hidden x dim
  std::vector<double> w1;
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;

 private:
  RankerModel() = default;
  std::size_t vocab_size_ = 0;
  std::size_t dim_ = 0;
  std::size_t hidden_ = 0;
};

double hinge_loss(double p_pos, double p_neg, double margin);

struct TrainConfig {
  std::size_t epochs = 5;
  double lr = 0.05;
  double weight_decay = 0.0;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool linear_decay = true;   // lr_t = lr * (1 - t / total_steps)
  bool curriculum = false;    // term-level pairs join only in the final epoch
  std::size_t max_len = 256;
};

// Sum of hinge losses over the pairs (callers group pairs by query).
double query_loss(const RankerModel& model, std::span<const augment::TrainingPair> pairs,
                  const textproc::Vocabulary& vocab, std::size_t max_len = 256);

// Mini-batch SGD with decoupled weight decay on the pairwise hinge objective.
// Pairs are shuffled each epoch; the batch loss sums pair losses and divides
// by the number of distinct queries in the batch.
RankerModel train(RankerModel model, std::span<const augment::TrainingPair> pairs,
                  const textproc::Vocabulary& vocab, const TrainConfig& config);

// Scores every candidate of the context; descending, ties by ascending doc_id.
retrieval::RankingList rank_candidates(const RankerModel& model,
                                       const corpus::SearchContext& context,
                                       const textproc::Vocabulary& vocab,
                                       std::size_t max_len = 256);

}  // namespace sessrank::ranker
