#include "sessrank/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace sessrank::ranker {

using textproc::kClsId;
using textproc::kEosId;
using textproc::kSepId;

SequenceInput assemble_sequence(std::span<const IdPair> history,
                                std::span<const std::uint32_t> query,
                                std::span<const std::uint32_t> doc, std::size_t max_len) {
  std::size_t fixed = 1 + query.size() + 1 + 1 + doc.size() + 1 + 1;  // no-history length
  if (fixed > max_len) {
    throw std::runtime_error("sequence exceeds max_len even with empty history");
  }
  std::size_t keep_from = 0;
  std::size_t total = fixed;
  for (const IdPair& pair : history) total += pair.first.size() + 1 + pair.second.size() + 1;
  while (total > max_len && keep_from < history.size()) {
    const IdPair& dropped = history[keep_from];
    total -= dropped.first.size() + 1 + dropped.second.size() + 1;
    ++keep_from;
  }

  SequenceInput out;
  out.ids.reserve(total);
  out.ids.push_back(kClsId);
  out.history_begin = out.ids.size();
  for (std::size_t i = keep_from; i < history.size(); ++i) {
    out.ids.insert(out.ids.end(), history[i].first.begin(), history[i].first.end());
    out.ids.push_back(kEosId);
    out.ids.insert(out.ids.end(), history[i].second.begin(), history[i].second.end());
    out.ids.push_back(kEosId);
  }
  out.history_end = out.ids.size();
  out.query_begin = out.ids.size();
  out.ids.insert(out.ids.end(), query.begin(), query.end());
  out.ids.push_back(kEosId);
  out.query_end = out.ids.size();
  out.ids.push_back(kSepId);
  out.doc_begin = out.ids.size();
  out.ids.insert(out.ids.end(), doc.begin(), doc.end());
  out.ids.push_back(kEosId);
  out.doc_end = out.ids.size();
  out.ids.push_back(kSepId);
  return out;
}

RankerModel::RankerModel(std::size_t vocab_size, const ModelConfig& config)
    : vocab_size_(vocab_size), dim_(config.dim), hidden_(config.hidden) {
  if (config.dim < 2) throw std::invalid_argument("model dim must be >= 2");
  if (config.hidden < 1) throw std::invalid_argument("model hidden must be >= 1");
  textproc::Rng rng(config.seed);
  embedding.resize(vocab_size_ * dim_);
  double emb_bound = 0.5 / static_cast<double>(dim_);
  for (double& w : embedding) w = (rng.uniform_real() * 2.0 - 1.0) * emb_bound;
  w1.resize(hidden_ * dim_);
  double w1_bound = 1.0 / std::sqrt(static_cast<double>(dim_));
  for (double& w : w1) w = (rng.uniform_real() * 2.0 - 1.0) * w1_bound;
  b1.assign(hidden_, 0.0);
  w2.resize(hidden_);
  double w2_bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
  for (double& w : w2) w = (rng.uniform_real() * 2.0 - 1.0) * w2_bound;
  b2 = 0.0;
}

std::vector<double> RankerModel::pool(std::span<const std::uint32_t> ids) const {
  std::vector<double> out(dim_, 0.0);
  if (ids.empty()) return out;
  for (std::uint32_t id : ids) {
    if (id >= vocab_size_) throw std::out_of_range("token id out of vocabulary");
    const double* row = &embedding[id * dim_];
    for (std::size_t d = 0; d < dim_; ++d) out[d] += row[d];
  }
  double inv = 1.0 / static_cast<double>(ids.size());
  for (double& v : out) v *= inv;
  return out;
}

double RankerModel::score(const SequenceInput& input) const {
  std::vector<double> pooled = pool(input.ids);
  double out = b2;
  for (std::size_t h = 0; h < hidden_; ++h) {
    double z = b1[h];
    const double* row = &w1[h * dim_];
    for (std::size_t d = 0; d < dim_; ++d) z += row[d] * pooled[d];
    out += w2[h] * std::tanh(z);
  }
  return out;
}

std::size_t RankerModel::param_count() const {
  return embedding.size() + w1.size() + b1.size() + w2.size() + 1;
}

double RankerModel::param(std::size_t index) const {
  if (index < embedding.size()) return embedding[index];
  index -= embedding.size();
  if (index < w1.size()) return w1[index];
  index -= w1.size();
  if (index < b1.size()) return b1[index];
  index -= b1.size();
  if (index < w2.size()) return w2[index];
  index -= w2.size();
  if (index == 0) return b2;
  throw std::out_of_range("param index");
}

void RankerModel::set_param(std::size_t index, double value) {
  if (index < embedding.size()) { embedding[index] = value; return; }
  index -= embedding.size();
  if (index < w1.size()) { w1[index] = value; return; }
  index -= w1.size();
  if (index < b1.size()) { b1[index] = value; return; }
  index -= b1.size();
  if (index < w2.size()) { w2[index] = value; return; }
  index -= w2.size();
  if (index == 0) { b2 = value; return; }
  throw std::out_of_range("param index");
}

namespace {

constexpr char kMagic[4] = {'S', 'R', 'N', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_f32_block(std::ofstream& out, std::span<const double> values) {
  std::vector<float> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) buf[i] = static_cast<float>(values[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void read_f32_block(std::ifstream& in, std::span<double> values) {
  std::vector<float> buf(values.size());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw std::runtime_error("checkpoint truncated");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = buf[i];
}

}  // namespace

void RankerModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  std::uint32_t version = kVersion;
  std::uint32_t dim32 = static_cast<std::uint32_t>(dim_);
  std::uint32_t hidden32 = static_cast<std::uint32_t>(hidden_);
  std::uint64_t vocab64 = vocab_size_;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&dim32), sizeof(dim32));
  out.write(reinterpret_cast<const char*>(&hidden32), sizeof(hidden32));
  out.write(reinterpret_cast<const char*>(&vocab64), sizeof(vocab64));
  write_f32_block(out, embedding);
  write_f32_block(out, w1);
  write_f32_block(out, b1);
  write_f32_block(out, w2);
  double tail[1] = {b2};
  write_f32_block(out, tail);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

RankerModel RankerModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("bad checkpoint magic: " + path);
  }
  std::uint32_t version = 0, dim32 = 0, hidden32 = 0;
  std::uint64_t vocab64 = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&dim32), sizeof(dim32));
  in.read(reinterpret_cast<char*>(&hidden32), sizeof(hidden32));
  in.read(reinterpret_cast<char*>(&vocab64), sizeof(vocab64));
  if (!in) throw std::runtime_error("checkpoint header truncated: " + path);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  RankerModel model;
  model.vocab_size_ = vocab64;
  model.dim_ = dim32;
  model.hidden_ = hidden32;
  model.embedding.resize(model.vocab_size_ * model.dim_);
  model.w1.resize(model.hidden_ * model.dim_);
  model.b1.resize(model.hidden_);
  model.w2.resize(model.hidden_);
  read_f32_block(in, model.embedding);
  read_f32_block(in, model.w1);
  read_f32_block(in, model.b1);
  read_f32_block(in, model.w2);
  double tail[1];
  read_f32_block(in, tail);
  model.b2 = tail[0];
  return model;
}

double hinge_loss(double p_pos, double p_neg, double margin) {
  if (margin <= 0.0) throw std::invalid_argument("margin must be positive");
  return std::max(0.0, margin - p_pos + p_neg);
}

namespace {

struct PreparedPair {
  SequenceInput pos;
  SequenceInput neg;
  double margin = 0.0;
  std::uint32_t query = 0;  // dense query index for batch grouping
  bool term_level = false;
};

std::vector<PreparedPair> prepare_pairs(std::span<const augment::TrainingPair> pairs,
                                        const textproc::Vocabulary& vocab, std::size_t max_len) {
  std::unordered_map<std::string, std::uint32_t> query_ids;
  std::vector<PreparedPair> out;
  out.reserve(pairs.size());
  for (const augment::TrainingPair& p : pairs) {
    std::vector<IdPair> history;
    history.reserve(p.history.size());
    for (const auto& [hq, hd] : p.history) {
      history.emplace_back(vocab.ids_of(hq), vocab.ids_of(hd));
    }
    PreparedPair prep;
    prep.pos = assemble_sequence(history, vocab.ids_of(p.pos_query), vocab.ids_of(p.pos_doc),
                                 max_len);
    prep.neg = assemble_sequence(history, vocab.ids_of(p.neg_query), vocab.ids_of(p.neg_doc),
                                 max_len);
    prep.margin = p.margin;
    prep.query = query_ids.emplace(p.query_id, static_cast<std::uint32_t>(query_ids.size()))
                     .first->second;
    prep.term_level =
        p.strategy && (*p.strategy == augment::Strategy::mask ||
                       *p.strategy == augment::Strategy::replace ||
                       *p.strategy == augment::Strategy::add);
    out.push_back(std::move(prep));
  }
  return out;
}

// Accumulates gradients for one batch and applies the SGD step.
class Trainer {
 public:
  Trainer(RankerModel& model, double weight_decay)
      : model_(model), weight_decay_(weight_decay) {
    grad_embedding_.assign(model.embedding.size(), 0.0);
    grad_w1_.assign(model.w1.size(), 0.0);
    grad_b1_.assign(model.b1.size(), 0.0);
    grad_w2_.assign(model.w2.size(), 0.0);
  }

  void zero() {
    for (std::uint32_t id : touched_) {
      std::fill(grad_embedding_.begin() + static_cast<std::ptrdiff_t>(id) * dim(),
                grad_embedding_.begin() + static_cast<std::ptrdiff_t>(id + 1) * dim(), 0.0);
    }
    touched_.clear();
    touched_set_.clear();
    std::fill(grad_w1_.begin(), grad_w1_.end(), 0.0);
    std::fill(grad_b1_.begin(), grad_b1_.end(), 0.0);
    std::fill(grad_w2_.begin(), grad_w2_.end(), 0.0);
    grad_b2_ = 0.0;
  }

  // Adds coeff * d(score)/d(theta) for one sequence.
  void backward(const SequenceInput& input, double coeff) {
    std::size_t d = dim(), h = hidden();
    std::vector<double> pooled = model_.pool(input.ids);
    std::vector<double> tanh_z(h);
    for (std::size_t i = 0; i < h; ++i) {
      double z = model_.b1[i];
      const double* row = &model_.w1[i * d];
      for (std::size_t j = 0; j < d; ++j) z += row[j] * pooled[j];
      tanh_z[i] = std::tanh(z);
    }
    grad_b2_ += coeff;
    std::vector<double> grad_pool(d, 0.0);
    for (std::size_t i = 0; i < h; ++i) {
      grad_w2_[i] += coeff * tanh_z[i];
      double gz = coeff * model_.w2[i] * (1.0 - tanh_z[i] * tanh_z[i]);
      grad_b1_[i] += gz;
      double* grow = &grad_w1_[i * d];
      const double* wrow = &model_.w1[i * d];
      for (std::size_t j = 0; j < d; ++j) {
        grow[j] += gz * pooled[j];
        grad_pool[j] += gz * wrow[j];
      }
    }
    if (input.ids.empty()) return;
    double inv = 1.0 / static_cast<double>(input.ids.size());
    for (std::uint32_t id : input.ids) {
      if (touched_set_.insert(id).second) touched_.push_back(id);
      double* grow = &grad_embedding_[static_cast<std::size_t>(id) * d];
      for (std::size_t j = 0; j < d; ++j) grow[j] += inv * grad_pool[j];
    }
  }

  void step(double lr) {
    std::size_t d = dim();
    for (std::uint32_t id : touched_) {
      double* wrow = &model_.embedding[static_cast<std::size_t>(id) * d];
      const double* grow = &grad_embedding_[static_cast<std::size_t>(id) * d];
      for (std::size_t j = 0; j < d; ++j) wrow[j] -= lr * grow[j];
    }
    for (std::size_t i = 0; i < grad_w1_.size(); ++i) model_.w1[i] -= lr * grad_w1_[i];
    for (std::size_t i = 0; i < grad_b1_.size(); ++i) model_.b1[i] -= lr * grad_b1_[i];
    for (std::size_t i = 0; i < grad_w2_.size(); ++i) model_.w2[i] -= lr * grad_w2_[i];
    model_.b2 -= lr * grad_b2_;
    if (weight_decay_ > 0.0) {
      // Decoupled decay on weight matrices (biases exempt).
      double shrink = lr * weight_decay_;
      for (double& w : model_.embedding) w -= shrink * w;
      for (double& w : model_.w1) w -= shrink * w;
      for (double& w : model_.w2) w -= shrink * w;
    }
  }

 private:
  std::size_t dim() const { return model_.dim(); }
  std::size_t hidden() const { return model_.hidden(); }

  RankerModel& model_;
  double weight_decay_;
  std::vector<double> grad_embedding_, grad_w1_, grad_b1_, grad_w2_;
  double grad_b2_ = 0.0;
  std::vector<std::uint32_t> touched_;
  std::unordered_set<std::uint32_t> touched_set_;
};

}  // namespace

double query_loss(const RankerModel& model, std::span<const augment::TrainingPair> pairs,
                  const textproc::Vocabulary& vocab, std::size_t max_len) {
  double total = 0.0;
  for (const PreparedPair& p : prepare_pairs(pairs, vocab, max_len)) {
    total += hinge_loss(model.score(p.pos), model.score(p.neg), p.margin);
  }
  return total;
}

RankerModel train(RankerModel model, std::span<const augment::TrainingPair> pairs,
                  const textproc::Vocabulary& vocab, const TrainConfig& config) {
  if (pairs.empty()) throw std::runtime_error("train: empty training set");
  if (config.lr <= 0.0) throw std::invalid_argument("lr must be positive");
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");

  std::vector<PreparedPair> prepared = prepare_pairs(pairs, vocab, config.max_len);

  // Curriculum defers term-level pairs to the final epoch.
  std::vector<std::size_t> warm, all;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    all.push_back(i);
    if (!prepared[i].term_level) warm.push_back(i);
  }
  auto epoch_pool = [&](std::size_t epoch) -> std::vector<std::size_t>& {
    if (config.curriculum && config.epochs > 1 && epoch + 1 < config.epochs) return warm;
    return all;
  };
  std::size_t total_steps = 0;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    std::size_t n = epoch_pool(e).size();
    total_steps += (n + config.batch_size - 1) / config.batch_size;
  }
  if (total_steps == 0) return model;

  textproc::Rng rng(config.seed ^ 0xb5297a4d3f8c2e01ull);
  Trainer trainer(model, config.weight_decay);
  std::size_t step = 0;
  std::vector<std::size_t> order;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order = epoch_pool(epoch);
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t n = std::min(config.batch_size, order.size() - start);
      std::unordered_set<std::uint32_t> queries;
      for (std::size_t i = 0; i < n; ++i) queries.insert(prepared[order[start + i]].query);
      double inv_q = 1.0 / static_cast<double>(queries.size());

      trainer.zero();
      for (std::size_t i = 0; i < n; ++i) {
        const PreparedPair& p = prepared[order[start + i]];
        double s_pos = model.score(p.pos);
        double s_neg = model.score(p.neg);
        if (p.margin - s_pos + s_neg > 0.0) {
          trainer.backward(p.pos, -inv_q);
          trainer.backward(p.neg, inv_q);
        }
      }
      double lr = config.lr;
      if (config.linear_decay) {
        lr *= 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
      }
      trainer.step(lr);
      ++step;
    }
  }
  return model;
}

retrieval::RankingList rank_candidates(const RankerModel& model,
                                       const corpus::SearchContext& context,
                                       const textproc::Vocabulary& vocab, std::size_t max_len) {
  if (context.current.candidates.empty()) {
    throw std::runtime_error("rank_candidates: empty candidate set");
  }
  std::vector<IdPair> history;
  history.reserve(context.history.size());
  for (const corpus::HistoryStep& step : context.history) {
    std::vector<std::string> hq = step.query.tokens.empty()
                                      ? textproc::tokenize(step.query.text)
                                      : step.query.tokens;
    std::vector<std::string> hd = step.document.title_tokens.empty()
                                      ? textproc::tokenize(step.document.title)
                                      : step.document.title_tokens;
    history.emplace_back(vocab.ids_of(hq), vocab.ids_of(hd));
  }
  std::vector<std::string> q_tokens = context.current.tokens.empty()
                                          ? textproc::tokenize(context.current.text)
                                          : context.current.tokens;
  std::vector<std::uint32_t> q_ids = vocab.ids_of(q_tokens);

  const std::vector<corpus::Candidate>& cands = context.current.candidates;
  std::vector<double> scores(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    std::vector<std::string> d_tokens =
        cands[i].title_tokens.empty() ? textproc::tokenize(cands[i].title)
                                      : cands[i].title_tokens;
    SequenceInput seq = assemble_sequence(history, q_ids, vocab.ids_of(d_tokens), max_len);
    scores[i] = model.score(seq);
  }
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return cands[a].doc_id < cands[b].doc_id;
  });
  retrieval::RankingList list;
  list.query_id = context.query_id();
  for (std::size_t idx : order) {
    list.doc_ids.push_back(cands[idx].doc_id);
    list.scores.push_back(scores[idx]);
  }
  return list;
}

}  // namespace sessrank::ranker
