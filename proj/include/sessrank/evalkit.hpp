#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sessrank/corpus.hpp"
#include "sessrank/retrieval.hpp"

namespace sessrank::evalkit {

// One query's evaluated ranking plus its ground truth.
struct QueryResult {
  std::string query_id;
  std::vector<std::string> ranking;          // doc_ids, best first
  std::vector<std::size_t> click_positions;  // 1-based, strictly ascending
  std::unordered_map<std::string, int> relevance;  // graded labels, when present
};

struct EvalRun {
  std::vector<QueryResult> queries;
};

// Joins model rankings with the contexts' click/label ground truth.
EvalRun make_eval_run(std::span<const retrieval::RankingList> rankings,
                      std::span<const corpus::SearchContext> contexts);

// MAP = (1/N) sum_i (1/c_i) sum_j j / p_ij over ascending click positions.
double compute_map(const EvalRun& run);
// MRR = (1/N) sum_i 1 / p_i1 (first click only).
double compute_mrr(const EvalRun& run);

enum class Gain { binary_click, graded };
enum class LogBase { natural, log2 };

// NDCG@k = DCG(actual) / DCG(optimal) with discount 1/log(1+p), averaged per
// query. Queries with zero ideal DCG are skipped and counted via *skipped.
double compute_ndcg(const EvalRun& run, std::size_t k, Gain gain = Gain::binary_click,
                    LogBase log_base = LogBase::natural, std::size_t* skipped = nullptr);

struct MetricsReport {
  double map = 0.0;
  double mrr = 0.0;
  std::vector<std::pair<std::size_t, double>> ndcg;  // (k, value)
  std::size_t queries = 0;             // queries entering MAP/MRR
  std::size_t skipped_zero_click = 0;  // dropped before MAP/MRR
  std::size_t skipped_zero_ideal = 0;  // max over k of NDCG's skip count
};

struct EvalOptions {
  std::vector<std::size_t> ks = {1, 3, 5, 10};
  Gain gain = Gain::binary_click;
  LogBase log_base = LogBase::natural;
};

// Filters zero-click queries (with a count), then computes all metrics.
MetricsReport evaluate(const EvalRun& run, const EvalOptions& options = {});

enum class BreakdownMode { length, position };

struct Bucket {
  std::string label;
  std::size_t query_count = 0;
  MetricsReport metrics;
};

// length: short (<= 2 turns) / medium (3-4) / long (>= 5) session classes.
// position: turn index within the session crossed with the length class
// (labels like "S2", "M3", "L5").
std::vector<Bucket> breakdown(const EvalRun& run, std::span<const corpus::Session> sessions,
                              BreakdownMode mode, const EvalOptions& options = {});

// TREC run lines: `qid Q0 docid rank score tag`.
std::string run_to_trec(std::span<const retrieval::RankingList> rankings,
                        const std::string& tag = "sessrank");
void save_trec_run(std::span<const retrieval::RankingList> rankings, const std::string& path,
                   const std::string& tag = "sessrank");
std::vector<retrieval::RankingList> parse_trec_run(std::string_view text);
std::vector<retrieval::RankingList> load_trec_run(const std::string& path);

// TREC qrels lines: `qid 0 docid rel`.
struct Qrel {
  std::string query_id;
  std::string doc_id;
  int relevance = 0;
};
std::vector<Qrel> qrels_from_contexts(std::span<const corpus::SearchContext> contexts);
std::string qrels_to_trec(std::span<const Qrel> qrels);
void save_trec_qrels(std::span<const Qrel> qrels, const std::string& path);
std::vector<Qrel> parse_trec_qrels(std::string_view text);

std::string report_to_tsv(const MetricsReport& report, std::span<const Bucket> buckets = {});
std::string report_to_table(const MetricsReport& report, std::span<const Bucket> buckets = {});

}  // namespace sessrank::evalkit
