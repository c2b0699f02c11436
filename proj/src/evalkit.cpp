#include "sessrank/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sessrank/util.hpp"

namespace sessrank::evalkit {

EvalRun make_eval_run(std::span<const retrieval::RankingList> rankings,
                      std::span<const corpus::SearchContext> contexts) {
  std::unordered_map<std::string, const corpus::SearchContext*> by_id;
  for (const corpus::SearchContext& ctx : contexts) by_id.emplace(ctx.query_id(), &ctx);

  EvalRun run;
  for (const retrieval::RankingList& list : rankings) {
    auto it = by_id.find(list.query_id);
    if (it == by_id.end()) {
      throw std::runtime_error("ranking for unknown query " + list.query_id);
    }
    const corpus::SearchContext& ctx = *it->second;
    QueryResult result;
    result.query_id = list.query_id;
    result.ranking = list.doc_ids;

    std::unordered_map<std::string, const corpus::Candidate*> cands;
    for (const corpus::Candidate& c : ctx.current.candidates) cands.emplace(c.doc_id, &c);
    for (std::size_t pos = 1; pos <= result.ranking.size(); ++pos) {
      auto cit = cands.find(result.ranking[pos - 1]);
      if (cit == cands.end()) continue;  // corpus docs outside the candidate set
      if (cit->second->clicked) result.click_positions.push_back(pos);
      if (cit->second->relevance) result.relevance[cit->second->doc_id] = *cit->second->relevance;
    }
    run.queries.push_back(std::move(result));
  }
  return run;
}

namespace {

void require_nonempty(const EvalRun& run) {
  if (run.queries.empty()) throw std::runtime_error("evaluation over zero queries");
}

double discount(std::size_t position, LogBase base) {
  double lg = std::log(1.0 + static_cast<double>(position));
  if (base == LogBase::log2) lg /= std::log(2.0);
  return 1.0 / lg;
}

}  // namespace

double compute_map(const EvalRun& run) {
  require_nonempty(run);
  double total = 0.0;
  for (const QueryResult& q : run.queries) {
    if (q.click_positions.empty()) {
      throw std::runtime_error("compute_map: query " + q.query_id + " has no clicks");
    }
    double ap = 0.0;
    for (std::size_t j = 1; j <= q.click_positions.size(); ++j) {
      ap += static_cast<double>(j) / static_cast<double>(q.click_positions[j - 1]);
    }
    total += ap / static_cast<double>(q.click_positions.size());
  }
  return total / static_cast<double>(run.queries.size());
}

double compute_mrr(const EvalRun& run) {
  require_nonempty(run);
  double total = 0.0;
  for (const QueryResult& q : run.queries) {
    if (q.click_positions.empty()) {
      throw std::runtime_error("compute_mrr: query " + q.query_id + " has no clicks");
    }
    total += 1.0 / static_cast<double>(q.click_positions.front());
  }
  return total / static_cast<double>(run.queries.size());
}

double compute_ndcg(const EvalRun& run, std::size_t k, Gain gain, LogBase log_base,
                    std::size_t* skipped) {
  if (k < 1) throw std::invalid_argument("ndcg: k must be >= 1");
  require_nonempty(run);
  double total = 0.0;
  std::size_t counted = 0, skip = 0;
  for (const QueryResult& q : run.queries) {
    double dcg = 0.0, idcg = 0.0;
    if (gain == Gain::binary_click) {
      for (std::size_t pos : q.click_positions) {
        if (pos <= k) dcg += discount(pos, log_base);
      }
      std::size_t ideal = std::min(k, q.click_positions.size());
      for (std::size_t p = 1; p <= ideal; ++p) idcg += discount(p, log_base);
    } else {
      std::vector<int> gains;
      for (std::size_t p = 1; p <= std::min(k, q.ranking.size()); ++p) {
        auto it = q.relevance.find(q.ranking[p - 1]);
        int rel = it == q.relevance.end() ? 0 : it->second;
        if (rel > 0) dcg += rel * discount(p, log_base);
      }
      for (const auto& [doc, rel] : q.relevance) {
        if (rel > 0) gains.push_back(rel);
      }
      std::sort(gains.begin(), gains.end(), std::greater<int>());
      for (std::size_t p = 1; p <= std::min(k, gains.size()); ++p) {
        idcg += gains[p - 1] * discount(p, log_base);
      }
    }
    if (idcg <= 0.0) {
      ++skip;
      continue;
    }
    total += dcg / idcg;
    ++counted;
  }
  if (skipped) *skipped = skip;
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

MetricsReport evaluate(const EvalRun& run, const EvalOptions& options) {
  EvalRun clicky;
  MetricsReport report;
  for (const QueryResult& q : run.queries) {
    if (q.click_positions.empty()) {
      ++report.skipped_zero_click;
    } else {
      clicky.queries.push_back(q);
    }
  }
  report.queries = clicky.queries.size();
  if (clicky.queries.empty()) return report;
  report.map = compute_map(clicky);
  report.mrr = compute_mrr(clicky);
  for (std::size_t k : options.ks) {
    std::size_t skipped = 0;
    double value = compute_ndcg(clicky, k, options.gain, options.log_base, &skipped);
    report.ndcg.emplace_back(k, value);
    report.skipped_zero_ideal = std::max(report.skipped_zero_ideal, skipped);
  }
  return report;
}

namespace {

struct SessionSlot {
  std::size_t length = 0;
  std::size_t position = 0;  // 1-based turn index
};

std::string length_label(std::size_t n) {
  if (n <= 2) return "short";
  if (n <= 4) return "medium";
  return "long";
}

char length_letter(std::size_t n) {
  if (n <= 2) return 'S';
  if (n <= 4) return 'M';
  return 'L';
}

}  // namespace

std::vector<Bucket> breakdown(const EvalRun& run, std::span<const corpus::Session> sessions,
                              BreakdownMode mode, const EvalOptions& options) {
  std::unordered_map<std::string, SessionSlot> slots;
  for (const corpus::Session& s : sessions) {
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      slots[s.turns[i].query_id] = SessionSlot{s.turns.size(), i + 1};
    }
  }

  // (sort key, label) -> sub-run, kept ordered for deterministic output.
  std::map<std::pair<std::size_t, std::size_t>, std::pair<std::string, EvalRun>> groups;
  for (const QueryResult& q : run.queries) {
    auto it = slots.find(q.query_id);
    if (it == slots.end()) {
      throw std::runtime_error("breakdown: query " + q.query_id + " not found in sessions");
    }
    const SessionSlot& slot = it->second;
    std::size_t class_rank = slot.length <= 2 ? 0 : slot.length <= 4 ? 1 : 2;
    std::pair<std::size_t, std::size_t> key;
    std::string label;
    if (mode == BreakdownMode::length) {
      key = {class_rank, 0};
      label = length_label(slot.length);
    } else {
      key = {class_rank, slot.position};
      label = std::string(1, length_letter(slot.length)) + std::to_string(slot.position);
    }
    auto& group = groups[key];
    group.first = label;
    group.second.queries.push_back(q);
  }

  std::vector<Bucket> buckets;
  for (auto& [key, group] : groups) {
    Bucket bucket;
    bucket.label = group.first;
    bucket.query_count = group.second.queries.size();
    bucket.metrics = evaluate(group.second, options);
    buckets.push_back(std::move(bucket));
  }
  return buckets;
}

std::string run_to_trec(std::span<const retrieval::RankingList> rankings,
                        const std::string& tag) {
  std::string out;
  for (const retrieval::RankingList& list : rankings) {
    for (std::size_t i = 0; i < list.doc_ids.size(); ++i) {
      out += list.query_id;
      out += " Q0 ";
      out += list.doc_ids[i];
      out += ' ';
      out += std::to_string(i + 1);
      out += ' ';
      out += util::format_double(list.scores[i]);
      out += ' ';
      out += tag;
      out += '\n';
    }
  }
  return out;
}

void save_trec_run(std::span<const retrieval::RankingList> rankings, const std::string& path,
                   const std::string& tag) {
  util::write_file(path, run_to_trec(rankings, tag));
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string field;
  while (ss >> field) out.push_back(field);
  return out;
}

}  // namespace

std::vector<retrieval::RankingList> parse_trec_run(std::string_view text) {
  struct Entry {
    std::string doc_id;
    std::size_t rank;
    double score;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Entry>> by_query;
  for (const std::string& line : util::split_lines(text)) {
    if (line.empty()) continue;
    std::vector<std::string> f = split_ws(line);
    if (f.size() != 6) throw std::runtime_error("bad trec run line: " + line);
    if (by_query.find(f[0]) == by_query.end()) order.push_back(f[0]);
    by_query[f[0]].push_back(Entry{f[2], std::stoul(f[3]), std::stod(f[4])});
  }
  std::vector<retrieval::RankingList> lists;
  for (const std::string& qid : order) {
    std::vector<Entry>& entries = by_query[qid];
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.rank < b.rank; });
    retrieval::RankingList list;
    list.query_id = qid;
    for (const Entry& e : entries) {
      list.doc_ids.push_back(e.doc_id);
      list.scores.push_back(e.score);
    }
    lists.push_back(std::move(list));
  }
  return lists;
}

std::vector<retrieval::RankingList> load_trec_run(const std::string& path) {
  return parse_trec_run(util::read_file(path));
}

std::vector<Qrel> qrels_from_contexts(std::span<const corpus::SearchContext> contexts) {
  std::vector<Qrel> qrels;
  for (const corpus::SearchContext& ctx : contexts) {
    for (const corpus::Candidate& c : ctx.current.candidates) {
      Qrel q;
      q.query_id = ctx.query_id();
      q.doc_id = c.doc_id;
      q.relevance = c.relevance ? *c.relevance : (c.clicked ? 1 : 0);
      qrels.push_back(std::move(q));
    }
  }
  return qrels;
}

std::string qrels_to_trec(std::span<const Qrel> qrels) {
  std::string out;
  for (const Qrel& q : qrels) {
    out += q.query_id;
    out += " 0 ";
    out += q.doc_id;
    out += ' ';
    out += std::to_string(q.relevance);
    out += '\n';
  }
  return out;
}

void save_trec_qrels(std::span<const Qrel> qrels, const std::string& path) {
  util::write_file(path, qrels_to_trec(qrels));
}

std::vector<Qrel> parse_trec_qrels(std::string_view text) {
  std::vector<Qrel> qrels;
  for (const std::string& line : util::split_lines(text)) {
    if (line.empty()) continue;
    std::vector<std::string> f = split_ws(line);
    if (f.size() != 4) throw std::runtime_error("bad trec qrels line: " + line);
    qrels.push_back(Qrel{f[0], f[2], std::stoi(f[3])});
  }
  return qrels;
}

namespace {

void append_metric_rows(std::string& out, const std::string& suffix,
                        const MetricsReport& report) {
  out += "map" + suffix + "\t" + util::format_fixed(report.map, 6) + "\n";
  out += "mrr" + suffix + "\t" + util::format_fixed(report.mrr, 6) + "\n";
  for (const auto& [k, value] : report.ndcg) {
    out += "ndcg@" + std::to_string(k) + suffix + "\t" + util::format_fixed(value, 6) + "\n";
  }
  out += "queries" + suffix + "\t" + std::to_string(report.queries) + "\n";
}

}  // namespace

std::string report_to_tsv(const MetricsReport& report, std::span<const Bucket> buckets) {
  std::string out = "metric\tvalue\n";
  append_metric_rows(out, "", report);
  out += "skipped_zero_click\t" + std::to_string(report.skipped_zero_click) + "\n";
  out += "skipped_zero_ideal\t" + std::to_string(report.skipped_zero_ideal) + "\n";
  for (const Bucket& bucket : buckets) {
    append_metric_rows(out, "[" + bucket.label + "]", bucket.metrics);
  }
  return out;
}

std::string report_to_table(const MetricsReport& report, std::span<const Bucket> buckets) {
  std::ostringstream out;
  auto row = [&](const std::string& name, const MetricsReport& r, std::size_t count) {
    out << name;
    out << std::string(name.size() < 10 ? 10 - name.size() : 1, ' ');
    out << "map=" << util::format_fixed(r.map, 4) << "  mrr=" << util::format_fixed(r.mrr, 4);
    for (const auto& [k, value] : r.ndcg) {
      out << "  ndcg@" << k << "=" << util::format_fixed(value, 4);
    }
    out << "  n=" << count << "\n";
  };
  row("all", report, report.queries);
  for (const Bucket& bucket : buckets) row(bucket.label, bucket.metrics, bucket.query_count);
  return out.str();
}

}  // namespace sessrank::evalkit
