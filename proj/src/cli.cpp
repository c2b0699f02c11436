#include "sessrank/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "sessrank/augment.hpp"
#include "sessrank/corpus.hpp"
#include "sessrank/evalkit.hpp"
#include "sessrank/mining.hpp"
#include "sessrank/ranker.hpp"
#include "sessrank/retrieval.hpp"
#include "sessrank/synlog.hpp"
#include "sessrank/textproc.hpp"
#include "sessrank/util.hpp"

namespace sessrank::cli {

namespace {

namespace fs = std::filesystem;

// Flat key=value settings file; '#' starts a comment line.
class ConfigFile {
 public:
  static ConfigFile load(const std::string& path) {
    ConfigFile config;
    for (const std::string& line : util::split_lines(util::read_file(path))) {
      std::string trimmed = line;
      while (!trimmed.empty() && (trimmed.back() == ' ' || trimmed.back() == '\r')) {
        trimmed.pop_back();
      }
      std::size_t start = trimmed.find_first_not_of(' ');
      if (start == std::string::npos) continue;
      trimmed = trimmed.substr(start);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error("config line without '=': " + line);
      }
      auto strip = [](std::string s) {
        std::size_t b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(" \t") - b + 1);
      };
      config.kv_[strip(trimmed.substr(0, eq))] = strip(trimmed.substr(eq + 1));
    }
    return config;
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  template <typename T>
  void apply(const CLI::Option* opt, const std::string& key, T& target) const {
    if (opt != nullptr && opt->count() > 0) return;  // explicit flag wins
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    parse_value(it->second, key, target);
  }

 private:
  static void parse_value(const std::string& text, const std::string& key, bool& target) {
    if (text == "true" || text == "1") {
      target = true;
    } else if (text == "false" || text == "0") {
      target = false;
    } else {
      throw std::runtime_error("config key " + key + ": expected boolean, got " + text);
    }
  }
  static void parse_value(const std::string& text, const std::string& key, std::string& target) {
    (void)key;
    target = text;
  }
  template <typename T>
  static void parse_value(const std::string& text, const std::string& key, T& target) {
    std::istringstream ss(text);
    ss >> target;
    if (ss.fail() || !ss.eof()) {
      throw std::runtime_error("config key " + key + ": cannot parse value " + text);
    }
  }

  std::map<std::string, std::string> kv_;
};

std::string prepare_out_dir(const std::string& out) {
  fs::create_directories(out);
  return out;
}

void write_manifest(const std::string& out_dir, const std::string& stage,
                    std::map<std::string, std::string> entries) {
  entries["stage"] = stage;
  std::string text;
  for (const auto& [key, value] : entries) {
    text += key;
    text += '=';
    text += value;
    text += '\n';
  }
  util::write_file(out_dir + "/" + stage + ".manifest", text);
}

std::string bool_str(bool v) { return v ? "true" : "false"; }

std::vector<corpus::Session> load_filled_log(const std::string& path) {
  std::vector<corpus::Session> sessions = corpus::load_log(path);
  textproc::fill_tokens(sessions);
  return sessions;
}

std::unique_ptr<retrieval::Scorer> make_scorer(const std::string& backend,
                                               std::span<const corpus::Session> sessions,
                                               const textproc::Vocabulary& vocab,
                                               const corpus::DocRegistry& docs,
                                               const retrieval::EncoderConfig& encoder_config) {
  if (backend == "bm25") {
    return std::make_unique<retrieval::Bm25Scorer>(retrieval::Bm25Index::build(docs));
  }
  if (backend == "dense") {
    retrieval::DualEncoder encoder = retrieval::DualEncoder::train(sessions, vocab,
                                                                   encoder_config);
    return std::make_unique<retrieval::DenseScorer>(std::move(encoder), vocab, docs);
  }
  throw std::runtime_error("unknown backend: " + backend);
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    if (piece.empty()) continue;
    ks.push_back(std::stoul(piece));
  }
  if (ks.empty()) throw std::runtime_error("eval: empty cutoff list");
  return ks;
}

struct AugmentArgs {
  std::string log_path;
  std::string vocab_path;
  std::string matches_path;
  std::string out;
  augment::AugmentConfig config;
  std::string drop;
};

void apply_drop(augment::AugmentConfig& config, const std::string& drop) {
  if (drop.empty()) return;
  if (drop == "TM") {
    config.enable_tm = false;
  } else if (drop == "RQ") {
    config.enable_rq = false;
  } else if (drop == "HQ") {
    config.enable_hq = false;
  } else if (drop == "AQ") {
    config.enable_aq = false;
  } else {
    throw std::runtime_error("unknown strategy group: " + drop);
  }
}

void run_augment_stage(const AugmentArgs& args) {
  std::string out = prepare_out_dir(args.out);
  std::vector<corpus::Session> sessions = load_filled_log(args.log_path);
  corpus::require_unique_query_ids(sessions);
  textproc::Vocabulary vocab = textproc::Vocabulary::load_tsv(args.vocab_path);
  std::vector<corpus::SearchContext> contexts = corpus::derive_contexts(sessions, false);

  std::unordered_map<std::string, std::vector<mining::AmbiguousMatch>> matches;
  if (!args.matches_path.empty()) {
    for (mining::AmbiguousMatch& m : mining::load_matches(args.matches_path)) {
      matches[m.source_query_id].push_back(std::move(m));
    }
  }

  augment::AugmentConfig config = args.config;
  apply_drop(config, args.drop);
  augment::AugmentStats stats;
  std::vector<augment::TrainingPair> pairs =
      augment::build_training_set(contexts, sessions, vocab, matches, config, &stats);
  augment::save_pairs(pairs, out + "/training.jsonl", config.curriculum);

  std::map<std::string, std::string> manifest = {
      {"n_mask", std::to_string(config.n_mask)},
      {"n_replace", std::to_string(config.n_replace)},
      {"n_add", std::to_string(config.n_add)},
      {"n_random", std::to_string(config.n_random)},
      {"n_ambiguous", std::to_string(config.n_ambiguous)},
      {"m_op", util::format_double(config.m_op)},
      {"m_rq", util::format_double(config.m_rq)},
      {"m_th", util::format_double(config.m_th)},
      {"mean_m_aq", util::format_double(config.mean_m_aq)},
      {"w_size", std::to_string(config.w_size)},
      {"seed", std::to_string(config.seed)},
      {"curriculum", bool_str(config.curriculum)},
      {"drop", args.drop.empty() ? "none" : args.drop},
  };
  write_manifest(out, "augment", manifest);
  std::cout << "contexts=" << stats.contexts << " original_pairs=" << stats.original_pairs
            << " constructed_pairs=" << stats.constructed_pairs
            << " no_history_contexts=" << stats.contexts_without_history << "\n";
}

struct TrainArgs {
  std::string vocab_path;
  std::string training_path;
  std::string out;
  ranker::ModelConfig model;
  ranker::TrainConfig config;
};

void run_train_stage(const TrainArgs& args) {
  std::string out = prepare_out_dir(args.out);
  textproc::Vocabulary vocab = textproc::Vocabulary::load_tsv(args.vocab_path);
  std::vector<augment::TrainingPair> pairs = augment::load_pairs(args.training_path);
  ranker::RankerModel model(vocab.size(), args.model);
  model = ranker::train(std::move(model), pairs, vocab, args.config);
  model.save(out + "/model.ckpt");

  write_manifest(out, "train",
                 {{"dim", std::to_string(args.model.dim)},
                  {"hidden", std::to_string(args.model.hidden)},
                  {"epochs", std::to_string(args.config.epochs)},
                  {"lr", util::format_double(args.config.lr)},
                  {"weight_decay", util::format_double(args.config.weight_decay)},
                  {"batch_size", std::to_string(args.config.batch_size)},
                  {"linear_decay", bool_str(args.config.linear_decay)},
                  {"curriculum", bool_str(args.config.curriculum)},
                  {"max_len", std::to_string(args.config.max_len)},
                  {"seed", std::to_string(args.config.seed)},
                  {"pairs", std::to_string(pairs.size())}});
  std::cout << "trained on " << pairs.size() << " pairs\n";
}

struct EvalArgs {
  std::string log_path;
  std::string vocab_path;
  std::string model_path;
  std::string out;
  bool require_history = true;
  std::string ks = "1,3,5,10";
  std::string gain = "binary";
  std::string log_base = "natural";
  std::string breakdown = "both";
  std::size_t max_len = 256;
  std::string tag = "sessrank";
};

void run_eval_stage(const EvalArgs& args) {
  std::string out = prepare_out_dir(args.out);
  std::vector<corpus::Session> sessions = load_filled_log(args.log_path);
  corpus::require_unique_query_ids(sessions);
  textproc::Vocabulary vocab = textproc::Vocabulary::load_tsv(args.vocab_path);
  ranker::RankerModel model = ranker::RankerModel::load(args.model_path);
  if (model.vocab_size() != vocab.size()) {
    throw std::runtime_error("model vocabulary size does not match vocab file");
  }

  corpus::ContextStats ctx_stats;
  std::vector<corpus::SearchContext> contexts =
      corpus::derive_contexts(sessions, args.require_history, &ctx_stats);
  if (contexts.empty()) throw std::runtime_error("eval: no contexts to evaluate");

  std::vector<retrieval::RankingList> rankings;
  rankings.reserve(contexts.size());
  for (const corpus::SearchContext& ctx : contexts) {
    rankings.push_back(ranker::rank_candidates(model, ctx, vocab, args.max_len));
  }

  evalkit::EvalOptions options;
  options.ks = parse_ks(args.ks);
  if (args.gain == "binary") {
    options.gain = evalkit::Gain::binary_click;
  } else if (args.gain == "graded") {
    options.gain = evalkit::Gain::graded;
  } else {
    throw std::runtime_error("unknown gain: " + args.gain);
  }
  if (args.log_base == "natural") {
    options.log_base = evalkit::LogBase::natural;
  } else if (args.log_base == "log2") {
    options.log_base = evalkit::LogBase::log2;
  } else {
    throw std::runtime_error("unknown log base: " + args.log_base);
  }

  evalkit::EvalRun run = evalkit::make_eval_run(rankings, contexts);
  evalkit::MetricsReport report = evalkit::evaluate(run, options);
  std::vector<evalkit::Bucket> buckets;
  if (args.breakdown == "length" || args.breakdown == "both") {
    std::vector<evalkit::Bucket> b =
        evalkit::breakdown(run, sessions, evalkit::BreakdownMode::length, options);
    buckets.insert(buckets.end(), b.begin(), b.end());
  }
  if (args.breakdown == "position" || args.breakdown == "both") {
    std::vector<evalkit::Bucket> b =
        evalkit::breakdown(run, sessions, evalkit::BreakdownMode::position, options);
    buckets.insert(buckets.end(), b.begin(), b.end());
  } else if (args.breakdown != "length" && args.breakdown != "both" &&
             args.breakdown != "none") {
    throw std::runtime_error("unknown breakdown mode: " + args.breakdown);
  }

  util::write_file(out + "/metrics.tsv", evalkit::report_to_tsv(report, buckets));
  evalkit::save_trec_run(rankings, out + "/run.trec", args.tag);
  std::vector<evalkit::Qrel> qrels = evalkit::qrels_from_contexts(contexts);
  evalkit::save_trec_qrels(qrels, out + "/qrels.trec");

  write_manifest(out, "eval",
                 {{"require_history", bool_str(args.require_history)},
                  {"ks", args.ks},
                  {"gain", args.gain},
                  {"log_base", args.log_base},
                  {"breakdown", args.breakdown},
                  {"max_len", std::to_string(args.max_len)},
                  {"queries", std::to_string(report.queries)}});
  std::cout << evalkit::report_to_table(report, buckets);
}

int run(std::vector<std::string> args) {
  CLI::App app{"session search toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "flat key=value settings file")->configurable(false);

  // gen -----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate a synthetic session log");
  synlog::SynConfig gen_config;
  std::string gen_out = "out";
  auto* gen_sessions = gen->add_option("--sessions", gen_config.n_sessions);
  auto* gen_topics = gen->add_option("--topics", gen_config.n_topics);
  auto* gen_terms = gen->add_option("--terms-per-topic", gen_config.terms_per_topic);
  auto* gen_cands = gen->add_option("--candidates", gen_config.n_candidates);
  auto* gen_mix_s = gen->add_option("--mix-short", gen_config.mix_short);
  auto* gen_mix_m = gen->add_option("--mix-medium", gen_config.mix_medium);
  auto* gen_mix_l = gen->add_option("--mix-long", gen_config.mix_long);
  auto* gen_seed = gen->add_option("--seed", gen_config.seed);
  auto* gen_out_opt = gen->add_option("--out", gen_out);

  // prepare ---------------------------------------------------------------
  auto* prepare = app.add_subcommand("prepare", "build vocabulary and context stats");
  std::string prep_log, prep_out = "out";
  std::uint64_t prep_min_freq = 1;
  prepare->add_option("--log", prep_log)->required();
  auto* prep_min = prepare->add_option("--min-freq", prep_min_freq);
  auto* prep_out_opt = prepare->add_option("--out", prep_out);

  // index -----------------------------------------------------------------
  auto* index = app.add_subcommand("index", "write top-k ranking lists for audit");
  std::string idx_log, idx_vocab, idx_backend = "bm25", idx_out = "out";
  std::size_t idx_top_k = 100;
  retrieval::EncoderConfig idx_encoder;
  index->add_option("--log", idx_log)->required();
  index->add_option("--vocab", idx_vocab)->required();
  auto* idx_backend_opt = index->add_option("--backend", idx_backend);
  auto* idx_top_opt = index->add_option("--top-k", idx_top_k);
  auto* idx_seed = index->add_option("--seed", idx_encoder.seed);
  auto* idx_out_opt = index->add_option("--out", idx_out);

  // mine ------------------------------------------------------------------
  auto* mine = app.add_subcommand("mine", "mine ambiguous queries via ranked windows");
  std::string mine_log, mine_vocab, mine_backend = "bm25", mine_band = "medium",
              mine_out = "out";
  std::size_t mine_w_size = 50, mine_k = 4;
  double mine_mean_margin = 0.2;
  retrieval::EncoderConfig mine_encoder;
  mine->add_option("--log", mine_log)->required();
  mine->add_option("--vocab", mine_vocab)->required();
  auto* mine_backend_opt = mine->add_option("--backend", mine_backend);
  auto* mine_band_opt = mine->add_option("--band", mine_band);
  auto* mine_w_opt = mine->add_option("--w-size", mine_w_size);
  auto* mine_k_opt = mine->add_option("--k", mine_k);
  auto* mine_margin_opt = mine->add_option("--mean-margin", mine_mean_margin);
  auto* mine_seed = mine->add_option("--seed", mine_encoder.seed);
  auto* mine_out_opt = mine->add_option("--out", mine_out);

  // augment -----------------------------------------------------------------
  auto* aug = app.add_subcommand("augment", "build the negative training set");
  AugmentArgs aug_args;
  aug_args.out = "out";
  aug->add_option("--log", aug_args.log_path)->required();
  aug->add_option("--vocab", aug_args.vocab_path)->required();
  auto* aug_matches = aug->add_option("--matches", aug_args.matches_path);
  auto* aug_n_mask = aug->add_option("--n-mask", aug_args.config.n_mask);
  auto* aug_n_replace = aug->add_option("--n-replace", aug_args.config.n_replace);
  auto* aug_n_add = aug->add_option("--n-add", aug_args.config.n_add);
  auto* aug_n_random = aug->add_option("--n-random", aug_args.config.n_random);
  auto* aug_n_amb = aug->add_option("--n-ambiguous", aug_args.config.n_ambiguous);
  auto* aug_m_op = aug->add_option("--m-op", aug_args.config.m_op);
  auto* aug_m_rq = aug->add_option("--m-rq", aug_args.config.m_rq);
  auto* aug_m_th = aug->add_option("--m-th", aug_args.config.m_th);
  auto* aug_m_aq = aug->add_option("--mean-m-aq", aug_args.config.mean_m_aq);
  auto* aug_w = aug->add_option("--w-size", aug_args.config.w_size);
  auto* aug_seed = aug->add_option("--seed", aug_args.config.seed);
  auto* aug_curr = aug->add_flag("--curriculum", aug_args.config.curriculum);
  auto* aug_drop = aug->add_option("--drop", aug_args.drop, "disable one of TM,RQ,HQ,AQ");
  auto* aug_out_opt = aug->add_option("--out", aug_args.out);

  // train -------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train the ranker");
  TrainArgs train_args;
  train_args.out = "out";
  train->add_option("--vocab", train_args.vocab_path)->required();
  train->add_option("--training", train_args.training_path)->required();
  auto* tr_dim = train->add_option("--dim", train_args.model.dim);
  auto* tr_hidden = train->add_option("--hidden", train_args.model.hidden);
  auto* tr_epochs = train->add_option("--epochs", train_args.config.epochs);
  auto* tr_lr = train->add_option("--lr", train_args.config.lr);
  auto* tr_wd = train->add_option("--weight-decay", train_args.config.weight_decay);
  auto* tr_batch = train->add_option("--batch-size", train_args.config.batch_size);
  auto* tr_seed = train->add_option("--seed", train_args.config.seed);
  auto* tr_no_decay = train->add_flag("--no-linear-decay", "use a constant learning rate");
  auto* tr_curr = train->add_flag("--curriculum", train_args.config.curriculum);
  auto* tr_max_len = train->add_option("--max-len", train_args.config.max_len);
  auto* tr_out_opt = train->add_option("--out", train_args.out);

  // eval ----------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "evaluate a trained ranker");
  EvalArgs eval_args;
  eval_args.out = "out";
  eval->add_option("--log", eval_args.log_path)->required();
  eval->add_option("--vocab", eval_args.vocab_path)->required();
  eval->add_option("--model", eval_args.model_path)->required();
  auto* ev_hist =
      eval->add_flag("--all-turns", "evaluate turns without history as well");
  auto* ev_ks = eval->add_option("--ks", eval_args.ks);
  auto* ev_gain = eval->add_option("--gain", eval_args.gain);
  auto* ev_log = eval->add_option("--log-base", eval_args.log_base);
  auto* ev_break = eval->add_option("--breakdown", eval_args.breakdown);
  auto* ev_max_len = eval->add_option("--max-len", eval_args.max_len);
  auto* ev_tag = eval->add_option("--tag", eval_args.tag);
  auto* ev_out_opt = eval->add_option("--out", eval_args.out);

  // ablate ---------------------------------------------------------------------
  auto* ablate = app.add_subcommand("ablate", "augment+train+eval with one group dropped");
  AugmentArgs ab_aug;
  TrainArgs ab_train;
  EvalArgs ab_eval;
  std::string ab_out = "out";
  ablate->add_option("--log", ab_aug.log_path)->required();
  ablate->add_option("--vocab", ab_aug.vocab_path)->required();
  auto* ab_matches = ablate->add_option("--matches", ab_aug.matches_path);
  ablate->add_option("--drop", ab_aug.drop, "one of TM,RQ,HQ,AQ")->required();
  auto* ab_seed = ablate->add_option("--seed", ab_aug.config.seed);
  auto* ab_epochs = ablate->add_option("--epochs", ab_train.config.epochs);
  auto* ab_lr = ablate->add_option("--lr", ab_train.config.lr);
  auto* ab_batch = ablate->add_option("--batch-size", ab_train.config.batch_size);
  auto* ab_dim = ablate->add_option("--dim", ab_train.model.dim);
  auto* ab_hidden = ablate->add_option("--hidden", ab_train.model.hidden);
  auto* ab_out_opt = ablate->add_option("--out", ab_out);

  std::reverse(args.begin(), args.end());  // CLI11 vector parse expects reversed args
  try {
    app.parse(args);
  } catch (const CLI::Success& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  ConfigFile config;
  if (!config_path.empty()) config = ConfigFile::load(config_path);

  if (gen->parsed()) {
    config.apply(gen_sessions, "gen.sessions", gen_config.n_sessions);
    config.apply(gen_topics, "gen.topics", gen_config.n_topics);
    config.apply(gen_terms, "gen.terms_per_topic", gen_config.terms_per_topic);
    config.apply(gen_cands, "gen.candidates", gen_config.n_candidates);
    config.apply(gen_mix_s, "gen.mix_short", gen_config.mix_short);
    config.apply(gen_mix_m, "gen.mix_medium", gen_config.mix_medium);
    config.apply(gen_mix_l, "gen.mix_long", gen_config.mix_long);
    config.apply(gen_seed, "seed", gen_config.seed);
    config.apply(gen_out_opt, "out", gen_out);

    std::string out = prepare_out_dir(gen_out);
    std::vector<corpus::Session> sessions = synlog::generate(gen_config);
    corpus::save_log(sessions, out + "/sessions.jsonl");
    write_manifest(out, "gen",
                   {{"sessions", std::to_string(gen_config.n_sessions)},
                    {"topics", std::to_string(gen_config.n_topics)},
                    {"terms_per_topic", std::to_string(gen_config.terms_per_topic)},
                    {"candidates", std::to_string(gen_config.n_candidates)},
                    {"mix_short", util::format_double(gen_config.mix_short)},
                    {"mix_medium", util::format_double(gen_config.mix_medium)},
                    {"mix_long", util::format_double(gen_config.mix_long)},
                    {"seed", std::to_string(gen_config.seed)}});
    std::cout << "wrote " << sessions.size() << " sessions\n";
    return 0;
  }

  if (prepare->parsed()) {
    config.apply(prep_min, "prepare.min_freq", prep_min_freq);
    config.apply(prep_out_opt, "out", prep_out);
    std::string out = prepare_out_dir(prep_out);
    std::vector<corpus::Session> sessions = load_filled_log(prep_log);
    textproc::Vocabulary vocab = textproc::Vocabulary::build(sessions, prep_min_freq);
    vocab.save_tsv(out + "/vocab.tsv");
    corpus::DocRegistry docs = corpus::collect_documents(sessions);
    corpus::ContextStats with_hist, all_turns;
    std::size_t n_hist = corpus::derive_contexts(sessions, true, &with_hist).size();
    std::size_t n_all = corpus::derive_contexts(sessions, false, &all_turns).size();
    write_manifest(out, "prepare",
                   {{"min_freq", std::to_string(prep_min_freq)},
                    {"sessions", std::to_string(sessions.size())},
                    {"documents", std::to_string(docs.size())},
                    {"vocab_size", std::to_string(vocab.size())},
                    {"contexts_with_history", std::to_string(n_hist)},
                    {"contexts_all", std::to_string(n_all)}});
    std::cout << "sessions=" << sessions.size() << " docs=" << docs.size()
              << " vocab=" << vocab.size() << " contexts_with_history=" << n_hist
              << " contexts_all=" << n_all
              << " skipped=" << with_hist.skipped_total() << "\n";
    return 0;
  }

  if (index->parsed()) {
    config.apply(idx_backend_opt, "index.backend", idx_backend);
    config.apply(idx_top_opt, "index.top_k", idx_top_k);
    config.apply(idx_seed, "seed", idx_encoder.seed);
    config.apply(idx_out_opt, "out", idx_out);
    config.apply(nullptr, "dense.dim", idx_encoder.dim);
    config.apply(nullptr, "dense.epochs", idx_encoder.epochs);
    config.apply(nullptr, "dense.lr", idx_encoder.lr);
    config.apply(nullptr, "dense.batch_size", idx_encoder.batch_size);

    std::string out = prepare_out_dir(idx_out);
    std::vector<corpus::Session> sessions = load_filled_log(idx_log);
    corpus::require_unique_query_ids(sessions);
    textproc::Vocabulary vocab = textproc::Vocabulary::load_tsv(idx_vocab);
    corpus::DocRegistry docs = corpus::collect_documents(sessions);
    std::unique_ptr<retrieval::Scorer> scorer =
        make_scorer(idx_backend, sessions, vocab, docs, idx_encoder);
    std::vector<retrieval::QueryRef> queries = retrieval::collect_queries(sessions);
    std::vector<retrieval::RankingList> lists =
        retrieval::build_ranking_lists(*scorer, queries, docs, idx_top_k);
    evalkit::save_trec_run(lists, out + "/lists.trec", idx_backend);
    write_manifest(out, "index",
                   {{"backend", idx_backend},
                    {"top_k", std::to_string(idx_top_k)},
                    {"seed", std::to_string(idx_encoder.seed)},
                    {"queries", std::to_string(queries.size())},
                    {"documents", std::to_string(docs.size())}});
    std::cout << "wrote lists for " << lists.size() << " queries over " << docs.size()
              << " documents\n";
    return 0;
  }

  if (mine->parsed()) {
    config.apply(mine_backend_opt, "mine.backend", mine_backend);
    config.apply(mine_band_opt, "mine.band", mine_band);
    config.apply(mine_w_opt, "mine.w_size", mine_w_size);
    config.apply(mine_k_opt, "mine.k", mine_k);
    config.apply(mine_margin_opt, "mine.mean_margin", mine_mean_margin);
    config.apply(mine_seed, "seed", mine_encoder.seed);
    config.apply(mine_out_opt, "out", mine_out);
    config.apply(nullptr, "dense.dim", mine_encoder.dim);
    config.apply(nullptr, "dense.epochs", mine_encoder.epochs);
    config.apply(nullptr, "dense.lr", mine_encoder.lr);
    config.apply(nullptr, "dense.batch_size", mine_encoder.batch_size);

    std::string out = prepare_out_dir(mine_out);
    std::vector<corpus::Session> sessions = load_filled_log(mine_log);
    corpus::require_unique_query_ids(sessions);
    textproc::Vocabulary vocab = textproc::Vocabulary::load_tsv(mine_vocab);
    corpus::DocRegistry docs = corpus::collect_documents(sessions);
    std::unique_ptr<retrieval::Scorer> scorer =
        make_scorer(mine_backend, sessions, vocab, docs, mine_encoder);
    std::vector<retrieval::QueryRef> queries = retrieval::collect_queries(sessions);
    mining::WindowSet windows = mining::WindowSet::build(*scorer, queries, docs, mine_w_size);

    mining::Band band = mining::band_from_name(mine_band);
    std::vector<corpus::SearchContext> contexts = corpus::derive_contexts(sessions, true);
    std::vector<mining::AmbiguousMatch> all_matches;
    for (const corpus::SearchContext& ctx : contexts) {
      std::vector<mining::AmbiguousMatch> found =
          mining::mine_ambiguous(ctx, windows, mine_k, band, mine_mean_margin);
      all_matches.insert(all_matches.end(), found.begin(), found.end());
    }
    mining::save_matches(all_matches, out + "/matches.tsv");
    write_manifest(out, "mine",
                   {{"backend", mine_backend},
                    {"band", mine_band},
                    {"w_size", std::to_string(mine_w_size)},
                    {"k", std::to_string(mine_k)},
                    {"mean_margin", util::format_double(mine_mean_margin)},
                    {"seed", std::to_string(mine_encoder.seed)},
                    {"windows", std::to_string(windows.windows.size())},
                    {"matches", std::to_string(all_matches.size())}});
    std::cout << "mined " << all_matches.size() << " matches from "
              << windows.windows.size() << " windows\n";
    return 0;
  }

  if (aug->parsed()) {
    config.apply(aug_n_mask, "augment.n_mask", aug_args.config.n_mask);
    config.apply(aug_n_replace, "augment.n_replace", aug_args.config.n_replace);
    config.apply(aug_n_add, "augment.n_add", aug_args.config.n_add);
    config.apply(aug_n_random, "augment.n_random", aug_args.config.n_random);
    config.apply(aug_n_amb, "augment.n_ambiguous", aug_args.config.n_ambiguous);
    config.apply(aug_m_op, "augment.m_op", aug_args.config.m_op);
    config.apply(aug_m_rq, "augment.m_rq", aug_args.config.m_rq);
    config.apply(aug_m_th, "augment.m_th", aug_args.config.m_th);
    config.apply(aug_m_aq, "augment.mean_m_aq", aug_args.config.mean_m_aq);
    config.apply(aug_w, "augment.w_size", aug_args.config.w_size);
    config.apply(aug_seed, "seed", aug_args.config.seed);
    config.apply(aug_curr, "augment.curriculum", aug_args.config.curriculum);
    config.apply(aug_drop, "augment.drop", aug_args.drop);
    config.apply(aug_matches, "augment.matches", aug_args.matches_path);
    config.apply(aug_out_opt, "out", aug_args.out);
    run_augment_stage(aug_args);
    return 0;
  }

  if (train->parsed()) {
    config.apply(tr_dim, "train.dim", train_args.model.dim);
    config.apply(tr_hidden, "train.hidden", train_args.model.hidden);
    config.apply(tr_epochs, "train.epochs", train_args.config.epochs);
    config.apply(tr_lr, "train.lr", train_args.config.lr);
    config.apply(tr_wd, "train.weight_decay", train_args.config.weight_decay);
    config.apply(tr_batch, "train.batch_size", train_args.config.batch_size);
    config.apply(tr_seed, "seed", train_args.config.seed);
    config.apply(tr_curr, "train.curriculum", train_args.config.curriculum);
    config.apply(tr_max_len, "train.max_len", train_args.config.max_len);
    config.apply(tr_out_opt, "out", train_args.out);
    if (tr_no_decay->count() > 0) {
      train_args.config.linear_decay = false;
    } else {
      config.apply(nullptr, "train.linear_decay", train_args.config.linear_decay);
    }
    train_args.model.seed = train_args.config.seed;
    run_train_stage(train_args);
    return 0;
  }

  if (eval->parsed()) {
    if (ev_hist->count() > 0) eval_args.require_history = false;
    config.apply(ev_hist, "eval.require_history", eval_args.require_history);
    config.apply(ev_ks, "eval.ks", eval_args.ks);
    config.apply(ev_gain, "eval.gain", eval_args.gain);
    config.apply(ev_log, "eval.log_base", eval_args.log_base);
    config.apply(ev_break, "eval.breakdown", eval_args.breakdown);
    config.apply(ev_max_len, "eval.max_len", eval_args.max_len);
    config.apply(ev_tag, "eval.tag", eval_args.tag);
    config.apply(ev_out_opt, "out", eval_args.out);
    run_eval_stage(eval_args);
    return 0;
  }

  if (ablate->parsed()) {
    config.apply(ab_seed, "seed", ab_aug.config.seed);
    config.apply(ab_epochs, "train.epochs", ab_train.config.epochs);
    config.apply(ab_lr, "train.lr", ab_train.config.lr);
    config.apply(ab_batch, "train.batch_size", ab_train.config.batch_size);
    config.apply(ab_dim, "train.dim", ab_train.model.dim);
    config.apply(ab_hidden, "train.hidden", ab_train.model.hidden);
    config.apply(ab_matches, "augment.matches", ab_aug.matches_path);
    config.apply(ab_out_opt, "out", ab_out);

    ab_aug.out = ab_out;
    run_augment_stage(ab_aug);

    ab_train.vocab_path = ab_aug.vocab_path;
    ab_train.training_path = ab_out + "/training.jsonl";
    ab_train.out = ab_out;
    ab_train.config.seed = ab_aug.config.seed;
    ab_train.model.seed = ab_aug.config.seed;
    run_train_stage(ab_train);

    ab_eval.log_path = ab_aug.log_path;
    ab_eval.vocab_path = ab_aug.vocab_path;
    ab_eval.model_path = ab_out + "/model.ckpt";
    ab_eval.out = ab_out;
    run_eval_stage(ab_eval);
    return 0;
  }

  return 2;  // no subcommand matched (require_subcommand should prevent this)
}

}  // namespace

int dispatch(std::vector<std::string> args) {
  try {
    return run(std::move(args));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace sessrank::cli
