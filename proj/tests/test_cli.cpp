#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "sessrank/augment.hpp"
#include "sessrank/cli.hpp"
#include "sessrank/corpus.hpp"
#include "sessrank/evalkit.hpp"
#include "sessrank/mining.hpp"
#include "sessrank/ranker.hpp"
#include "sessrank/textproc.hpp"
#include "sessrank/util.hpp"

using namespace sessrank;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per fixture instance, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("sessrank_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& name = "") const {
    return name.empty() ? path.string() : (path / name).string();
  }
};

int run_cli(std::vector<std::string> args) { return cli::dispatch(std::move(args)); }

// Generates a small log and walks it through every pipeline stage.
struct Pipeline {
  TempDir dir;
  std::string log, vocab, lists, matches, pairs, model, metrics;

  explicit Pipeline(const std::string& seed = "3") {
    log = dir.str("sessions.jsonl");
    vocab = dir.str("vocab.tsv");
    lists = dir.str("lists.trec");
    matches = dir.str("matches.tsv");
    pairs = dir.str("training.jsonl");
    model = dir.str("model.ckpt");
    metrics = dir.str("metrics.tsv");
    REQUIRE(run_cli({"gen", "--out", dir.str(), "--sessions", "12", "--topics", "4",
                     "--seed", seed}) == 0);
    REQUIRE(run_cli({"prepare", "--log", log, "--out", dir.str()}) == 0);
    REQUIRE(run_cli({"index", "--log", log, "--vocab", vocab, "--out", dir.str(),
                     "--backend", "bm25", "--top-k", "500"}) == 0);
    REQUIRE(run_cli({"mine", "--log", log, "--vocab", vocab, "--out", dir.str(),
                     "--w-size", "6", "--k", "3", "--band", "medium"}) == 0);
    REQUIRE(run_cli({"augment", "--log", log, "--vocab", vocab, "--matches", matches,
                     "--out", dir.str(), "--seed", seed}) == 0);
    REQUIRE(run_cli({"train", "--training", pairs, "--vocab", vocab, "--out", dir.str(),
                     "--dim", "8", "--hidden", "4", "--epochs", "1", "--batch-size", "16",
                     "--seed", seed}) == 0);
    REQUIRE(run_cli({"eval", "--log", log, "--vocab", vocab, "--model", model,
                     "--out", dir.str(), "--ks", "1,3,5"}) == 0);
  }
};

}  // namespace

TEST_CASE("usage errors and help exit with the documented codes") {
  CHECK(run_cli({"--help"}) == 0);
  CHECK(run_cli({"gen", "--help"}) == 0);
  CHECK(run_cli({"no-such-command"}) == 2);
  CHECK(run_cli({"gen", "--bogus-flag"}) == 2);
  CHECK(run_cli({}) == 2);  // a subcommand is required
}

TEST_CASE("runtime failures exit with code 1") {
  TempDir dir;
  CHECK(run_cli({"prepare", "--log", dir.str("absent.jsonl"), "--out", dir.str()}) == 1);
  CHECK(run_cli({"train", "--training", dir.str("absent.jsonl"), "--vocab",
                 dir.str("absent.tsv"), "--out", dir.str()}) == 1);
}

TEST_CASE("gen writes a parseable deterministic log plus a manifest") {
  TempDir a, b;
  REQUIRE(run_cli({"gen", "--out", a.str(), "--sessions", "9", "--seed", "11"}) == 0);
  REQUIRE(run_cli({"gen", "--out", b.str(), "--sessions", "9", "--seed", "11"}) == 0);
  std::string log_a = util::read_file(a.str("sessions.jsonl"));
  CHECK(log_a == util::read_file(b.str("sessions.jsonl")));

  std::vector<corpus::Session> sessions = corpus::parse_log(log_a);
  CHECK(sessions.size() == 9);

  std::string manifest = util::read_file(a.str("gen.manifest"));
  CHECK(manifest.find("stage=gen") != std::string::npos);
  CHECK(manifest.find("seed=11") != std::string::npos);
  CHECK(manifest.find("sessions=9") != std::string::npos);

  TempDir c;
  REQUIRE(run_cli({"gen", "--out", c.str(), "--sessions", "9", "--seed", "12"}) == 0);
  CHECK(log_a != util::read_file(c.str("sessions.jsonl")));
}

TEST_CASE("the pipeline stages produce loadable artifacts") {
  Pipeline p;

  std::vector<corpus::Session> sessions = corpus::load_log(p.log);
  textproc::Vocabulary vocab = textproc::Vocabulary::load_tsv(p.vocab);
  CHECK(vocab.size() > textproc::kReservedCount);

  std::vector<retrieval::RankingList> lists = evalkit::load_trec_run(p.lists);
  std::size_t clicked_turns = 0;
  for (const corpus::Session& s : sessions) {
    for (const corpus::QueryTurn& t : s.turns) {
      if (t.first_click) ++clicked_turns;
    }
  }
  CHECK(lists.size() == clicked_turns);

  corpus::DocRegistry docs = corpus::collect_documents(sessions);
  for (const retrieval::RankingList& list : lists) {
    CHECK(list.doc_ids.size() == docs.size());
  }

  std::vector<mining::AmbiguousMatch> matches = mining::load_matches(p.matches);
  for (const mining::AmbiguousMatch& m : matches) {
    CHECK(m.margin > 0.0);
    CHECK(m.margin <= 0.4);
  }

  std::vector<augment::TrainingPair> pairs = augment::load_pairs(p.pairs);
  CHECK_FALSE(pairs.empty());

  ranker::RankerModel model = ranker::RankerModel::load(p.model);
  CHECK(model.dim() == 8);
  CHECK(model.hidden() == 4);
  CHECK(model.vocab_size() == vocab.size());

  std::string metrics = util::read_file(p.metrics);
  CHECK(metrics.find("map\t") != std::string::npos);
  CHECK(metrics.find("mrr\t") != std::string::npos);
  CHECK(metrics.find("ndcg@3\t") != std::string::npos);

  std::vector<retrieval::RankingList> run = evalkit::load_trec_run(p.dir.str("run.trec"));
  CHECK_FALSE(run.empty());
  std::string qrels_text = util::read_file(p.dir.str("qrels.trec"));
  std::vector<evalkit::Qrel> qrels = evalkit::parse_trec_qrels(qrels_text);
  CHECK_FALSE(qrels.empty());

  for (const char* stage : {"gen", "prepare", "index", "mine", "augment", "train", "eval"}) {
    std::string manifest = util::read_file(p.dir.str(std::string(stage) + ".manifest"));
    CHECK(manifest.find(std::string("stage=") + stage) != std::string::npos);
  }
}

TEST_CASE("augment --drop removes exactly one strategy group") {
  Pipeline p;
  TempDir alt;
  REQUIRE(run_cli({"augment", "--log", p.log, "--vocab", p.vocab, "--matches", p.matches,
                   "--out", alt.str(), "--seed", "3", "--drop", "RQ"}) == 0);
  std::vector<augment::TrainingPair> dropped =
      augment::load_pairs(alt.str("training.jsonl"));
  std::set<std::string> strategies;
  for (const augment::TrainingPair& pair : dropped) {
    if (pair.strategy) strategies.insert(augment::strategy_name(*pair.strategy));
  }
  CHECK(strategies.count("random") == 0);
  CHECK(strategies.count("mask") == 1);

  std::vector<augment::TrainingPair> full = augment::load_pairs(p.pairs);
  CHECK(dropped.size() < full.size());
}

TEST_CASE("train honors the curriculum flag end to end") {
  Pipeline p;
  TempDir alt;
  REQUIRE(run_cli({"train", "--training", p.pairs, "--vocab", p.vocab, "--out", alt.str(),
                   "--dim", "8", "--hidden", "4", "--epochs", "2", "--batch-size", "16",
                   "--seed", "3", "--curriculum"}) == 0);
  ranker::RankerModel curr = ranker::RankerModel::load(alt.str("model.ckpt"));
  ranker::RankerModel plain = ranker::RankerModel::load(p.model);
  CHECK(curr.dim() == plain.dim());
  std::string manifest = util::read_file(alt.str("train.manifest"));
  CHECK(manifest.find("curriculum=true") != std::string::npos);
}

TEST_CASE("a config file supplies defaults that flags override") {
  TempDir dir;
  std::string cfg = dir.str("run.cfg");
  util::write_file(cfg, "# pipeline settings\ngen.sessions = 7\ngen.topics = 4\nseed = 21\n");
  REQUIRE(run_cli({"--config", cfg, "gen", "--out", dir.str()}) == 0);
  std::vector<corpus::Session> sessions = corpus::load_log(dir.str("sessions.jsonl"));
  CHECK(sessions.size() == 7);
  std::string manifest = util::read_file(dir.str("gen.manifest"));
  CHECK(manifest.find("seed=21") != std::string::npos);

  TempDir over;
  REQUIRE(run_cli({"--config", cfg, "gen", "--out", over.str(), "--sessions", "5"}) == 0);
  CHECK(corpus::load_log(over.str("sessions.jsonl")).size() == 5);

  CHECK(run_cli({"--config", dir.str("absent.cfg"), "gen", "--out", dir.str()}) == 1);
}

TEST_CASE("identical seeds reproduce identical artifacts across directories") {
  Pipeline a("17"), b("17");
  CHECK(util::read_file(a.log) == util::read_file(b.log));
  CHECK(util::read_file(a.vocab) == util::read_file(b.vocab));
  CHECK(util::read_file(a.lists) == util::read_file(b.lists));
  CHECK(util::read_file(a.matches) == util::read_file(b.matches));
  CHECK(util::read_file(a.pairs) == util::read_file(b.pairs));
  CHECK(util::read_file(a.model) == util::read_file(b.model));
  CHECK(util::read_file(a.metrics) == util::read_file(b.metrics));
}

TEST_CASE("ablate chains augment, train and eval in one directory") {
  Pipeline p;
  TempDir out;
  REQUIRE(run_cli({"ablate", "--log", p.log, "--vocab", p.vocab, "--matches", p.matches,
                   "--out", out.str(), "--drop", "AQ", "--dim", "8", "--hidden", "4",
                   "--epochs", "1", "--batch-size", "16", "--seed", "3"}) == 0);
  std::vector<augment::TrainingPair> pairs = augment::load_pairs(out.str("training.jsonl"));
  for (const augment::TrainingPair& pair : pairs) {
    if (pair.strategy) CHECK(*pair.strategy != augment::Strategy::ambiguous);
  }
  CHECK(fs::exists(out.path / "model.ckpt"));
  CHECK(fs::exists(out.path / "metrics.tsv"));
  std::string metrics = util::read_file(out.str("metrics.tsv"));
  CHECK(metrics.find("mrr\t") != std::string::npos);
}

TEST_CASE("eval options change the evaluated population and cutoffs") {
  Pipeline p;
  TempDir out;
  REQUIRE(run_cli({"eval", "--log", p.log, "--vocab", p.vocab, "--model", p.model,
                   "--out", out.str(), "--ks", "1,5", "--all-turns"}) == 0);
  std::string metrics = util::read_file(out.str("metrics.tsv"));
  CHECK(metrics.find("ndcg@5\t") != std::string::npos);
  CHECK(metrics.find("ndcg@3\t") == std::string::npos);
  std::string manifest = util::read_file(out.str("eval.manifest"));
  CHECK(manifest.find("require_history=false") != std::string::npos);

  // every turn qualifies without the history requirement, so more queries
  std::string strict = util::read_file(p.dir.str("eval.manifest"));
  auto queries_of = [](const std::string& text) {
    std::size_t at = text.find("queries=");
    REQUIRE(at != std::string::npos);
    return std::stoul(text.substr(at + 8));
  };
  CHECK(queries_of(manifest) > queries_of(strict));
}
