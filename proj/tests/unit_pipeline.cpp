#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <doctest.h>

#include "divergen/errors.hpp"
#include "divergen/pipeline.hpp"

using namespace divergen;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("divergen_test_" + name);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("load_corpus parses episodes, skips blanks, reports malformed lines") {
  TempDir dir("corpus");
  std::string content =
      "hi\thello there\n"
      "\n"
      "a\tb\tc\n"
      "lonely\n";
  for (int i = 0; i < 7; ++i) {
    content += "x\ty\n";
  }
  write_file(dir.file("c.txt"), content);
  std::ostringstream warnings;
  std::vector<Episode> episodes = load_corpus(dir.file("c.txt"), &warnings);
  REQUIRE(episodes.size() == 9);
  CHECK(episodes[0].turns == std::vector<std::string>{"hi", "hello there"});
  CHECK(episodes[1].turns.size() == 3);
  CHECK(warnings.str().find(":4:") != std::string::npos);
  CHECK(warnings.str().find("blank") != std::string::npos);
}

TEST_CASE("load_corpus fails above ten percent malformed") {
  TempDir dir("corpus_bad");
  std::string content;
  for (int i = 0; i < 8; ++i) {
    content += "a\tb\n";
  }
  content += "broken\nbroken\n";
  write_file(dir.file("c.txt"), content);
  CHECK_THROWS_AS(load_corpus(dir.file("c.txt")), FormatError);
  CHECK_THROWS_AS(load_corpus(dir.file("missing.txt")), IoError);
}

TEST_CASE("an episode of k turns yields k-1 pairs") {
  Episode episode{{"one two", "three", "four five six", "seven"}};
  PairSet set = derive_pairs({episode}, 28, true);
  CHECK(set.pairs.size() == 3);
  CHECK(set.pairs[0].source == TokenSequence{"one", "two"});
  CHECK(set.pairs[0].target == TokenSequence{"three"});
  CHECK(set.pairs[2].source == TokenSequence{"four", "five", "six"});
}

TEST_CASE("derive_pairs truncates to max_len - 2") {
  Episode episode{{"a b c d e f g h", "z"}};
  PairSet set = derive_pairs({episode}, 6, true);
  REQUIRE(set.pairs.size() == 1);
  CHECK(set.pairs[0].source.size() == 4);
}

TEST_CASE("make_synthetic honors the generic probability") {
  std::vector<Episode> all_generic = make_synthetic(50, 1.0, 3);
  for (const Episode& e : all_generic) {
    CHECK(e.turns[1] == "i do not know");
  }

  std::vector<Episode> none_generic = make_synthetic(50, 0.0, 3);
  std::set<std::string> distinct;
  for (const Episode& e : none_generic) {
    CHECK(e.turns[1] != "i do not know");
    distinct.insert(e.turns[1]);
  }
  CHECK(distinct.size() == 50);

  // Binomial: 60 +- 10 at 95% for S=100, p=0.6.
  std::vector<Episode> mixed = make_synthetic(100, 0.6, 7);
  int generic = 0;
  for (const Episode& e : mixed) {
    generic += e.turns[1] == "i do not know" ? 1 : 0;
  }
  CHECK(generic >= 50);
  CHECK(generic <= 70);

  // Deterministic given the seed.
  std::vector<Episode> again = make_synthetic(100, 0.6, 7);
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    CHECK(mixed[i].turns == again[i].turns);
  }
}

TEST_CASE("generic and specific token inventories are disjoint") {
  std::vector<Episode> episodes = make_synthetic(40, 0.5, 11);
  std::set<std::string> generic_tokens;
  std::set<std::string> specific_tokens;
  for (const Episode& e : episodes) {
    for (const std::string& tok : tokenize(e.turns[1], true)) {
      if (e.turns[1] == "i do not know") {
        generic_tokens.insert(tok);
      } else {
        specific_tokens.insert(tok);
      }
    }
  }
  for (const std::string& tok : generic_tokens) {
    CHECK(specific_tokens.count(tok) == 0);
  }
}

TEST_CASE("synth then load round-trips") {
  TempDir dir("synth");
  run_synth(dir.file("c.txt"), 10, 0.5, 5);
  std::vector<Episode> episodes = load_corpus(dir.file("c.txt"));
  CHECK(episodes.size() == 10);
  for (const Episode& e : episodes) {
    CHECK(e.turns.size() == 2);
  }
}

TEST_CASE("full train/generate/evaluate run is wired together") {
  TempDir dir("run");
  run_synth(dir.file("c.txt"), 12, 0.5, 9);
  run_build_vocab(dir.file("c.txt"), dir.file("v.tsv"), 100, true);

  TrainRun tr;
  tr.corpus_path = dir.file("c.txt");
  tr.vocab_path = dir.file("v.tsv");
  tr.out_dir = dir.file("run1");
  tr.hidden = 16;
  tr.embed = 16;
  tr.epochs = 3;
  tr.seed = 4;
  TrainReport report = run_train(tr);
  CHECK(report.epoch_loss.size() == 3);
  CHECK(fs::exists(dir.file("run1") + "/checkpoint.divg"));
  CHECK(fs::exists(dir.file("run1") + "/train_report.txt"));

  std::vector<std::string> sources;
  for (const Episode& e : load_corpus(dir.file("c.txt"))) {
    sources.push_back(e.turns[0]);
  }
  write_lines(dir.file("sources.txt"), sources);

  GenerateRun gen;
  gen.checkpoint_path = dir.file("run1") + "/checkpoint.divg";
  gen.vocab_path = dir.file("v.tsv");
  gen.source_path = dir.file("sources.txt");
  gen.out_path = dir.file("hyp.txt");
  run_generate(gen);
  CHECK(read_lines(dir.file("hyp.txt")).size() == sources.size());

  EvaluateRun ev;
  ev.hyp_path = dir.file("hyp.txt");
  ev.ref_path = dir.file("hyp.txt");
  ev.out_dir = dir.file("run1");
  EvalReport eval = run_evaluate(ev);
  CHECK(eval.bleu1 == doctest::Approx(100.0));
  CHECK(fs::exists(dir.file("run1") + "/eval.json"));

  // Overlong and blank source lines still produce aligned output lines.
  std::string long_line;
  for (int i = 0; i < 60; ++i) {
    long_line += "pad ";
  }
  write_lines(dir.file("weird.txt"), {long_line, "", "tell me about thing1"});
  gen.source_path = dir.file("weird.txt");
  gen.out_path = dir.file("weird_out.txt");
  run_generate(gen);
  CHECK(read_lines(dir.file("weird_out.txt")).size() == 3);
}

TEST_CASE("training twice with one seed gives identical checkpoints") {
  TempDir dir("det");
  run_synth(dir.file("c.txt"), 10, 0.5, 21);
  run_build_vocab(dir.file("c.txt"), dir.file("v.tsv"), 100, true);
  TrainRun tr;
  tr.corpus_path = dir.file("c.txt");
  tr.vocab_path = dir.file("v.tsv");
  tr.hidden = 16;
  tr.embed = 16;
  tr.epochs = 4;
  tr.seed = 33;
  tr.out_dir = dir.file("a");
  run_train(tr);
  tr.out_dir = dir.file("b");
  run_train(tr);
  CHECK(slurp(dir.file("a") + "/checkpoint.divg") ==
        slurp(dir.file("b") + "/checkpoint.divg"));
}

TEST_CASE("sweep lambda=0 reproduces a plain SCE run bit for bit") {
  TempDir dir("sweep");
  run_synth(dir.file("c.txt"), 10, 0.5, 13);

  SweepRun sw;
  sw.corpus_path = dir.file("c.txt");
  sw.out_dir = dir.file("sweep");
  sw.lambdas = {0.0, 0.4};
  sw.vocab_max_size = 100;
  sw.hidden = 16;
  sw.embed = 16;
  sw.epochs = 3;
  sw.seed = 15;
  std::vector<SweepRow> rows = run_sweep(sw);
  REQUIRE(rows.size() == 2);
  CHECK(fs::exists(dir.file("sweep") + "/sweep.csv"));

  // Plain SCE with the same seed and vocabulary.
  TrainRun tr;
  tr.corpus_path = dir.file("c.txt");
  tr.vocab_path = dir.file("sweep") + "/vocab.tsv";
  tr.out_dir = dir.file("sce");
  tr.loss = "sce";
  tr.hidden = 16;
  tr.embed = 16;
  tr.epochs = 3;
  tr.seed = 15;
  run_train(tr);

  CHECK(slurp(dir.file("sweep") + "/lambda_0/checkpoint.divg") ==
        slurp(dir.file("sce") + "/checkpoint.divg"));
}

TEST_SUITE_END();
