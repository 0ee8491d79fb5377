#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "divergen/decoding.hpp"
#include "divergen/metrics.hpp"
#include "divergen/objectives.hpp"
#include "divergen/seq2seq.hpp"
#include "divergen/tokenfreq.hpp"

namespace divergen {

/// One dialogue: an ordered sequence of utterances. Adjacent turns form the
/// (source, target) training pairs.
struct Episode {
  std::vector<std::string> turns;
};

/// Corpus file: UTF-8, one episode per line, turns separated by TAB. Blank
/// lines are skipped; lines with fewer than two turns are reported to
/// `warnings` with their line number. More than 10% malformed lines is a
/// format error.
std::vector<Episode> load_corpus(const std::string& path,
                                 std::ostream* warnings = nullptr);
void save_corpus(const std::string& path, const std::vector<Episode>& episodes);

struct TokenPair {
  TokenSequence source;
  TokenSequence target;
};

struct PairSet {
  std::vector<TokenPair> pairs;
};

/// Adjacent-turn pairing; both sides tokenized and truncated to max_len - 2
/// (room for SOS/EOS). Pairs with an empty side are dropped.
PairSet derive_pairs(const std::vector<Episode>& episodes, int max_len,
                     bool lowercase);

/// Desk-scale stand-in corpus: `sources` distinct source sentences, each
/// answered by one shared generic response with probability `generic_p`,
/// otherwise by a source-specific response. Generic and specific responses
/// use disjoint token inventories.
std::vector<Episode> make_synthetic(int sources, double generic_p,
                                    std::uint64_t seed);

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

// ---------------------------------------------------------------------------
// Run orchestration backing the CLI subcommands.

struct TrainRun {
  std::string corpus_path;
  std::string vocab_path;
  std::string out_dir;
  int layers = 2;
  int hidden = 64;
  int embed = 64;
  int max_len = 28;
  bool attention = false;
  std::string loss = "sce";  // "sce" or "itf"
  double lambda_itf = 0.4;
  int epochs = 100;
  int batch = 32;
  double lr = 3e-4;
  std::uint64_t seed = 0;
  bool lowercase = true;
};

struct GenerateRun {
  std::string checkpoint_path;
  std::string vocab_path;
  std::string source_path;
  std::string out_path;
  DecodeConfig decode;
  bool lowercase = true;
};

struct EvaluateRun {
  std::string hyp_path;
  std::string ref_path;
  std::string out_dir;  // eval.json lands here when non-empty
  bool lowercase = true;
};

struct SweepRun {
  std::string corpus_path;
  std::string out_dir;
  std::vector<double> lambdas;
  int vocab_max_size = 10000;
  int layers = 2;
  int hidden = 64;
  int embed = 64;
  int max_len = 28;
  bool attention = false;
  int epochs = 100;
  int batch = 32;
  double lr = 3e-4;
  std::uint64_t seed = 0;
  double lambda_suppress = 1.0;
  bool lowercase = true;
};

void run_synth(const std::string& out_path, int sources, double generic_p,
               std::uint64_t seed);
void run_build_vocab(const std::string& corpus_path, const std::string& vocab_path,
                     int max_size, bool lowercase, std::ostream* warnings = nullptr);
TrainReport run_train(const TrainRun& run, std::ostream* log = nullptr);
void run_generate(const GenerateRun& run);
EvalReport run_evaluate(const EvaluateRun& run);

struct SweepRow {
  double lambda = 0.0;
  double bleu1 = 0.0;
  double dist1 = 0.0;
};
std::vector<SweepRow> run_sweep(const SweepRun& run, std::ostream* log = nullptr);

}  // namespace divergen
