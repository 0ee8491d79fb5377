#include "divergen/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "divergen/errors.hpp"
#include "divergen/rng.hpp"

namespace divergen {

namespace fs = std::filesystem;

std::vector<Episode> load_corpus(const std::string& path, std::ostream* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open corpus: " + path);
  }
  std::vector<Episode> episodes;
  std::string line;
  std::size_t line_no = 0;
  std::size_t blank = 0;
  std::size_t malformed = 0;
  std::size_t content_lines = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      ++blank;
      continue;
    }
    ++content_lines;
    Episode episode;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t tab = line.find('\t', start);
      std::size_t end = tab == std::string::npos ? line.size() : tab;
      if (end > start) {
        episode.turns.push_back(line.substr(start, end - start));
      }
      if (tab == std::string::npos) {
        break;
      }
      start = tab + 1;
    }
    if (episode.turns.size() < 2) {
      ++malformed;
      if (warnings != nullptr) {
        (*warnings) << path << ":" << line_no
                    << ": episode needs at least two turns, skipped\n";
      }
      continue;
    }
    episodes.push_back(std::move(episode));
  }
  if (warnings != nullptr && blank > 0) {
    (*warnings) << path << ": skipped " << blank << " blank line(s)\n";
  }
  if (content_lines > 0 && malformed * 10 > content_lines) {
    throw FormatError(path + ": " + std::to_string(malformed) + " of " +
                      std::to_string(content_lines) +
                      " lines are malformed (over 10%)");
  }
  return episodes;
}

void save_corpus(const std::string& path, const std::vector<Episode>& episodes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open corpus for writing: " + path);
  }
  for (const Episode& episode : episodes) {
    for (std::size_t i = 0; i < episode.turns.size(); ++i) {
      if (i > 0) {
        out << '\t';
      }
      out << episode.turns[i];
    }
    out << '\n';
  }
  if (!out) {
    throw IoError("failed writing corpus: " + path);
  }
}

PairSet derive_pairs(const std::vector<Episode>& episodes, int max_len,
                     bool lowercase) {
  if (max_len < 3) {
    throw ConfigError("max_len must leave room for SOS/EOS");
  }
  std::size_t cap = static_cast<std::size_t>(max_len) - 2;
  PairSet set;
  for (const Episode& episode : episodes) {
    for (std::size_t i = 0; i + 1 < episode.turns.size(); ++i) {
      TokenPair pair;
      pair.source = tokenize(episode.turns[i], lowercase);
      pair.target = tokenize(episode.turns[i + 1], lowercase);
      if (pair.source.size() > cap) {
        pair.source.resize(cap);
      }
      if (pair.target.size() > cap) {
        pair.target.resize(cap);
      }
      if (pair.source.empty() || pair.target.empty()) {
        continue;
      }
      set.pairs.push_back(std::move(pair));
    }
  }
  return set;
}

std::vector<Episode> make_synthetic(int sources, double generic_p,
                                    std::uint64_t seed) {
  if (sources < 1) {
    throw ConfigError("synthetic corpus needs at least one source");
  }
  if (generic_p < 0.0 || generic_p > 1.0) {
    throw ConfigError("generic probability must be in [0, 1]");
  }
  Rng rng(derive_seed(seed, "synth"));
  std::vector<Episode> episodes;
  episodes.reserve(sources);
  const std::string generic = "i do not know";
  for (int i = 0; i < sources; ++i) {
    std::string topic = "thing" + std::to_string(i);
    std::string source = "tell me about " + topic;
    std::string target = rng.next_double() < generic_p
                             ? generic
                             : topic + " means item" + std::to_string(i);
    episodes.push_back(Episode{{source, target}});
  }
  return episodes;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open file: " + path);
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open file for writing: " + path);
  }
  for (const std::string& line : lines) {
    out << line << '\n';
  }
  if (!out) {
    throw IoError("failed writing file: " + path);
  }
}

void run_synth(const std::string& out_path, int sources, double generic_p,
               std::uint64_t seed) {
  save_corpus(out_path, make_synthetic(sources, generic_p, seed));
}

void run_build_vocab(const std::string& corpus_path, const std::string& vocab_path,
                     int max_size, bool lowercase, std::ostream* warnings) {
  std::vector<Episode> episodes = load_corpus(corpus_path, warnings);
  std::vector<TokenSequence> sentences;
  for (const Episode& episode : episodes) {
    for (const std::string& turn : episode.turns) {
      sentences.push_back(tokenize(turn, lowercase));
    }
  }
  auto [vocab, freq] = build_vocab(sentences, max_size);
  save_vocab(vocab_path, vocab, freq);
}

namespace {

std::vector<IdPair> pairs_to_ids(const PairSet& set, const Vocab& vocab) {
  std::vector<IdPair> out;
  out.reserve(set.pairs.size());
  for (const TokenPair& pair : set.pairs) {
    IdPair ids;
    ids.source = encode_ids(pair.source, vocab, /*add_specials=*/true);
    ids.target = encode_ids(pair.target, vocab, /*add_specials=*/false);
    out.push_back(std::move(ids));
  }
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + dir + ": " + ec.message());
  }
}

void write_train_report(const std::string& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open report for writing: " + path);
  }
  for (std::size_t i = 0; i < report.epoch_loss.size(); ++i) {
    out << "epoch=" << (i + 1) << " loss=" << report.epoch_loss[i]
        << " seconds=" << report.epoch_seconds[i] << '\n';
  }
}

LossConfig make_loss(const std::string& kind, const FrequencyTable& freq,
                     double lambda, std::size_t vocab_size) {
  if (kind == "sce") {
    return LossConfig::sce(vocab_size);
  }
  if (kind == "itf") {
    return LossConfig::itf(freq, lambda);
  }
  throw ConfigError("unknown loss '" + kind + "' (expected sce|itf)");
}

}  // namespace

TrainReport run_train(const TrainRun& run, std::ostream* log) {
  std::vector<Episode> episodes = load_corpus(run.corpus_path);
  PairSet pairs = derive_pairs(episodes, run.max_len, run.lowercase);
  if (pairs.pairs.empty()) {
    throw ConfigError("corpus yields no training pairs: " + run.corpus_path);
  }
  auto [vocab, freq] = load_vocab(run.vocab_path);

  ModelConfig config;
  config.num_layers = run.layers;
  config.hidden = run.hidden;
  config.embed = run.embed;
  config.vocab_size = vocab.size();
  config.max_len = run.max_len;
  config.use_attention = run.attention;
  config.seed = run.seed;
  config.validate();

  LossConfig loss = make_loss(run.loss, freq, run.lambda_itf,
                              static_cast<std::size_t>(vocab.size()));
  TrainOptions options;
  options.epochs = run.epochs;
  options.batch_size = run.batch;
  options.lr = run.lr;
  options.seed = run.seed;

  ModelParams params = init_params(config, run.seed);
  std::vector<IdPair> id_pairs = pairs_to_ids(pairs, vocab);
  TrainReport report = train(params, id_pairs, loss, options, log);

  ensure_dir(run.out_dir);
  save_checkpoint(run.out_dir + "/checkpoint.divg", params);
  write_train_report(run.out_dir + "/train_report.txt", report);
  return report;
}

void run_generate(const GenerateRun& run) {
  auto [vocab, freq] = load_vocab(run.vocab_path);
  ModelParams params = load_checkpoint(run.checkpoint_path);
  if (params.config().vocab_size != vocab.size()) {
    throw FormatError("checkpoint vocabulary size does not match vocab file");
  }
  std::vector<std::string> lines = read_lines(run.source_path);
  std::size_t cap = static_cast<std::size_t>(params.config().max_len) - 2;
  std::vector<IdSequence> sources;
  sources.reserve(lines.size());
  for (const std::string& line : lines) {
    TokenSequence tokens = tokenize(line, run.lowercase);
    if (tokens.size() > cap) {
      tokens.resize(cap);  // same truncation as pair derivation
    }
    sources.push_back(encode_ids(tokens, vocab, /*add_specials=*/true));
  }
  WeightVector weights;
  const WeightVector* weights_ptr = nullptr;
  if (run.decode.strategy == Strategy::ITF_INFER) {
    weights = compute_weights(freq, run.decode.lambda_itf_infer);
    weights_ptr = &weights;
  }
  std::vector<std::vector<int>> generated =
      batch_generate(params, sources, run.decode, weights_ptr);
  std::vector<std::string> out_lines;
  out_lines.reserve(generated.size());
  for (const std::vector<int>& ids : generated) {
    TokenSequence tokens = decode_ids(ids, vocab);
    std::string joined;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) {
        joined += ' ';
      }
      joined += tokens[i];
    }
    out_lines.push_back(std::move(joined));
  }
  write_lines(run.out_path, out_lines);
}

EvalReport run_evaluate(const EvaluateRun& run) {
  std::vector<std::string> hyp_lines = read_lines(run.hyp_path);
  std::vector<std::string> ref_lines = read_lines(run.ref_path);
  if (hyp_lines.size() != ref_lines.size()) {
    throw FormatError("hypothesis/reference line counts differ: " +
                      std::to_string(hyp_lines.size()) + " vs " +
                      std::to_string(ref_lines.size()));
  }
  std::vector<TokenSequence> hyps;
  std::vector<TokenSequence> refs;
  hyps.reserve(hyp_lines.size());
  refs.reserve(ref_lines.size());
  for (std::size_t i = 0; i < hyp_lines.size(); ++i) {
    hyps.push_back(tokenize(hyp_lines[i], run.lowercase));
    refs.push_back(tokenize(ref_lines[i], run.lowercase));
  }
  EvalReport report = evaluate_corpus(hyps, refs);
  if (!run.out_dir.empty()) {
    ensure_dir(run.out_dir);
    std::ofstream out(run.out_dir + "/eval.json", std::ios::binary);
    if (!out) {
      throw IoError("cannot write eval.json under " + run.out_dir);
    }
    out << report.to_json() << '\n';
  }
  return report;
}

std::vector<SweepRow> run_sweep(const SweepRun& run, std::ostream* log) {
  if (run.lambdas.empty()) {
    throw ConfigError("sweep needs at least one lambda");
  }
  std::vector<Episode> episodes = load_corpus(run.corpus_path);
  PairSet pairs = derive_pairs(episodes, run.max_len, run.lowercase);
  if (pairs.pairs.empty()) {
    throw ConfigError("corpus yields no training pairs: " + run.corpus_path);
  }

  ensure_dir(run.out_dir);
  std::vector<TokenSequence> sentences;
  for (const Episode& episode : episodes) {
    for (const std::string& turn : episode.turns) {
      sentences.push_back(tokenize(turn, run.lowercase));
    }
  }
  auto [vocab, freq] = build_vocab(sentences, run.vocab_max_size);
  save_vocab(run.out_dir + "/vocab.tsv", vocab, freq);

  // Sources/references for the held-in evaluation of each run.
  std::vector<std::string> source_lines;
  std::vector<std::string> ref_lines;
  for (const TokenPair& pair : pairs.pairs) {
    std::string src;
    for (std::size_t i = 0; i < pair.source.size(); ++i) {
      src += (i > 0 ? " " : "") + pair.source[i];
    }
    std::string ref;
    for (std::size_t i = 0; i < pair.target.size(); ++i) {
      ref += (i > 0 ? " " : "") + pair.target[i];
    }
    source_lines.push_back(std::move(src));
    ref_lines.push_back(std::move(ref));
  }
  write_lines(run.out_dir + "/sources.txt", source_lines);
  write_lines(run.out_dir + "/references.txt", ref_lines);

  std::vector<SweepRow> rows;
  for (double lambda : run.lambdas) {
    std::ostringstream name;
    name << "lambda_" << lambda;
    std::string sub = run.out_dir + "/" + name.str();
    ensure_dir(sub);

    ModelConfig config;
    config.num_layers = run.layers;
    config.hidden = run.hidden;
    config.embed = run.embed;
    config.vocab_size = vocab.size();
    config.max_len = run.max_len;
    config.use_attention = run.attention;
    config.seed = run.seed;
    config.validate();

    LossConfig loss = LossConfig::itf(freq, lambda);
    TrainOptions options;
    options.epochs = run.epochs;
    options.batch_size = run.batch;
    options.lr = run.lr;
    options.seed = run.seed;

    if (log != nullptr) {
      (*log) << "# sweep lambda=" << lambda << '\n';
    }
    ModelParams params = init_params(config, run.seed);
    std::vector<IdPair> id_pairs = pairs_to_ids(pairs, vocab);
    TrainReport report = train(params, id_pairs, loss, options, log);
    save_checkpoint(sub + "/checkpoint.divg", params);
    write_train_report(sub + "/train_report.txt", report);

    GenerateRun gen;
    gen.checkpoint_path = sub + "/checkpoint.divg";
    gen.vocab_path = run.out_dir + "/vocab.tsv";
    gen.source_path = run.out_dir + "/sources.txt";
    gen.out_path = sub + "/responses.txt";
    gen.decode.strategy = Strategy::GREEDY;
    gen.decode.lambda_suppress = run.lambda_suppress;
    gen.decode.max_len = run.max_len;
    gen.decode.seed = run.seed;
    gen.lowercase = run.lowercase;
    run_generate(gen);

    EvaluateRun ev;
    ev.hyp_path = sub + "/responses.txt";
    ev.ref_path = run.out_dir + "/references.txt";
    ev.out_dir = sub;
    ev.lowercase = run.lowercase;
    EvalReport report_eval = run_evaluate(ev);

    rows.push_back(SweepRow{lambda, report_eval.bleu1, report_eval.dist1});
  }

  std::ofstream csv(run.out_dir + "/sweep.csv", std::ios::binary);
  if (!csv) {
    throw IoError("cannot write sweep.csv under " + run.out_dir);
  }
  csv << "lambda,bleu1,dist1\n";
  for (const SweepRow& row : rows) {
    csv << row.lambda << ',' << row.bleu1 << ',' << row.dist1 << '\n';
  }
  return rows;
}

}  // namespace divergen
