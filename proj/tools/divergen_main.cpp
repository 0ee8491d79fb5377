// Command-line front end: synth, build-vocab, train, generate, evaluate,
// sweep. Exit codes: 0 success, 1 usage, 2 I/O, 3 format, 4 numeric.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "divergen/errors.hpp"
#include "divergen/pipeline.hpp"

namespace {

using namespace divergen;

std::vector<double> parse_lambda_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) {
      continue;
    }
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad lambda value in list: " + item);
    }
  }
  if (out.empty()) {
    throw ConfigError("--lambdas needs at least one value");
  }
  return out;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"divergen: diversity-promoting dialogue generation lab"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dialogue corpus");
  std::string synth_out;
  int synth_sources = 100;
  double synth_p = 0.6;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "Corpus output path")->required();
  synth->add_option("--sources", synth_sources, "Number of distinct sources");
  synth->add_option("--generic-p", synth_p, "Probability of the generic response");
  synth->add_option("--seed", synth_seed, "Random seed");

  // build-vocab
  auto* bv = app.add_subcommand("build-vocab", "Build vocabulary + frequency table");
  std::string bv_corpus;
  std::string bv_vocab;
  int bv_max_size = 10000;
  bool bv_keep_case = false;
  bv->add_option("--corpus", bv_corpus, "Training corpus")->required();
  bv->add_option("--vocab", bv_vocab, "Vocab file to write")->required();
  bv->add_option("--max-size", bv_max_size, "Maximum vocabulary size");
  bv->add_flag("--keep-case", bv_keep_case, "Skip lowercasing");

  // train
  auto* tr = app.add_subcommand("train", "Train the encoder-decoder");
  TrainRun train_run;
  bool tr_keep_case = false;
  tr->add_option("--corpus", train_run.corpus_path, "Training corpus")->required();
  tr->add_option("--vocab", train_run.vocab_path, "Vocab file")->required();
  tr->add_option("--out", train_run.out_dir, "Run directory")->required();
  tr->add_option("--loss", train_run.loss, "Loss: sce|itf");
  tr->add_option("--lambda-itf", train_run.lambda_itf, "ITF loss lambda");
  tr->add_option("--layers", train_run.layers, "Encoder/decoder layers");
  tr->add_option("--hidden", train_run.hidden, "Hidden units");
  tr->add_option("--embed", train_run.embed, "Embedding size");
  tr->add_option("--max-len", train_run.max_len, "Maximum sequence length");
  tr->add_option("--epochs", train_run.epochs, "Training epochs");
  tr->add_option("--batch", train_run.batch, "Mini-batch size");
  tr->add_option("--lr", train_run.lr, "Adam learning rate");
  tr->add_option("--seed", train_run.seed, "Random seed");
  tr->add_flag("--attention", train_run.attention, "Scaled dot-product attention");
  tr->add_flag("--keep-case", tr_keep_case, "Skip lowercasing");

  // generate
  auto* ge = app.add_subcommand("generate", "Decode responses for source lines");
  GenerateRun gen_run;
  std::string ge_strategy = "greedy";
  bool ge_keep_case = false;
  ge->add_option("--checkpoint", gen_run.checkpoint_path, "Model checkpoint")->required();
  ge->add_option("--vocab", gen_run.vocab_path, "Vocab file")->required();
  ge->add_option("--sources", gen_run.source_path, "Source sentences, one per line")
      ->required();
  ge->add_option("--out", gen_run.out_path, "Responses file to write")->required();
  ge->add_option("--strategy", ge_strategy, "greedy|mmi|itf-infer|noisy");
  ge->add_option("--lambda-mmi", gen_run.decode.lambda_mmi, "Anti-LM strength");
  ge->add_option("--gamma", gen_run.decode.gamma, "Anti-LM step cutoff");
  ge->add_option("--lambda-itf", gen_run.decode.lambda_itf_infer, "ITF inference lambda");
  ge->add_option("--lambda-noise", gen_run.decode.lambda_noise, "Noise scale");
  ge->add_option("--lambda-suppress", gen_run.decode.lambda_suppress,
                 "Repetition suppressor lambda");
  ge->add_option("--max-len", gen_run.decode.max_len, "Maximum response length");
  ge->add_option("--seed", gen_run.decode.seed, "Random seed");
  ge->add_flag("--keep-case", ge_keep_case, "Skip lowercasing");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score hypotheses against references");
  EvaluateRun eval_run;
  bool ev_keep_case = false;
  ev->add_option("--hyp", eval_run.hyp_path, "Hypotheses, one per line")->required();
  ev->add_option("--ref", eval_run.ref_path, "References, one per line")->required();
  ev->add_option("--out", eval_run.out_dir, "Run directory for eval.json");
  ev->add_flag("--keep-case", ev_keep_case, "Skip lowercasing");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Train/generate/evaluate per ITF lambda");
  SweepRun sweep_run;
  std::string sw_lambdas = "0,0.2,0.4,0.6";
  bool sw_keep_case = false;
  sw->add_option("--corpus", sweep_run.corpus_path, "Training corpus")->required();
  sw->add_option("--out", sweep_run.out_dir, "Sweep directory")->required();
  sw->add_option("--lambdas", sw_lambdas, "Comma-separated lambda list");
  sw->add_option("--max-size", sweep_run.vocab_max_size, "Maximum vocabulary size");
  sw->add_option("--layers", sweep_run.layers, "Encoder/decoder layers");
  sw->add_option("--hidden", sweep_run.hidden, "Hidden units");
  sw->add_option("--embed", sweep_run.embed, "Embedding size");
  sw->add_option("--max-len", sweep_run.max_len, "Maximum sequence length");
  sw->add_option("--epochs", sweep_run.epochs, "Training epochs");
  sw->add_option("--batch", sweep_run.batch, "Mini-batch size");
  sw->add_option("--lr", sweep_run.lr, "Adam learning rate");
  sw->add_option("--seed", sweep_run.seed, "Random seed");
  sw->add_option("--lambda-suppress", sweep_run.lambda_suppress,
                 "Repetition suppressor lambda at generation");
  sw->add_flag("--attention", sweep_run.attention, "Scaled dot-product attention");
  sw->add_flag("--keep-case", sw_keep_case, "Skip lowercasing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  if (synth->parsed()) {
    run_synth(synth_out, synth_sources, synth_p, synth_seed);
    return kExitOk;
  }
  if (bv->parsed()) {
    run_build_vocab(bv_corpus, bv_vocab, bv_max_size, !bv_keep_case, &std::cerr);
    return kExitOk;
  }
  if (tr->parsed()) {
    train_run.lowercase = !tr_keep_case;
    run_train(train_run, &std::cout);
    return kExitOk;
  }
  if (ge->parsed()) {
    gen_run.decode.strategy = parse_strategy(ge_strategy);
    gen_run.lowercase = !ge_keep_case;
    run_generate(gen_run);
    return kExitOk;
  }
  if (ev->parsed()) {
    eval_run.lowercase = !ev_keep_case;
    EvalReport report = run_evaluate(eval_run);
    std::cout << report.to_json() << '\n';
    return kExitOk;
  }
  if (sw->parsed()) {
    sweep_run.lambdas = parse_lambda_list(sw_lambdas);
    sweep_run.lowercase = !sw_keep_case;
    std::vector<SweepRow> rows = run_sweep(sweep_run, &std::cout);
    std::cout << "lambda,bleu1,dist1\n";
    for (const SweepRow& row : rows) {
      std::cout << row.lambda << ',' << row.bleu1 << ',' << row.dist1 << '\n';
    }
    return kExitOk;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
