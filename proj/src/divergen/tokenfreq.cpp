#include "divergen/tokenfreq.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "divergen/errors.hpp"

namespace divergen {

const char* const kPadToken = "<pad>";
const char* const kUnkToken = "<unk>";
const char* const kSosToken = "<s>";
const char* const kEosToken = "</s>";

namespace {

bool is_word_byte(unsigned char c) {
  // Non-ASCII bytes join words so multi-byte UTF-8 code points are not split.
  return std::isalnum(c) || c >= 0x80;
}

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace

TokenSequence tokenize(const std::string& text, bool lowercase) {
  TokenSequence out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      word.push_back(lowercase && c < 0x80
                         ? static_cast<char>(std::tolower(c))
                         : static_cast<char>(c));
    } else {
      flush();
      if (!is_space_byte(c)) {
        out.push_back(std::string(1, static_cast<char>(c)));
      }
    }
  }
  flush();
  return out;
}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 5) {
    throw ConfigError("vocabulary needs the 4 specials plus at least one token");
  }
  if (tokens_[kPadId] != kPadToken || tokens_[kUnkId] != kUnkToken ||
      tokens_[kSosId] != kSosToken || tokens_[kEosId] != kEosToken) {
    throw ContractError("vocabulary specials must be <pad>, <unk>, <s>, </s> at ids 0..3");
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto inserted = index_.emplace(tokens_[i], static_cast<int>(i));
    if (!inserted.second) {
      throw ContractError("duplicate token in vocabulary: " + tokens_[i]);
    }
  }
}

int Vocab::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocab::contains(const std::string& token) const {
  return index_.find(token) != index_.end();
}

std::pair<Vocab, FrequencyTable> build_vocab(
    const std::vector<TokenSequence>& corpus, int max_size) {
  if (max_size < 5) {
    throw ConfigError("vocab max_size must be at least 5, got " +
                      std::to_string(max_size));
  }
  if (corpus.empty()) {
    throw ConfigError("cannot build a vocabulary from an empty corpus");
  }

  // Raw counts with first-occurrence order for deterministic tie-breaking.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::int64_t> raw;
  for (const TokenSequence& sentence : corpus) {
    for (const std::string& tok : sentence) {
      auto it = raw.find(tok);
      if (it == raw.end()) {
        raw.emplace(tok, 1);
        order.push_back(tok);
      } else {
        ++it->second;
      }
    }
  }

  std::vector<std::size_t> ranking(order.size());
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    ranking[i] = i;
  }
  std::stable_sort(ranking.begin(), ranking.end(),
                   [&](std::size_t lhs, std::size_t rhs) {
                     return raw.at(order[lhs]) > raw.at(order[rhs]);
                   });
  std::size_t keep = std::min<std::size_t>(ranking.size(),
                                           static_cast<std::size_t>(max_size) - 4);

  std::vector<std::string> tokens = {kPadToken, kUnkToken, kSosToken, kEosToken};
  tokens.reserve(keep + 4);
  for (std::size_t i = 0; i < keep; ++i) {
    tokens.push_back(order[ranking[i]]);
  }
  Vocab vocab(std::move(tokens));

  FrequencyTable freq;
  freq.counts.assign(vocab.size(), 0);
  std::int64_t sentences = static_cast<std::int64_t>(corpus.size());
  freq.counts[kSosId] = sentences;
  freq.counts[kEosId] = sentences;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::string& tok = order[i];
    freq.counts[vocab.id_of(tok)] += raw.at(tok);  // OOV accrues to UNK
  }
  // freq^-lambda needs every count >= 1; PAD never appears as a target so it
  // gets the maximum (smallest weight) on top of being masked from the loss.
  freq.counts[kUnkId] = std::max<std::int64_t>(freq.counts[kUnkId], 1);
  freq.counts[kPadId] =
      *std::max_element(freq.counts.begin(), freq.counts.end());
  return {std::move(vocab), std::move(freq)};
}

WeightVector compute_weights(const FrequencyTable& freq, double lambda) {
  if (lambda < 0.0) {
    throw ConfigError("ITF lambda must be nonnegative, got " +
                      std::to_string(lambda));
  }
  WeightVector out;
  out.lambda = lambda;
  out.w.resize(freq.size());
  for (std::size_t i = 0; i < freq.size(); ++i) {
    if (freq.counts[i] < 1) {
      throw ContractError("frequency table count must be >= 1 for id " +
                          std::to_string(i));
    }
    out.w[i] = lambda == 0.0
                   ? 1.0
                   : 1.0 / std::pow(static_cast<double>(freq.counts[i]), lambda);
  }
  return out;
}

IdSequence encode_ids(const TokenSequence& tokens, const Vocab& vocab,
                      bool add_specials) {
  IdSequence ids;
  ids.reserve(tokens.size() + (add_specials ? 2 : 0));
  if (add_specials) {
    ids.push_back(kSosId);
  }
  for (const std::string& tok : tokens) {
    ids.push_back(vocab.id_of(tok));
  }
  if (add_specials) {
    ids.push_back(kEosId);
  }
  return ids;
}

TokenSequence decode_ids(const IdSequence& ids, const Vocab& vocab) {
  TokenSequence out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= vocab.size()) {
      throw ContractError("token id " + std::to_string(id) +
                          " out of range for vocabulary of size " +
                          std::to_string(vocab.size()));
    }
    if (id == kPadId || id == kUnkId || id == kSosId || id == kEosId) {
      continue;
    }
    out.push_back(vocab.token(id));
  }
  return out;
}

void save_vocab(const std::string& path, const Vocab& vocab,
                const FrequencyTable& freq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open vocab file for writing: " + path);
  }
  out << "#divergen-vocab v1 size=" << vocab.size() << " lambda-independent\n";
  for (int id = 0; id < vocab.size(); ++id) {
    out << vocab.token(id) << '\t' << id << '\t' << freq.counts[id] << '\n';
  }
  if (!out) {
    throw IoError("failed writing vocab file: " + path);
  }
}

std::pair<Vocab, FrequencyTable> load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open vocab file: " + path);
  }
  std::string header;
  if (!std::getline(in, header) || header.rfind("#divergen-vocab v1 ", 0) != 0) {
    throw FormatError("not a divergen vocab file: " + path);
  }
  std::vector<std::string> tokens;
  std::vector<std::int64_t> counts;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos
                                             : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": expected <token>\\t<id>\\t<count>");
    }
    std::string tok = line.substr(0, t1);
    long id = 0;
    long long count = 0;
    try {
      id = std::stol(line.substr(t1 + 1, t2 - t1 - 1));
      count = std::stoll(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": malformed id or count");
    }
    if (id != static_cast<long>(tokens.size())) {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": ids must be dense and ascending");
    }
    tokens.push_back(std::move(tok));
    counts.push_back(count);
  }
  Vocab vocab(std::move(tokens));
  FrequencyTable freq;
  freq.counts = std::move(counts);
  return {std::move(vocab), std::move(freq)};
}

}  // namespace divergen
