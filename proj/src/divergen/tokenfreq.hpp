#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace divergen {

using TokenSequence = std::vector<std::string>;
using IdSequence = std::vector<int>;

// The four reserved ids. Every vocabulary places them at 0..3 in this order.
enum SpecialToken : int {
  kPadId = 0,
  kUnkId = 1,
  kSosId = 2,
  kEosId = 3,
};

extern const char* const kPadToken;  // "<pad>"
extern const char* const kUnkToken;  // "<unk>"
extern const char* const kSosToken;  // "<s>"
extern const char* const kEosToken;  // "</s>"

/// Deterministic split: maximal runs of letters/digits become word tokens,
/// every other non-whitespace character becomes its own token. Bytes >= 0x80
/// are treated as word characters so UTF-8 sequences stay inside words;
/// lowercasing is ASCII-only.
TokenSequence tokenize(const std::string& text, bool lowercase);

/// Token <-> id bijection. Ids are dense in [0, size()); the specials occupy
/// 0..3. Immutable once built.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_[id]; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // UNK for out-of-vocabulary tokens.
  int id_of(const std::string& token) const;
  bool contains(const std::string& token) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Per-token-id occurrence counts over the training set. SOS/EOS count once
/// per sentence; PAD is clamped to the table maximum so its ITF weight is
/// minimal; every other id has count >= 1.
struct FrequencyTable {
  std::vector<std::int64_t> counts;

  std::int64_t count(int id) const { return counts[id]; }
  std::size_t size() const { return counts.size(); }
};

/// w_c = freq(token_c)^-lambda. lambda = 0 gives the all-ones vector, which
/// makes the weighted loss coincide with plain softmax cross-entropy.
struct WeightVector {
  std::vector<double> w;
  double lambda = 0.0;

  static WeightVector ones(std::size_t n) {
    return WeightVector{std::vector<double>(n, 1.0), 0.0};
  }

  double operator[](std::size_t i) const { return w[i]; }
  std::size_t size() const { return w.size(); }
};

/// Builds the vocabulary (4 specials + the max_size-4 most frequent tokens,
/// ties broken by first occurrence) and the frequency table over `corpus`.
/// Out-of-vocabulary occurrences accrue to UNK.
std::pair<Vocab, FrequencyTable> build_vocab(
    const std::vector<TokenSequence>& corpus, int max_size);

WeightVector compute_weights(const FrequencyTable& freq, double lambda);

IdSequence encode_ids(const TokenSequence& tokens, const Vocab& vocab,
                      bool add_specials);
TokenSequence decode_ids(const IdSequence& ids, const Vocab& vocab);

// Vocab file: header line then one `<token>\t<id>\t<count>` line per token.
void save_vocab(const std::string& path, const Vocab& vocab,
                const FrequencyTable& freq);
std::pair<Vocab, FrequencyTable> load_vocab(const std::string& path);

}  // namespace divergen
