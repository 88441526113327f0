#pragma once

#include "alpr/textmetrics.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alpr {

using TokenId = int;

/// Generation settings. Defaults are the recognizer's inference configuration.
struct GenerationConfig {
  int num_beams = 3;
  int max_length = 20;  // generated tokens, BOS excluded, EOS included
  double length_penalty = 1.0;
  int no_repeat_ngram_size = 0;  // 0 disables n-gram blocking
  bool early_stopping = true;

  void validate() const;
};

struct Hypothesis {
  std::vector<TokenId> tokens;  // starts with BOS
  double log_score = 0.0;
  bool finished = false;  // true once EOS was emitted

  std::size_t generated_length() const { return tokens.empty() ? 0 : tokens.size() - 1; }
};

/// log_score / generated_length^length_penalty.
double ranking_score(const Hypothesis& h, double length_penalty);

/// Log-probabilities over the vocabulary for the next token.
using StepDistribution = Eigen::VectorXd;
using LogProbProvider = std::function<StepDistribution(std::span<const TokenId> prefix)>;

struct SpecialTokens {
  TokenId bos = 0;
  TokenId eos = 1;
};

/// Tokens that would complete an n-gram already present in `prefix`.
/// Sorted, unique; empty when n == 0.
std::vector<TokenId> ngram_mask(std::span<const TokenId> prefix, int n);

/// Beam search over a log-probability provider.
///
/// Each step expands every live beam over the vocabulary (minus n-gram-banned
/// and -inf tokens) and keeps the best `num_beams` candidates by cumulative
/// log score; ties go to the lexicographically smaller token sequence.
/// Candidates ending in EOS, or reaching max_length, leave the beam.
///
/// With early stopping the search halts once `num_beams` ended hypotheses
/// exist and the worst of them strictly beats log_score / max_length^penalty
/// for every live beam. Because log scores never increase, that is an upper
/// bound on any completion, so early stopping never changes the result.
///
/// Returns every ended hypothesis, best ranking score first.
std::vector<Hypothesis> beam_search(const LogProbProvider& provider, SpecialTokens special,
                                    const GenerationConfig& config = {});

/// `id<TAB>token` per line. Ids must be dense from 0 and the table must hold
/// a BOS (`<s>` or `<bos>`) and an EOS (`</s>` or `<eos>`) entry.
class Vocabulary {
 public:
  static Vocabulary parse(std::string_view text);
  static Vocabulary load(const std::filesystem::path& path);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  SpecialTokens special() const { return special_; }
  /// Concatenates tokens, skipping BOS and EOS.
  std::string detokenize(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> tokens_;
  SpecialTokens special_;
};

/// Text fixture of per-sample log-probability rows:
///
///     sample_id<TAB>key<TAB>logp_0 logp_1 ... logp_{V-1}
///
/// `key` is a comma-joined prefix (BOS first), `@k` for "any prefix with k
/// generated tokens", or `*` as the sample's fallback. Exact prefixes win over
/// `@k`, which wins over `*`. `#` starts a comment line; `-inf` is accepted.
class LogitFixture {
 public:
  static LogitFixture parse(std::string_view text, std::size_t vocab_size);
  static LogitFixture load(const std::filesystem::path& path, std::size_t vocab_size);

  const std::vector<std::string>& samples() const { return order_; }
  LogProbProvider provider(const std::string& sample_id) const;

 private:
  struct Table {
    std::map<std::vector<TokenId>, StepDistribution> by_prefix;
    std::map<std::size_t, StepDistribution> by_step;
    std::optional<StepDistribution> fallback;
  };
  std::vector<std::string> order_;
  std::map<std::string, Table> tables_;
};

struct DecodedSample {
  std::string id;
  Transcript transcript;
  Hypothesis best;
};

std::vector<DecodedSample> decode_fixture(const LogitFixture& fixture, const Vocabulary& vocab,
                                          const GenerationConfig& config = {});
std::vector<DecodedSample> decode_fixture(const std::filesystem::path& logits_file,
                                          const std::filesystem::path& vocab_file,
                                          const GenerationConfig& config = {});

}  // namespace alpr
