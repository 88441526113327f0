#include "alpr/seqdecode.hpp"

#include "alpr/error.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace alpr {

void GenerationConfig::validate() const {
  if (num_beams < 1) throw DataError("num_beams must be >= 1");
  if (max_length < 1) throw DataError("max_length must be >= 1");
  if (!(length_penalty > 0.0)) throw DataError("length_penalty must be > 0");
  if (no_repeat_ngram_size < 0) throw DataError("no_repeat_ngram_size must be >= 0");
}

double ranking_score(const Hypothesis& h, double length_penalty) {
  const auto n = static_cast<double>(h.generated_length());
  if (n == 0.0) return h.log_score;
  return h.log_score / std::pow(n, length_penalty);
}

std::vector<TokenId> ngram_mask(std::span<const TokenId> prefix, int n) {
  std::vector<TokenId> banned;
  if (n <= 0 || prefix.size() < static_cast<std::size_t>(n)) return banned;
  const std::size_t k = static_cast<std::size_t>(n) - 1;
  const auto tail = prefix.last(k);
  for (std::size_t start = 0; start + k < prefix.size(); ++start) {
    if (std::equal(tail.begin(), tail.end(), prefix.begin() + static_cast<std::ptrdiff_t>(start)))
      banned.push_back(prefix[start + k]);
  }
  std::sort(banned.begin(), banned.end());
  banned.erase(std::unique(banned.begin(), banned.end()), banned.end());
  return banned;
}

namespace {

constexpr double kNormalizationTolerance = 1e-6;

void check_distribution(const StepDistribution& d, Eigen::Index expected_size) {
  if (d.size() == 0) throw DataError("provider returned an empty vocabulary");
  if (expected_size >= 0 && d.size() != expected_size)
    throw DataError("provider changed vocabulary size between steps");
  if ((d.array() > kNormalizationTolerance).any() || d.array().isNaN().any())
    throw DataError("provider returned a positive or NaN log-probability");
  const double mass = d.array().exp().sum();
  if (std::abs(mass - 1.0) > kNormalizationTolerance)
    throw DataError("provider distribution not normalized (sum of probabilities " +
                    detail::shortest(mass) + ")");
}

// Higher score first; equal scores fall back to lexicographic token order.
bool better(double score_a, const std::vector<TokenId>& a, double score_b,
            const std::vector<TokenId>& b) {
  if (score_a != score_b) return score_a > score_b;
  return a < b;
}

}  // namespace

std::vector<Hypothesis> beam_search(const LogProbProvider& provider, SpecialTokens special,
                                    const GenerationConfig& config) {
  config.validate();
  const auto beams = static_cast<std::size_t>(config.num_beams);
  const double max_norm = std::pow(static_cast<double>(config.max_length), config.length_penalty);

  std::vector<Hypothesis> live{Hypothesis{{special.bos}, 0.0, false}};
  std::vector<Hypothesis> ended;
  Eigen::Index vocab_size = -1;

  for (int step = 1; step <= config.max_length && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const auto& h : live) {
      const StepDistribution logp = provider(h.tokens);
      check_distribution(logp, vocab_size);
      vocab_size = logp.size();
      if (special.eos < 0 || special.eos >= vocab_size)
        throw DataError("EOS id outside the provider's vocabulary");
      const auto banned = ngram_mask(h.tokens, config.no_repeat_ngram_size);
      for (Eigen::Index v = 0; v < vocab_size; ++v) {
        const auto id = static_cast<TokenId>(v);
        if (std::isinf(logp[v]) || std::binary_search(banned.begin(), banned.end(), id)) continue;
        Hypothesis c{h.tokens, h.log_score + logp[v], id == special.eos};
        c.tokens.push_back(id);
        candidates.push_back(std::move(c));
      }
    }

    // All candidates share one length, so cumulative score orders them the
    // same way the length-normalized ranking score would.
    const std::size_t keep = std::min(beams, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Hypothesis& a, const Hypothesis& b) {
                        return better(a.log_score, a.tokens, b.log_score, b.tokens);
                      });
    candidates.resize(keep);

    live.clear();
    for (auto& c : candidates) {
      if (c.finished || step == config.max_length)
        ended.push_back(std::move(c));
      else
        live.push_back(std::move(c));
    }

    if (config.early_stopping && ended.size() >= beams && !live.empty()) {
      std::vector<double> scores;
      for (const auto& e : ended) scores.push_back(ranking_score(e, config.length_penalty));
      std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(beams - 1),
                       scores.end(), std::greater<>());
      const double worst_kept = scores[beams - 1];
      double best_possible = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_possible = std::max(best_possible, h.log_score / max_norm);
      if (worst_kept > best_possible) break;
    }
  }

  std::vector<std::pair<double, Hypothesis>> ranked;
  ranked.reserve(ended.size());
  for (auto& e : ended) ranked.emplace_back(ranking_score(e, config.length_penalty), std::move(e));
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return better(a.first, a.second.tokens, b.first, b.second.tokens);
  });
  std::vector<Hypothesis> out;
  out.reserve(ranked.size());
  for (auto& r : ranked) out.push_back(std::move(r.second));
  return out;
}

// --- Vocabulary --------------------------------------------------------------

Vocabulary Vocabulary::parse(std::string_view text) {
  Vocabulary vocab;
  std::map<int, std::string> entries;
  int line_no = 0;
  for (const auto line : detail::lines(text)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    const std::string where = "vocabulary line " + std::to_string(line_no);
    if (tab == std::string_view::npos) throw ParseError(where, "expected 'id<TAB>token'");
    const auto id = detail::parse_int<int>(line.substr(0, tab));
    if (!id || *id < 0) throw ParseError(where, "invalid token id");
    if (!entries.emplace(*id, std::string(line.substr(tab + 1))).second)
      throw ParseError(where, "duplicate token id " + std::to_string(*id));
  }
  if (entries.empty()) throw DataError("empty vocabulary");
  if (entries.rbegin()->first != static_cast<int>(entries.size()) - 1)
    throw DataError("vocabulary ids must be dense from 0");

  int bos = -1;
  int eos = -1;
  for (auto& [id, token] : entries) {
    if (token == "<s>" || token == "<bos>") bos = id;
    if (token == "</s>" || token == "<eos>") eos = id;
    vocab.tokens_.push_back(std::move(token));
  }
  if (bos < 0 || eos < 0) throw DataError("vocabulary must contain BOS and EOS entries");
  vocab.special_ = {bos, eos};
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  return parse(detail::read_file(path));
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw DataError("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (const TokenId id : ids) {
    if (id == special_.bos || id == special_.eos) continue;
    out += token(id);
  }
  return out;
}

// --- Logit fixtures ----------------------------------------------------------

LogitFixture LogitFixture::parse(std::string_view text, std::size_t vocab_size) {
  LogitFixture fixture;
  int line_no = 0;
  for (const auto line : detail::lines(text)) {
    ++line_no;
    const std::string where = "fixture line " + std::to_string(line_no);
    if (detail::trim(line).empty() || detail::trim(line).front() == '#') continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3) throw ParseError(where, "expected 'sample<TAB>key<TAB>log-probs'");

    const std::string sample(detail::trim(fields[0]));
    if (sample.empty()) throw ParseError(where, "empty sample id");
    const auto values = detail::split_ws(fields[2]);
    if (values.size() != vocab_size)
      throw ParseError(where, "row has " + std::to_string(values.size()) +
                                  " entries but the vocabulary has " + std::to_string(vocab_size));
    StepDistribution row(static_cast<Eigen::Index>(vocab_size));
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto v = detail::parse_double(values[i]);
      if (!v) throw ParseError(where, "not a number: '" + std::string(values[i]) + "'");
      row[static_cast<Eigen::Index>(i)] = *v;
    }

    if (!fixture.tables_.count(sample)) fixture.order_.push_back(sample);
    Table& table = fixture.tables_[sample];
    const auto key = detail::trim(fields[1]);
    if (key == "*") {
      table.fallback = std::move(row);
    } else if (!key.empty() && key.front() == '@') {
      const auto step = detail::parse_int<std::size_t>(key.substr(1));
      if (!step) throw ParseError(where, "invalid step key '" + std::string(key) + "'");
      table.by_step[*step] = std::move(row);
    } else {
      std::vector<TokenId> prefix;
      for (const auto part : detail::split(key, ',')) {
        const auto id = detail::parse_int<int>(part);
        if (!id || *id < 0 || static_cast<std::size_t>(*id) >= vocab_size)
          throw ParseError(where, "prefix id '" + std::string(part) + "' outside vocabulary");
        prefix.push_back(*id);
      }
      table.by_prefix[std::move(prefix)] = std::move(row);
    }
  }
  if (fixture.order_.empty()) throw DataError("logit fixture contains no samples");
  return fixture;
}

LogitFixture LogitFixture::load(const std::filesystem::path& path, std::size_t vocab_size) {
  return parse(detail::read_file(path), vocab_size);
}

LogProbProvider LogitFixture::provider(const std::string& sample_id) const {
  const auto it = tables_.find(sample_id);
  if (it == tables_.end()) throw DataError("unknown fixture sample '" + sample_id + "'");
  const Table* table = &it->second;
  return [table, sample_id](std::span<const TokenId> prefix) -> StepDistribution {
    const std::vector<TokenId> key(prefix.begin(), prefix.end());
    if (auto p = table->by_prefix.find(key); p != table->by_prefix.end()) return p->second;
    if (auto s = table->by_step.find(prefix.empty() ? 0 : prefix.size() - 1); s != table->by_step.end())
      return s->second;
    if (table->fallback) return *table->fallback;
    std::string joined;
    for (const TokenId t : prefix) joined += (joined.empty() ? "" : ",") + std::to_string(t);
    throw DataError("sample '" + sample_id + "' has no distribution for prefix " + joined);
  };
}

std::vector<DecodedSample> decode_fixture(const LogitFixture& fixture, const Vocabulary& vocab,
                                          const GenerationConfig& config) {
  std::vector<DecodedSample> out;
  for (const auto& id : fixture.samples()) {
    auto ranked = beam_search(fixture.provider(id), vocab.special(), config);
    if (ranked.empty()) throw DataError("sample '" + id + "': no hypothesis survived decoding");
    Hypothesis best = std::move(ranked.front());
    out.push_back({id, Transcript(vocab.detokenize(best.tokens), id), std::move(best)});
  }
  return out;
}

std::vector<DecodedSample> decode_fixture(const std::filesystem::path& logits_file,
                                          const std::filesystem::path& vocab_file,
                                          const GenerationConfig& config) {
  const Vocabulary vocab = Vocabulary::load(vocab_file);
  const LogitFixture fixture = LogitFixture::load(logits_file, vocab.size());
  return decode_fixture(fixture, vocab, config);
}

}  // namespace alpr
