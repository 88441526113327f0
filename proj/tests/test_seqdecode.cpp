#include "alpr/error.hpp"
#include "alpr/seqdecode.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace alpr;

namespace {

// Fixed per-step distributions, one row per generated position.
LogProbProvider table_provider(std::vector<std::vector<double>> probs) {
  return [probs](std::span<const TokenId> prefix) {
    const auto& row = probs.at(std::min(prefix.size() - 1, probs.size() - 1));
    Eigen::VectorXd v(static_cast<Eigen::Index>(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) v[static_cast<Eigen::Index>(i)] = std::log(row[i]);
    return v;
  };
}

std::string decode_id(const std::vector<DecodedSample>& out, const std::string& id) {
  for (const auto& s : out)
    if (s.id == id) return s.transcript.text();
  return "<missing>";
}

}  // namespace

TEST_CASE("generation defaults") {
  const GenerationConfig c;
  CHECK(c.num_beams == 3);
  CHECK(c.max_length == 20);
  CHECK(c.length_penalty == 1.0);
  CHECK(c.no_repeat_ngram_size == 0);
  CHECK(c.early_stopping);
}

TEST_CASE("config validation") {
  GenerationConfig c;
  c.num_beams = 0;
  CHECK_THROWS_AS(c.validate(), DataError);
  c = {};
  c.max_length = 0;
  CHECK_THROWS_AS(c.validate(), DataError);
  c = {};
  c.no_repeat_ngram_size = -1;
  CHECK_THROWS_AS(c.validate(), DataError);
}

TEST_CASE("ngram mask") {
  const std::vector<TokenId> p{0, 5, 6, 5};
  CHECK(ngram_mask(p, 2) == std::vector<TokenId>{6});
  CHECK(ngram_mask(p, 0).empty());
  CHECK(ngram_mask(p, 3).empty());
  const std::vector<TokenId> q{0, 5, 6, 5, 6};
  CHECK(ngram_mask(q, 3) == std::vector<TokenId>{5});
  CHECK(ngram_mask(std::vector<TokenId>{0, 7}, 1) == std::vector<TokenId>{0, 7});
}

TEST_CASE("beam finds the sequence greedy misses") {
  // vocab: 0 bos, 1 eos, 2 a, 3 b
  const LogProbProvider provider = [](std::span<const TokenId> prefix) {
    Eigen::VectorXd v(4);
    const auto set = [&](double e, double a, double b) {
      v << -INFINITY, std::log(e), std::log(a), std::log(b);
    };
    if (prefix.size() == 1)
      set(0.05, 0.5, 0.45);
    else if (prefix[1] == 2)
      set(0.3, 0.35, 0.35);
    else
      set(0.95, 0.025, 0.025);
    if (prefix.size() >= 3) set(0.98, 0.01, 0.01);
    return v;
  };
  GenerationConfig greedy;
  greedy.num_beams = 1;
  const auto g = beam_search(provider, {}, greedy).front();
  CHECK(g.tokens == std::vector<TokenId>{0, 2, 2, 1});
  const auto b = beam_search(provider, {}, {}).front();
  CHECK(b.tokens == std::vector<TokenId>{0, 3, 1});
}

TEST_CASE("max length ends hypotheses") {
  GenerationConfig c;
  c.max_length = 3;
  const auto out = beam_search(table_provider({{0.0001, 0.0001, 0.9998}}), {}, c);
  REQUIRE(!out.empty());
  CHECK(out.front().tokens == std::vector<TokenId>{0, 2, 2, 2});
  CHECK_FALSE(out.front().finished);
}

TEST_CASE("invalid distributions are rejected") {
  const LogProbProvider unnormalized = [](std::span<const TokenId>) { return Eigen::VectorXd::Constant(3, std::log(0.5)); };
  CHECK_THROWS_AS(beam_search(unnormalized, {}, {}), DataError);
  const LogProbProvider empty = [](std::span<const TokenId>) { return Eigen::VectorXd(); };
  CHECK_THROWS_AS(beam_search(empty, {}, {}), DataError);
  const LogProbProvider nan = [](std::span<const TokenId>) { return Eigen::VectorXd::Constant(2, NAN); };
  CHECK_THROWS_AS(beam_search(nan, {}, {}), DataError);
}

TEST_CASE("wide beam equals exhaustive search") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const int vocab = 2 + static_cast<int>(seed % 3);
    GenerationConfig c;
    c.num_beams = 256;
    c.max_length = 1 + static_cast<int>(seed % 4);
    c.length_penalty = (seed % 5 == 0) ? 0.5 : 1.0 + 0.25 * static_cast<double>(seed % 3);
    c.no_repeat_ngram_size = (seed % 7 == 3) ? 2 : 0;
    const auto provider = oracle::random_provider(seed, vocab);
    const auto expected = oracle::exhaustive_decode(provider, {}, c);
    const auto got = beam_search(provider, {}, c);
    REQUIRE(!got.empty());
    CHECK(got.front().tokens == expected.tokens);
    CHECK(ranking_score(got.front(), c.length_penalty) == expected.rank);
  }
}

TEST_CASE("single beam equals greedy") {
  for (std::uint64_t seed = 100; seed < 160; ++seed) {
    const int vocab = 2 + static_cast<int>(seed % 3);
    GenerationConfig c;
    c.num_beams = 1;
    c.max_length = 1 + static_cast<int>(seed % 4);
    const auto provider = oracle::random_provider(seed, vocab);
    CHECK(beam_search(provider, {}, c).front().tokens == oracle::greedy_decode(provider, {}, c.max_length));
  }
}

TEST_CASE("early stopping does not change the result") {
  for (std::uint64_t seed = 200; seed < 260; ++seed) {
    GenerationConfig on;
    on.max_length = 5;
    on.num_beams = 2 + static_cast<int>(seed % 3);
    GenerationConfig off = on;
    off.early_stopping = false;
    const auto provider = oracle::random_provider(seed, 4);
    CHECK(beam_search(provider, {}, on).front().tokens == beam_search(provider, {}, off).front().tokens);
  }
}

TEST_CASE("results respect the ngram ban") {
  for (std::uint64_t seed = 300; seed < 340; ++seed) {
    GenerationConfig c;
    c.max_length = 6;
    c.no_repeat_ngram_size = 2;
    for (const auto& h : beam_search(oracle::random_provider(seed, 3), {}, c)) {
      std::vector<TokenId> prefix{h.tokens.front()};
      for (std::size_t i = 1; i < h.tokens.size(); ++i) {
        CHECK_FALSE(oracle::banned(prefix, h.tokens[i], 2));
        prefix.push_back(h.tokens[i]);
      }
    }
  }
}

TEST_CASE("vocabulary") {
  const Vocabulary v = Vocabulary::load(test::data("vocab.tsv"));
  CHECK(v.size() == 8);
  CHECK(v.special().bos == 0);
  CHECK(v.special().eos == 1);
  CHECK(v.detokenize(std::vector<TokenId>{0, 6, 7, 2, 3, 1}) == "ঢাকা-মেট্রো১২");
  CHECK_THROWS_AS(Vocabulary::parse("0\t<s>\n2\t</s>\n"), DataError);
  CHECK_THROWS_AS(Vocabulary::parse("0\ta\n1\tb\n"), DataError);
  CHECK_THROWS_AS(Vocabulary::parse("zero\t<s>\n"), ParseError);
}

TEST_CASE("fixture decoding with defaults") {
  const auto out = decode_fixture(test::data("logits.tsv"), test::data("vocab.tsv"));
  REQUIRE(out.size() == 3);
  CHECK(decode_id(out, "repeat") == "১১-১১");
  CHECK(decode_id(out, "trap") == "৩");
  CHECK(decode_id(out, "plate") == "ঢাকা-মেট্রো১২");
}

TEST_CASE("fixture results are the exhaustive optimum") {
  const Vocabulary vocab = Vocabulary::load(test::data("vocab.tsv"));
  const LogitFixture fx = LogitFixture::load(test::data("logits.tsv"), vocab.size());
  GenerationConfig c;
  c.max_length = 6;
  for (const auto& id : fx.samples()) {
    const auto expected = oracle::exhaustive_decode(fx.provider(id), vocab.special(), c);
    CHECK(beam_search(fx.provider(id), vocab.special(), c).front().tokens == expected.tokens);
  }
}

TEST_CASE("bigram blocking suppresses a valid repeated plate number") {
  const Vocabulary vocab = Vocabulary::load(test::data("vocab.tsv"));
  const LogitFixture fx = LogitFixture::load(test::data("logits.tsv"), vocab.size());
  GenerationConfig open;
  GenerationConfig blocked;
  blocked.no_repeat_ngram_size = 2;
  const auto a = decode_fixture(fx, vocab, open);
  const auto b = decode_fixture(fx, vocab, blocked);
  CHECK(decode_id(a, "repeat") == "১১-১১");
  CHECK(decode_id(b, "repeat") != "১১-১১");
  CHECK(decode_id(b, "plate") == decode_id(a, "plate"));
}

TEST_CASE("greedy on the trap sample") {
  GenerationConfig c;
  c.num_beams = 1;
  const auto out = decode_fixture(test::data("logits.tsv"), test::data("vocab.tsv"), c);
  CHECK(decode_id(out, "trap") == "২");
}

TEST_CASE("fixture errors") {
  CHECK_THROWS_AS(LogitFixture::parse("s\t*\t0 0\n", 3), ParseError);
  CHECK_THROWS_AS(LogitFixture::parse("s\t0,x\t0 0 0\n", 3), ParseError);
  const LogitFixture fx = LogitFixture::parse("s\t0\t-inf 0 -inf\n", 3);
  CHECK_THROWS_AS(fx.provider("other"), DataError);
  CHECK_THROWS_AS(beam_search(fx.provider("s"), {0, 2}, {}), DataError);
}
