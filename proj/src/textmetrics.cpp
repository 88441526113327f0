#include "alpr/textmetrics.hpp"

#include "alpr/error.hpp"
#include "text_util.hpp"

#include <unicode/brkiter.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <memory>

namespace alpr {

namespace {

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  const int32_t n = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < n) {
    UChar32 c;
    U8_NEXT(p, i, n, c);
    if (c < 0) throw ParseError("byte " + std::to_string(i), "invalid UTF-8");
    out.push_back(static_cast<char32_t>(c));
  }
  return out;
}

void append_utf8(std::string& out, char32_t c) {
  icu::UnicodeString(static_cast<UChar32>(c)).toUTF8String(out);
}

}  // namespace

std::string nfc(std::string_view utf8) {
  decode_utf8(utf8);  // validates
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  const icu::UnicodeString in = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  const icu::UnicodeString normalized = normalizer->normalize(in, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

Transcript::Transcript(std::string_view text, std::string source_id)
    : text_(nfc(text)), source_id_(std::move(source_id)) {}

std::vector<char32_t> Transcript::scalars() const { return decode_utf8(text_); }

std::vector<std::string> Transcript::graphemes() const {
  UErrorCode status = U_ZERO_ERROR;
  std::unique_ptr<icu::BreakIterator> it(
      icu::BreakIterator::createCharacterInstance(icu::Locale::getRoot(), status));
  if (U_FAILURE(status)) throw Error("ICU grapheme iterator unavailable");
  const icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text_.data(), static_cast<int32_t>(text_.size())));
  it->setText(u);
  std::vector<std::string> out;
  int32_t start = it->first();
  for (int32_t end = it->next(); end != icu::BreakIterator::DONE; start = end, end = it->next()) {
    std::string g;
    u.tempSubStringBetween(start, end).toUTF8String(g);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<std::string> Transcript::words() const {
  std::vector<std::string> out;
  std::string current;
  for (const char32_t c : scalars()) {
    if (u_isUWhiteSpace(static_cast<UChar32>(c))) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      append_utf8(current, c);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::size_t levenshtein(const Transcript& a, const Transcript& b, CharUnit unit) {
  if (unit == CharUnit::grapheme) {
    const auto ga = a.graphemes();
    const auto gb = b.graphemes();
    return edit_distance<std::string>(ga, gb);
  }
  const auto sa = a.scalars();
  const auto sb = b.scalars();
  return edit_distance<char32_t>(sa, sb);
}

std::size_t char_length(const Transcript& t, CharUnit unit) {
  return unit == CharUnit::grapheme ? t.graphemes().size() : t.scalars().size();
}

double cer(const Transcript& pred, const Transcript& gt, CharUnit unit) {
  const std::size_t n = char_length(gt, unit);
  if (n == 0) throw DataError("CER undefined for an empty ground truth");
  return static_cast<double>(levenshtein(pred, gt, unit)) / static_cast<double>(n);
}

double wer(const Transcript& pred, const Transcript& gt) {
  const auto g = gt.words();
  if (g.empty()) throw DataError("WER undefined for a ground truth without words");
  const auto p = pred.words();
  return static_cast<double>(edit_distance<std::string>(p, g)) / static_cast<double>(g.size());
}

OcrScore score_corpus(std::span<const OcrPair> pairs, const ScoreOptions& options) {
  if (pairs.empty()) throw DataError("score_corpus: empty corpus");
  std::size_t char_edits = 0;
  std::size_t char_total = 0;
  std::size_t word_edits = 0;
  std::size_t word_total = 0;
  double cer_sum = 0;
  double wer_sum = 0;
  for (const auto& pair : pairs) {
    const std::size_t n_chars = char_length(pair.ground_truth, options.unit);
    const auto gt_words = pair.ground_truth.words();
    if (n_chars == 0 || gt_words.empty())
      throw DataError("pair '" + pair.id + "': empty ground truth");
    const std::size_t d = levenshtein(pair.prediction, pair.ground_truth, options.unit);
    const auto pred_words = pair.prediction.words();
    const std::size_t w = edit_distance<std::string>(pred_words, gt_words);
    char_edits += d;
    char_total += n_chars;
    word_edits += w;
    word_total += gt_words.size();
    cer_sum += static_cast<double>(d) / static_cast<double>(n_chars);
    wer_sum += static_cast<double>(w) / static_cast<double>(gt_words.size());
  }
  const double n = static_cast<double>(pairs.size());
  OcrScore score;
  score.n_pairs = pairs.size();
  score.levenshtein = static_cast<double>(char_edits) / n;
  if (options.aggregation == Aggregation::micro) {
    score.cer = static_cast<double>(char_edits) / static_cast<double>(char_total);
    score.wer = static_cast<double>(word_edits) / static_cast<double>(word_total);
  } else {
    score.cer = cer_sum / n;
    score.wer = wer_sum / n;
  }
  return score;
}

std::vector<OcrPair> parse_ocr_tsv(std::string_view text) {
  std::vector<OcrPair> out;
  int row = 0;
  for (const auto line : detail::lines(text)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, '\t');
    const std::string where = "row " + std::to_string(row);
    if (fields.size() != 3)
      throw ParseError(where, "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    try {
      out.push_back({std::string(fields[0]), Transcript(fields[1]), Transcript(fields[2])});
    } catch (const ParseError& e) {
      throw ParseError(where, e.what());
    }
    if (out.back().ground_truth.empty()) throw ParseError(where, "empty ground truth");
  }
  if (out.empty()) throw DataError("no OCR pairs in input");
  return out;
}

}  // namespace alpr
