#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alpr {

/// Unit of "character" for CER and Levenshtein. Scalar values are the
/// default: a Bengali conjunct spelled with a virama counts as several
/// characters. Grapheme mode counts extended grapheme clusters instead.
enum class CharUnit { scalar, grapheme };

/// micro: summed distances over summed reference lengths.
/// macro: mean of the per-pair rates.
enum class Aggregation { micro, macro };

/// NFC-normalizes UTF-8 text. Throws ParseError on invalid UTF-8.
std::string nfc(std::string_view utf8);

/// A transcript, always stored NFC-normalized.
class Transcript {
 public:
  Transcript() = default;
  explicit Transcript(std::string_view text, std::string source_id = {});

  const std::string& text() const { return text_; }
  const std::string& source_id() const { return source_id_; }
  bool empty() const { return text_.empty(); }

  std::vector<char32_t> scalars() const;
  std::vector<std::string> graphemes() const;
  /// Tokens separated by Unicode whitespace.
  std::vector<std::string> words() const;

 private:
  std::string text_;
  std::string source_id_;
};

/// Uniform-cost (1,1,1) edit distance, two-row DP.
template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::size_t levenshtein(const Transcript& a, const Transcript& b, CharUnit unit = CharUnit::scalar);
std::size_t char_length(const Transcript& t, CharUnit unit = CharUnit::scalar);

/// levenshtein(pred, gt) / |gt|. Throws DataError for an empty ground truth.
double cer(const Transcript& pred, const Transcript& gt, CharUnit unit = CharUnit::scalar);
/// Word-level edit distance / number of ground-truth words.
double wer(const Transcript& pred, const Transcript& gt);

struct OcrPair {
  std::string id;
  Transcript prediction;
  Transcript ground_truth;
};

struct OcrScore {
  double cer = 0;
  double wer = 0;
  double levenshtein = 0;  // mean per pair
  std::size_t n_pairs = 0;
};

struct ScoreOptions {
  Aggregation aggregation = Aggregation::micro;
  CharUnit unit = CharUnit::scalar;
};

OcrScore score_corpus(std::span<const OcrPair> pairs, const ScoreOptions& options = {});

/// UTF-8 TSV, one `image_id<TAB>prediction<TAB>ground_truth` row per line.
std::vector<OcrPair> parse_ocr_tsv(std::string_view text);

}  // namespace alpr
