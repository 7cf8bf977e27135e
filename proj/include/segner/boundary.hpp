#ifndef SEGNER_BOUNDARY_HPP
#define SEGNER_BOUNDARY_HPP

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "segner/corpus.hpp"
#include "segner/tensor.hpp"

namespace segner {

/// Noun dictionary plus weighted counts of which characters sit at which
/// position (1..K) of a noun.
class Lexicon {
 public:
  explicit Lexicon(int positions = 4);

  /// Adds weight to the positional counts; a repeated word accumulates.
  void add(std::u32string_view noun, double weight = 1.0);

  bool contains(std::u32string_view word) const { return nouns_.count(std::u32string(word)) > 0; }
  std::size_t size() const noexcept { return nouns_.size(); }
  bool empty() const noexcept { return nouns_.empty(); }
  int positions() const noexcept { return positions_; }

  /// Relative frequency of `c` at 0-based position `k` among noun characters there.
  double positional_ratio(char32_t c, int k) const;
  double count(char32_t c, int k) const;
  double total(int k) const { return totals_.at(static_cast<std::size_t>(k)); }

  /// Entries in insertion order with their accumulated weight.
  const std::vector<std::pair<std::u32string, double>>& entries() const noexcept { return entries_; }

 private:
  int positions_;
  std::map<std::u32string, std::size_t> nouns_;  // word -> entries_ index
  std::vector<std::pair<std::u32string, double>> entries_;
  std::vector<std::map<char32_t, double>> counts_;
  std::vector<double> totals_;
};

/// One noun per line, optionally "word<TAB>weight". Blank lines are skipped.
Lexicon load_lexicon(std::string_view text, int positions = 4);

bool is_noun(std::u32string_view word, const Lexicon& lex);

enum class CutSource : std::uint8_t {
  kNone,        // no boundary after this position
  kLabel,       // argmax label was E or S
  kSentenceEnd, // forced cut at the last position without E/S evidence
  kMerged,      // boundary removed by noun assembling
};

/// cut[t] is true when a word ends after position t. The last entry is always true.
struct BoundaryDecision {
  std::vector<bool> cut;
  std::vector<CutSource> source;

  Segmentation segmentation() const;
};

/// Right-to-left scan over per-position argmax labels (columns B, I, E, S;
/// ties to the lowest index) cutting after every E or S.
BoundaryDecision backward_boundary_decision(const Mat64& scores);
Segmentation backward_boundary_decode(const Mat64& scores);

struct AssembleOptions {
  /// Re-check a merged compound against the lexicon before merging further
  /// left. When false, a compound built from nouns stays a noun.
  bool retest_compounds = true;
  /// Upper bound on the number of original words in one compound; 0 means no limit.
  std::size_t max_words = 0;
};

/// Right-to-left pass that removes the boundary between adjacent nouns.
Segmentation assemble(const Segmentation& seg, std::u32string_view sentence, const Lexicon& lex,
                      const AssembleOptions& options = {});

/// Same as assemble; records merged boundaries as kMerged in `decision`.
void assemble_decision(BoundaryDecision& decision, std::u32string_view sentence,
                       const Lexicon& lex, const AssembleOptions& options = {});

std::vector<SegLabel> relabel(const Segmentation& seg);

/// T x K; entry (t, k) is positional_ratio(sentence[t], k).
Mat64 lexical_features(std::u32string_view sentence, const Lexicon& lex);

/// T x 4 one-hot rows over B, I, E, S.
Mat64 one_hot_bies(std::span<const SegLabel> labels);

}  // namespace segner

#endif  // SEGNER_BOUNDARY_HPP
