#ifndef SEGNER_CORPUS_HPP
#define SEGNER_CORPUS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "segner/tensor.hpp"

namespace segner {

/// Raised by the corpus readers; `line()` is 1-based, 0 when not applicable.
class CorpusError : public std::runtime_error {
 public:
  CorpusError(const std::string& what, std::size_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

enum class SegLabel : std::uint8_t { B = 0, I = 1, E = 2, S = 3 };
inline constexpr int kSegLabelCount = 4;

char seg_label_char(SegLabel label);

enum class EntityType : std::uint8_t { PER = 0, ORG = 1, LOC = 2, GPE = 3 };
enum class MentionKind : std::uint8_t { NAM = 0, NOM = 1 };
enum class TagPosition : std::uint8_t { B = 0, I = 1 };

/// BIO x {PER, ORG, LOC, GPE} x {NAM, NOM} plus O: 17 tags, O at index 0.
/// Index of (pos, type, kind) is 1 + (kind * 4 + type) * 2 + pos.
class NerTag {
 public:
  static constexpr int kCount = 17;

  constexpr NerTag() = default;
  constexpr NerTag(TagPosition pos, EntityType type, MentionKind kind)
      : index_(static_cast<std::uint8_t>(
            1 + (static_cast<int>(kind) * 4 + static_cast<int>(type)) * 2 +
            static_cast<int>(pos))) {}

  static NerTag outside() { return NerTag(); }
  static NerTag from_index(int index);
  /// Accepts "O" and "B-PER.NAM" style forms; throws std::invalid_argument.
  static NerTag parse(std::string_view surface);

  int index() const noexcept { return index_; }
  bool is_outside() const noexcept { return index_ == 0; }
  TagPosition position() const;
  EntityType type() const;
  MentionKind kind() const;
  /// Same entity type and kind, ignoring position. Both must be non-O.
  bool same_class(const NerTag& other) const;
  std::string str() const;

  friend bool operator==(const NerTag&, const NerTag&) = default;

 private:
  std::uint8_t index_ = 0;
};

struct LabeledSequence {
  std::u32string chars;
  std::optional<std::vector<SegLabel>> gold_seg;
  std::optional<std::vector<NerTag>> gold_ner;

  friend bool operator==(const LabeledSequence&, const LabeledSequence&) = default;
};

/// Half-open character range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const Span&, const Span&) = default;
};

/// Word spans that partition [0, n). Construct through decode_bies or
/// from_lengths; `partitions(n)` checks the invariant.
struct Segmentation {
  std::vector<Span> spans;

  static Segmentation from_lengths(std::span<const std::size_t> lengths);
  std::vector<std::size_t> lengths() const;
  bool partitions(std::size_t n) const;
  std::vector<std::u32string> words(std::u32string_view chars) const;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

std::vector<SegLabel> encode_bies(std::span<const std::size_t> word_lengths);
std::vector<SegLabel> encode_bies(const Segmentation& seg);

/// Total inverse of encode_bies. Invalid sequences are repaired left to
/// right: I/E with no open word opens one, B/S closes any open word, and a
/// word still open at the end is closed there.
Segmentation decode_bies(std::span<const SegLabel> labels);

std::vector<LabeledSequence> parse_sighan(std::string_view text);
/// Words joined by single ASCII spaces; requires gold_seg.
std::string format_sighan(const LabeledSequence& seq);

std::vector<LabeledSequence> parse_ner_conll(std::string_view text);
/// Two columns "char<TAB>tag" per line, then one blank line.
std::string format_ner_conll(const LabeledSequence& seq);

/// Rewrites I-x that follows O or a different class into B-x.
void repair_bio(std::vector<NerTag>& tags);

std::vector<std::size_t> subsample_indices(std::size_t size, std::size_t n, Rng& rng);
std::vector<LabeledSequence> subsample(std::span<const LabeledSequence> corpus,
                                       std::size_t n, Rng& rng);

std::string read_file(const std::string& path);

}  // namespace segner

#endif  // SEGNER_CORPUS_HPP
