#ifndef SEGNER_EVAL_HPP
#define SEGNER_EVAL_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segner/corpus.hpp"

namespace segner {

struct PrfCounts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  // Zero denominators give zero.
  double precision() const;
  double recall() const;
  double f1() const;

  PrfCounts& operator+=(const PrfCounts& o);
  friend bool operator==(const PrfCounts&, const PrfCounts&) = default;
};

/// A maximal chunk [start, end) with one entity type and kind.
struct Mention {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityType type{};
  MentionKind kind{};
  friend auto operator<=>(const Mention&, const Mention&) = default;
};

/// BIO chunks after repair_bio, in left-to-right order.
std::vector<Mention> extract_mentions(std::span<const NerTag> tags);

struct EvalReport {
  PrfCounts named;    // NAM mentions
  PrfCounts nominal;  // NOM mentions
  PrfCounts overall;  // union of both kinds
  std::optional<PrfCounts> segmentation;
  std::size_t sentences = 0;

  void add_ner(std::span<const NerTag> gold, std::span<const NerTag> predicted);
  void add_segmentation(const Segmentation& gold, const Segmentation& predicted);
};

/// Human-readable table.
std::string format_report_table(const EvalReport& report);
/// "key=value" lines; floats in shortest round-trip form.
std::string format_report_kv(const EvalReport& report);

}  // namespace segner

#endif  // SEGNER_EVAL_HPP
