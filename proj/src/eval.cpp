#include "segner/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>

namespace segner {

namespace {

std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

PrfCounts match(const std::vector<Mention>& gold, const std::vector<Mention>& pred) {
  const std::set<Mention> gold_set(gold.begin(), gold.end());
  PrfCounts c;
  c.gold = gold.size();
  c.predicted = pred.size();
  for (const Mention& m : pred) c.correct += gold_set.count(m);
  return c;
}

std::vector<Mention> of_kind(const std::vector<Mention>& all, MentionKind kind) {
  std::vector<Mention> out;
  std::copy_if(all.begin(), all.end(), std::back_inserter(out),
               [kind](const Mention& m) { return m.kind == kind; });
  return out;
}

}  // namespace

double PrfCounts::precision() const {
  return predicted ? static_cast<double>(correct) / static_cast<double>(predicted) : 0.0;
}

double PrfCounts::recall() const {
  return gold ? static_cast<double>(correct) / static_cast<double>(gold) : 0.0;
}

double PrfCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

PrfCounts& PrfCounts::operator+=(const PrfCounts& o) {
  gold += o.gold;
  predicted += o.predicted;
  correct += o.correct;
  return *this;
}

std::vector<Mention> extract_mentions(std::span<const NerTag> tags) {
  std::vector<NerTag> fixed(tags.begin(), tags.end());
  repair_bio(fixed);
  std::vector<Mention> out;
  for (std::size_t t = 0; t < fixed.size(); ++t) {
    if (fixed[t].is_outside() || fixed[t].position() != TagPosition::B) continue;
    std::size_t end = t + 1;
    while (end < fixed.size() && !fixed[end].is_outside() &&
           fixed[end].position() == TagPosition::I && fixed[end].same_class(fixed[t])) {
      ++end;
    }
    out.push_back({t, end, fixed[t].type(), fixed[t].kind()});
  }
  return out;
}

void EvalReport::add_ner(std::span<const NerTag> gold, std::span<const NerTag> predicted) {
  const auto g = extract_mentions(gold);
  const auto p = extract_mentions(predicted);
  named += match(of_kind(g, MentionKind::NAM), of_kind(p, MentionKind::NAM));
  nominal += match(of_kind(g, MentionKind::NOM), of_kind(p, MentionKind::NOM));
  overall += match(g, p);
  ++sentences;
}

void EvalReport::add_segmentation(const Segmentation& gold, const Segmentation& predicted) {
  if (!segmentation) segmentation.emplace();
  std::set<std::pair<std::size_t, std::size_t>> gold_spans;
  for (const Span& s : gold.spans) gold_spans.emplace(s.start, s.end);
  segmentation->gold += gold.spans.size();
  segmentation->predicted += predicted.spans.size();
  for (const Span& s : predicted.spans) segmentation->correct += gold_spans.count({s.start, s.end});
  ++sentences;
}

std::string format_report_table(const EvalReport& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %8s %8s %8s %8s %8s %8s\n", "category", "prec", "recall",
                "f1", "gold", "pred", "correct");
  out += line;
  auto row = [&](const char* name, const PrfCounts& c) {
    std::snprintf(line, sizeof(line), "%-16s %8.2f %8.2f %8.2f %8zu %8zu %8zu\n", name,
                  100.0 * c.precision(), 100.0 * c.recall(), 100.0 * c.f1(), c.gold, c.predicted,
                  c.correct);
    out += line;
  };
  if (r.segmentation) {
    row("segmentation", *r.segmentation);
  } else {
    row("named-entity", r.named);
    row("nominal-mention", r.nominal);
    row("overall", r.overall);
  }
  return out;
}

std::string format_report_kv(const EvalReport& r) {
  std::string out;
  out += "sentences=" + std::to_string(r.sentences) + "\n";
  auto emit = [&](const std::string& prefix, const PrfCounts& c) {
    out += prefix + ".precision=" + shortest(c.precision()) + "\n";
    out += prefix + ".recall=" + shortest(c.recall()) + "\n";
    out += prefix + ".f1=" + shortest(c.f1()) + "\n";
    out += prefix + ".gold=" + std::to_string(c.gold) + "\n";
    out += prefix + ".predicted=" + std::to_string(c.predicted) + "\n";
    out += prefix + ".correct=" + std::to_string(c.correct) + "\n";
  };
  if (r.segmentation) {
    emit("seg", *r.segmentation);
  } else {
    emit("ner.named", r.named);
    emit("ner.nominal", r.nominal);
    emit("ner.overall", r.overall);
  }
  return out;
}

}  // namespace segner
