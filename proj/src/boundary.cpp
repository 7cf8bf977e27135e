#include "segner/boundary.hpp"

#include <algorithm>
#include <charconv>

#include "segner/utf8.hpp"

namespace segner {

Lexicon::Lexicon(int positions)
    : positions_(positions), counts_(static_cast<std::size_t>(std::max(positions, 0))),
      totals_(static_cast<std::size_t>(std::max(positions, 0)), 0.0) {
  if (positions < 1) throw std::invalid_argument("Lexicon: position cap must be at least 1");
}

void Lexicon::add(std::u32string_view noun, double weight) {
  if (noun.empty()) return;
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("Lexicon: weight must be finite and non-negative");
  }
  const std::u32string word(noun);
  auto [it, inserted] = nouns_.try_emplace(word, entries_.size());
  if (inserted) {
    entries_.emplace_back(word, weight);
  } else {
    entries_[it->second].second += weight;
  }
  const std::size_t cap = std::min(word.size(), static_cast<std::size_t>(positions_));
  for (std::size_t k = 0; k < cap; ++k) {
    counts_[k][word[k]] += weight;
    totals_[k] += weight;
  }
}

double Lexicon::count(char32_t c, int k) const {
  const auto& table = counts_.at(static_cast<std::size_t>(k));
  auto it = table.find(c);
  return it == table.end() ? 0.0 : it->second;
}

double Lexicon::positional_ratio(char32_t c, int k) const {
  const double tot = total(k);
  return tot > 0.0 ? count(c, k) / tot : 0.0;
}

Lexicon load_lexicon(std::string_view text, int positions) {
  Lexicon lex(positions);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    double weight = 1.0;
    std::string_view word = line;
    if (const auto tab = line.find('\t'); tab != std::string_view::npos) {
      word = line.substr(0, tab);
      const std::string_view w = line.substr(tab + 1);
      auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), weight);
      if (ec != std::errc() || ptr != w.data() + w.size() || !(weight >= 0.0)) {
        throw CorpusError("bad lexicon weight \"" + std::string(w) + "\"", line_no);
      }
    }
    std::u32string noun;
    try {
      noun = utf8::decode(word);
    } catch (const utf8::DecodeError& e) {
      throw CorpusError(e.what(), line_no);
    }
    // Surrounding spaces are not part of the word.
    while (!noun.empty() && noun.back() == U' ') noun.pop_back();
    while (!noun.empty() && noun.front() == U' ') noun.erase(noun.begin());
    if (noun.empty()) continue;
    lex.add(noun, weight);
  }
  return lex;
}

bool is_noun(std::u32string_view word, const Lexicon& lex) { return lex.contains(word); }

Segmentation BoundaryDecision::segmentation() const {
  Segmentation seg;
  std::size_t start = 0;
  for (std::size_t t = 0; t < cut.size(); ++t) {
    if (cut[t]) {
      seg.spans.push_back({start, t + 1});
      start = t + 1;
    }
  }
  return seg;
}

BoundaryDecision backward_boundary_decision(const Mat64& scores) {
  if (scores.rows() < 1 || scores.cols() != kSegLabelCount) {
    throw DimensionError("backward_boundary_decode: scores are " + shape_of(scores) +
                         ", expected Tx4");
  }
  const auto T = static_cast<std::size_t>(scores.rows());
  BoundaryDecision d;
  d.cut.assign(T, false);
  d.source.assign(T, CutSource::kNone);
  for (std::size_t t = T; t-- > 0;) {
    Index best = 0;
    scores.row(static_cast<Index>(t)).maxCoeff(&best);
    const auto label = static_cast<SegLabel>(best);
    if (label == SegLabel::E || label == SegLabel::S) {
      d.cut[t] = true;
      d.source[t] = CutSource::kLabel;
    } else if (t == T - 1) {
      d.cut[t] = true;
      d.source[t] = CutSource::kSentenceEnd;
    }
  }
  return d;
}

Segmentation backward_boundary_decode(const Mat64& scores) {
  return backward_boundary_decision(scores).segmentation();
}

Segmentation assemble(const Segmentation& seg, std::u32string_view sentence, const Lexicon& lex,
                      const AssembleOptions& options) {
  if (!seg.partitions(sentence.size())) {
    throw std::invalid_argument("assemble: segmentation does not partition the sentence");
  }
  if (seg.spans.size() < 2 || lex.empty()) return seg;

  auto span_text = [&](const Span& s) { return sentence.substr(s.start, s.length()); };
  std::vector<Span> out;
  Span current = seg.spans.back();
  bool current_noun = is_noun(span_text(current), lex);
  std::size_t current_words = 1;
  for (std::size_t i = seg.spans.size() - 1; i-- > 0;) {
    const Span& left = seg.spans[i];
    const bool left_noun = is_noun(span_text(left), lex);
    const bool room = options.max_words == 0 || current_words < options.max_words;
    if (left_noun && current_noun && room) {
      current.start = left.start;
      ++current_words;
      current_noun = options.retest_compounds ? is_noun(span_text(current), lex) : true;
    } else {
      out.push_back(current);
      current = left;
      current_noun = left_noun;
      current_words = 1;
    }
  }
  out.push_back(current);
  std::reverse(out.begin(), out.end());
  return Segmentation{std::move(out)};
}

void assemble_decision(BoundaryDecision& decision, std::u32string_view sentence, const Lexicon& lex,
                       const AssembleOptions& options) {
  const Segmentation merged = assemble(decision.segmentation(), sentence, lex, options);
  std::vector<bool> kept(decision.cut.size(), false);
  for (const Span& s : merged.spans) kept[s.end - 1] = true;
  for (std::size_t t = 0; t < decision.cut.size(); ++t) {
    if (decision.cut[t] && !kept[t]) {
      decision.cut[t] = false;
      decision.source[t] = CutSource::kMerged;
    }
  }
}

std::vector<SegLabel> relabel(const Segmentation& seg) { return encode_bies(seg); }

Mat64 lexical_features(std::u32string_view sentence, const Lexicon& lex) {
  const int K = lex.positions();
  Mat64 feats = Mat64::Zero(static_cast<Index>(sentence.size()), K);
  for (std::size_t t = 0; t < sentence.size(); ++t)
    for (int k = 0; k < K; ++k) feats(static_cast<Index>(t), k) = lex.positional_ratio(sentence[t], k);
  return feats;
}

Mat64 one_hot_bies(std::span<const SegLabel> labels) {
  Mat64 out = Mat64::Zero(static_cast<Index>(labels.size()), kSegLabelCount);
  for (std::size_t t = 0; t < labels.size(); ++t) out(static_cast<Index>(t), static_cast<int>(labels[t])) = 1.0;
  return out;
}

}  // namespace segner
