#include "segner/corpus.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "segner/utf8.hpp"

namespace segner {

namespace {

constexpr std::string_view kTypeNames[] = {"PER", "ORG", "LOC", "GPE"};
constexpr std::string_view kKindNames[] = {"NAM", "NOM"};

// Splits into lines, dropping a trailing '\r' from each.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

bool is_word_separator(char32_t c) { return c == U' ' || c == U'\u3000'; }

std::u32string decode_line(std::string_view line, std::size_t line_no) {
  try {
    return utf8::decode(line);
  } catch (const utf8::DecodeError& e) {
    throw CorpusError(std::string(e.what()) + " at byte " + std::to_string(e.byte_offset()),
                      line_no);
  }
}

}  // namespace

char seg_label_char(SegLabel label) {
  switch (label) {
    case SegLabel::B: return 'B';
    case SegLabel::I: return 'I';
    case SegLabel::E: return 'E';
    case SegLabel::S: return 'S';
  }
  return '?';
}

NerTag NerTag::from_index(int index) {
  if (index < 0 || index >= kCount) {
    throw std::out_of_range("NerTag index out of range: " + std::to_string(index));
  }
  if (index == 0) return NerTag();
  const int rel = index - 1;
  return NerTag(static_cast<TagPosition>(rel % 2), static_cast<EntityType>((rel / 2) % 4),
                static_cast<MentionKind>(rel / 8));
}

NerTag NerTag::parse(std::string_view surface) {
  if (surface == "O") return NerTag();
  auto fail = [&] { return std::invalid_argument("unknown NER tag \"" + std::string(surface) + "\""); };
  if (surface.size() != 9 || surface[1] != '-' || surface[5] != '.') throw fail();
  TagPosition pos;
  if (surface[0] == 'B') {
    pos = TagPosition::B;
  } else if (surface[0] == 'I') {
    pos = TagPosition::I;
  } else {
    throw fail();
  }
  const std::string_view type_name = surface.substr(2, 3);
  const std::string_view kind_name = surface.substr(6, 3);
  int type = -1, kind = -1;
  for (int i = 0; i < 4; ++i)
    if (kTypeNames[i] == type_name) type = i;
  for (int i = 0; i < 2; ++i)
    if (kKindNames[i] == kind_name) kind = i;
  if (type < 0 || kind < 0) throw fail();
  return NerTag(pos, static_cast<EntityType>(type), static_cast<MentionKind>(kind));
}

TagPosition NerTag::position() const {
  if (is_outside()) throw std::logic_error("O tag has no position");
  return static_cast<TagPosition>((index_ - 1) % 2);
}

EntityType NerTag::type() const {
  if (is_outside()) throw std::logic_error("O tag has no entity type");
  return static_cast<EntityType>(((index_ - 1) / 2) % 4);
}

MentionKind NerTag::kind() const {
  if (is_outside()) throw std::logic_error("O tag has no mention kind");
  return static_cast<MentionKind>((index_ - 1) / 8);
}

bool NerTag::same_class(const NerTag& other) const {
  return !is_outside() && !other.is_outside() && (index_ - 1) / 2 == (other.index_ - 1) / 2;
}

std::string NerTag::str() const {
  if (is_outside()) return "O";
  std::string out;
  out += position() == TagPosition::B ? 'B' : 'I';
  out += '-';
  out += kTypeNames[static_cast<int>(type())];
  out += '.';
  out += kKindNames[static_cast<int>(kind())];
  return out;
}

Segmentation Segmentation::from_lengths(std::span<const std::size_t> lengths) {
  Segmentation seg;
  std::size_t start = 0;
  for (std::size_t len : lengths) {
    if (len == 0) throw std::invalid_argument("Segmentation: zero-length word");
    seg.spans.push_back({start, start + len});
    start += len;
  }
  return seg;
}

std::vector<std::size_t> Segmentation::lengths() const {
  std::vector<std::size_t> out;
  out.reserve(spans.size());
  for (const Span& s : spans) out.push_back(s.length());
  return out;
}

bool Segmentation::partitions(std::size_t n) const {
  std::size_t expect = 0;
  for (const Span& s : spans) {
    if (s.start != expect || s.end <= s.start) return false;
    expect = s.end;
  }
  return expect == n && (n == 0 || !spans.empty());
}

std::vector<std::u32string> Segmentation::words(std::u32string_view chars) const {
  std::vector<std::u32string> out;
  out.reserve(spans.size());
  for (const Span& s : spans) {
    if (s.end > chars.size()) throw std::out_of_range("Segmentation span past end of sentence");
    out.emplace_back(chars.substr(s.start, s.length()));
  }
  return out;
}

std::vector<SegLabel> encode_bies(std::span<const std::size_t> word_lengths) {
  std::vector<SegLabel> labels;
  labels.reserve(std::accumulate(word_lengths.begin(), word_lengths.end(), std::size_t{0}));
  for (std::size_t len : word_lengths) {
    if (len == 0) throw std::invalid_argument("encode_bies: zero-length word");
    if (len == 1) {
      labels.push_back(SegLabel::S);
      continue;
    }
    labels.push_back(SegLabel::B);
    labels.insert(labels.end(), len - 2, SegLabel::I);
    labels.push_back(SegLabel::E);
  }
  return labels;
}

std::vector<SegLabel> encode_bies(const Segmentation& seg) {
  const auto lengths = seg.lengths();
  return encode_bies(lengths);
}

Segmentation decode_bies(std::span<const SegLabel> labels) {
  constexpr std::size_t kClosed = static_cast<std::size_t>(-1);
  Segmentation seg;
  std::size_t open = kClosed;  // start of the word in progress
  for (std::size_t t = 0; t < labels.size(); ++t) {
    switch (labels[t]) {
      case SegLabel::B:
        if (open != kClosed) seg.spans.push_back({open, t});
        open = t;
        break;
      case SegLabel::I:
        if (open == kClosed) open = t;
        break;
      case SegLabel::E:
        seg.spans.push_back({open == kClosed ? t : open, t + 1});
        open = kClosed;
        break;
      case SegLabel::S:
        if (open != kClosed) seg.spans.push_back({open, t});
        seg.spans.push_back({t, t + 1});
        open = kClosed;
        break;
    }
  }
  if (open != kClosed) seg.spans.push_back({open, labels.size()});
  return seg;
}

std::vector<LabeledSequence> parse_sighan(std::string_view text) {
  std::vector<LabeledSequence> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::u32string line = decode_line(lines[i], i + 1);
    LabeledSequence seq;
    std::vector<std::size_t> lengths;
    std::size_t word = 0;
    for (char32_t c : line) {
      if (is_word_separator(c)) {
        if (word > 0) lengths.push_back(word);
        word = 0;
        continue;
      }
      seq.chars.push_back(c);
      ++word;
    }
    if (word > 0) lengths.push_back(word);
    if (seq.chars.empty()) continue;
    seq.gold_seg = encode_bies(lengths);
    out.push_back(std::move(seq));
  }
  return out;
}

std::string format_sighan(const LabeledSequence& seq) {
  if (!seq.gold_seg) throw std::invalid_argument("format_sighan: sequence has no segmentation");
  const Segmentation seg = decode_bies(*seq.gold_seg);
  std::string line;
  for (const auto& word : seg.words(seq.chars)) {
    if (!line.empty()) line += ' ';
    line += utf8::encode(word);
  }
  return line;
}

std::vector<LabeledSequence> parse_ner_conll(std::string_view text) {
  std::vector<LabeledSequence> out;
  LabeledSequence current;
  current.gold_ner.emplace();
  auto flush = [&] {
    if (current.chars.empty()) return;
    out.push_back(std::move(current));
    current = LabeledSequence{};
    current.gold_ner.emplace();
  };

  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const std::u32string line = decode_line(lines[i], line_no);
    std::vector<std::u32string> cols;
    std::u32string col;
    for (char32_t c : line) {
      if (c == U' ' || c == U'\t') {
        if (!col.empty()) cols.push_back(std::move(col));
        col.clear();
      } else {
        col.push_back(c);
      }
    }
    if (!col.empty()) cols.push_back(std::move(col));

    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols.size() != 2) {
      throw CorpusError("expected two columns (character, tag), found " +
                            std::to_string(cols.size()),
                        line_no);
    }
    std::u32string& token = cols[0];
    // Some releases append a positional digit to the character ("X0").
    if (token.size() == 2 && token[1] >= U'0' && token[1] <= U'3') token.pop_back();
    if (token.size() != 1) {
      throw CorpusError("character column must hold one character, got \"" +
                            utf8::encode(token) + "\"",
                        line_no);
    }
    const std::string tag_text = utf8::encode(cols[1]);
    NerTag tag;
    try {
      tag = NerTag::parse(tag_text);
    } catch (const std::invalid_argument&) {
      throw CorpusError("unknown NER tag \"" + tag_text + "\"", line_no);
    }
    current.chars.push_back(token[0]);
    current.gold_ner->push_back(tag);
  }
  flush();
  return out;
}

std::string format_ner_conll(const LabeledSequence& seq) {
  if (!seq.gold_ner) throw std::invalid_argument("format_ner_conll: sequence has no tags");
  std::string out;
  for (std::size_t t = 0; t < seq.chars.size(); ++t) {
    out += utf8::encode(seq.chars[t]);
    out += '\t';
    out += (*seq.gold_ner)[t].str();
    out += '\n';
  }
  out += '\n';
  return out;
}

void repair_bio(std::vector<NerTag>& tags) {
  for (std::size_t t = 0; t < tags.size(); ++t) {
    NerTag& tag = tags[t];
    if (tag.is_outside() || tag.position() == TagPosition::B) continue;
    if (t == 0 || !tags[t - 1].same_class(tag)) {
      tag = NerTag(TagPosition::B, tag.type(), tag.kind());
    }
  }
}

std::vector<std::size_t> subsample_indices(std::size_t size, std::size_t n, Rng& rng) {
  if (n > size) {
    throw std::invalid_argument("subsample: requested " + std::to_string(n) +
                                " sentences from a corpus of " + std::to_string(size));
  }
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first n slots are a uniform draw without replacement.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

std::vector<LabeledSequence> subsample(std::span<const LabeledSequence> corpus, std::size_t n,
                                       Rng& rng) {
  std::vector<LabeledSequence> out;
  out.reserve(n);
  for (std::size_t i : subsample_indices(corpus.size(), n, rng)) out.push_back(corpus[i]);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace segner
