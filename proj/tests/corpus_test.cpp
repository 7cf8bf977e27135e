#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "segner/corpus.hpp"
#include "segner/utf8.hpp"

namespace segner {
namespace {

using L = SegLabel;

std::vector<SegLabel> labels(std::initializer_list<SegLabel> l) { return l; }

TEST(Utf8, RoundTripAndRejects) {
  const std::string s = "北京 abc \xF0\x9F\x98\x80";
  EXPECT_EQ(utf8::encode(utf8::decode(s)), s);
  EXPECT_FALSE(utf8::is_valid("\xC0\xAF"));          // overlong
  EXPECT_FALSE(utf8::is_valid("\xED\xA0\x80"));      // surrogate
  EXPECT_FALSE(utf8::is_valid("\xE4\xBA"));          // truncated
  EXPECT_FALSE(utf8::is_valid("\xF4\x90\x80\x80"));  // past U+10FFFF
}

TEST(ParseSighan, Examples) {
  auto c = parse_sighan("AB C\n\nX\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].chars, U"ABC");
  EXPECT_EQ(*c[0].gold_seg, labels({L::B, L::E, L::S}));
  EXPECT_EQ(c[1].chars, U"X");
  EXPECT_EQ(*c[1].gold_seg, labels({L::S}));
  EXPECT_TRUE(parse_sighan("\n\n").empty());
}

TEST(ParseSighan, IdeographicSpaceAndRepeatedSeparators) {
  auto c = parse_sighan("北京　大学   好\r\n");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].chars, U"北京大学好");
  EXPECT_EQ(format_sighan(c[0]), "北京 大学 好");
}

TEST(ParseSighan, InvalidUtf8NamesLine) {
  try {
    parse_sighan("ok\nbad \xFF\n");
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(ParseSighan, RejoinReproducesNormalizedLine) {
  const std::string doc = "我 爱 北京 天安门\n中华人民共和国 成立 了\n";
  std::string rebuilt;
  for (const auto& s : parse_sighan(doc)) rebuilt += format_sighan(s) + "\n";
  EXPECT_EQ(rebuilt, doc);
}

TEST(Bies, EncodeExamples) {
  EXPECT_EQ(encode_bies(std::vector<std::size_t>{1}), labels({L::S}));
  EXPECT_EQ(encode_bies(std::vector<std::size_t>{2}), labels({L::B, L::E}));
  EXPECT_EQ(encode_bies(std::vector<std::size_t>{3, 1}), labels({L::B, L::I, L::E, L::S}));
  EXPECT_THROW(encode_bies(std::vector<std::size_t>{2, 0}), std::invalid_argument);
}

TEST(Bies, DecodeExamples) {
  EXPECT_EQ(decode_bies(labels({L::B, L::E, L::S})).spans, (std::vector<Span>{{0, 2}, {2, 3}}));
  EXPECT_EQ(decode_bies(labels({L::B, L::I, L::E})).spans, (std::vector<Span>{{0, 3}}));
  EXPECT_EQ(decode_bies(labels({L::I, L::E, L::B})).spans, (std::vector<Span>{{0, 2}, {2, 3}}));
}

TEST(Bies, RepairRules) {
  // B then S closes the open word.
  EXPECT_EQ(decode_bies(labels({L::B, L::S})).spans, (std::vector<Span>{{0, 1}, {1, 2}}));
  // B B gives two one-character words.
  EXPECT_EQ(decode_bies(labels({L::B, L::B})).spans, (std::vector<Span>{{0, 1}, {1, 2}}));
  // E with nothing open is a one-character word.
  EXPECT_EQ(decode_bies(labels({L::S, L::E})).spans, (std::vector<Span>{{0, 1}, {1, 2}}));
}

TEST(Bies, RoundTripProperty) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::size_t> lengths(1 + rng.uniform_int(8));
    for (auto& l : lengths) l = 1 + rng.uniform_int(5);
    const auto enc = encode_bies(lengths);
    EXPECT_EQ(decode_bies(enc).lengths(), lengths);
  }
}

TEST(Bies, DecodeIsTotalProperty) {
  Rng rng(100);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<SegLabel> l(1 + rng.uniform_int(12));
    for (auto& x : l) x = static_cast<SegLabel>(rng.uniform_int(4));
    const Segmentation seg = decode_bies(l);
    EXPECT_TRUE(seg.partitions(l.size()));
    // Re-encoding a repaired sequence then decoding again is stable.
    EXPECT_EQ(decode_bies(encode_bies(seg)), seg);
  }
}

TEST(NerTag, InventoryAndSurface) {
  std::set<std::string> seen;
  for (int i = 0; i < NerTag::kCount; ++i) {
    const NerTag t = NerTag::from_index(i);
    EXPECT_EQ(t.index(), i);
    EXPECT_EQ(NerTag::parse(t.str()), t);
    seen.insert(t.str());
  }
  EXPECT_EQ(seen.size(), 17u);
  EXPECT_EQ(NerTag::parse("I-GPE.NOM"), NerTag(TagPosition::I, EntityType::GPE, MentionKind::NOM));
  EXPECT_THROW(NerTag::from_index(17), std::out_of_range);
}

TEST(ParseNer, Examples) {
  auto c = parse_ner_conll("X B-PER.NAM\nY I-PER.NAM\n\nZ O\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].chars, U"XY");
  const std::vector<NerTag> expect{NerTag(TagPosition::B, EntityType::PER, MentionKind::NAM),
                                   NerTag(TagPosition::I, EntityType::PER, MentionKind::NAM)};
  EXPECT_EQ(*c[0].gold_ner, expect);
  EXPECT_EQ(*c[1].gold_ner, std::vector<NerTag>{NerTag::outside()});
}

TEST(ParseNer, UnknownTagNamesTokenAndLine) {
  try {
    parse_ner_conll("A O\nX B-CAT.NAM\n");
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("B-CAT.NAM"), std::string::npos);
  }
}

TEST(ParseNer, PositionalDigitIsStripped) {
  auto c = parse_ner_conll("北0\tB-GPE.NAM\n京1\tI-GPE.NAM\n");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].chars, U"北京");
}

TEST(ParseNer, FormatRoundTrip) {
  const std::string doc = "北\tB-GPE.NAM\n京\tI-GPE.NAM\n人\tO\n\n";
  auto c = parse_ner_conll(doc);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(format_ner_conll(c[0]), doc);
}

TEST(RepairBio, DanglingInsideBecomesBegin) {
  const NerTag o = NerTag::outside();
  const NerTag iper(TagPosition::I, EntityType::PER, MentionKind::NAM);
  const NerTag bloc(TagPosition::B, EntityType::LOC, MentionKind::NAM);
  std::vector<NerTag> tags{o, iper, bloc, iper};
  repair_bio(tags);
  EXPECT_EQ(tags[1], NerTag(TagPosition::B, EntityType::PER, MentionKind::NAM));
  EXPECT_EQ(tags[3], NerTag(TagPosition::B, EntityType::PER, MentionKind::NAM));
}

TEST(RepairBio, InvariantProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<NerTag> tags(1 + rng.uniform_int(10));
    for (auto& t : tags) t = NerTag::from_index(static_cast<int>(rng.uniform_int(17)));
    repair_bio(tags);
    for (std::size_t i = 0; i < tags.size(); ++i) {
      if (tags[i].is_outside() || tags[i].position() != TagPosition::I) continue;
      ASSERT_GT(i, 0u);
      EXPECT_FALSE(tags[i - 1].is_outside());
      EXPECT_TRUE(tags[i - 1].same_class(tags[i]));
    }
  }
}

TEST(Subsample, Examples) {
  Rng rng(8);
  EXPECT_TRUE(subsample_indices(10, 0, rng).empty());
  auto all = subsample_indices(10, 10, rng);
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
  EXPECT_THROW(subsample_indices(3, 4, rng), std::invalid_argument);
}

TEST(Subsample, FullScaleDrawIsDistinct) {
  Rng rng(1);
  const auto idx = subsample_indices(123530, 13500, rng);
  EXPECT_EQ(idx.size(), 13500u);
  EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 13500u);
  for (auto i : idx) EXPECT_LT(i, 123530u);
}

TEST(Subsample, DeterministicAndLeavesCorpusAlone) {
  std::vector<LabeledSequence> corpus;
  for (char32_t c = U'a'; c <= U'z'; ++c) corpus.push_back({std::u32string(1, c), std::nullopt, std::nullopt});
  const auto copy = corpus;
  Rng a(17), b(17);
  const auto x = subsample(corpus, 7, a);
  const auto y = subsample(corpus, 7, b);
  EXPECT_EQ(x, y);
  EXPECT_EQ(corpus, copy);
}

}  // namespace
}  // namespace segner
