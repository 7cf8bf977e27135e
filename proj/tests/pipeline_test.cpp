#include <gtest/gtest.h>

#include "segner/pipeline.hpp"

namespace segner {
namespace {

std::string fixture(const std::string& name) { return read_file(std::string(SEGNER_FIXTURES) + "/" + name); }

struct Corpora {
  std::vector<LabeledSequence> cws = parse_sighan(fixture("cws.txt"));
  std::vector<LabeledSequence> ner_train = parse_ner_conll(fixture("ner_train.txt"));
  std::vector<LabeledSequence> ner_dev = parse_ner_conll(fixture("ner_dev.txt"));
  Lexicon lexicon = load_lexicon(fixture("lexicon.txt"));
};

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden_size = 6;
  cfg.embedding_dim = 5;
  cfg.max_epochs = 3;
  cfg.init_scale = 0.3;
  return cfg;
}

Tagger make_tagger(const TrainConfig& cfg, const Corpora& c, std::uint64_t seed = 9) {
  std::vector<const LabeledSequence*> src;
  for (const auto& s : c.cws) src.push_back(&s);
  for (const auto& s : c.ner_train) src.push_back(&s);
  Rng rng(seed);
  return Tagger::initialize(cfg, src, c.lexicon, rng);
}

bool same_parameters(const Tagger& a, const Tagger& b) {
  return a.embeddings.vectors() == b.embeddings.vectors() && a.lstm.Wx == b.lstm.Wx &&
         a.lstm.Wh == b.lstm.Wh && a.lstm.b == b.lstm.b && a.cws_proj.W == b.cws_proj.W &&
         a.cws_proj.b == b.cws_proj.b && a.cws_crf.transitions == b.cws_crf.transitions &&
         a.cws_crf.start == b.cws_crf.start && a.cws_crf.stop == b.cws_crf.stop &&
         a.ner_proj.W == b.ner_proj.W && a.ner_proj.b == b.ner_proj.b &&
         a.ner_crf.transitions == b.ner_crf.transitions && a.ner_crf.start == b.ner_crf.start &&
         a.ner_crf.stop == b.ner_crf.stop;
}

TEST(Config, DefaultsAreTheDocumentedValues) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.learning_rate, 0.05);
  EXPECT_EQ(cfg.dropout, 0.1);
  EXPECT_EQ(cfg.hidden_size, 150);
  EXPECT_EQ(cfg.embedding_dim, 100);
  EXPECT_EQ(cfg.max_epochs, 30);
  EXPECT_EQ(cfg.cws_subsample, 13500u);
  EXPECT_EQ(cfg.ner_subsample, 1350u);
  EXPECT_EQ(cfg.lexicon_positions, 4);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ValidateNamesField) {
  TrainConfig cfg;
  cfg.dropout = 1.0;
  try {
    cfg.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("dropout"), std::string::npos);
  }
  cfg = TrainConfig{};
  cfg.positional_suffixes = "01";
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Config, ChainMergeOffCapsCompoundsAtTwoWords) {
  TrainConfig cfg;
  EXPECT_EQ(cfg.assemble_options().max_words, 0u);
  cfg.chain_merge = false;
  EXPECT_EQ(cfg.assemble_options().max_words, 2u);
}

TEST(Tagger, InitializeShapesAndVocabulary) {
  const Corpora c;
  const Tagger t = make_tagger(small_config(), c);
  EXPECT_NO_THROW(t.check_shapes());
  for (const auto& s : c.ner_train)
    for (char32_t ch : s.chars) EXPECT_NE(t.embeddings.lookup_id(ch, std::nullopt), t.embeddings.unk());
  EXPECT_EQ(t.embeddings.lookup_id(U'龙', std::nullopt), t.embeddings.unk());
  EXPECT_EQ(t.ner_proj.W.cols(), 6 + 5 + 4);
  EXPECT_EQ(t.cws_proj.W.cols(), 6 + 4);
}

TEST(Tagger, LexiconPositionMismatchIsRejected) {
  Corpora c;
  c.lexicon = Lexicon(3);
  EXPECT_THROW(make_tagger(small_config(), c), std::invalid_argument);
}

TEST(Tagger, InitializeIsDeterministic) {
  const Corpora c;
  EXPECT_TRUE(same_parameters(make_tagger(small_config(), c, 4), make_tagger(small_config(), c, 4)));
  EXPECT_FALSE(same_parameters(make_tagger(small_config(), c, 4), make_tagger(small_config(), c, 5)));
}

TEST(CwsForward, BoundaryFeaturesSwitch) {
  const Corpora c;
  TrainConfig cfg = small_config();
  Tagger t = make_tagger(cfg, c);
  const auto& chars = c.cws[0].chars;
  const CwsForward with = cws_forward(t, chars, std::nullopt);
  EXPECT_EQ(with.boundary_labels.size(), chars.size());
  EXPECT_EQ(with.emissions.rows(), static_cast<Index>(chars.size()));
  EXPECT_TRUE(decode_bies(with.boundary_labels).partitions(chars.size()));

  t.config.boundary_features = false;
  const CwsForward without = cws_forward(t, chars, std::nullopt);
  EXPECT_FALSE(with.emissions.isApprox(without.emissions));
  // The hidden-only scores are the emissions minus the boundary columns' contribution.
  const Mat64 onehot = one_hot_bies(with.boundary_labels);
  const Mat64 delta = onehot * t.cws_proj.W.rightCols(kSegLabelCount).transpose();
  EXPECT_TRUE((with.emissions - delta).isApprox(without.emissions, 1e-12));
}

TEST(Segment, AssemblingIsTheFinalPassOnly) {
  const Corpora c;
  const Tagger t = make_tagger(small_config(), c);
  for (const auto& s : c.cws) {
    const Segmentation raw = segment_sentence(t, s.chars, false);
    const Segmentation full = segment_sentence(t, s.chars, true);
    EXPECT_TRUE(raw.partitions(s.chars.size()));
    EXPECT_EQ(full, assemble(raw, s.chars, t.lexicon, t.config.assemble_options()));
  }
  EXPECT_TRUE(segment_sentence(t, U"", true).spans.empty());
  EXPECT_EQ(segment_sentence(t, U"好", true).spans, (std::vector<Span>{{0, 1}}));
}

TEST(Tag, OutputIsRepairedBio) {
  const Corpora c;
  const Tagger t = make_tagger(small_config(), c);
  for (const auto& s : c.ner_dev) {
    auto tags = tag_sentence(t, s.chars);
    ASSERT_EQ(tags.size(), s.chars.size());
    auto copy = tags;
    repair_bio(copy);
    EXPECT_EQ(copy, tags);
  }
}

TEST(TrainEpoch, ZeroLearningRateChangesNothing) {
  const Corpora c;
  TrainConfig cfg = small_config();
  cfg.learning_rate = 0.0;
  Tagger t = make_tagger(cfg, c);
  const Tagger before = t;
  Rng rng(1);
  train_epoch_cws(t, c.cws, rng);
  train_epoch_ner(t, c.ner_train, rng);
  EXPECT_TRUE(same_parameters(t, before));

  cfg.dropout = 0.0;
  Tagger u = make_tagger(cfg, c);
  const StepGrads g1 = cws_loss_and_grad(u, c.cws[0], std::nullopt);
  apply_cws_step(u, g1, 0.0);
  const StepGrads g2 = cws_loss_and_grad(u, c.cws[0], std::nullopt);
  EXPECT_EQ(g1.loss, g2.loss);
}

TEST(TrainEpoch, OneSentenceLossDecreases) {
  const Corpora c;
  TrainConfig cfg = small_config();
  cfg.dropout = 0.0;
  cfg.cws_subsample = 1;
  cfg.ner_subsample = 1;
  for (bool ner : {false, true}) {
    Tagger t = make_tagger(cfg, c);
    const std::vector<LabeledSequence> one{ner ? c.ner_train[0] : c.cws[0]};
    Rng rng(2);
    double prev = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 10; ++step) {
      const double loss = ner ? train_epoch_ner(t, one, rng) : train_epoch_cws(t, one, rng);
      EXPECT_LT(loss, prev) << (ner ? "ner" : "cws") << " step " << step;
      prev = loss;
    }
  }
}

TEST(TrainEpoch, EmptyCorpusIsAnError) {
  const Corpora c;
  Tagger t = make_tagger(small_config(), c);
  Rng rng(1);
  EXPECT_THROW(train_epoch_cws(t, {}, rng), std::invalid_argument);
  EXPECT_THROW(train_epoch_ner(t, {}, rng), std::invalid_argument);
}

TEST(TrainEpoch, EmptyLexiconStillTrains) {
  Corpora c;
  c.lexicon = Lexicon(4);
  Tagger t = make_tagger(small_config(), c);
  EXPECT_TRUE(lexical_features(c.ner_train[0].chars, t.lexicon).isZero(0));
  Rng rng(3);
  const double loss = train_epoch_ner(t, c.ner_train, rng);
  EXPECT_TRUE(std::isfinite(loss));
}

TEST(TrainEpoch, FrozenEmbeddingsStayFixed) {
  const Corpora c;
  TrainConfig cfg = small_config();
  cfg.fine_tune_embeddings = false;
  Tagger t = make_tagger(cfg, c);
  const Mat64 before = t.embeddings.vectors();
  const Mat64 wx = t.lstm.Wx;
  Rng rng(3);
  train_epoch_ner(t, c.ner_train, rng);
  EXPECT_EQ(t.embeddings.vectors(), before);
  EXPECT_NE(t.lstm.Wx, wx);
}

TEST(Train, OneEpochRunsOneOfEachStage) {
  const Corpora c;
  TrainConfig cfg = small_config();
  cfg.max_epochs = 1;
  int callbacks = 0;
  const TrainResult r =
      train(c.cws, c.ner_train, c.ner_dev, cfg, c.lexicon, std::nullopt, [&](const EpochRecord&) { ++callbacks; });
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(callbacks, 1);
  EXPECT_EQ(r.best.epoch, 1);
  EXPECT_TRUE(std::isfinite(r.history[0].cws_loss));
  EXPECT_TRUE(std::isfinite(r.history[0].ner_loss));
}

TEST(Train, PatienceStopsAtFirstNonImprovingEpoch) {
  const Corpora c;
  TrainConfig cfg = small_config();
  cfg.max_epochs = 12;
  cfg.patience = 0;
  const TrainResult r = train(c.cws, c.ner_train, c.ner_dev, cfg, c.lexicon);
  for (std::size_t i = 0; i + 1 < r.history.size(); ++i) EXPECT_TRUE(r.history[i].improved);
  if (r.history.size() < 12u) EXPECT_FALSE(r.history.back().improved);
}

TEST(Train, PatienceCountsConsecutiveStaleEpochs) {
  const Corpora c;
  TrainConfig cfg = small_config();
  cfg.max_epochs = 15;
  cfg.patience = 2;
  const TrainResult r = train(c.cws, c.ner_train, c.ner_dev, cfg, c.lexicon);
  int stale = 0;
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    stale = r.history[i].improved ? 0 : stale + 1;
    if (i + 1 < r.history.size()) EXPECT_LT(stale, 2);
  }
  if (r.history.size() < 15u) EXPECT_EQ(stale, 2);
  double best = -1;
  for (const auto& e : r.history) best = std::max(best, e.dev_f1);
  EXPECT_EQ(r.best.best_dev_f1, best);
}

TEST(Train, IdenticalSeedsGiveIdenticalModels) {
  const Corpora c;
  const TrainConfig cfg = small_config();
  const TrainResult a = train(c.cws, c.ner_train, c.ner_dev, cfg, c.lexicon);
  const TrainResult b = train(c.cws, c.ner_train, c.ner_dev, cfg, c.lexicon);
  EXPECT_TRUE(same_parameters(a.best.tagger, b.best.tagger));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].ner_loss, b.history[i].ner_loss);
}

TEST(Evaluate, ThreadCountDoesNotChangeReports) {
  const Corpora c;
  const Tagger t = make_tagger(small_config(), c);
  const auto one = evaluate_ner(t, c.ner_train, 1);
  const auto four = evaluate_ner(t, c.ner_train, 4);
  EXPECT_EQ(format_report_kv(one), format_report_kv(four));
  EXPECT_EQ(format_report_kv(evaluate_seg(t, c.cws, 1)), format_report_kv(evaluate_seg(t, c.cws, 3)));
}

TEST(Evaluate, GoldSegmentationScoresPerfectly) {
  const Corpora c;
  EvalReport r;
  for (const auto& s : c.cws) r.add_segmentation(decode_bies(*s.gold_seg), decode_bies(*s.gold_seg));
  EXPECT_EQ(r.segmentation->f1(), 1.0);
}

}  // namespace
}  // namespace segner
