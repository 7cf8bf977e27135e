#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "json.hpp"
#include "segner/checkpoint.hpp"

namespace segner {
namespace {

using nlohmann::json;

Checkpoint sample_checkpoint() {
  TrainConfig cfg;
  cfg.hidden_size = 4;
  cfg.embedding_dim = 3;
  cfg.init_scale = 0.7;
  const LabeledSequence s{U"北京大学很好", std::nullopt, std::nullopt};
  const std::vector<const LabeledSequence*> src{&s};
  Lexicon lex;
  lex.add(U"北京", 2.5);
  lex.add(U"大学");
  Rng rng(21);
  Checkpoint c{kCheckpointVersion, Tagger::initialize(cfg, src, lex, rng), 3, 0.4285714285714286};
  // Awkward values that a fixed-precision format would not carry exactly.
  c.tagger.lstm.b(0) = 0.1 + 0.2;
  c.tagger.lstm.b(1) = 5e-324;
  c.tagger.lstm.b(2) = -1.7976931348623157e308;
  return c;
}

template <typename A, typename B>
bool bit_equal(const A& a, const B& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const Checkpoint c = sample_checkpoint();
  const Checkpoint r = checkpoint_from_string(checkpoint_to_string(c));
  const Tagger& a = c.tagger;
  const Tagger& b = r.tagger;
  EXPECT_EQ(r.epoch, 3);
  EXPECT_EQ(r.best_dev_f1, c.best_dev_f1);
  EXPECT_EQ(b.config, a.config);
  EXPECT_EQ(b.embeddings.tokens(), a.embeddings.tokens());
  EXPECT_TRUE(bit_equal(a.embeddings.vectors(), b.embeddings.vectors()));
  EXPECT_TRUE(bit_equal(a.lstm.Wx, b.lstm.Wx));
  EXPECT_TRUE(bit_equal(a.lstm.Wh, b.lstm.Wh));
  EXPECT_TRUE(bit_equal(a.lstm.b, b.lstm.b));
  EXPECT_TRUE(bit_equal(a.cws_proj.W, b.cws_proj.W));
  EXPECT_TRUE(bit_equal(a.cws_crf.transitions, b.cws_crf.transitions));
  EXPECT_TRUE(bit_equal(a.cws_crf.stop, b.cws_crf.stop));
  EXPECT_TRUE(bit_equal(a.ner_proj.W, b.ner_proj.W));
  EXPECT_TRUE(bit_equal(a.ner_crf.transitions, b.ner_crf.transitions));
  EXPECT_TRUE(bit_equal(a.ner_crf.start, b.ner_crf.start));
  EXPECT_EQ(b.lexicon.entries(), a.lexicon.entries());
  EXPECT_EQ(b.lexicon.count(U'北', 0), 2.5);
  // Serializing the loaded checkpoint reproduces the same bytes.
  EXPECT_EQ(checkpoint_to_string(r), checkpoint_to_string(c));
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "segner_checkpoint_test.json";
  const Checkpoint c = sample_checkpoint();
  save_checkpoint(path.string(), c);
  const Checkpoint r = load_checkpoint(path.string());
  EXPECT_TRUE(bit_equal(r.tagger.ner_proj.W, c.tagger.ner_proj.W));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path.string()), CheckpointError);
}

TEST(Checkpoint, UnknownVersionIsRejected) {
  json doc = json::parse(checkpoint_to_string(sample_checkpoint()));
  doc["version"] = 99;
  try {
    checkpoint_from_string(doc.dump());
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(Checkpoint, TruncationIsRejected) {
  const std::string text = checkpoint_to_string(sample_checkpoint());
  EXPECT_THROW(checkpoint_from_string(text.substr(0, text.size() / 2)), CheckpointError);
  EXPECT_THROW(checkpoint_from_string(""), CheckpointError);
}

TEST(Checkpoint, SchemaViolationsNameTheField) {
  json doc = json::parse(checkpoint_to_string(sample_checkpoint()));
  doc["tensors"].erase("ner.crf.stop");
  try {
    checkpoint_from_string(doc.dump());
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("ner.crf.stop"), std::string::npos);
  }

  doc = json::parse(checkpoint_to_string(sample_checkpoint()));
  doc["config"]["dropout"] = "high";
  try {
    checkpoint_from_string(doc.dump());
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("dropout"), std::string::npos);
  }
}

TEST(Checkpoint, HiddenSizeEditIsAShapeMismatch) {
  json doc = json::parse(checkpoint_to_string(sample_checkpoint()));
  doc["config"]["hidden_size"] = 5;
  try {
    checkpoint_from_string(doc.dump());
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("shape mismatch"), std::string::npos);
  }
}

}  // namespace
}  // namespace segner
