#ifndef SEGNER_PIPELINE_HPP
#define SEGNER_PIPELINE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segner/boundary.hpp"
#include "segner/corpus.hpp"
#include "segner/crf.hpp"
#include "segner/eval.hpp"
#include "segner/model.hpp"

namespace segner {

struct TrainConfig {
  double learning_rate = 0.05;
  double dropout = 0.1;
  int max_epochs = 30;
  std::size_t cws_subsample = 13500;
  std::size_t ner_subsample = 1350;
  Index hidden_size = 150;
  Index embedding_dim = 100;
  std::uint64_t seed = 1;
  int patience = 5;
  double init_scale = 0.05;
  int lexicon_positions = 4;
  std::string positional_suffixes = "0123";

  bool boundary_features = true;
  bool chain_merge = true;
  bool retest_compounds = true;
  std::size_t max_merge_words = 0;
  bool fine_tune_embeddings = true;
  bool positional_hints = true;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  AssembleOptions assemble_options() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// "key = value" lines in declaration order.
std::string config_to_kv(const TrainConfig& cfg);

/// Everything needed to segment and tag: shared encoder, two heads, lexicon.
struct Tagger {
  TrainConfig config;
  EmbeddingTable embeddings;
  LstmParams lstm;
  Projection cws_proj;  // 4 x (H + 4): hidden block, then boundary one-hot block
  Crf64 cws_crf;
  Projection ner_proj;  // 17 x (H + d + K)
  Crf64 ner_crf;
  Lexicon lexicon;

  /// Vocabulary is `pretrained` (or an empty table) extended with every bare
  /// character of `corpora` in code point order; all new values are drawn
  /// uniformly from [-init_scale, init_scale].
  static Tagger initialize(const TrainConfig& cfg, std::span<const LabeledSequence* const> corpora,
                           const Lexicon& lexicon, Rng& rng,
                           const std::optional<EmbeddingTable>& pretrained = std::nullopt);

  HeadLayout cws_layout() const { return {false, kSegLabelCount}; }
  HeadLayout ner_layout() const { return {true, static_cast<Index>(lexicon.positions())}; }
  /// Throws DimensionError if any tensor disagrees with the configuration.
  void check_shapes() const;
};

struct CwsForward {
  ModelCache cache;
  BoundaryDecision boundary;          // from the hidden-only scores
  std::vector<SegLabel> boundary_labels;
  Mat64 emissions;                    // T x 4
};

struct NerForward {
  ModelCache cache;
  std::vector<SegLabel> hints;        // empty when positional hints are off
  Mat64 emissions;                    // T x 17
};

/// CWS head: hidden-only scores -> backward boundary decode -> assemble ->
/// relabel -> one-hot boundary features. `fixed_boundary` replaces the
/// decoded labels (used to hold the discrete step constant in checks).
CwsForward cws_forward(const Tagger& tagger, std::u32string_view chars,
                       const std::optional<Mat64>& mask,
                       const std::vector<SegLabel>* fixed_boundary = nullptr);

NerForward ner_forward(const Tagger& tagger, std::u32string_view chars,
                       const std::optional<Mat64>& mask,
                       const std::vector<SegLabel>* fixed_hints = nullptr);

/// Viterbi over the CWS CRF, then noun assembling. `do_assemble` only
/// switches off the final assembling pass; the boundary features are
/// always computed the way the model was trained.
Segmentation segment_sentence(const Tagger& tagger, std::u32string_view chars,
                              bool do_assemble = true);

/// Viterbi over the NER CRF with BIO repair.
std::vector<NerTag> tag_sentence(const Tagger& tagger, std::u32string_view chars);

struct StepGrads {
  double loss = 0.0;
  ModelGrads model;
  Crf64 crf;
};

StepGrads cws_loss_and_grad(const Tagger& tagger, const LabeledSequence& seq,
                            const std::optional<Mat64>& mask,
                            const std::vector<SegLabel>* fixed_boundary = nullptr);
StepGrads ner_loss_and_grad(const Tagger& tagger, const LabeledSequence& seq,
                            const std::optional<Mat64>& mask,
                            const std::vector<SegLabel>* fixed_hints = nullptr);

void apply_cws_step(Tagger& tagger, const StepGrads& g, double lr);
void apply_ner_step(Tagger& tagger, const StepGrads& g, double lr);

/// H x T inverted-dropout mask, or nullopt when the rate is zero.
std::optional<Mat64> hidden_dropout(Index hidden, Index steps, double rate, Rng& rng);

/// One pass of per-sentence SGD over a fresh subsample; returns mean loss.
double train_epoch_cws(Tagger& tagger, std::span<const LabeledSequence> corpus, Rng& rng);
double train_epoch_ner(Tagger& tagger, std::span<const LabeledSequence> corpus, Rng& rng);

EvalReport evaluate_ner(const Tagger& tagger, std::span<const LabeledSequence> corpus,
                        unsigned threads = 1);
/// Word-span P/R/F1 of segment_sentence (with assembling unless disabled).
EvalReport evaluate_seg(const Tagger& tagger, std::span<const LabeledSequence> corpus,
                        unsigned threads = 1, bool do_assemble = true);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int version = kCheckpointVersion;
  Tagger tagger;
  int epoch = 0;
  double best_dev_f1 = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double cws_loss = 0.0;
  double ner_loss = 0.0;
  double dev_f1 = 0.0;
  bool improved = false;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Alternates CWS and NER epochs, evaluates dev NER F1 after each, keeps the
/// best checkpoint, and stops after max_epochs or `patience` consecutive
/// epochs without improvement (at least one).
TrainResult train(std::span<const LabeledSequence> cws_corpus,
                  std::span<const LabeledSequence> ner_train,
                  std::span<const LabeledSequence> ner_dev, const TrainConfig& cfg,
                  const Lexicon& lexicon,
                  const std::optional<EmbeddingTable>& pretrained = std::nullopt,
                  const EpochCallback& on_epoch = {});

}  // namespace segner

#endif  // SEGNER_PIPELINE_HPP
