#include "segner/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <set>
#include <thread>

#include "segner/utf8.hpp"

namespace segner {

namespace {

std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid config: " + what);
}

void require_shape(const Eigen::Ref<const Mat64>& m, Index rows, Index cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(name + " is " + shape_of(m) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

std::vector<int> to_ints(std::span<const SegLabel> labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (SegLabel l : labels) out.push_back(static_cast<int>(l));
  return out;
}

std::vector<int> to_ints(std::span<const NerTag> tags) {
  std::vector<int> out;
  out.reserve(tags.size());
  for (const NerTag& t : tags) out.push_back(t.index());
  return out;
}

// Runs fn(i) for i in [0, n) over contiguous chunks; results are written by
// index so the caller merges in corpus order.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

void apply_shared(Tagger& tagger, const ModelGrads& g, double lr) {
  sgd_update(tagger.lstm.Wx, g.lstm.Wx, lr);
  sgd_update(tagger.lstm.Wh, g.lstm.Wh, lr);
  sgd_update(tagger.lstm.b, g.lstm.b, lr);
  if (!tagger.config.fine_tune_embeddings) return;
  for (const auto& [id, grad] : g.embedding) {
    auto col = tagger.embeddings.vectors().col(id);
    col -= lr * grad;
  }
}

void apply_head(Projection& proj, Crf64& crf, const StepGrads& g, double lr) {
  sgd_update(proj.W, g.model.proj.W, lr);
  sgd_update(proj.b, g.model.proj.b, lr);
  sgd_update(crf.transitions, g.crf.transitions, lr);
  sgd_update(crf.start, g.crf.start, lr);
  sgd_update(crf.stop, g.crf.stop, lr);
}

}  // namespace

void TrainConfig::validate() const {
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be >= 0");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
  require(max_epochs > 0, "max_epochs must be positive");
  require(cws_subsample > 0, "cws_subsample must be positive");
  require(ner_subsample > 0, "ner_subsample must be positive");
  require(hidden_size > 0, "hidden_size must be positive");
  require(embedding_dim > 0, "embedding_dim must be positive");
  require(patience >= 0, "patience must be >= 0");
  require(init_scale >= 0.0 && std::isfinite(init_scale), "init_scale must be >= 0");
  require(lexicon_positions > 0, "lexicon_positions must be positive");
  require(positional_suffixes.size() == 4, "positional_suffixes must have four characters");
}

AssembleOptions TrainConfig::assemble_options() const {
  AssembleOptions opts;
  opts.retest_compounds = retest_compounds;
  opts.max_words = max_merge_words;
  if (!chain_merge && (opts.max_words == 0 || opts.max_words > 2)) opts.max_words = 2;
  return opts;
}

std::string config_to_kv(const TrainConfig& c) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  std::string out;
  out += "learning_rate = " + shortest(c.learning_rate) + "\n";
  out += "dropout = " + shortest(c.dropout) + "\n";
  out += "max_epochs = " + std::to_string(c.max_epochs) + "\n";
  out += "cws_subsample = " + std::to_string(c.cws_subsample) + "\n";
  out += "ner_subsample = " + std::to_string(c.ner_subsample) + "\n";
  out += "hidden_size = " + std::to_string(c.hidden_size) + "\n";
  out += "embedding_dim = " + std::to_string(c.embedding_dim) + "\n";
  out += "seed = " + std::to_string(c.seed) + "\n";
  out += "patience = " + std::to_string(c.patience) + "\n";
  out += "init_scale = " + shortest(c.init_scale) + "\n";
  out += "lexicon_positions = " + std::to_string(c.lexicon_positions) + "\n";
  out += "positional_suffixes = \"" + c.positional_suffixes + "\"\n";
  out += "boundary_features = " + b(c.boundary_features) + "\n";
  out += "chain_merge = " + b(c.chain_merge) + "\n";
  out += "retest_compounds = " + b(c.retest_compounds) + "\n";
  out += "max_merge_words = " + std::to_string(c.max_merge_words) + "\n";
  out += "fine_tune_embeddings = " + b(c.fine_tune_embeddings) + "\n";
  out += "positional_hints = " + b(c.positional_hints) + "\n";
  return out;
}

Tagger Tagger::initialize(const TrainConfig& cfg, std::span<const LabeledSequence* const> corpora,
                          const Lexicon& lexicon, Rng& rng,
                          const std::optional<EmbeddingTable>& pretrained) {
  cfg.validate();
  if (lexicon.positions() != cfg.lexicon_positions) {
    throw std::invalid_argument("lexicon has " + std::to_string(lexicon.positions()) +
                                " positions, config expects " +
                                std::to_string(cfg.lexicon_positions));
  }
  const Index d = cfg.embedding_dim, H = cfg.hidden_size;
  const double scale = cfg.init_scale;

  Tagger t{cfg,
           pretrained ? *pretrained : EmbeddingTable(d, cfg.positional_suffixes),
           LstmParams::zeros(d, H),
           Projection::zeros(kSegLabelCount, H + kSegLabelCount),
           Crf64::zeros(kSegLabelCount),
           Projection::zeros(NerTag::kCount, H + d + cfg.lexicon_positions),
           Crf64::zeros(NerTag::kCount),
           lexicon};
  if (t.embeddings.dim() != d) {
    throw DimensionError("pretrained embeddings have dim " + std::to_string(t.embeddings.dim()) +
                         ", config expects " + std::to_string(d));
  }
  if (!pretrained) {
    auto unk = t.embeddings.vectors().col(t.embeddings.unk());
    fill_uniform(unk, scale, rng);
  }

  std::set<char32_t> chars;
  for (const LabeledSequence* corpus : corpora) {
    if (corpus) chars.insert(corpus->chars.begin(), corpus->chars.end());
  }
  for (char32_t c : chars) {
    const std::string token = utf8::encode(c);
    if (t.embeddings.find(token)) continue;
    Vec64 v(d);
    fill_uniform(v, scale, rng);
    t.embeddings.add(token, v);
  }

  fill_uniform(t.lstm.Wx, scale, rng);
  fill_uniform(t.lstm.Wh, scale, rng);
  fill_uniform(t.lstm.b, scale, rng);
  fill_uniform(t.cws_proj.W, scale, rng);
  fill_uniform(t.cws_proj.b, scale, rng);
  fill_uniform(t.cws_crf.transitions, scale, rng);
  fill_uniform(t.cws_crf.start, scale, rng);
  fill_uniform(t.cws_crf.stop, scale, rng);
  fill_uniform(t.ner_proj.W, scale, rng);
  fill_uniform(t.ner_proj.b, scale, rng);
  fill_uniform(t.ner_crf.transitions, scale, rng);
  fill_uniform(t.ner_crf.start, scale, rng);
  fill_uniform(t.ner_crf.stop, scale, rng);
  return t;
}

void Tagger::check_shapes() const {
  const Index d = config.embedding_dim, H = config.hidden_size;
  const Index K = config.lexicon_positions;
  const Index L = kSegLabelCount, N = NerTag::kCount;
  if (embeddings.dim() != d) {
    throw DimensionError("embeddings have dim " + std::to_string(embeddings.dim()) +
                         ", config expects " + std::to_string(d));
  }
  if (lexicon.positions() != K) {
    throw DimensionError("lexicon has " + std::to_string(lexicon.positions()) +
                         " positions, config expects " + std::to_string(K));
  }
  require_shape(lstm.Wx, 4 * H, d, "lstm.Wx");
  require_shape(lstm.Wh, 4 * H, H, "lstm.Wh");
  require_shape(lstm.b, 4 * H, 1, "lstm.b");
  require_shape(cws_proj.W, L, H + L, "cws.proj.W");
  require_shape(cws_proj.b, L, 1, "cws.proj.b");
  require_shape(cws_crf.transitions, L, L, "cws.crf.transitions");
  require_shape(cws_crf.start, L, 1, "cws.crf.start");
  require_shape(cws_crf.stop, L, 1, "cws.crf.stop");
  require_shape(ner_proj.W, N, H + d + K, "ner.proj.W");
  require_shape(ner_proj.b, N, 1, "ner.proj.b");
  require_shape(ner_crf.transitions, N, N, "ner.crf.transitions");
  require_shape(ner_crf.start, N, 1, "ner.crf.start");
  require_shape(ner_crf.stop, N, 1, "ner.crf.stop");
}

CwsForward cws_forward(const Tagger& tagger, std::u32string_view chars,
                       const std::optional<Mat64>& mask,
                       const std::vector<SegLabel>* fixed_boundary) {
  CwsForward f;
  const auto ids = lookup_ids(tagger.embeddings, chars);
  f.cache = encode(tagger.embeddings, tagger.lstm, ids, mask);
  const Index T = static_cast<Index>(chars.size());
  const HeadLayout layout = tagger.cws_layout();

  // Scores from the hidden block alone drive the boundary decision.
  const Mat64 base = head_scores(f.cache, tagger.cws_proj, layout, Mat64::Zero(kSegLabelCount, T));
  f.boundary = backward_boundary_decision(base);
  assemble_decision(f.boundary, chars, tagger.lexicon, tagger.config.assemble_options());
  if (fixed_boundary) {
    if (fixed_boundary->size() != chars.size()) {
      throw DimensionError("cws_forward: fixed boundary has " +
                           std::to_string(fixed_boundary->size()) + " labels for " +
                           std::to_string(chars.size()) + " characters");
    }
    f.boundary_labels = *fixed_boundary;
  } else {
    f.boundary_labels = relabel(f.boundary.segmentation());
  }

  if (tagger.config.boundary_features) {
    f.emissions = head_scores(f.cache, tagger.cws_proj, layout,
                              one_hot_bies(f.boundary_labels).transpose());
  } else {
    f.emissions = base;
  }
  return f;
}

NerForward ner_forward(const Tagger& tagger, std::u32string_view chars,
                       const std::optional<Mat64>& mask, const std::vector<SegLabel>* fixed_hints) {
  NerForward f;
  if (fixed_hints) {
    f.hints = *fixed_hints;
  } else if (tagger.config.positional_hints) {
    f.hints = relabel(segment_sentence(tagger, chars, true));
  }
  const auto ids = lookup_ids(tagger.embeddings, chars, f.hints);
  f.cache = encode(tagger.embeddings, tagger.lstm, ids, mask);
  f.emissions = head_scores(f.cache, tagger.ner_proj, tagger.ner_layout(),
                            lexical_features(chars, tagger.lexicon).transpose());
  return f;
}

Segmentation segment_sentence(const Tagger& tagger, std::u32string_view chars, bool do_assemble) {
  if (chars.empty()) return {};
  const CwsForward f = cws_forward(tagger, chars, std::nullopt);
  const auto best = viterbi(f.emissions, tagger.cws_crf);
  std::vector<SegLabel> labels;
  labels.reserve(best.labels.size());
  for (int l : best.labels) labels.push_back(static_cast<SegLabel>(l));
  Segmentation seg = decode_bies(labels);
  if (do_assemble) seg = assemble(seg, chars, tagger.lexicon, tagger.config.assemble_options());
  return seg;
}

std::vector<NerTag> tag_sentence(const Tagger& tagger, std::u32string_view chars) {
  if (chars.empty()) return {};
  const NerForward f = ner_forward(tagger, chars, std::nullopt);
  const auto best = viterbi(f.emissions, tagger.ner_crf);
  std::vector<NerTag> tags;
  tags.reserve(best.labels.size());
  for (int l : best.labels) tags.push_back(NerTag::from_index(l));
  repair_bio(tags);
  return tags;
}

StepGrads cws_loss_and_grad(const Tagger& tagger, const LabeledSequence& seq,
                            const std::optional<Mat64>& mask,
                            const std::vector<SegLabel>* fixed_boundary) {
  if (!seq.gold_seg) throw std::invalid_argument("CWS training sentence has no segmentation");
  const CwsForward f = cws_forward(tagger, seq.chars, mask, fixed_boundary);
  const auto gold = to_ints(*seq.gold_seg);
  auto nll = nll_and_grad(f.emissions, tagger.cws_crf, gold);
  StepGrads g{nll.loss, ModelGrads::zeros_like(tagger.lstm, tagger.cws_proj), std::move(nll.d_crf)};
  model_backward(nll.d_emissions, f.cache, tagger.embeddings, tagger.lstm, tagger.cws_proj, g.model);
  return g;
}

StepGrads ner_loss_and_grad(const Tagger& tagger, const LabeledSequence& seq,
                            const std::optional<Mat64>& mask,
                            const std::vector<SegLabel>* fixed_hints) {
  if (!seq.gold_ner) throw std::invalid_argument("NER training sentence has no tags");
  const NerForward f = ner_forward(tagger, seq.chars, mask, fixed_hints);
  const auto gold = to_ints(*seq.gold_ner);
  auto nll = nll_and_grad(f.emissions, tagger.ner_crf, gold);
  StepGrads g{nll.loss, ModelGrads::zeros_like(tagger.lstm, tagger.ner_proj), std::move(nll.d_crf)};
  model_backward(nll.d_emissions, f.cache, tagger.embeddings, tagger.lstm, tagger.ner_proj, g.model);
  return g;
}

void apply_cws_step(Tagger& tagger, const StepGrads& g, double lr) {
  apply_shared(tagger, g.model, lr);
  apply_head(tagger.cws_proj, tagger.cws_crf, g, lr);
}

void apply_ner_step(Tagger& tagger, const StepGrads& g, double lr) {
  apply_shared(tagger, g.model, lr);
  apply_head(tagger.ner_proj, tagger.ner_crf, g, lr);
}

std::optional<Mat64> hidden_dropout(Index hidden, Index steps, double rate, Rng& rng) {
  if (rate == 0.0) return std::nullopt;
  const Vec64 flat = dropout_mask(hidden * steps, rate, rng);
  return Mat64(Eigen::Map<const Mat64>(flat.data(), hidden, steps));
}

double train_epoch_cws(Tagger& tagger, std::span<const LabeledSequence> corpus, Rng& rng) {
  if (corpus.empty()) throw std::invalid_argument("train_epoch_cws: empty corpus");
  const auto& cfg = tagger.config;
  const auto order = subsample_indices(corpus.size(), std::min(cfg.cws_subsample, corpus.size()), rng);
  double total = 0.0;
  for (std::size_t i : order) {
    const LabeledSequence& seq = corpus[i];
    const auto mask = hidden_dropout(cfg.hidden_size, static_cast<Index>(seq.chars.size()), cfg.dropout, rng);
    const StepGrads g = cws_loss_and_grad(tagger, seq, mask);
    total += g.loss;
    apply_cws_step(tagger, g, cfg.learning_rate);
  }
  return total / static_cast<double>(order.size());
}

double train_epoch_ner(Tagger& tagger, std::span<const LabeledSequence> corpus, Rng& rng) {
  if (corpus.empty()) throw std::invalid_argument("train_epoch_ner: empty corpus");
  const auto& cfg = tagger.config;
  const auto order = subsample_indices(corpus.size(), std::min(cfg.ner_subsample, corpus.size()), rng);
  double total = 0.0;
  for (std::size_t i : order) {
    const LabeledSequence& seq = corpus[i];
    const auto mask = hidden_dropout(cfg.hidden_size, static_cast<Index>(seq.chars.size()), cfg.dropout, rng);
    const StepGrads g = ner_loss_and_grad(tagger, seq, mask);
    total += g.loss;
    apply_ner_step(tagger, g, cfg.learning_rate);
  }
  return total / static_cast<double>(order.size());
}

EvalReport evaluate_ner(const Tagger& tagger, std::span<const LabeledSequence> corpus,
                        unsigned threads) {
  std::vector<std::vector<NerTag>> predicted(corpus.size());
  parallel_for(corpus.size(), threads,
               [&](std::size_t i) { predicted[i] = tag_sentence(tagger, corpus[i].chars); });
  EvalReport report;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].gold_ner) throw std::invalid_argument("evaluate_ner: sentence without gold tags");
    report.add_ner(*corpus[i].gold_ner, predicted[i]);
  }
  return report;
}

EvalReport evaluate_seg(const Tagger& tagger, std::span<const LabeledSequence> corpus,
                        unsigned threads, bool do_assemble) {
  std::vector<Segmentation> predicted(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    predicted[i] = segment_sentence(tagger, corpus[i].chars, do_assemble);
  });
  EvalReport report;
  report.segmentation.emplace();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].gold_seg) throw std::invalid_argument("evaluate_seg: sentence without gold segmentation");
    report.add_segmentation(decode_bies(*corpus[i].gold_seg), predicted[i]);
  }
  return report;
}

TrainResult train(std::span<const LabeledSequence> cws_corpus,
                  std::span<const LabeledSequence> ner_train,
                  std::span<const LabeledSequence> ner_dev, const TrainConfig& cfg,
                  const Lexicon& lexicon, const std::optional<EmbeddingTable>& pretrained,
                  const EpochCallback& on_epoch) {
  if (cws_corpus.empty() || ner_train.empty() || ner_dev.empty()) {
    throw std::invalid_argument("train: CWS, NER train and NER dev corpora must be non-empty");
  }
  Rng rng(cfg.seed);
  std::vector<const LabeledSequence*> vocab_sources;
  for (const auto& s : cws_corpus) vocab_sources.push_back(&s);
  for (const auto& s : ner_train) vocab_sources.push_back(&s);
  Tagger tagger = Tagger::initialize(cfg, vocab_sources, lexicon, rng, pretrained);

  TrainResult result{Checkpoint{kCheckpointVersion, tagger, 0, 0.0}, {}};
  double best = -std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.cws_loss = train_epoch_cws(tagger, cws_corpus, rng);
    rec.ner_loss = train_epoch_ner(tagger, ner_train, rng);
    rec.dev_f1 = evaluate_ner(tagger, ner_dev).overall.f1();
    rec.improved = rec.dev_f1 > best;
    if (rec.improved) {
      best = rec.dev_f1;
      stale = 0;
      result.best = Checkpoint{kCheckpointVersion, tagger, epoch, rec.dev_f1};
    } else {
      ++stale;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (!rec.improved && stale >= std::max(cfg.patience, 1)) break;
  }
  return result;
}

}  // namespace segner
