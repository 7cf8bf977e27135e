#ifndef SEGNER_MODEL_HPP
#define SEGNER_MODEL_HPP

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "segner/corpus.hpp"
#include "segner/tensor.hpp"

namespace segner {

inline constexpr std::string_view kUnkToken = "<UNK>";

/// Token vectors stored column-wise in a d x V matrix. Column 0 is always UNK.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(Index dim = 100, std::string positional_suffixes = "0123");

  Index dim() const noexcept { return vectors_.rows(); }
  Index size() const noexcept { return vectors_.cols(); }
  Index unk() const noexcept { return 0; }

  /// Appends a token; throws if it already exists or the vector has the wrong size.
  Index add(const std::string& token, const Vec64& vec);
  std::optional<Index> find(std::string_view token) const;
  const std::string& token(Index id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  /// "char + positional suffix", then bare "char", then UNK.
  Index lookup_id(char32_t c, std::optional<SegLabel> hint) const;
  Vec64 lookup(char32_t c, std::optional<SegLabel> hint) const { return vectors_.col(lookup_id(c, hint)); }

  const std::string& positional_suffixes() const noexcept { return suffixes_; }
  std::string positional_token(char32_t c, SegLabel hint) const;

  Mat64& vectors() noexcept { return vectors_; }
  const Mat64& vectors() const noexcept { return vectors_; }

 private:
  Mat64 vectors_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> index_;
  std::string suffixes_;
};

/// Parses word2vec text format ("count dim" header, then "token v1 .. vdim").
/// A "<UNK>" row, if present, becomes the unknown vector; otherwise UNK is zero.
EmbeddingTable load_embeddings(std::string_view text, Index expected_dim,
                               std::string positional_suffixes = "0123");

/// Gate blocks are stacked [input; forget; output; candidate], each H rows.
struct LstmParams {
  Mat64 Wx;  // 4H x d
  Mat64 Wh;  // 4H x H
  Vec64 b;   // 4H

  static LstmParams zeros(Index input_dim, Index hidden);
  Index hidden() const noexcept { return Wh.cols(); }
  Index input_dim() const noexcept { return Wx.cols(); }
};

struct Projection {
  Mat64 W;  // L x F
  Vec64 b;  // L

  static Projection zeros(Index labels, Index features);
  Index labels() const noexcept { return W.rows(); }
  Index features() const noexcept { return W.cols(); }
};

struct LstmCache {
  Mat64 inputs;   // d x T
  Mat64 gate_i, gate_f, gate_o, gate_g;  // H x T, post-activation
  Mat64 cells;    // H x T
  Mat64 hidden;   // H x T, before dropout
  Mat64 mask;     // H x T, empty when no dropout
  Mat64 output;   // H x T, hidden with the mask applied

  Index steps() const noexcept { return hidden.cols(); }
};

/// Single-layer left-to-right LSTM from zero state. `mask`, when given, is
/// H x T and multiplies the emitted hidden states only.
LstmCache lstm_forward(const Mat64& inputs, const LstmParams& params,
                       const std::optional<Mat64>& mask = std::nullopt);

/// Accumulates into `grads`; returns d loss / d inputs (d x T).
Mat64 lstm_backward(const LstmCache& cache, const LstmParams& params, const Mat64& d_output,
                    LstmParams& grads);

/// Row t of the result is W * features.col(t) + b (features is F x T).
Mat64 project(const Mat64& features, const Projection& proj);

/// Accumulates into `grads`; returns d loss / d features (F x T).
Mat64 project_backward(const Mat64& d_scores, const Mat64& features, const Projection& proj,
                       Projection& grads);

/// Which streams feed a head's projection, in order: LSTM output, then the
/// input embeddings if `with_embedding`, then `extra_dim` external feature rows.
struct HeadLayout {
  bool with_embedding = false;
  Index extra_dim = 0;

  Index feature_dim(Index hidden, Index embed_dim) const {
    return hidden + (with_embedding ? embed_dim : 0) + extra_dim;
  }
};

struct ModelCache {
  std::vector<Index> token_ids;
  LstmCache lstm;
  HeadLayout layout;
  Mat64 features;  // F x T, set by head_scores
  bool has_head = false;
};

using EmbeddingGrad = std::map<Index, Vec64>;

struct ModelGrads {
  LstmParams lstm;
  Projection proj;
  EmbeddingGrad embedding;

  static ModelGrads zeros_like(const LstmParams& lstm, const Projection& proj);
};

std::vector<Index> lookup_ids(const EmbeddingTable& table, std::u32string_view chars,
                              std::span<const SegLabel> hints = {});

/// Embedding lookup followed by the LSTM.
ModelCache encode(const EmbeddingTable& table, const LstmParams& lstm, std::span<const Index> ids,
                  const std::optional<Mat64>& mask = std::nullopt);

/// Builds the head's feature matrix from the cache and `extra` (extra_dim x T)
/// and returns the T x L score matrix.
Mat64 head_scores(ModelCache& cache, const Projection& proj, const HeadLayout& layout,
                  const Mat64& extra = Mat64());

/// Gradients through projection, dropout, recurrence and embedding lookups.
/// Embedding rows accumulate per token id.
void model_backward(const Mat64& d_scores, const ModelCache& cache, const EmbeddingTable& table,
                    const LstmParams& lstm, const Projection& proj, ModelGrads& grads);

}  // namespace segner

#endif  // SEGNER_MODEL_HPP
