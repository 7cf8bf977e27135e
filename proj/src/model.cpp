#include "segner/model.hpp"

#include <charconv>
#include <sstream>

#include "segner/utf8.hpp"

namespace segner {

namespace {

Mat64 sigmoid(const Mat64& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw CorpusError("bad embedding value \"" + std::string(s) + "\"", line_no);
  }
  return v;
}

}  // namespace

EmbeddingTable::EmbeddingTable(Index dim, std::string positional_suffixes)
    : vectors_(Mat64::Zero(dim, 1)), tokens_{std::string(kUnkToken)},
      suffixes_(std::move(positional_suffixes)) {
  if (dim <= 0) throw std::invalid_argument("EmbeddingTable: dimension must be positive");
  if (suffixes_.size() != 4) {
    throw std::invalid_argument("EmbeddingTable: need exactly four positional suffixes");
  }
  index_.emplace(tokens_[0], 0);
}

Index EmbeddingTable::add(const std::string& token, const Vec64& vec) {
  if (vec.size() != dim()) {
    throw DimensionError("EmbeddingTable::add: vector for \"" + token + "\" has " +
                         std::to_string(vec.size()) + " entries, table dim is " +
                         std::to_string(dim()));
  }
  if (index_.count(token)) throw std::invalid_argument("duplicate embedding token \"" + token + "\"");
  const Index id = size();
  vectors_.conservativeResize(Eigen::NoChange, id + 1);
  vectors_.col(id) = vec;
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::optional<Index> EmbeddingTable::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string EmbeddingTable::positional_token(char32_t c, SegLabel hint) const {
  return utf8::encode(c) + suffixes_[static_cast<std::size_t>(hint)];
}

Index EmbeddingTable::lookup_id(char32_t c, std::optional<SegLabel> hint) const {
  if (hint) {
    if (auto id = find(positional_token(c, *hint))) return *id;
  }
  if (auto id = find(utf8::encode(c))) return *id;
  return unk();
}

EmbeddingTable load_embeddings(std::string_view text, Index expected_dim,
                               std::string positional_suffixes) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw CorpusError("embedding file is empty", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_ws(line);
  long long count = -1, dim = -1;
  if (header.size() == 2) {
    std::from_chars(header[0].data(), header[0].data() + header[0].size(), count);
    std::from_chars(header[1].data(), header[1].data() + header[1].size(), dim);
  }
  if (count < 0 || dim <= 0) throw CorpusError("header must be \"<count> <dim>\"", line_no);
  if (dim != expected_dim) {
    throw CorpusError("embedding dimension " + std::to_string(dim) + " does not match configured " +
                          std::to_string(expected_dim),
                      line_no);
  }

  EmbeddingTable table(expected_dim, std::move(positional_suffixes));
  long long rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (rows == count) throw CorpusError("more rows than the declared count " + std::to_string(count), line_no);
    if (static_cast<long long>(fields.size()) != dim + 1) {
      throw CorpusError("expected token plus " + std::to_string(dim) + " values, found " +
                            std::to_string(fields.size() - 1),
                        line_no);
    }
    if (!utf8::is_valid(fields[0])) throw CorpusError("token is not valid UTF-8", line_no);
    Vec64 vec(dim);
    for (long long k = 0; k < dim; ++k) vec(k) = parse_double(fields[k + 1], line_no);
    const std::string token(fields[0]);
    if (token == kUnkToken) {
      table.vectors().col(table.unk()) = vec;
    } else {
      try {
        table.add(token, vec);
      } catch (const std::invalid_argument& e) {
        throw CorpusError(e.what(), line_no);
      }
    }
    ++rows;
  }
  if (rows != count) {
    throw CorpusError("declared " + std::to_string(count) + " rows, found " + std::to_string(rows),
                      line_no);
  }
  return table;
}

LstmParams LstmParams::zeros(Index input_dim, Index hidden) {
  return {Mat64::Zero(4 * hidden, input_dim), Mat64::Zero(4 * hidden, hidden),
          Vec64::Zero(4 * hidden)};
}

Projection Projection::zeros(Index labels, Index features) {
  return {Mat64::Zero(labels, features), Vec64::Zero(labels)};
}

ModelGrads ModelGrads::zeros_like(const LstmParams& lstm, const Projection& proj) {
  return {LstmParams::zeros(lstm.input_dim(), lstm.hidden()),
          Projection::zeros(proj.labels(), proj.features()), {}};
}

LstmCache lstm_forward(const Mat64& inputs, const LstmParams& params,
                       const std::optional<Mat64>& mask) {
  const Index H = params.hidden();
  const Index T = inputs.cols();
  if (inputs.rows() != params.input_dim() || params.Wh.rows() != 4 * H ||
      params.Wx.rows() != 4 * H || params.b.size() != 4 * H) {
    throw DimensionError("lstm_forward: inputs are " + shape_of(inputs) + ", Wx is " +
                         shape_of(params.Wx) + ", Wh is " + shape_of(params.Wh) + ", b is " +
                         shape_of(params.b));
  }
  if (mask && (mask->rows() != H || mask->cols() != T)) {
    throw DimensionError("lstm_forward: mask is " + shape_of(*mask) + ", expected " +
                         std::to_string(H) + "x" + std::to_string(T));
  }

  LstmCache c;
  c.inputs = inputs;
  c.gate_i.resize(H, T);
  c.gate_f.resize(H, T);
  c.gate_o.resize(H, T);
  c.gate_g.resize(H, T);
  c.cells.resize(H, T);
  c.hidden.resize(H, T);

  // Input contributions for all steps at once.
  const Mat64 zx = (params.Wx * inputs).colwise() + params.b;
  Vec64 h_prev = Vec64::Zero(H);
  Vec64 c_prev = Vec64::Zero(H);
  for (Index t = 0; t < T; ++t) {
    const Vec64 z = zx.col(t) + params.Wh * h_prev;
    c.gate_i.col(t) = sigmoid(z.segment(0, H));
    c.gate_f.col(t) = sigmoid(z.segment(H, H));
    c.gate_o.col(t) = sigmoid(z.segment(2 * H, H));
    c.gate_g.col(t) = z.segment(3 * H, H).array().tanh().matrix();
    c.cells.col(t) = c.gate_f.col(t).cwiseProduct(c_prev) + c.gate_i.col(t).cwiseProduct(c.gate_g.col(t));
    c.hidden.col(t) = c.gate_o.col(t).cwiseProduct(c.cells.col(t).array().tanh().matrix());
    h_prev = c.hidden.col(t);
    c_prev = c.cells.col(t);
  }
  if (mask) {
    c.mask = *mask;
    c.output = c.hidden.cwiseProduct(c.mask);
  } else {
    c.output = c.hidden;
  }
  return c;
}

Mat64 lstm_backward(const LstmCache& c, const LstmParams& params, const Mat64& d_output,
                    LstmParams& grads) {
  const Index H = params.hidden();
  const Index T = c.steps();
  if (T == 0 || c.hidden.rows() != H || c.inputs.rows() != params.input_dim()) {
    throw std::invalid_argument("lstm_backward: cache does not match the parameters");
  }
  if (d_output.rows() != H || d_output.cols() != T) {
    throw DimensionError("lstm_backward: upstream is " + shape_of(d_output) + ", cache holds " +
                         std::to_string(H) + "x" + std::to_string(T));
  }
  if (grads.Wx.rows() != params.Wx.rows() || grads.Wx.cols() != params.Wx.cols() ||
      grads.Wh.rows() != params.Wh.rows() || grads.b.size() != params.b.size()) {
    throw DimensionError("lstm_backward: gradient buffers have the wrong shape");
  }

  const Mat64 d_hidden_out = c.mask.size() ? Mat64(d_output.cwiseProduct(c.mask)) : d_output;
  Mat64 d_inputs(c.inputs.rows(), T);
  Mat64 dz_all(4 * H, T);
  Vec64 dh_next = Vec64::Zero(H);
  Vec64 dc_next = Vec64::Zero(H);
  for (Index t = T - 1; t >= 0; --t) {
    const Vec64 dh = d_hidden_out.col(t) + dh_next;
    const Vec64 tanh_c = c.cells.col(t).array().tanh().matrix();
    const Vec64 c_prev = t > 0 ? Vec64(c.cells.col(t - 1)) : Vec64::Zero(H);
    const auto i = c.gate_i.col(t).array();
    const auto f = c.gate_f.col(t).array();
    const auto o = c.gate_o.col(t).array();
    const auto g = c.gate_g.col(t).array();

    const Vec64 dc = (dh.array() * o * (1.0 - tanh_c.array().square())).matrix() + dc_next;
    auto dz = dz_all.col(t);
    dz.segment(0, H) = (dc.array() * g * i * (1.0 - i)).matrix();
    dz.segment(H, H) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
    dz.segment(2 * H, H) = (dh.array() * tanh_c.array() * o * (1.0 - o)).matrix();
    dz.segment(3 * H, H) = (dc.array() * i * (1.0 - g.square())).matrix();

    dc_next = (dc.array() * f).matrix();
    dh_next.noalias() = params.Wh.transpose() * dz;
  }
  grads.Wx.noalias() += dz_all * c.inputs.transpose();
  if (T > 1) grads.Wh.noalias() += dz_all.rightCols(T - 1) * c.hidden.leftCols(T - 1).transpose();
  grads.b += dz_all.rowwise().sum();
  d_inputs.noalias() = params.Wx.transpose() * dz_all;
  return d_inputs;
}

Mat64 project(const Mat64& features, const Projection& proj) {
  if (features.rows() != proj.features() || proj.b.size() != proj.labels()) {
    throw DimensionError("project: features are " + shape_of(features) + ", W is " +
                         shape_of(proj.W) + ", b is " + shape_of(proj.b));
  }
  return ((proj.W * features).colwise() + proj.b).transpose();
}

Mat64 project_backward(const Mat64& d_scores, const Mat64& features, const Projection& proj,
                       Projection& grads) {
  if (d_scores.rows() != features.cols() || d_scores.cols() != proj.labels() ||
      grads.W.rows() != proj.W.rows() || grads.W.cols() != proj.W.cols()) {
    throw DimensionError("project_backward: upstream is " + shape_of(d_scores) +
                         ", features are " + shape_of(features) + ", W is " + shape_of(proj.W));
  }
  grads.W.noalias() += d_scores.transpose() * features.transpose();
  grads.b += d_scores.colwise().sum().transpose();
  return proj.W.transpose() * d_scores.transpose();
}

std::vector<Index> lookup_ids(const EmbeddingTable& table, std::u32string_view chars,
                              std::span<const SegLabel> hints) {
  if (!hints.empty() && hints.size() != chars.size()) {
    throw DimensionError("lookup_ids: " + std::to_string(hints.size()) + " hints for " +
                         std::to_string(chars.size()) + " characters");
  }
  std::vector<Index> ids;
  ids.reserve(chars.size());
  for (std::size_t t = 0; t < chars.size(); ++t) {
    ids.push_back(table.lookup_id(chars[t], hints.empty() ? std::nullopt
                                                          : std::optional<SegLabel>(hints[t])));
  }
  return ids;
}

ModelCache encode(const EmbeddingTable& table, const LstmParams& lstm, std::span<const Index> ids,
                  const std::optional<Mat64>& mask) {
  if (ids.empty()) throw std::invalid_argument("encode: empty sentence");
  if (table.dim() != lstm.input_dim()) {
    throw DimensionError("encode: embedding dim " + std::to_string(table.dim()) +
                         " but LSTM expects " + std::to_string(lstm.input_dim()));
  }
  const Index T = static_cast<Index>(ids.size());
  Mat64 inputs(table.dim(), T);
  for (Index t = 0; t < T; ++t) inputs.col(t) = table.vectors().col(ids[static_cast<std::size_t>(t)]);
  ModelCache cache;
  cache.token_ids.assign(ids.begin(), ids.end());
  cache.lstm = lstm_forward(inputs, lstm, mask);
  return cache;
}

Mat64 head_scores(ModelCache& cache, const Projection& proj, const HeadLayout& layout,
                  const Mat64& extra) {
  const Index H = cache.lstm.output.rows();
  const Index d = cache.lstm.inputs.rows();
  const Index T = cache.lstm.steps();
  if (layout.extra_dim > 0 && (extra.rows() != layout.extra_dim || extra.cols() != T)) {
    throw DimensionError("head_scores: extra features are " + shape_of(extra) + ", expected " +
                         std::to_string(layout.extra_dim) + "x" + std::to_string(T));
  }
  Mat64 features(layout.feature_dim(H, d), T);
  features.topRows(H) = cache.lstm.output;
  Index row = H;
  if (layout.with_embedding) {
    features.middleRows(row, d) = cache.lstm.inputs;
    row += d;
  }
  if (layout.extra_dim > 0) features.bottomRows(layout.extra_dim) = extra;
  cache.features = std::move(features);
  cache.layout = layout;
  cache.has_head = true;
  return project(cache.features, proj);
}

void model_backward(const Mat64& d_scores, const ModelCache& cache, const EmbeddingTable& table,
                    const LstmParams& lstm, const Projection& proj, ModelGrads& grads) {
  if (!cache.has_head) throw std::invalid_argument("model_backward: cache has no head pass");
  if (cache.features.rows() != proj.features()) {
    throw DimensionError("model_backward: cache features are " + shape_of(cache.features) +
                         " but projection expects " + std::to_string(proj.features()) + " rows");
  }
  const Index H = lstm.hidden();
  const Index d = table.dim();
  const Mat64 d_features = project_backward(d_scores, cache.features, proj, grads.proj);
  Mat64 d_inputs = lstm_backward(cache.lstm, lstm, d_features.topRows(H), grads.lstm);
  if (cache.layout.with_embedding) d_inputs += d_features.middleRows(H, d);

  for (std::size_t t = 0; t < cache.token_ids.size(); ++t) {
    const Index id = cache.token_ids[t];
    auto [it, inserted] = grads.embedding.try_emplace(id, Vec64::Zero(d));
    it->second += d_inputs.col(static_cast<Index>(t));
  }
}

}  // namespace segner
