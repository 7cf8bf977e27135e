#include "segner/checkpoint.hpp"

#include <fstream>

#include "json.hpp"
#include "segner/utf8.hpp"

namespace segner {

namespace {

using nlohmann::json;

constexpr std::string_view kFormatName = "segner-checkpoint";

json tensor_to_json(const Eigen::Ref<const Mat64>& m) {
  json data = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw CheckpointError("checkpoint field " + path + " is not an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw CheckpointError("checkpoint is missing field " + path + "." + key);
  return *it;
}

template <typename T>
T get(const json& obj, const std::string& key, const std::string& path) {
  const json& v = field(obj, key, path);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw CheckpointError("checkpoint field " + path + "." + key + " has the wrong type");
  }
}

Mat64 tensor_from_json(const json& tensors, const std::string& name) {
  const json& t = field(tensors, name, "tensors");
  const std::string path = "tensors." + name;
  const auto rows = get<Index>(t, "rows", path);
  const auto cols = get<Index>(t, "cols", path);
  const json& data = field(t, "data", path);
  if (rows < 0 || cols < 0 || !data.is_array() ||
      data.size() != static_cast<std::size_t>(rows * cols)) {
    throw CheckpointError("checkpoint tensor " + name + " has " +
                          std::to_string(data.is_array() ? data.size() : 0) + " values for " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  Mat64 m(rows, cols);
  std::size_t k = 0;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j, ++k) {
      if (!data[k].is_number()) throw CheckpointError("checkpoint tensor " + name + " holds a non-number");
      m(i, j) = data[k].get<double>();
    }
  }
  return m;
}

Vec64 vector_from_json(const json& tensors, const std::string& name) {
  Mat64 m = tensor_from_json(tensors, name);
  if (m.cols() != 1) throw CheckpointError("checkpoint tensor " + name + " must have one column");
  return m.col(0);
}

json config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"dropout", c.dropout},
          {"max_epochs", c.max_epochs},
          {"cws_subsample", c.cws_subsample},
          {"ner_subsample", c.ner_subsample},
          {"hidden_size", c.hidden_size},
          {"embedding_dim", c.embedding_dim},
          {"seed", c.seed},
          {"patience", c.patience},
          {"init_scale", c.init_scale},
          {"lexicon_positions", c.lexicon_positions},
          {"positional_suffixes", c.positional_suffixes},
          {"boundary_features", c.boundary_features},
          {"chain_merge", c.chain_merge},
          {"retest_compounds", c.retest_compounds},
          {"max_merge_words", c.max_merge_words},
          {"fine_tune_embeddings", c.fine_tune_embeddings},
          {"positional_hints", c.positional_hints}};
}

TrainConfig config_from_json(const json& j) {
  const std::string p = "config";
  TrainConfig c;
  c.learning_rate = get<double>(j, "learning_rate", p);
  c.dropout = get<double>(j, "dropout", p);
  c.max_epochs = get<int>(j, "max_epochs", p);
  c.cws_subsample = get<std::size_t>(j, "cws_subsample", p);
  c.ner_subsample = get<std::size_t>(j, "ner_subsample", p);
  c.hidden_size = get<Index>(j, "hidden_size", p);
  c.embedding_dim = get<Index>(j, "embedding_dim", p);
  c.seed = get<std::uint64_t>(j, "seed", p);
  c.patience = get<int>(j, "patience", p);
  c.init_scale = get<double>(j, "init_scale", p);
  c.lexicon_positions = get<int>(j, "lexicon_positions", p);
  c.positional_suffixes = get<std::string>(j, "positional_suffixes", p);
  c.boundary_features = get<bool>(j, "boundary_features", p);
  c.chain_merge = get<bool>(j, "chain_merge", p);
  c.retest_compounds = get<bool>(j, "retest_compounds", p);
  c.max_merge_words = get<std::size_t>(j, "max_merge_words", p);
  c.fine_tune_embeddings = get<bool>(j, "fine_tune_embeddings", p);
  c.positional_hints = get<bool>(j, "positional_hints", p);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint ") + e.what());
  }
  return c;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  const Tagger& t = ckpt.tagger;
  json lex_entries = json::array();
  for (const auto& [word, weight] : t.lexicon.entries()) lex_entries.push_back({utf8::encode(word), weight});

  json tensors = json::object();
  tensors["embeddings"] = tensor_to_json(t.embeddings.vectors());
  tensors["lstm.Wx"] = tensor_to_json(t.lstm.Wx);
  tensors["lstm.Wh"] = tensor_to_json(t.lstm.Wh);
  tensors["lstm.b"] = tensor_to_json(t.lstm.b);
  tensors["cws.proj.W"] = tensor_to_json(t.cws_proj.W);
  tensors["cws.proj.b"] = tensor_to_json(t.cws_proj.b);
  tensors["cws.crf.transitions"] = tensor_to_json(t.cws_crf.transitions);
  tensors["cws.crf.start"] = tensor_to_json(t.cws_crf.start);
  tensors["cws.crf.stop"] = tensor_to_json(t.cws_crf.stop);
  tensors["ner.proj.W"] = tensor_to_json(t.ner_proj.W);
  tensors["ner.proj.b"] = tensor_to_json(t.ner_proj.b);
  tensors["ner.crf.transitions"] = tensor_to_json(t.ner_crf.transitions);
  tensors["ner.crf.start"] = tensor_to_json(t.ner_crf.start);
  tensors["ner.crf.stop"] = tensor_to_json(t.ner_crf.stop);

  json doc = {{"format", kFormatName},
              {"version", ckpt.version},
              {"epoch", ckpt.epoch},
              {"best_dev_f1", ckpt.best_dev_f1},
              {"config", config_to_json(t.config)},
              {"vocabulary",
               {{"positional_suffixes", t.embeddings.positional_suffixes()},
                {"tokens", t.embeddings.tokens()}}},
              {"lexicon", {{"positions", t.lexicon.positions()}, {"entries", std::move(lex_entries)}}},
              {"tensors", std::move(tensors)}};
  return doc.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint is truncated or malformed: ") + e.what());
  }
  if (get<std::string>(doc, "format", "$") != kFormatName) {
    throw CheckpointError("checkpoint field $.format is not \"" + std::string(kFormatName) + "\"");
  }
  const int version = get<int>(doc, "version", "$");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint field $.version: unsupported version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }

  const TrainConfig cfg = config_from_json(field(doc, "config", "$"));
  const json& vocab = field(doc, "vocabulary", "$");
  const auto tokens = get<std::vector<std::string>>(vocab, "tokens", "vocabulary");
  const auto suffixes = get<std::string>(vocab, "positional_suffixes", "vocabulary");
  const json& tensors = field(doc, "tensors", "$");

  const Mat64 emb = tensor_from_json(tensors, "embeddings");
  if (tokens.empty() || tokens[0] != kUnkToken || emb.cols() != static_cast<Index>(tokens.size())) {
    throw CheckpointError("checkpoint field vocabulary.tokens does not match tensors.embeddings (" +
                          std::to_string(tokens.size()) + " tokens, " + std::to_string(emb.cols()) +
                          " columns)");
  }
  if (emb.rows() != cfg.embedding_dim) {
    throw CheckpointError("checkpoint tensor embeddings has dim " + std::to_string(emb.rows()) +
                          ", config.embedding_dim is " + std::to_string(cfg.embedding_dim));
  }
  EmbeddingTable table(cfg.embedding_dim, suffixes);
  table.vectors().col(0) = emb.col(0);
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    try {
      table.add(tokens[i], emb.col(static_cast<Index>(i)));
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(std::string("checkpoint field vocabulary.tokens: ") + e.what());
    }
  }

  const json& lex = field(doc, "lexicon", "$");
  Lexicon lexicon(get<int>(lex, "positions", "lexicon"));
  const json& entries = field(lex, "entries", "lexicon");
  if (!entries.is_array()) throw CheckpointError("checkpoint field lexicon.entries is not an array");
  for (const json& e : entries) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_number()) {
      throw CheckpointError("checkpoint field lexicon.entries holds a malformed entry");
    }
    lexicon.add(utf8::decode(e[0].get<std::string>()), e[1].get<double>());
  }

  Checkpoint ckpt{version,
                  Tagger{cfg,
                         std::move(table),
                         {tensor_from_json(tensors, "lstm.Wx"), tensor_from_json(tensors, "lstm.Wh"),
                          vector_from_json(tensors, "lstm.b")},
                         {tensor_from_json(tensors, "cws.proj.W"), vector_from_json(tensors, "cws.proj.b")},
                         {tensor_from_json(tensors, "cws.crf.transitions"),
                          vector_from_json(tensors, "cws.crf.start"), vector_from_json(tensors, "cws.crf.stop")},
                         {tensor_from_json(tensors, "ner.proj.W"), vector_from_json(tensors, "ner.proj.b")},
                         {tensor_from_json(tensors, "ner.crf.transitions"),
                          vector_from_json(tensors, "ner.crf.start"), vector_from_json(tensors, "ner.crf.stop")},
                         std::move(lexicon)},
                  get<int>(doc, "epoch", "$"),
                  get<double>(doc, "best_dev_f1", "$")};
  try {
    ckpt.tagger.check_shapes();
  } catch (const DimensionError& e) {
    throw CheckpointError(std::string("checkpoint shape mismatch: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string text = checkpoint_to_string(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  out << text;
  if (!out.flush()) throw CheckpointError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_string(text);
}

}  // namespace segner
