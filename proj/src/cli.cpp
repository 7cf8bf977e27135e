#include "segner/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "segner/checkpoint.hpp"
#include "segner/gradcheck.hpp"
#include "segner/pipeline.hpp"
#include "segner/utf8.hpp"

namespace segner {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr double kGradTolerance = 1e-4;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_input(const std::string& flag, const std::string& path) {
  try {
    return read_file(path);
  } catch (const std::exception&) {
    throw InputError(flag + ": cannot read " + path);
  }
}

template <typename Fn>
auto with_flag(const std::string& flag, Fn&& fn) {
  try {
    return fn();
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(flag + ": " + e.what());
  }
}

void write_text(const std::string& flag, const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) throw InputError(flag + ": cannot write " + path);
}

// Unsegmented input line -> characters, whitespace removed.
std::u32string sentence_chars(const std::string& line, std::size_t line_no) {
  std::string_view v = line;
  if (!v.empty() && v.back() == '\r') v.remove_suffix(1);
  std::u32string chars;
  try {
    for (char32_t c : utf8::decode(v))
      if (c != U' ' && c != U'\t' && c != U'\u3000') chars.push_back(c);
  } catch (const utf8::DecodeError& e) {
    throw InputError("stdin line " + std::to_string(line_no) + ": " + e.what());
  }
  return chars;
}

struct ModelOptions {
  std::string model;
  std::string lexicon;
  unsigned threads = 1;
};

void add_model_options(CLI::App* cmd, ModelOptions& o, bool with_threads) {
  cmd->add_option("--model", o.model, "Checkpoint file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--lexicon", o.lexicon, "Noun lexicon replacing the one stored in the model")
      ->check(CLI::ExistingFile);
  if (with_threads) cmd->add_option("--threads", o.threads, "Evaluation threads")->check(CLI::PositiveNumber);
}

Tagger load_model(const ModelOptions& o) {
  Checkpoint ckpt = with_flag("--model", [&] { return load_checkpoint(o.model); });
  if (!o.lexicon.empty()) {
    const std::string text = read_input("--lexicon", o.lexicon);
    ckpt.tagger.lexicon = with_flag("--lexicon", [&] {
      return load_lexicon(text, ckpt.tagger.config.lexicon_positions);
    });
  }
  return std::move(ckpt.tagger);
}

void print_config(std::ostream& os, const std::string& command, const TrainConfig& cfg) {
  os << "# segner " << command << " configuration\n" << config_to_kv(cfg) << "# end configuration\n";
}

struct TrainOptions {
  std::string cws_train, ner_train, ner_dev, embeddings, lexicon, out, report_path;
  unsigned threads = 1;
  bool no_boundary_features = false, no_chain_merge = false, no_retest = false;
  bool freeze_embeddings = false, no_positional_hints = false;
};

int cmd_train(const TrainOptions& o, TrainConfig cfg, std::ostream& out) {
  cfg.boundary_features = !o.no_boundary_features;
  cfg.chain_merge = !o.no_chain_merge;
  cfg.retest_compounds = !o.no_retest;
  cfg.fine_tune_embeddings = !o.freeze_embeddings;
  cfg.positional_hints = !o.no_positional_hints;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  print_config(out, "train", cfg);

  const auto cws = with_flag("--cws-train", [&] { return parse_sighan(read_input("--cws-train", o.cws_train)); });
  const auto ner_train = with_flag("--ner-train", [&] { return parse_ner_conll(read_input("--ner-train", o.ner_train)); });
  const auto ner_dev = with_flag("--ner-dev", [&] { return parse_ner_conll(read_input("--ner-dev", o.ner_dev)); });
  if (cws.empty()) throw InputError("--cws-train: no sentences in " + o.cws_train);
  if (ner_train.empty()) throw InputError("--ner-train: no sentences in " + o.ner_train);
  if (ner_dev.empty()) throw InputError("--ner-dev: no sentences in " + o.ner_dev);

  Lexicon lexicon(cfg.lexicon_positions);
  if (!o.lexicon.empty()) {
    lexicon = with_flag("--lexicon", [&] { return load_lexicon(read_input("--lexicon", o.lexicon), cfg.lexicon_positions); });
  }
  std::optional<EmbeddingTable> pretrained;
  if (!o.embeddings.empty()) {
    pretrained = with_flag("--embeddings", [&] {
      return load_embeddings(read_input("--embeddings", o.embeddings), cfg.embedding_dim, cfg.positional_suffixes);
    });
  }
  out << "corpora: cws=" << cws.size() << " ner_train=" << ner_train.size() << " ner_dev=" << ner_dev.size()
      << " lexicon=" << lexicon.size() << " embeddings=" << (pretrained ? pretrained->size() : 0) << "\n";

  const TrainResult result = train(cws, ner_train, ner_dev, cfg, lexicon, pretrained, [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " cws_loss=" << r.cws_loss << " ner_loss=" << r.ner_loss
        << " dev_f1=" << r.dev_f1 << (r.improved ? " *" : "") << "\n";
  });
  save_checkpoint(o.out, result.best);
  out << "best epoch " << result.best.epoch << " dev_f1=" << result.best.best_dev_f1 << " -> " << o.out << "\n";

  const EvalReport dev = evaluate_ner(result.best.tagger, ner_dev, o.threads);
  out << format_report_table(dev);
  if (!o.report_path.empty()) write_text("--report-path", o.report_path, format_report_kv(dev));
  return kExitOk;
}

int cmd_eval_ner(const ModelOptions& m, const std::string& data, const std::string& report_path,
                 std::ostream& out) {
  const Tagger tagger = load_model(m);
  print_config(out, "eval-ner", tagger.config);
  const auto corpus = with_flag("--data", [&] { return parse_ner_conll(read_input("--data", data)); });
  const EvalReport report = evaluate_ner(tagger, corpus, m.threads);
  out << format_report_table(report);
  if (!report_path.empty()) write_text("--report-path", report_path, format_report_kv(report));
  return kExitOk;
}

int cmd_eval_seg(const ModelOptions& m, const std::string& data, const std::string& report_path,
                 bool no_assemble, std::ostream& out) {
  const Tagger tagger = load_model(m);
  print_config(out, "eval-seg", tagger.config);
  const auto corpus = with_flag("--data", [&] { return parse_sighan(read_input("--data", data)); });
  const EvalReport report = evaluate_seg(tagger, corpus, m.threads, !no_assemble);
  out << format_report_table(report);
  if (!report_path.empty()) write_text("--report-path", report_path, format_report_kv(report));
  return kExitOk;
}

int cmd_segment(const ModelOptions& m, bool no_assemble, std::istream& in, std::ostream& out,
                std::ostream& err) {
  const Tagger tagger = load_model(m);
  print_config(err, "segment", tagger.config);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    const std::u32string chars = sentence_chars(line, ++line_no);
    std::string joined;
    if (!chars.empty()) {
      for (const auto& word : segment_sentence(tagger, chars, !no_assemble).words(chars)) {
        if (!joined.empty()) joined += ' ';
        joined += utf8::encode(word);
      }
    }
    out << joined << '\n';
  }
  return kExitOk;
}

int cmd_tag(const ModelOptions& m, std::istream& in, std::ostream& out, std::ostream& err) {
  const Tagger tagger = load_model(m);
  print_config(err, "tag", tagger.config);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    LabeledSequence seq;
    seq.chars = sentence_chars(line, ++line_no);
    if (seq.chars.empty()) continue;
    seq.gold_ner = tag_sentence(tagger, seq.chars);
    out << format_ner_conll(seq);
  }
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, int instances, double eps, const std::string& corrupt,
                  std::ostream& out) {
  out << "# segner gradcheck configuration\nseed = " << seed << "\ninstances = " << instances
      << "\neps = " << eps << "\ntolerance = " << kGradTolerance << "\n# end configuration\n";
  const GradCheckReport report = run_model_gradcheck(seed, instances, eps, corrupt);
  for (const GroupCheck& g : report.groups) {
    out << g.name << " max_rel_err=" << g.max_rel_err << " params=" << g.parameters
        << (g.max_rel_err <= kGradTolerance ? "" : "  FAIL") << "\n";
  }
  const GroupCheck& worst = report.worst();
  if (worst.max_rel_err > kGradTolerance) {
    out << "gradcheck FAILED: worst group " << worst.name << " max_rel_err=" << worst.max_rel_err << "\n";
    return kExitCheckFailed;
  }
  out << "gradcheck passed: worst group " << worst.name << " max_rel_err=" << worst.max_rel_err << "\n";
  return kExitOk;
}

int cmd_inspect(const ModelOptions& m, std::ostream& out) {
  const Checkpoint ckpt = with_flag("--model", [&] { return load_checkpoint(m.model); });
  const Tagger& t = ckpt.tagger;
  print_config(out, "inspect", t.config);
  out << "version = " << ckpt.version << "\nepoch = " << ckpt.epoch << "\nbest_dev_f1 = " << ckpt.best_dev_f1
      << "\nvocabulary = " << t.embeddings.size() << "\nlexicon_entries = " << t.lexicon.size() << "\n";
  Index total = 0;
  auto row = [&](const char* name, const auto& m) {
    out << "tensor " << name << " " << m.rows() << "x" << m.cols() << "\n";
    total += m.size();
  };
  row("embeddings", t.embeddings.vectors());
  row("lstm.Wx", t.lstm.Wx);
  row("lstm.Wh", t.lstm.Wh);
  row("lstm.b", t.lstm.b);
  row("cws.proj.W", t.cws_proj.W);
  row("cws.proj.b", t.cws_proj.b);
  row("cws.crf.transitions", t.cws_crf.transitions);
  row("cws.crf.start", t.cws_crf.start);
  row("cws.crf.stop", t.cws_crf.stop);
  row("ner.proj.W", t.ner_proj.W);
  row("ner.proj.b", t.ner_proj.b);
  row("ner.crf.transitions", t.ner_crf.transitions);
  row("ner.crf.start", t.ner_crf.start);
  row("ner.crf.stop", t.ner_crf.stop);
  out << "parameters = " << total << "\n";
  return kExitOk;
}

// Positive spellings, as printed in the configuration block, of the --no-* flags.
const std::map<std::string, std::string> kNegatedKeys{
    {"boundary-features", "no-boundary-features"}, {"chain-merge", "no-chain-merge"},
    {"retest-compounds", "no-retest-compounds"},   {"positional-hints", "no-positional-hints"},
    {"fine-tune-embeddings", "freeze-embeddings"},
};

// Keys name long options without the leading dashes; '_' and '-' are
// interchangeable. Options already given on the command line win.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  std::ifstream in(path);
  for (const CLI::ConfigItem& item : CLI::ConfigINI().from_config(in)) {
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    std::vector<std::string> inputs = item.inputs;
    if (const auto it = kNegatedKeys.find(name); it != kNegatedKeys.end()) {
      if (inputs.size() != 1 || (inputs[0] != "true" && inputs[0] != "false"))
        throw CLI::ConversionError("key '" + item.name + "' in config file " + path + " must be true or false");
      name = it->second;
      inputs[0] = inputs[0] == "true" ? "false" : "true";
    }
    CLI::Option* opt = name == "config" ? nullptr : cmd.get_option_no_throw("--" + name);
    if (opt == nullptr || !item.parents.empty())
      throw CLI::ConversionError("unknown key '" + item.fullname() + "' in config file " + path);
    if (opt->count() > 0) continue;
    opt->add_result(inputs);
    opt->run_callback();
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"segner: word segmentation, boundary assembling and NER tagging"};
  app.require_subcommand(1);

  TrainConfig cfg;
  TrainOptions topt;
  auto* train_cmd = app.add_subcommand("train", "Two-stage CWS/NER training");
  std::string config_path;
  train_cmd->add_option("--config", config_path, "Key-value config file (flags take precedence)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--cws-train", topt.cws_train, "Segmented corpus, one sentence per line")
      ->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--ner-train", topt.ner_train, "Two-column NER training corpus")
      ->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--ner-dev", topt.ner_dev, "Two-column NER validation corpus")
      ->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--embeddings", topt.embeddings, "word2vec text embeddings")->check(CLI::ExistingFile);
  train_cmd->add_option("--lexicon", topt.lexicon, "Noun lexicon")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", topt.out, "Checkpoint to write")->required();
  train_cmd->add_option("--report-path", topt.report_path, "Key-value dev report of the best checkpoint");
  train_cmd->add_option("--threads", topt.threads, "Evaluation threads")->check(CLI::PositiveNumber);
  train_cmd->add_option("--learning-rate,--lr", cfg.learning_rate, "SGD learning rate")->capture_default_str();
  train_cmd->add_option("--dropout", cfg.dropout, "Dropout on LSTM outputs")->capture_default_str();
  train_cmd->add_option("--max-epochs", cfg.max_epochs)->capture_default_str();
  train_cmd->add_option("--cws-subsample", cfg.cws_subsample, "CWS sentences per epoch")->capture_default_str();
  train_cmd->add_option("--ner-subsample", cfg.ner_subsample, "NER sentences per epoch")->capture_default_str();
  train_cmd->add_option("--hidden-size,--hidden", cfg.hidden_size)->capture_default_str();
  train_cmd->add_option("--embedding-dim", cfg.embedding_dim)->capture_default_str();
  train_cmd->add_option("--seed", cfg.seed)->capture_default_str();
  train_cmd->add_option("--patience", cfg.patience, "Epochs without dev F1 gain before stopping")->capture_default_str();
  train_cmd->add_option("--init-scale", cfg.init_scale)->capture_default_str();
  train_cmd->add_option("--lexicon-positions", cfg.lexicon_positions)->capture_default_str();
  train_cmd->add_option("--positional-suffixes", cfg.positional_suffixes)->capture_default_str();
  train_cmd->add_option("--max-merge-words", cfg.max_merge_words, "0 = unlimited")->capture_default_str();
  train_cmd->add_flag("--no-boundary-features", topt.no_boundary_features);
  train_cmd->add_flag("--no-chain-merge", topt.no_chain_merge);
  train_cmd->add_flag("--no-retest-compounds", topt.no_retest);
  train_cmd->add_flag("--freeze-embeddings", topt.freeze_embeddings);
  train_cmd->add_flag("--no-positional-hints", topt.no_positional_hints);

  ModelOptions mopt;
  std::string data, report_path;
  bool no_assemble = false;

  auto* eval_ner_cmd = app.add_subcommand("eval-ner", "Entity-level P/R/F1 on a two-column corpus");
  add_model_options(eval_ner_cmd, mopt, true);
  eval_ner_cmd->add_option("--data", data)->required()->check(CLI::ExistingFile);
  eval_ner_cmd->add_option("--report-path", report_path);

  auto* eval_seg_cmd = app.add_subcommand("eval-seg", "Word-level P/R/F1 on a segmented corpus");
  add_model_options(eval_seg_cmd, mopt, true);
  eval_seg_cmd->add_option("--data", data)->required()->check(CLI::ExistingFile);
  eval_seg_cmd->add_option("--report-path", report_path);
  eval_seg_cmd->add_flag("--no-assemble", no_assemble, "Skip noun assembling");

  auto* segment_cmd = app.add_subcommand("segment", "Segment stdin lines");
  add_model_options(segment_cmd, mopt, false);
  segment_cmd->add_flag("--no-assemble", no_assemble, "Skip noun assembling");

  auto* tag_cmd = app.add_subcommand("tag", "Tag stdin lines in two-column format");
  add_model_options(tag_cmd, mopt, false);

  std::uint64_t gc_seed = 1;
  int gc_instances = 20;
  double gc_eps = 1e-5;
  std::string gc_corrupt;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  gradcheck_cmd->add_option("--seed", gc_seed)->capture_default_str();
  gradcheck_cmd->add_option("--instances", gc_instances)->check(CLI::PositiveNumber)->capture_default_str();
  gradcheck_cmd->add_option("--eps", gc_eps)->check(CLI::PositiveNumber)->capture_default_str();
  // Test hook: doubles the analytic gradient of one group, e.g. "ner/lstm.Wh".
  gradcheck_cmd->add_option("--inject-gradient-error", gc_corrupt)->group("");

  auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a checkpoint");
  inspect_cmd->add_option("--model", mopt.model)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
    if (train_cmd->parsed() && !config_path.empty()) apply_config_file(*train_cmd, config_path);
  } catch (const CLI::CallForHelp&) {
    const auto selected = app.get_subcommands();
    out << (selected.empty() ? app.help() : selected.back()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(topt, cfg, out);
    if (eval_ner_cmd->parsed()) return cmd_eval_ner(mopt, data, report_path, out);
    if (eval_seg_cmd->parsed()) return cmd_eval_seg(mopt, data, report_path, no_assemble, out);
    if (segment_cmd->parsed()) return cmd_segment(mopt, no_assemble, in, out, err);
    if (tag_cmd->parsed()) return cmd_tag(mopt, in, out, err);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(gc_seed, gc_instances, gc_eps, gc_corrupt, out);
    if (inspect_cmd->parsed()) return cmd_inspect(mopt, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace segner
