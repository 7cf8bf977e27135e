#include "segner/gradcheck.hpp"

#include <algorithm>
#include <map>

#include "segner/utf8.hpp"

namespace segner {

namespace {

struct TensorRef {
  std::string name;
  double* data;
  Index size;
};

Eigen::Map<Vec64> flat(const TensorRef& t) { return {t.data, t.size}; }

template <typename M>
TensorRef ref(const std::string& name, M& m) {
  return {name, m.data(), m.size()};
}

std::vector<TensorRef> shared_tensors(Tagger& t) {
  return {ref("embeddings", t.embeddings.vectors()), ref("lstm.Wx", t.lstm.Wx),
          ref("lstm.Wh", t.lstm.Wh), ref("lstm.b", t.lstm.b)};
}

std::vector<TensorRef> head_tensors(Projection& proj, Crf64& crf, const std::string& head) {
  return {ref(head + ".proj.W", proj.W), ref(head + ".proj.b", proj.b),
          ref(head + ".crf.transitions", crf.transitions), ref(head + ".crf.start", crf.start),
          ref(head + ".crf.stop", crf.stop)};
}

// Analytic gradient tensors laid out like the parameters above.
std::map<std::string, Mat64> gradient_tensors(const Tagger& t, const StepGrads& g,
                                              const std::string& head) {
  Mat64 emb = Mat64::Zero(t.embeddings.dim(), t.embeddings.size());
  for (const auto& [id, v] : g.model.embedding) emb.col(id) += v;
  return {{"embeddings", emb},
          {"lstm.Wx", g.model.lstm.Wx},
          {"lstm.Wh", g.model.lstm.Wh},
          {"lstm.b", g.model.lstm.b},
          {head + ".proj.W", g.model.proj.W},
          {head + ".proj.b", g.model.proj.b},
          {head + ".crf.transitions", g.crf.transitions},
          {head + ".crf.start", g.crf.start},
          {head + ".crf.stop", g.crf.stop}};
}

}  // namespace

const GroupCheck& GradCheckReport::worst() const {
  if (groups.empty()) throw std::logic_error("GradCheckReport: no groups");
  return *std::max_element(groups.begin(), groups.end(), [](const GroupCheck& a, const GroupCheck& b) {
    return a.max_rel_err < b.max_rel_err;
  });
}

GradCheckInstance make_gradcheck_instance(Rng& rng) {
  static const std::u32string alphabet = U"北京大学人民中国上海";
  TrainConfig cfg;
  cfg.embedding_dim = 2;
  cfg.hidden_size = 3;
  cfg.lexicon_positions = 4;
  cfg.dropout = 0.1;
  cfg.init_scale = 0.5;

  LabeledSequence seq;
  const std::size_t T = 1 + rng.uniform_int(5);
  for (std::size_t t = 0; t < T; ++t) seq.chars.push_back(alphabet[rng.uniform_int(alphabet.size())]);
  std::vector<std::size_t> lengths;
  for (std::size_t left = T; left > 0;) {
    const std::size_t len = 1 + rng.uniform_int(std::min<std::size_t>(left, 3));
    lengths.push_back(len);
    left -= len;
  }
  seq.gold_seg = encode_bies(lengths);
  seq.gold_ner.emplace();
  for (std::size_t t = 0; t < T; ++t) seq.gold_ner->push_back(NerTag::from_index(static_cast<int>(rng.uniform_int(NerTag::kCount))));

  Lexicon lex(cfg.lexicon_positions);
  const std::size_t nouns = rng.uniform_int(5);
  for (std::size_t i = 0; i < nouns; ++i) {
    std::u32string w;
    const std::size_t len = 1 + rng.uniform_int(3);
    for (std::size_t k = 0; k < len; ++k) w.push_back(alphabet[rng.uniform_int(alphabet.size())]);
    lex.add(w, 1.0 + static_cast<double>(rng.uniform_int(3)));
  }

  // Pretrained table with bare and some positional tokens.
  EmbeddingTable table(cfg.embedding_dim, cfg.positional_suffixes);
  fill_uniform(table.vectors(), 0.5, rng);
  for (char32_t c : alphabet) {
    Vec64 v(cfg.embedding_dim);
    fill_uniform(v, 0.5, rng);
    table.add(utf8::encode(c), v);
    if (rng.uniform01() < 0.5) {
      fill_uniform(v, 0.5, rng);
      table.add(table.positional_token(c, static_cast<SegLabel>(rng.uniform_int(4))), v);
    }
  }

  const LabeledSequence* corpora[] = {&seq};
  GradCheckInstance inst{Tagger::initialize(cfg, corpora, lex, rng, table), seq, std::nullopt, {}, {}};
  inst.mask = hidden_dropout(cfg.hidden_size, static_cast<Index>(T), cfg.dropout, rng);
  inst.boundary = cws_forward(inst.tagger, seq.chars, inst.mask).boundary_labels;
  inst.hints = relabel(segment_sentence(inst.tagger, seq.chars, true));
  return inst;
}

GradCheckReport run_model_gradcheck(std::uint64_t seed, int instances, double eps,
                                    const std::string& corrupt_group) {
  Rng rng(seed);
  std::map<std::string, GroupCheck> worst;
  std::vector<std::string> order;
  for (int n = 0; n < instances; ++n) {
    GradCheckInstance inst = make_gradcheck_instance(rng);
    for (const std::string head : {"cws", "ner"}) {
      const bool is_cws = head == "cws";
      auto loss_of = [&](const Tagger& t) {
        return is_cws ? cws_loss_and_grad(t, inst.sentence, inst.mask, &inst.boundary).loss
                      : ner_loss_and_grad(t, inst.sentence, inst.mask, &inst.hints).loss;
      };
      const StepGrads g = is_cws ? cws_loss_and_grad(inst.tagger, inst.sentence, inst.mask, &inst.boundary)
                                 : ner_loss_and_grad(inst.tagger, inst.sentence, inst.mask, &inst.hints);
      const auto analytic = gradient_tensors(inst.tagger, g, head);

      Tagger probe = inst.tagger;
      auto tensors = shared_tensors(probe);
      auto head_refs = is_cws ? head_tensors(probe.cws_proj, probe.cws_crf, head)
                              : head_tensors(probe.ner_proj, probe.ner_crf, head);
      tensors.insert(tensors.end(), head_refs.begin(), head_refs.end());

      for (const TensorRef& tensor : tensors) {
        const Vec64 base = flat(tensor);
        Vec64 grad = Eigen::Map<const Vec64>(analytic.at(tensor.name).data(), tensor.size);
        const std::string group = head + "/" + tensor.name;
        if (group == corrupt_group) grad *= 2.0;
        auto f = [&](const Vec64& v) {
          flat(tensor) = v;
          const double loss = loss_of(probe);
          flat(tensor) = base;
          return loss;
        };
        const double err = grad_check(f, grad, base, eps);
        auto [it, inserted] = worst.try_emplace(group, GroupCheck{group, 0.0, tensor.size});
        if (inserted) order.push_back(group);
        it->second.max_rel_err = std::max(it->second.max_rel_err, err);
        it->second.parameters = std::max(it->second.parameters, tensor.size);
      }
    }
  }
  GradCheckReport report;
  report.instances = instances;
  for (const auto& name : order) report.groups.push_back(worst.at(name));
  return report;
}

}  // namespace segner
