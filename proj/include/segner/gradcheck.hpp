#ifndef SEGNER_GRADCHECK_HPP
#define SEGNER_GRADCHECK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "segner/pipeline.hpp"

namespace segner {

struct GroupCheck {
  std::string name;  // "<head>/<tensor>", e.g. "ner/lstm.Wh"
  double max_rel_err = 0.0;
  Index parameters = 0;
};

struct GradCheckReport {
  std::vector<GroupCheck> groups;  // worst error per group over all instances
  int instances = 0;

  const GroupCheck& worst() const;
};

/// Finite-difference check of the composed loss (embeddings -> LSTM ->
/// projection -> CRF NLL) for both heads on random instances with d = 2,
/// H = 3, T <= 5. Dropout masks, boundary labels and positional hints are
/// drawn once per instance and held fixed. `corrupt_group`, when non-empty,
/// doubles the analytic gradient of that group (negative control).
GradCheckReport run_model_gradcheck(std::uint64_t seed, int instances = 20, double eps = 1e-5,
                                    const std::string& corrupt_group = "");

/// Builds a small random Tagger and sentence; exposed for tests.
struct GradCheckInstance {
  Tagger tagger;
  LabeledSequence sentence;
  std::optional<Mat64> mask;
  std::vector<SegLabel> boundary;
  std::vector<SegLabel> hints;
};

GradCheckInstance make_gradcheck_instance(Rng& rng);

}  // namespace segner

#endif  // SEGNER_GRADCHECK_HPP
