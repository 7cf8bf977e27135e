#ifndef SEGNER_TESTS_ORACLES_HPP
#define SEGNER_TESTS_ORACLES_HPP

// Exhaustive reference computations for small CRF instances. Nothing here
// calls into the library's dynamic programs.

#include <cmath>
#include <limits>
#include <vector>

#include "segner/crf.hpp"
#include "segner/tensor.hpp"

namespace segner::oracle {

// Same accumulation order as the library documents:
// start + em[0], then (acc + trans) + em, then + stop.
inline double path_score(const Mat64& em, const Crf64& crf, const std::vector<int>& y) {
  double acc = crf.start(y[0]) + em(0, y[0]);
  for (std::size_t t = 1; t < y.size(); ++t) {
    acc = acc + crf.transitions(y[t - 1], y[t]);
    acc = acc + em(static_cast<Index>(t), y[t]);
  }
  return acc + crf.stop(y.back());
}

// Calls f(path) for every path in lexicographic order (label 0 first).
template <typename F>
void for_each_path(Index T, Index L, F&& f) {
  std::vector<int> y(static_cast<std::size_t>(T), 0);
  while (true) {
    f(y);
    Index t = T - 1;
    while (t >= 0 && y[static_cast<std::size_t>(t)] == L - 1) y[static_cast<std::size_t>(t--)] = 0;
    if (t < 0) return;
    ++y[static_cast<std::size_t>(t)];
  }
}

inline bool reverse_less(const std::vector<int>& a, const std::vector<int>& b) {
  for (std::size_t t = a.size(); t-- > 0;) {
    if (a[t] != b[t]) return a[t] < b[t];
  }
  return false;
}

struct Enumeration {
  double log_z = 0.0;
  double best_score = -std::numeric_limits<double>::infinity();
  // Among maximal paths: lowest final label, then lowest label before it, and so on.
  std::vector<int> best_path;
  Mat64 marginals;
};

inline Enumeration enumerate(const Mat64& em, const Crf64& crf) {
  const Index T = em.rows(), L = em.cols();
  Enumeration r;
  std::vector<double> scores;
  std::vector<std::vector<int>> paths;
  for_each_path(T, L, [&](const std::vector<int>& y) {
    const double s = path_score(em, crf, y);
    scores.push_back(s);
    paths.push_back(y);
    if (s > r.best_score || (s == r.best_score && reverse_less(y, r.best_path))) {
      r.best_score = s;
      r.best_path = y;
    }
  });
  double m = -std::numeric_limits<double>::infinity();
  for (double s : scores) m = std::max(m, s);
  long double total = 0.0L;
  for (double s : scores) total += std::exp(static_cast<long double>(s - m));
  r.log_z = m + static_cast<double>(std::log(total));

  r.marginals = Mat64::Zero(T, L);
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const double prob = std::exp(scores[p] - r.log_z);
    for (Index t = 0; t < T; ++t) r.marginals(t, paths[p][static_cast<std::size_t>(t)]) += prob;
  }
  return r;
}

struct Instance {
  Mat64 em;
  Crf64 crf;
};

inline Instance random_instance(Rng& rng, Index max_t = 6, Index max_l = 5, double range = 3.0) {
  const Index T = 1 + static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(max_t)));
  const Index L = 1 + static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(max_l)));
  Instance inst{Mat64(T, L), Crf64::zeros(L)};
  fill_uniform(inst.em, range, rng);
  fill_uniform(inst.crf.transitions, range, rng);
  fill_uniform(inst.crf.start, range, rng);
  fill_uniform(inst.crf.stop, range, rng);
  return inst;
}

}  // namespace segner::oracle

#endif  // SEGNER_TESTS_ORACLES_HPP
