#ifndef SEGNER_CRF_HPP
#define SEGNER_CRF_HPP

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "segner/tensor.hpp"

namespace segner {

/// Linear-chain CRF parameters. transitions(i, j) scores label j following i.
/// Scores are unnormalized; nothing is row-stochastic.
template <typename Scalar>
struct CrfParams {
  Mat<Scalar> transitions;
  Vec<Scalar> start;
  Vec<Scalar> stop;

  static CrfParams zeros(Index labels) {
    return {Mat<Scalar>::Zero(labels, labels), Vec<Scalar>::Zero(labels), Vec<Scalar>::Zero(labels)};
  }
  Index labels() const noexcept { return start.size(); }
};

using Crf64 = CrfParams<double>;

template <typename Scalar>
struct ViterbiResult {
  std::vector<int> labels;
  Scalar score{};
};

template <typename Scalar>
struct NllResult {
  Scalar loss{};
  Mat<Scalar> d_emissions;  // T x L
  CrfParams<Scalar> d_crf;
};

namespace detail {

template <typename Scalar>
void check_shapes(const Mat<Scalar>& em, const CrfParams<Scalar>& crf, const char* who) {
  const Index L = crf.labels();
  if (em.rows() < 1 || em.cols() != L || crf.transitions.rows() != L ||
      crf.transitions.cols() != L || crf.stop.size() != L) {
    throw DimensionError(std::string(who) + ": emissions are " + shape_of(em) + ", transitions " +
                         shape_of(crf.transitions) + ", start " + shape_of(crf.start) +
                         ", stop " + shape_of(crf.stop));
  }
}

template <typename Scalar>
void check_labels(std::span<const int> labels, Index T, Index L, const char* who) {
  if (static_cast<Index>(labels.size()) != T) {
    throw std::invalid_argument(std::string(who) + ": path has " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(T) + " positions");
  }
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] < 0 || labels[t] >= L) {
      throw std::out_of_range(std::string(who) + ": label " + std::to_string(labels[t]) +
                              " at position " + std::to_string(t) + " outside [0, " +
                              std::to_string(L) + ")");
    }
  }
}

// alpha(t, j): log-sum of scores of prefixes ending in j at t (no stop term).
template <typename Scalar>
Mat<Scalar> forward_table(const Mat<Scalar>& em, const CrfParams<Scalar>& crf) {
  const Index T = em.rows(), L = em.cols();
  Mat<Scalar> alpha(T, L);
  alpha.row(0) = crf.start.transpose() + em.row(0);
  for (Index t = 1; t < T; ++t) {
    for (Index j = 0; j < L; ++j) {
      alpha(t, j) = logsumexp(alpha.row(t - 1).transpose() + crf.transitions.col(j)) + em(t, j);
    }
  }
  return alpha;
}

// beta(t, i): log-sum of scores of suffixes after t given label i at t (incl. stop).
template <typename Scalar>
Mat<Scalar> backward_table(const Mat<Scalar>& em, const CrfParams<Scalar>& crf) {
  const Index T = em.rows(), L = em.cols();
  Mat<Scalar> beta(T, L);
  beta.row(T - 1) = crf.stop.transpose();
  for (Index t = T - 2; t >= 0; --t) {
    const Vec<Scalar> next = em.row(t + 1).transpose() + beta.row(t + 1).transpose();
    for (Index i = 0; i < L; ++i) {
      beta(t, i) = logsumexp(crf.transitions.row(i).transpose() + next);
    }
  }
  return beta;
}

}  // namespace detail

/// start[y0] + em[0][y0], then for each t >= 1: (acc + trans[y(t-1)][y(t)]) + em[t][y(t)],
/// then + stop[y(T-1)]. Viterbi accumulates in exactly this order.
template <typename Scalar>
Scalar score_path(const Mat<Scalar>& em, const CrfParams<Scalar>& crf, std::span<const int> labels) {
  detail::check_shapes(em, crf, "score_path");
  detail::check_labels<Scalar>(labels, em.rows(), em.cols(), "score_path");
  Scalar acc = crf.start(labels[0]) + em(0, labels[0]);
  for (Index t = 1; t < em.rows(); ++t) {
    acc = acc + crf.transitions(labels[t - 1], labels[t]);
    acc = acc + em(t, labels[t]);
  }
  return acc + crf.stop(labels.back());
}

template <typename Scalar>
Scalar log_partition(const Mat<Scalar>& em, const CrfParams<Scalar>& crf) {
  detail::check_shapes(em, crf, "log_partition");
  const Mat<Scalar> alpha = detail::forward_table(em, crf);
  return logsumexp(alpha.row(em.rows() - 1).transpose() + crf.stop);
}

/// Max-product decoding. Every argmax keeps the lowest label index on ties.
template <typename Scalar>
ViterbiResult<Scalar> viterbi(const Mat<Scalar>& em, const CrfParams<Scalar>& crf) {
  detail::check_shapes(em, crf, "viterbi");
  const Index T = em.rows(), L = em.cols();
  Mat<Scalar> delta(T, L);
  Eigen::MatrixXi back(T, L);
  for (Index j = 0; j < L; ++j) delta(0, j) = crf.start(j) + em(0, j);
  for (Index t = 1; t < T; ++t) {
    for (Index j = 0; j < L; ++j) {
      Index best_i = 0;
      Scalar best = delta(t - 1, 0) + crf.transitions(0, j);
      for (Index i = 1; i < L; ++i) {
        const Scalar cand = delta(t - 1, i) + crf.transitions(i, j);
        if (cand > best) best = cand, best_i = i;
      }
      delta(t, j) = best + em(t, j);
      back(t, j) = static_cast<int>(best_i);
    }
  }
  Index last = 0;
  Scalar best = delta(T - 1, 0) + crf.stop(0);
  for (Index j = 1; j < L; ++j) {
    const Scalar cand = delta(T - 1, j) + crf.stop(j);
    if (cand > best) best = cand, last = j;
  }
  ViterbiResult<Scalar> result;
  result.score = best;
  result.labels.assign(static_cast<std::size_t>(T), 0);
  result.labels[static_cast<std::size_t>(T - 1)] = static_cast<int>(last);
  for (Index t = T - 1; t > 0; --t) {
    result.labels[static_cast<std::size_t>(t - 1)] =
        back(t, result.labels[static_cast<std::size_t>(t)]);
  }
  return result;
}

/// Per-position label posteriors by forward-backward. Rows sum to one.
template <typename Scalar>
Mat<Scalar> marginals(const Mat<Scalar>& em, const CrfParams<Scalar>& crf) {
  detail::check_shapes(em, crf, "marginals");
  const Mat<Scalar> alpha = detail::forward_table(em, crf);
  const Mat<Scalar> beta = detail::backward_table(em, crf);
  const Scalar log_z = logsumexp(alpha.row(em.rows() - 1).transpose() + crf.stop);
  return ((alpha + beta).array() - log_z).exp().matrix();
}

/// Negative log-likelihood of `gold` with gradients: expected minus observed
/// feature counts for emissions, transitions, start and stop.
template <typename Scalar>
NllResult<Scalar> nll_and_grad(const Mat<Scalar>& em, const CrfParams<Scalar>& crf,
                               std::span<const int> gold) {
  detail::check_shapes(em, crf, "nll_and_grad");
  detail::check_labels<Scalar>(gold, em.rows(), em.cols(), "nll_and_grad");
  const Index T = em.rows(), L = em.cols();
  const Mat<Scalar> alpha = detail::forward_table(em, crf);
  const Mat<Scalar> beta = detail::backward_table(em, crf);
  const Scalar log_z = logsumexp(alpha.row(T - 1).transpose() + crf.stop);

  NllResult<Scalar> r;
  r.loss = log_z - score_path(em, crf, gold);
  r.d_emissions = ((alpha + beta).array() - log_z).exp().matrix();
  r.d_crf = CrfParams<Scalar>::zeros(L);
  r.d_crf.start = r.d_emissions.row(0).transpose();
  r.d_crf.stop = r.d_emissions.row(T - 1).transpose();
  for (Index t = 1; t < T; ++t) {
    // P(y(t-1) = i, y(t) = j)
    const Mat<Scalar> pair =
        ((crf.transitions.colwise() + alpha.row(t - 1).transpose()).rowwise() +
             (em.row(t) + beta.row(t)))
            .array()
            .unaryExpr([log_z](Scalar v) { return std::exp(v - log_z); })
            .matrix();
    r.d_crf.transitions += pair;
    r.d_crf.transitions(gold[static_cast<std::size_t>(t - 1)], gold[static_cast<std::size_t>(t)]) -= 1;
  }
  for (Index t = 0; t < T; ++t) r.d_emissions(t, gold[static_cast<std::size_t>(t)]) -= 1;
  r.d_crf.start(gold.front()) -= 1;
  r.d_crf.stop(gold.back()) -= 1;
  return r;
}

}  // namespace segner

#endif  // SEGNER_CRF_HPP
