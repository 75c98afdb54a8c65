#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"
#include "scoring.hpp"

namespace pmop {

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

namespace detail {

inline std::vector<double> query_scores(const QueryGroup& group, std::span<const double> w) {
  std::vector<double> f;
  f.reserve(group.size());
  for (const auto& x : group.docs) f.push_back(score(x, w));
  return f;
}

// sum_i coeff[i] * x_i
inline std::vector<double> combine(const QueryGroup& group, std::span<const double> coeff, std::size_t F) {
  std::vector<double> g(F, 0.0);
  for (std::size_t i = 0; i < group.size(); ++i)
    if (coeff[i] != 0.0) axpy(coeff[i], group.docs[i], g);
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ListMLE (Plackett-Luce over the label order, ties broken by document index)

inline std::vector<std::size_t> label_order(const QueryGroup& group) {
  std::vector<std::size_t> order(group.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return group.labels[a] > group.labels[b]; });
  return order;
}

inline ValueAndGradient listmle(const QueryGroup& group, std::span<const double> w) {
  const auto f = detail::query_scores(group, w);
  const auto order = label_order(group);
  const std::size_t N = order.size();
  const std::size_t F = w.size();

  ValueAndGradient out{0.0, std::vector<double>(F, 0.0)};
  // Backward suffix pass: log_tail = log sum_{j>=i} exp f, centre = softmax mean of the suffix.
  double log_tail = 0.0;
  std::vector<double> centre(F, 0.0);
  for (std::size_t step = 0; step < N; ++step) {
    const std::size_t i = N - 1 - step;
    const std::size_t doc = order[i];
    const double next = (step == 0) ? f[doc] : log_add_exp(log_tail, f[doc]);
    const double keep = (step == 0) ? 0.0 : std::exp(log_tail - next);
    const double take = std::exp(f[doc] - next);
    for (std::size_t k = 0; k < F; ++k) centre[k] = keep * centre[k] + take * group.docs[doc][k];
    log_tail = next;

    out.value += f[doc] - log_tail;
    axpy(1.0, group.docs[doc], out.gradient);
    axpy(-1.0, centre, out.gradient);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pairwise losses over strictly ordered pairs; tied pairs are ignored. The
// input to each loss is the raw score difference delta = f_i - f_j.

enum class PairwiseKind { logistic, hinge, quadratic };

inline PairwiseKind parse_pairwise_kind(std::string_view name) {
  if (name == "logistic") return PairwiseKind::logistic;
  if (name == "hinge") return PairwiseKind::hinge;
  if (name == "quadratic") return PairwiseKind::quadratic;
  throw std::invalid_argument("unknown pairwise loss '" + std::string(name) + "'");
}

inline double pair_loss(PairwiseKind kind, double delta) {
  switch (kind) {
    case PairwiseKind::logistic: return softplus(-delta);
    case PairwiseKind::hinge: return std::max(0.0, 1.0 - delta);
    case PairwiseKind::quadratic: return (1.0 - delta) * (1.0 - delta);
  }
  return 0.0;
}

// d loss / d delta; the hinge uses the zero subgradient at the kink.
inline double pair_loss_slope(PairwiseKind kind, double delta) {
  switch (kind) {
    case PairwiseKind::logistic: return -sigmoid(-delta);
    case PairwiseKind::hinge: return delta < 1.0 ? -1.0 : 0.0;
    case PairwiseKind::quadratic: return -2.0 * (1.0 - delta);
  }
  return 0.0;
}

/// Summed loss and its gradient. Per-document slope sums are collected over
/// all pairs first, then folded into the feature space in one pass.
inline ValueAndGradient pairwise_loss(const QueryGroup& group, std::span<const double> w, PairwiseKind kind) {
  const auto f = detail::query_scores(group, w);
  const std::size_t N = group.size();
  std::vector<double> coeff(N, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      if (group.labels[i] <= group.labels[j]) continue;
      const double delta = f[i] - f[j];
      loss += pair_loss(kind, delta);
      const double slope = pair_loss_slope(kind, delta);
      coeff[i] += slope;
      coeff[j] -= slope;
    }
  }
  return {loss, detail::combine(group, coeff, w.size())};
}

// ---------------------------------------------------------------------------
// Paired tie models. theta = 1 + e^alpha (Rao-Kupper), nu = e^beta (Davidson).

struct TieParams {
  double alpha = 0.0;
  double beta = 0.0;

  double theta() const { return 1.0 + std::exp(alpha); }
  double nu() const { return std::exp(beta); }
};

/// P(i beats j), P(j beats i), P(tie).
struct PairProbabilities {
  double win = 0.0;
  double lose = 0.0;
  double tie = 0.0;
};

inline double bradley_terry_win(double f_i, double f_j) { return sigmoid(f_i - f_j); }

inline PairProbabilities rao_kupper_probabilities(double f_i, double f_j, double alpha) {
  const double log_theta = softplus(alpha);
  const double d = f_j - f_i;
  const double log_theta2_minus_1 = alpha + log_add_exp(std::numbers::ln2, alpha);
  return {std::exp(-softplus(log_theta + d)), std::exp(-softplus(log_theta - d)),
          std::exp(log_theta2_minus_1 - softplus(log_theta + d) - softplus(log_theta - d))};
}

inline PairProbabilities davidson_probabilities(double f_i, double f_j, double beta) {
  const double half = 0.5 * (f_i - f_j);
  const double terms[] = {half, -half, beta};
  const double lse = log_sum_exp(terms);
  return {std::exp(half - lse), std::exp(-half - lse), std::exp(beta - lse)};
}

namespace detail {

enum class PairOutcome { first_wins, second_wins, tie };

template <class PairTerm>
ValueAndGradient tie_model(const QueryGroup& group, std::span<const double> w, PairTerm&& term) {
  const auto f = query_scores(group, w);
  const std::size_t N = group.size();
  std::vector<double> coeff(N, 0.0);
  double ll = 0.0;
  double d_param = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) {
      if (group.labels[i] == group.labels[j]) {
        ll += term(f[i], f[j], PairOutcome::tie, coeff[i], coeff[j], d_param);
      } else if (group.labels[i] > group.labels[j]) {
        ll += term(f[i], f[j], PairOutcome::first_wins, coeff[i], coeff[j], d_param);
      } else {
        ll += term(f[j], f[i], PairOutcome::first_wins, coeff[j], coeff[i], d_param);
      }
    }
  }
  ValueAndGradient out{ll, combine(group, coeff, w.size())};
  out.gradient.push_back(d_param);
  return out;
}

}  // namespace detail

/// Rao-Kupper log-likelihood over all document pairs. The gradient has F + 1
/// entries; the last is d/d alpha.
inline ValueAndGradient rao_kupper_loglik(const QueryGroup& group, std::span<const double> w, const TieParams& params) {
  const double alpha = params.alpha;
  const double log_theta = softplus(alpha);
  const double dtheta_dalpha_over_theta = sigmoid(alpha);  // e^a / (1 + e^a)
  const double log_theta2_minus_1 = alpha + log_add_exp(std::numbers::ln2, alpha);
  const double theta = params.theta();

  return detail::tie_model(group, w,
                           [&](double fa, double fb, detail::PairOutcome outcome, double& ca, double& cb, double& dp) {
                             if (outcome == detail::PairOutcome::first_wins) {
                               // log P = -softplus(u), u = log theta + f_b - f_a
                               const double u = log_theta + fb - fa;
                               const double s = sigmoid(u);
                               ca += s;
                               cb -= s;
                               dp -= s * dtheta_dalpha_over_theta;
                               return -softplus(u);
                             }
                             const double u1 = log_theta + fb - fa;  // pairs with [phi_a + theta phi_b]
                             const double u2 = log_theta + fa - fb;  // pairs with [theta phi_a + phi_b]
                             const double s1 = sigmoid(u1);
                             const double s2 = sigmoid(u2);
                             ca += s1 - s2;
                             cb += s2 - s1;
                             dp += 2.0 * theta / (theta + 1.0) - (s1 + s2) * dtheta_dalpha_over_theta;
                             return log_theta2_minus_1 - softplus(u1) - softplus(u2);
                           });
}

/// Davidson log-likelihood over all document pairs; last gradient entry is
/// d/d beta.
inline ValueAndGradient davidson_loglik(const QueryGroup& group, std::span<const double> w, const TieParams& params) {
  const double beta = params.beta;
  return detail::tie_model(group, w,
                           [&](double fa, double fb, detail::PairOutcome outcome, double& ca, double& cb, double& dp) {
                             const double half = 0.5 * (fa - fb);
                             const double terms[] = {half, -half, beta};
                             const double lse = log_sum_exp(terms);
                             const double pa = std::exp(half - lse);
                             const double pb = std::exp(-half - lse);
                             const double ptie = std::exp(beta - lse);
                             if (outcome == detail::PairOutcome::first_wins) {
                               ca += 1.0 - pa - 0.5 * ptie;
                               cb -= pb + 0.5 * ptie;
                               dp -= ptie;
                               return half - lse;
                             }
                             ca += 0.5 - pa - 0.5 * ptie;
                             cb += 0.5 - pb - 0.5 * ptie;
                             dp += 1.0 - ptie;
                             return beta - lse;
                           });
}

}  // namespace pmop
