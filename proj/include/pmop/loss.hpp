#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "baselines.hpp"
#include "core.hpp"
#include "fd.hpp"
#include "general.hpp"

namespace pmop {

/// A per-query objective to be maximised: a log-likelihood, or a negated loss.
/// Parameters are the weight vector followed by `extra_parameters()` model
/// scalars (the tie parameter for the paired tie models).
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t extra_parameters() const { return 0; }

  /// Objective for one query; `grad` (same length as `params`) is overwritten.
  virtual double evaluate(const QueryGroup& group, const OrderedPartition& part, std::span<const double> params,
                          std::span<double> grad) const = 0;
};

class FdLikelihood final : public LossModel {
 public:
  std::string name() const override { return "pmop-fd"; }
  double evaluate(const QueryGroup& group, const OrderedPartition& part, std::span<const double> params,
                  std::span<double> grad) const override {
    return fd_value_and_gradient(group, part, params, grad);
  }
};

/// Exact general-state likelihood by subset enumeration; only for small queries.
class ExactGeneralLikelihood final : public LossModel {
 public:
  std::string name() const override { return "pmop-general-exact"; }
  double evaluate(const QueryGroup& group, const OrderedPartition& part, std::span<const double> params,
                  std::span<double> grad) const override {
    const auto g = exact_general_gradient(group, part, params);
    std::copy(g.begin(), g.end(), grad.begin());
    return exact_general_loglik(group, part, params);
  }
};

class ListMle final : public LossModel {
 public:
  std::string name() const override { return "listmle"; }
  double evaluate(const QueryGroup& group, const OrderedPartition&, std::span<const double> params,
                  std::span<double> grad) const override {
    auto r = listmle(group, params);
    std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
    return r.value;
  }
};

class PairwiseObjective final : public LossModel {
 public:
  explicit PairwiseObjective(PairwiseKind kind) : kind_(kind) {}

  std::string name() const override {
    switch (kind_) {
      case PairwiseKind::logistic: return "ranknet";
      case PairwiseKind::hinge: return "ranksvm";
      case PairwiseKind::quadratic: return "rankreg";
    }
    return "pairwise";
  }

  double evaluate(const QueryGroup& group, const OrderedPartition&, std::span<const double> params,
                  std::span<double> grad) const override {
    auto r = pairwise_loss(group, params, kind_);
    for (std::size_t f = 0; f < grad.size(); ++f) grad[f] = -r.gradient[f];
    return -r.value;
  }

  PairwiseKind kind() const { return kind_; }

 private:
  PairwiseKind kind_;
};

class RaoKupperLikelihood final : public LossModel {
 public:
  std::string name() const override { return "ties-rk"; }
  std::size_t extra_parameters() const override { return 1; }
  double evaluate(const QueryGroup& group, const OrderedPartition&, std::span<const double> params,
                  std::span<double> grad) const override {
    TieParams tp;
    tp.alpha = params.back();
    auto r = rao_kupper_loglik(group, params.first(params.size() - 1), tp);
    std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
    return r.value;
  }
};

class DavidsonLikelihood final : public LossModel {
 public:
  std::string name() const override { return "ties-d"; }
  std::size_t extra_parameters() const override { return 1; }
  double evaluate(const QueryGroup& group, const OrderedPartition&, std::span<const double> params,
                  std::span<double> grad) const override {
    TieParams tp;
    tp.beta = params.back();
    auto r = davidson_loglik(group, params.first(params.size() - 1), tp);
    std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
    return r.value;
  }
};

/// Gradient source for stochastic ascent on the general-state model.
class StochasticGradient {
 public:
  virtual ~StochasticGradient() = default;
  virtual std::vector<double> estimate(const QueryGroup& group, const OrderedPartition& part,
                                       std::span<const double> w, std::uint64_t epoch) const = 0;
  /// Objective value (or estimate) reported in the training trace.
  virtual double objective(const QueryGroup& group, const OrderedPartition& part, std::span<const double> w,
                           std::uint64_t epoch) const = 0;
};

class CdGradient final : public StochasticGradient {
 public:
  CdGradient(CdConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {}

  std::vector<double> estimate(const QueryGroup& group, const OrderedPartition& part, std::span<const double> w,
                               std::uint64_t epoch) const override {
    return cd_gradient_estimate(group, part, w, cfg_, seed_, epoch);
  }
  double objective(const QueryGroup& group, const OrderedPartition& part, std::span<const double> w,
                   std::uint64_t epoch) const override {
    return mc_general_loglik(group, part, w, seed_, epoch);
  }

 private:
  CdConfig cfg_;
  std::uint64_t seed_;
};

class ExactGeneralGradient final : public StochasticGradient {
 public:
  std::vector<double> estimate(const QueryGroup& group, const OrderedPartition& part, std::span<const double> w,
                               std::uint64_t) const override {
    return exact_general_gradient(group, part, w);
  }
  double objective(const QueryGroup& group, const OrderedPartition& part, std::span<const double> w,
                   std::uint64_t) const override {
    return exact_general_loglik(group, part, w);
  }
};

inline constexpr std::string_view kLossNames[] = {"pmop-fd", "pmop-gibbs", "pmop-mh", "listmle", "ranknet",
                                                  "ranksvm", "rankreg",    "ties-rk", "ties-d"};

inline bool is_known_loss(std::string_view name) {
  for (auto n : kLossNames)
    if (n == name) return true;
  return false;
}

inline bool is_stochastic_loss(std::string_view name) { return name == "pmop-gibbs" || name == "pmop-mh"; }

/// Deterministic objective for a loss name; stochastic names are rejected.
inline std::unique_ptr<LossModel> make_loss(std::string_view name) {
  if (name == "pmop-fd") return std::make_unique<FdLikelihood>();
  if (name == "listmle") return std::make_unique<ListMle>();
  if (name == "ranknet") return std::make_unique<PairwiseObjective>(PairwiseKind::logistic);
  if (name == "ranksvm") return std::make_unique<PairwiseObjective>(PairwiseKind::hinge);
  if (name == "rankreg") return std::make_unique<PairwiseObjective>(PairwiseKind::quadratic);
  if (name == "ties-rk") return std::make_unique<RaoKupperLikelihood>();
  if (name == "ties-d") return std::make_unique<DavidsonLikelihood>();
  throw std::invalid_argument("no deterministic objective for loss '" + std::string(name) + "'");
}

}  // namespace pmop
