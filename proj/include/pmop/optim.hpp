#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "loss.hpp"
#include "random.hpp"

namespace pmop {

enum class Algorithm { lbfgs, sgd };
enum class StopReason { converged, max_iters };

inline const char* to_string(StopReason r) { return r == StopReason::converged ? "converged" : "max_iters"; }

struct TrainConfig {
  Algorithm algorithm = Algorithm::lbfgs;
  std::size_t max_iters = 100;
  double rel_tol = 1e-5;
  double learning_rate = 0.1;
  std::size_t lbfgs_memory = 10;
  double l2_lambda = 0.0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  // Starting parameters; empty means all zeros.
  std::vector<double> initial;

  static TrainConfig lbfgs_defaults() { return {}; }
  static TrainConfig sgd_defaults() {
    TrainConfig c;
    c.algorithm = Algorithm::sgd;
    c.max_iters = 1000;
    return c;
  }

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be > 0");
    if (l2_lambda < 0.0) throw std::invalid_argument("l2_lambda must be >= 0");
    if (lbfgs_memory < 1) throw std::invalid_argument("lbfgs_memory must be >= 1");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  }
};

struct TrainReport {
  std::vector<double> params;  // weights, then any extra model parameters
  std::size_t feature_count = 0;
  std::vector<double> objective_trace;
  std::size_t iterations_run = 0;
  StopReason stop_reason = StopReason::max_iters;

  std::span<const double> weights() const { return {params.data(), feature_count}; }
  std::span<const double> extra() const { return std::span<const double>(params).subspan(feature_count); }
};

/// Sum of a per-query objective over a dataset minus l2_lambda * |w|^2.
/// Partitions are built once; evaluation may be split across threads with a
/// fixed-order reduction.
class DatasetObjective {
 public:
  DatasetObjective(const Dataset& ds, const LossModel& loss, double l2_lambda, std::size_t threads = 1)
      : ds_(ds), loss_(loss), l2_(l2_lambda), threads_(std::max<std::size_t>(1, threads)) {
    parts_.reserve(ds.groups.size());
    for (const auto& g : ds.groups) parts_.push_back(partition_by_labels(g));
  }

  std::size_t dimension() const { return ds_.feature_count + loss_.extra_parameters(); }

  double operator()(std::span<const double> params, std::span<double> grad) const {
    const std::size_t n = ds_.groups.size();
    const std::size_t T = std::min(threads_, std::max<std::size_t>(1, n));
    std::vector<double> values(T, 0.0);
    std::vector<std::vector<double>> grads(T, std::vector<double>(params.size(), 0.0));
    std::vector<std::string> bad(T);

    auto work = [&](std::size_t t) {
      std::vector<double> g(params.size());
      for (std::size_t q = t * n / T; q < (t + 1) * n / T; ++q) {
        const double v = loss_.evaluate(ds_.groups[q], parts_[q], params, g);
        if (!std::isfinite(v) || std::any_of(g.begin(), g.end(), [](double x) { return !std::isfinite(x); })) {
          bad[t] = ds_.groups[q].query_id;
          return;
        }
        values[t] += v;
        axpy(1.0, g, grads[t]);
      }
    };
    if (T == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < T; ++t) pool.emplace_back(work, t);
    }
    for (const auto& q : bad)
      if (!q.empty()) throw NumericError("non-finite objective or gradient", q);

    double total = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      total += values[t];
      axpy(1.0, grads[t], grad);
    }
    for (std::size_t f = 0; f < ds_.feature_count; ++f) {
      total -= l2_ * params[f] * params[f];
      grad[f] -= 2.0 * l2_ * params[f];
    }
    return total;
  }

 private:
  const Dataset& ds_;
  const LossModel& loss_;
  double l2_;
  std::size_t threads_;
  std::vector<OrderedPartition> parts_;
};

using Objective = std::function<double(std::span<const double>, std::span<double>)>;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace detail

/// Limited-memory BFGS ascent on `objective`, with a weak-Wolfe bisection line
/// search. Stops when the relative objective improvement drops below
/// `cfg.rel_tol` or after `cfg.max_iters` iterations.
inline TrainReport lbfgs_maximize(const Objective& objective, std::vector<double> x, const TrainConfig& cfg) {
  constexpr double c1 = 1e-4;
  constexpr double c2 = 0.9;
  const std::size_t n = x.size();

  TrainReport report;
  std::vector<double> g(n), g_new(n), x_new(n), d(n);
  double fx = objective(x, g);
  if (!std::isfinite(fx)) throw NumericError("non-finite objective at the starting point");

  std::deque<std::vector<double>> S, Y;
  std::deque<double> rho;
  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    report.iterations_run = iter;
    const double gnorm = std::sqrt(detail::dot(g, g));
    if (gnorm <= 1e-12 * std::max(1.0, std::abs(fx))) {
      report.objective_trace.push_back(fx);
      report.stop_reason = StopReason::converged;
      break;
    }

    // Two-loop recursion on the ascent direction.
    std::copy(g.begin(), g.end(), d.begin());
    std::vector<double> a(S.size());
    for (std::size_t i = S.size(); i-- > 0;) {
      a[i] = rho[i] * detail::dot(S[i], d);
      axpy(-a[i], Y[i], d);
    }
    if (!S.empty()) {
      const double gamma = detail::dot(S.back(), Y.back()) / detail::dot(Y.back(), Y.back());
      for (double& v : d) v *= gamma;
    }
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double b = rho[i] * detail::dot(Y[i], d);
      axpy(a[i] - b, S[i], d);
    }
    double slope = detail::dot(g, d);
    if (!(slope > 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      std::copy(g.begin(), g.end(), d.begin());
      slope = gnorm * gnorm;
    }

    double t = S.empty() ? std::min(1.0, 1.0 / gnorm) : 1.0;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double f_new = fx;
    bool accepted = false;
    double best_t = 0.0, best_f = fx;
    std::vector<double> best_g;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + t * d[i];
      f_new = objective(x_new, g_new);
      if (!std::isfinite(f_new) || f_new < fx + c1 * t * slope) {
        hi = t;
      } else {
        if (f_new > best_f) {
          best_t = t;
          best_f = f_new;
          best_g = g_new;
        }
        if (detail::dot(g_new, d) > c2 * slope) {
          lo = t;
        } else {
          accepted = true;
          break;
        }
      }
      t = std::isinf(hi) ? 2.0 * t : 0.5 * (lo + hi);
    }
    if (!accepted) {
      if (best_t == 0.0) {
        report.objective_trace.push_back(fx);
        report.stop_reason = StopReason::converged;
        break;
      }
      t = best_t;
      f_new = best_f;
      g_new = best_g;
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + t * d[i];
    }

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g[i] - g_new[i];  // gradient of the negated objective
    }
    const double sy = detail::dot(s, y);
    if (sy > 1e-12 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
      if (S.size() > cfg.lbfgs_memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }

    const double improvement = (f_new - fx) / std::max(std::abs(fx), 1e-300);
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    report.objective_trace.push_back(fx);
    if (improvement < cfg.rel_tol) {
      report.stop_reason = StopReason::converged;
      break;
    }
  }
  report.params = std::move(x);
  return report;
}

inline TrainReport train_batch(const Dataset& ds, const LossModel& loss, const TrainConfig& cfg) {
  cfg.validate();
  DatasetObjective objective(ds, loss, cfg.l2_lambda, cfg.threads);
  std::vector<double> x0 = cfg.initial.empty() ? std::vector<double>(objective.dimension(), 0.0) : cfg.initial;
  require_same_size(x0.size(), objective.dimension(), "initial parameters");
  auto report = lbfgs_maximize([&](std::span<const double> p, std::span<double> g) { return objective(p, g); },
                               std::move(x0), cfg);
  report.feature_count = ds.feature_count;
  return report;
}

/// Per-query stochastic gradient ascent: w <- w + eta * (estimate - 2 lambda w).
/// Runs exactly `max_iters` epochs; query order is reshuffled every epoch.
inline TrainReport train_stochastic(const Dataset& ds, const StochasticGradient& source, const TrainConfig& cfg) {
  cfg.validate();
  std::vector<OrderedPartition> parts;
  for (const auto& g : ds.groups) parts.push_back(partition_by_labels(g));

  TrainReport report;
  report.feature_count = ds.feature_count;
  report.params = cfg.initial.empty() ? std::vector<double>(ds.feature_count, 0.0) : cfg.initial;
  require_same_size(report.params.size(), ds.feature_count, "initial parameters");
  auto& w = report.params;

  std::vector<std::size_t> order(ds.groups.size());
  for (std::size_t epoch = 0; epoch < cfg.max_iters; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = stream_for(cfg.seed, "", 0, epoch, /*purpose=*/2);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t q : order) {
      const auto g = source.estimate(ds.groups[q], parts[q], w, epoch);
      for (std::size_t f = 0; f < w.size(); ++f) {
        const double step = cfg.learning_rate * (g[f] - 2.0 * cfg.l2_lambda * w[f]);
        if (!std::isfinite(step)) throw NumericError("non-finite update", ds.groups[q].query_id);
        w[f] += step;
      }
    }
    double total = 0.0;
    for (std::size_t q = 0; q < ds.groups.size(); ++q) total += source.objective(ds.groups[q], parts[q], w, epoch);
    for (double v : w) total -= cfg.l2_lambda * v * v;
    report.objective_trace.push_back(total);
    report.iterations_run = epoch + 1;
  }
  report.stop_reason = StopReason::max_iters;
  return report;
}

/// Max over coordinates of the relative difference between `analytic` and a
/// central finite difference of `value`. Coordinates where both are below 1e-8
/// in magnitude use the absolute difference.
inline double check_gradient(const std::function<double(std::span<const double>)>& value,
                             std::span<const double> params, std::span<const double> analytic, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("check_gradient: step must be > 0");
  std::vector<double> p(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + step;
    const double up = value(p);
    p[i] = orig - step;
    const double down = value(p);
    p[i] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double scale = std::max(std::abs(numeric), std::abs(analytic[i]));
    const double err = std::abs(numeric - analytic[i]) / (scale < 1e-8 ? 1.0 : scale);
    worst = std::max(worst, err);
  }
  return worst;
}

inline double check_gradient(const LossModel& loss, const QueryGroup& group, std::span<const double> params,
                             double step) {
  const auto part = partition_by_labels(group);
  std::vector<double> grad(params.size()), scratch(params.size());
  loss.evaluate(group, part, params, grad);
  return check_gradient([&](std::span<const double> p) { return loss.evaluate(group, part, p, scratch); }, params,
                        grad, step);
}

}  // namespace pmop
