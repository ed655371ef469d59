#pragma once

// Factor constructors for the potentials used by the channel model.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "hmpce/dist_kernel.hpp"
#include "hmpce/hmp/factor_graph.hpp"

namespace hmpce::hmp {

/// Factor over discrete variables from a table of non-negative potentials
/// (row-major, last argument fastest).
inline Factor discrete_factor(std::string name, std::vector<int> args, std::vector<EdgeTag> tags,
                              const std::vector<double>& potential) {
  Term t;
  t.table.reserve(potential.size());
  for (double p : potential) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw GraphError("factor '" + name + "': potentials must be finite and >= 0");
    t.table.push_back(std::log(p));
  }
  return Factor{std::move(name), std::move(args), std::move(tags), {t}};
}

/// Ga(x; shape, rate) up to a constant.
inline Factor gamma_prior_factor(std::string name, int var, double shape, double rate, EdgeTag tag = EdgeTag::kMF) {
  return Factor{std::move(name),
                {var},
                {tag},
                {Term{{shape - 1.0}, {{0, stat::kLog}}}, Term{{-rate}, {{0, stat::kValue}}}}};
}

/// Beta(p; a, b) up to a constant.
inline Factor beta_prior_factor(std::string name, int var, double a, double b, EdgeTag tag = EdgeTag::kMF) {
  return Factor{std::move(name),
                {var},
                {tag},
                {Term{{a - 1.0}, {{0, stat::kLog}}}, Term{{b - 1.0}, {{0, stat::kLog1m}}}}};
}

/// CN(h; mean, variance) as a function of h.
inline Factor cgauss_factor(std::string name, int h, cplx mean, double variance, EdgeTag tag = EdgeTag::kBP) {
  return Factor{std::move(name),
                {h},
                {tag},
                {Term{{-1.0 / variance}, {{0, stat::kSqAbs}}},
                 Term{{2.0 * mean.real() / variance}, {{0, stat::kReal}}},
                 Term{{2.0 * mean.imag() / variance}, {{0, stat::kImag}}},
                 Term{{-std::log(std::numbers::pi * variance) - std::norm(mean) / variance}, {}}}};
}

/// delta(s - 1) CN(h; 0, 1/v_large) + delta(s) CN(h; 0, 1/v_small), with
/// arguments (h, s, v_large, v_small) and s binary.
inline Factor two_state_precision_factor(std::string name, int h, int s, int v_large, int v_small,
                                         std::vector<EdgeTag> tags) {
  const double lp = -std::log(std::numbers::pi);
  return Factor{std::move(name),
                {h, s, v_large, v_small},
                std::move(tags),
                {Term{{0.0, 1.0}, {{2, stat::kLog}}},
                 Term{{0.0, -1.0}, {{2, stat::kValue}, {0, stat::kSqAbs}}},
                 Term{{1.0, 0.0}, {{3, stat::kLog}}},
                 Term{{-1.0, 0.0}, {{3, stat::kValue}, {0, stat::kSqAbs}}},
                 Term{{lp, lp}, {}}}};
}

/// Pr(s_1) = p10^{s_1} (1 - p10)^{1 - s_1}; arguments (s_1, p10).
inline Factor initial_state_factor(std::string name, int s1, int p10, std::vector<EdgeTag> tags) {
  return Factor{std::move(name),
                {s1, p10},
                std::move(tags),
                {Term{{0.0, 1.0}, {{1, stat::kLog}}}, Term{{1.0, 0.0}, {{1, stat::kLog1m}}}}};
}

/// Pr(s_n | s_{n-1}) with transition probabilities p10 = Pr(1|0) and
/// p01 = Pr(0|1); arguments (s_n, s_{n-1}, p10, p01).
inline Factor transition_factor(std::string name, int s_n, int s_prev, int p10, int p01, std::vector<EdgeTag> tags) {
  // Table order (s_n, s_prev): 00, 01, 10, 11.
  return Factor{std::move(name),
                {s_n, s_prev, p10, p01},
                std::move(tags),
                {Term{{0.0, 0.0, 1.0, 0.0}, {{2, stat::kLog}}},
                 Term{{1.0, 0.0, 0.0, 0.0}, {{2, stat::kLog1m}}},
                 Term{{0.0, 1.0, 0.0, 0.0}, {{3, stat::kLog}}},
                 Term{{0.0, 0.0, 0.0, 1.0}, {{3, stat::kLog1m}}}}};
}

}  // namespace hmpce::hmp
