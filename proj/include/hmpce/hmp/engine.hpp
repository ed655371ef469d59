#pragma once

// Hybrid message passing over an edge-tagged factor graph.
//
// Factor to BP-tagged variable: integrate exp<ln f> (expectation over the
// beliefs of the MF-tagged neighbours) against the incoming messages of the
// other BP-tagged neighbours. Factor to MF-tagged variable: exponentiated
// expectation of ln f under the normalized combined belief of the BP-tagged
// neighbours and the beliefs of the other MF-tagged neighbours. A variable
// sends the product of its other incoming messages on BP edges and its
// belief on MF edges.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hmpce/dist_kernel.hpp"
#include "hmpce/hmp/exp_family.hpp"
#include "hmpce/hmp/factor_graph.hpp"

namespace hmpce::hmp {

class MessageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Schedule {
  kSynchronous,  ///< every factor-to-variable message from the previous sweep's state
  kSequential,   ///< variable by variable, beliefs refreshed immediately
};

struct EngineOptions {
  DigammaMode digamma{DigammaMode::kExact};
  Schedule schedule{Schedule::kSynchronous};
  double tolerance{1e-10};
  int max_sweeps{200};
};

struct RunReport {
  int sweeps{0};
  bool converged{false};
  double max_change{std::numeric_limits<double>::infinity()};
};

/// Largest absolute difference between two messages of the same kind
/// (probabilities or natural parameters); infinity when the kinds differ.
inline double message_distance(const Message& a, const Message& b) {
  if (std::holds_alternative<Uniform>(a) && std::holds_alternative<Uniform>(b)) return 0.0;
  if (const auto* da = std::get_if<Discrete>(&a)) {
    const auto* db = std::get_if<Discrete>(&b);
    if (db == nullptr || db->p.size() != da->p.size()) return std::numeric_limits<double>::infinity();
    double d = 0.0;
    for (std::size_t i = 0; i < da->p.size(); ++i) d = std::max(d, std::abs(da->p[i] - db->p[i]));
    return d;
  }
  if (const auto* na = std::get_if<NaturalParams>(&a)) {
    const auto* nb = std::get_if<NaturalParams>(&b);
    if (nb == nullptr || nb->family != na->family) return std::numeric_limits<double>::infinity();
    double d = 0.0;
    for (int i = 0; i < 3; ++i) d = std::max(d, std::abs(na->theta[i] - nb->theta[i]));
    return d;
  }
  return std::numeric_limits<double>::infinity();
}

namespace detail {

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// Normalizes log-weights into probabilities; returns false if all are -inf.
inline bool normalize_log(const std::vector<double>& logs, std::vector<double>& out) {
  const double z = log_sum_exp(logs);
  if (!std::isfinite(z)) return false;
  out.resize(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) out[i] = std::exp(logs[i] - z);
  return true;
}

}  // namespace detail

class HmpEngine {
 public:
  explicit HmpEngine(const FactorGraph& graph, EngineOptions opt = {}) : g_(graph), opt_(opt) {
    msgs_.resize(g_.num_factors());
    for (int a = 0; a < g_.num_factors(); ++a) msgs_[a].assign(g_.factor(a).args.size(), Uniform{});
    beliefs_.resize(g_.num_variables());
    for (int v = 0; v < g_.num_variables(); ++v) beliefs_[v] = initial_belief(v);
  }

  const FactorGraph& graph() const { return g_; }
  const EngineOptions& options() const { return opt_; }

  /// Stored factor-to-variable message on edge (factor, argument position).
  const Message& message(int factor, int pos) const { return msgs_.at(factor).at(pos); }
  void set_message(int factor, int pos, Message m) { msgs_.at(factor).at(pos) = std::move(m); }

  /// Stored belief (refreshed after every sweep; initial beliefs before).
  const Message& belief(int v) const { return beliefs_.at(v); }
  void set_belief(int v, Message b) { beliefs_.at(v) = std::move(b); }

  /// Product of every stored incoming message of v.
  Message compute_belief(int v) const { return product_of_incoming(v, -1, -1); }

  Message variable_to_factor(int v, int factor, int pos) const {
    const auto& f = g_.factor(factor);
    if (f.args.at(pos) != v) throw GraphError("variable_to_factor: edge does not connect the variable");
    if (f.tags[pos] == EdgeTag::kMF) return beliefs_.at(v);
    return product_of_incoming(v, factor, pos);
  }

  Message factor_to_var(int factor, int pos) const {
    return g_.factor(factor).tags.at(pos) == EdgeTag::kBP ? factor_to_bp_var(factor, pos)
                                                          : factor_to_mf_var(factor, pos);
  }

  Message factor_to_bp_var(int factor, int pos) const {
    const auto& f = g_.factor(factor);
    if (f.tags.at(pos) != EdgeTag::kBP) throw GraphError("factor_to_bp_var: edge is MF-tagged");
    const Prepared pr = prepare(factor);
    const Conditional cond = condition(pr);
    const auto& target = pr.args[pos];
    if (target.discrete) {
      std::vector<std::vector<double>> per_value(target.size);
      for (int c = 0; c < cond.n_configs; ++c) {
        const double z = log_weight(pr, cond, c, pos);
        per_value[pr.bp_digit(c, pos)].push_back(z);
      }
      std::vector<double> logs(target.size);
      for (int k = 0; k < target.size; ++k) logs[k] = detail::log_sum_exp(per_value[k]);
      Discrete out;
      if (!detail::normalize_log(logs, out.p)) throw unnormalizable(f, pos);
      return out;
    }
    const int k = pr.bp_param_index(pos);
    const NaturalParams* first = nullptr;
    for (int c = 0; c < cond.n_configs; ++c) {
      if (!std::isfinite(log_weight(pr, cond, c, pos))) continue;
      const NaturalParams& th = cond.theta[c][k];
      if (first == nullptr) {
        first = &th;
      } else if (message_distance(*first, th) > 1e-12 * (1.0 + max_abs(th))) {
        throw MessageError("factor '" + f.name + "': message to '" + g_.variable(f.args[pos]).name +
                           "' is a mixture and is not representable in its family");
      }
    }
    if (first == nullptr) throw unnormalizable(f, pos);
    return *first;
  }

  Message factor_to_mf_var(int factor, int pos) const {
    const auto& f = g_.factor(factor);
    if (f.tags.at(pos) != EdgeTag::kMF) throw GraphError("factor_to_mf_var: edge is BP-tagged");
    const Prepared pr = prepare(factor);
    const Conditional cond = condition(pr);

    // Normalized combined belief of the BP-tagged neighbours.
    std::vector<double> logs(cond.n_configs);
    for (int c = 0; c < cond.n_configs; ++c) logs[c] = log_weight(pr, cond, c, -1);
    std::vector<double> w;
    if (!detail::normalize_log(logs, w)) throw unnormalizable(f, pos);
    std::vector<std::vector<std::array<double, 3>>> cond_mean(cond.n_configs);
    for (int c = 0; c < cond.n_configs; ++c) {
      if (w[c] == 0.0) continue;
      cond_mean[c].resize(pr.bp_params.size());
      for (std::size_t k = 0; k < pr.bp_params.size(); ++k) {
        const NaturalParams post = with_incoming(cond.theta[c][k], pr.args[pr.bp_params[k]]);
        require_proper(post, "factor '" + f.name + "' conditional belief");
        cond_mean[c][k] = mean_stats(post, opt_.digamma);
      }
    }

    const auto& target = pr.args[pos];
    std::vector<double> out_log(target.discrete ? target.size : 0, 0.0);
    NaturalParams out_nat;
    if (!target.discrete) out_nat.family = target.family;
    std::vector<int> digits(f.args.size(), 0);
    for (int x = 0; x < pr.table_size; ++x) {
      pr.decode(x, digits);
      double weight = w[pr.bp_config(digits)];
      if (weight == 0.0) continue;
      for (int i : pr.mf_discrete) {
        if (i != pos) weight *= pr.args[i].belief[digits[i]];
      }
      if (weight == 0.0) continue;
      const int c = pr.bp_config(digits);
      for (const auto& term : f.terms) {
        const double coef = term.table[x];
        int target_stat = -1;
        double prod = 1.0;
        for (const auto& r : term.stats) {
          if (r.arg == pos) {
            target_stat = r.stat;
          } else if (pr.args[r.arg].tag == EdgeTag::kMF) {
            prod *= pr.args[r.arg].mean[r.stat];
          } else {
            prod *= cond_mean[c][pr.bp_param_index(r.arg)][r.stat];
          }
        }
        if (target.discrete) {
          double& slot = out_log[digits[pos]];
          slot = std::isinf(coef) ? coef : slot + weight * coef * prod;
        } else if (target_stat >= 0) {
          out_nat.theta[target_stat] += weight * coef * prod;
        }
      }
    }
    if (!target.discrete) return out_nat;
    Discrete out;
    if (!detail::normalize_log(out_log, out.p)) throw unnormalizable(f, pos);
    return out;
  }

  RunReport run() {
    RunReport rep;
    for (int sweep = 1; sweep <= opt_.max_sweeps; ++sweep) {
      const double change = opt_.schedule == Schedule::kSynchronous ? sweep_synchronous() : sweep_sequential();
      rep.sweeps = sweep;
      rep.max_change = change;
      if (change < opt_.tolerance) {
        rep.converged = true;
        break;
      }
    }
    return rep;
  }

 private:
  struct ArgState {
    bool discrete{false};
    EdgeTag tag{EdgeTag::kBP};
    int size{0};
    Family family{Family::kGamma};
    std::vector<double> log_in;          // BP discrete: log incoming probabilities
    std::optional<NaturalParams> in_nat;  // BP parametric: incoming message (none = flat)
    std::vector<double> belief;           // MF discrete
    std::array<double, 3> mean{};         // MF parametric: E[t]
  };

  struct Prepared {
    const Factor* f{nullptr};
    std::vector<ArgState> args;
    std::vector<int> discrete;     // positions of discrete args in table order
    std::vector<int> stride;       // per position; 0 for parametric
    std::vector<int> bp_discrete;  // positions, mixed radix order for BP configs
    std::vector<int> bp_stride;    // per position; 0 if not BP discrete
    std::vector<int> mf_discrete;
    std::vector<int> bp_params;
    int table_size{1};
    int n_bp_configs{1};

    void decode(int x, std::vector<int>& digits) const {
      for (int i : discrete) digits[i] = (x / stride[i]) % args[i].size;
    }
    int bp_config(const std::vector<int>& digits) const {
      int c = 0;
      for (int i : bp_discrete) c += digits[i] * bp_stride[i];
      return c;
    }
    int bp_digit(int c, int pos) const { return (c / bp_stride[pos]) % args[pos].size; }
    int bp_param_index(int pos) const {
      for (std::size_t k = 0; k < bp_params.size(); ++k) {
        if (bp_params[k] == pos) return static_cast<int>(k);
      }
      throw GraphError("internal: not a BP parametric argument");
    }
  };

  /// exp<ln f> over the MF beliefs, per BP discrete configuration: a constant
  /// plus natural parameters for each BP parametric argument.
  struct Conditional {
    int n_configs{1};
    std::vector<double> constant;
    std::vector<std::vector<NaturalParams>> theta;
  };

  static double max_abs(const NaturalParams& np) {
    return std::max({std::abs(np.theta[0]), std::abs(np.theta[1]), std::abs(np.theta[2])});
  }

  MessageError unnormalizable(const Factor& f, int pos) const {
    return MessageError("factor '" + f.name + "': unnormalizable message to '" + g_.variable(f.args[pos]).name + "'");
  }

  Message initial_belief(int v) const {
    const auto& var = g_.variable(v);
    if (var.discrete()) return Discrete{std::vector<double>(var.domain_size, 1.0 / var.domain_size)};
    if (var.initial_belief) return *var.initial_belief;
    return Uniform{};
  }

  Message product_of_incoming(int v, int skip_factor, int skip_pos) const {
    const auto& var = g_.variable(v);
    if (var.discrete()) {
      std::vector<double> logs(var.domain_size, 0.0);
      bool any = false;
      for (const auto& [a, pos] : g_.edges_of(v)) {
        if (a == skip_factor && pos == skip_pos) continue;
        if (const auto* d = std::get_if<Discrete>(&msgs_[a][pos])) {
          any = true;
          for (int k = 0; k < var.domain_size; ++k) logs[k] += std::log(d->p[k]);
        }
      }
      if (!any) return Uniform{};
      Discrete out;
      if (!detail::normalize_log(logs, out.p)) {
        throw MessageError("variable '" + var.name + "': incoming messages have disjoint support");
      }
      return out;
    }
    NaturalParams acc{var.family, {0.0, 0.0, 0.0}};
    bool any = false;
    for (const auto& [a, pos] : g_.edges_of(v)) {
      if (a == skip_factor && pos == skip_pos) continue;
      if (const auto* n = std::get_if<NaturalParams>(&msgs_[a][pos])) {
        any = true;
        acc = acc + *n;
      }
    }
    if (!any) return Uniform{};
    return acc;
  }

  Prepared prepare(int factor) const {
    const auto& f = g_.factor(factor);
    Prepared pr;
    pr.f = &f;
    const int n_args = static_cast<int>(f.args.size());
    pr.args.resize(n_args);
    pr.stride.assign(n_args, 0);
    pr.bp_stride.assign(n_args, 0);
    for (int i = 0; i < n_args; ++i) {
      const int v = f.args[i];
      const auto& var = g_.variable(v);
      auto& st = pr.args[i];
      st.discrete = var.discrete();
      st.tag = f.tags[i];
      st.size = var.domain_size;
      st.family = var.family;
      if (st.discrete) pr.discrete.push_back(i);
      if (st.tag == EdgeTag::kBP) {
        const Message in = product_of_incoming(v, factor, i);
        if (st.discrete) {
          pr.bp_discrete.push_back(i);
          st.log_in.assign(st.size, 0.0);
          if (const auto* d = std::get_if<Discrete>(&in)) {
            for (int k = 0; k < st.size; ++k) st.log_in[k] = std::log(d->p[k]);
          }
        } else {
          pr.bp_params.push_back(i);
          if (const auto* n = std::get_if<NaturalParams>(&in)) st.in_nat = *n;
        }
      } else {
        const Message& b = beliefs_[v];
        if (st.discrete) {
          pr.mf_discrete.push_back(i);
          if (const auto* d = std::get_if<Discrete>(&b)) {
            st.belief = d->p;
          } else {
            st.belief.assign(st.size, 1.0 / st.size);
          }
        } else {
          const auto* n = std::get_if<NaturalParams>(&b);
          if (n == nullptr) {
            throw MessageError("variable '" + var.name + "' has no proper belief for its MF edge to factor '" +
                               f.name + "'");
          }
          st.mean = mean_stats(*n, opt_.digamma);
        }
      }
    }
    int s = 1;
    for (auto it = pr.discrete.rbegin(); it != pr.discrete.rend(); ++it) {
      pr.stride[*it] = s;
      s *= pr.args[*it].size;
    }
    pr.table_size = s;
    s = 1;
    for (auto it = pr.bp_discrete.rbegin(); it != pr.bp_discrete.rend(); ++it) {
      pr.bp_stride[*it] = s;
      s *= pr.args[*it].size;
    }
    pr.n_bp_configs = s;
    return pr;
  }

  Conditional condition(const Prepared& pr) const {
    const auto& f = *pr.f;
    Conditional cond;
    cond.n_configs = pr.n_bp_configs;
    cond.constant.assign(cond.n_configs, 0.0);
    cond.theta.assign(cond.n_configs, std::vector<NaturalParams>(pr.bp_params.size()));
    for (auto& row : cond.theta) {
      for (std::size_t k = 0; k < pr.bp_params.size(); ++k) row[k].family = pr.args[pr.bp_params[k]].family;
    }
    std::vector<int> digits(f.args.size(), 0);
    for (int x = 0; x < pr.table_size; ++x) {
      pr.decode(x, digits);
      double w = 1.0;
      for (int i : pr.mf_discrete) w *= pr.args[i].belief[digits[i]];
      if (w == 0.0) continue;
      const int c = pr.bp_config(digits);
      for (const auto& term : f.terms) {
        const double coef = term.table[x];
        if (std::isinf(coef)) {
          cond.constant[c] = coef;
          continue;
        }
        double prod = coef * w;
        int bp_ref = -1;
        int bp_stat = 0;
        for (const auto& r : term.stats) {
          if (pr.args[r.arg].tag == EdgeTag::kMF) {
            prod *= pr.args[r.arg].mean[r.stat];
          } else {
            bp_ref = r.arg;
            bp_stat = r.stat;
          }
        }
        if (bp_ref < 0) {
          cond.constant[c] += prod;
        } else {
          cond.theta[c][pr.bp_param_index(bp_ref)].theta[bp_stat] += prod;
        }
      }
    }
    return cond;
  }

  static NaturalParams with_incoming(const NaturalParams& theta, const ArgState& st) {
    return st.in_nat ? theta + *st.in_nat : theta;
  }

  /// ln of the combined weight of BP configuration c with the parametric
  /// BP arguments integrated out; the argument at `exclude` contributes
  /// neither its incoming message nor its integral.
  double log_weight(const Prepared& pr, const Conditional& cond, int c, int exclude) const {
    double z = cond.constant[c];
    if (!std::isfinite(z)) return z;
    for (std::size_t k = 0; k < pr.bp_params.size(); ++k) {
      const int pos = pr.bp_params[k];
      if (pos == exclude) continue;
      const NaturalParams post = with_incoming(cond.theta[c][k], pr.args[pos]);
      if (!is_proper(post)) {
        throw MessageError("factor '" + pr.f->name + "': integral over '" + g_.variable(pr.f->args[pos]).name +
                           "' diverges");
      }
      z += log_partition(post);
    }
    for (int i : pr.bp_discrete) {
      if (i == exclude) continue;
      z += pr.args[i].log_in[pr.bp_digit(c, i)];
    }
    return z;
  }

  double sweep_synchronous() {
    std::vector<std::vector<Message>> next = msgs_;
    double change = 0.0;
    for (int a = 0; a < g_.num_factors(); ++a) {
      for (std::size_t pos = 0; pos < next[a].size(); ++pos) {
        next[a][pos] = factor_to_var(a, static_cast<int>(pos));
        change = std::max(change, message_distance(next[a][pos], msgs_[a][pos]));
      }
    }
    msgs_ = std::move(next);
    for (int v = 0; v < g_.num_variables(); ++v) change = std::max(change, refresh_belief(v));
    return change;
  }

  double sweep_sequential() {
    double change = 0.0;
    for (int v = 0; v < g_.num_variables(); ++v) {
      for (const auto& [a, pos] : g_.edges_of(v)) {
        Message m = factor_to_var(a, pos);
        change = std::max(change, message_distance(m, msgs_[a][pos]));
        msgs_[a][pos] = std::move(m);
      }
      change = std::max(change, refresh_belief(v));
    }
    return change;
  }

  double refresh_belief(int v) {
    Message b = compute_belief(v);
    if (std::holds_alternative<Uniform>(b)) b = initial_belief(v);
    const double d = message_distance(b, beliefs_[v]);
    beliefs_[v] = std::move(b);
    return std::isinf(d) ? 0.0 : d;
  }

  const FactorGraph& g_;
  EngineOptions opt_;
  std::vector<std::vector<Message>> msgs_;
  std::vector<Message> beliefs_;
};

}  // namespace hmpce::hmp
