#pragma once

// Edge-tagged factor graphs over finite-domain and parametric variables.
//
// A factor's log-potential is a sum of terms. Each term is a table over the
// factor's discrete arguments (row-major in argument order, last fastest)
// multiplied by a product of sufficient statistics of distinct parametric
// arguments. This keeps every expectation the message rules need in closed
// form.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hmpce/hmp/exp_family.hpp"

namespace hmpce::hmp {

enum class EdgeTag { kBP, kMF };

inline const char* tag_name(EdgeTag t) { return t == EdgeTag::kBP ? "BP" : "MF"; }

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Variable {
  std::string name;
  int domain_size{0};  ///< > 0 for finite domains, 0 for parametric
  Family family{Family::kGamma};
  /// Belief used by mean-field edges before any message has arrived.
  std::optional<NaturalParams> initial_belief;

  bool discrete() const { return domain_size > 0; }
};

struct StatRef {
  int arg{0};   ///< position in the factor's argument list
  int stat{0};  ///< sufficient-statistic index of that argument's family
};

struct Term {
  std::vector<double> table;  ///< log-domain coefficients per discrete configuration
  std::vector<StatRef> stats;
};

struct Factor {
  std::string name;
  std::vector<int> args;
  std::vector<EdgeTag> tags;
  std::vector<Term> terms;
};

class FactorGraph {
 public:
  int add_discrete(std::string name, int domain_size) {
    if (domain_size < 1) throw GraphError("variable '" + name + "': domain size must be positive");
    vars_.push_back(Variable{std::move(name), domain_size, Family::kGamma, std::nullopt});
    adjacency_.emplace_back();
    return static_cast<int>(vars_.size()) - 1;
  }

  int add_parametric(std::string name, Family family, std::optional<NaturalParams> initial = std::nullopt) {
    if (initial && initial->family != family) throw GraphError("variable '" + name + "': initial belief family");
    if (initial) require_proper(*initial, "variable '" + name + "' initial belief");
    vars_.push_back(Variable{std::move(name), 0, family, initial});
    adjacency_.emplace_back();
    return static_cast<int>(vars_.size()) - 1;
  }

  int add_factor(Factor f) {
    validate(f);
    const int id = static_cast<int>(factors_.size());
    for (std::size_t pos = 0; pos < f.args.size(); ++pos) {
      adjacency_[f.args[pos]].push_back({id, static_cast<int>(pos)});
    }
    factors_.push_back(std::move(f));
    return id;
  }

  int num_variables() const { return static_cast<int>(vars_.size()); }
  int num_factors() const { return static_cast<int>(factors_.size()); }
  const Variable& variable(int v) const { return vars_.at(v); }
  Variable& variable(int v) { return vars_.at(v); }
  const Factor& factor(int a) const { return factors_.at(a); }
  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Factor>& factors() const { return factors_; }

  /// (factor, argument position) pairs incident to variable v.
  const std::vector<std::pair<int, int>>& edges_of(int v) const { return adjacency_.at(v); }

  /// Number of discrete configurations of factor a's discrete arguments.
  int table_size(const Factor& f) const {
    int size = 1;
    for (int v : f.args) {
      if (vars_[v].discrete()) size *= vars_[v].domain_size;
    }
    return size;
  }

  bool is_hybrid(int a) const {
    const auto& tags = factors_.at(a).tags;
    bool bp = false;
    bool mf = false;
    for (auto t : tags) (t == EdgeTag::kBP ? bp : mf) = true;
    return bp && mf;
  }

 private:
  void validate(const Factor& f) const {
    const std::string who = "factor '" + f.name + "'";
    if (f.args.empty()) throw GraphError(who + ": no arguments");
    if (f.args.size() != f.tags.size()) throw GraphError(who + ": one tag per argument required");
    for (std::size_t i = 0; i < f.args.size(); ++i) {
      if (f.args[i] < 0 || f.args[i] >= num_variables()) throw GraphError(who + ": unknown variable");
      for (std::size_t j = 0; j < i; ++j) {
        if (f.args[i] == f.args[j]) throw GraphError(who + ": repeated argument");
      }
    }
    int size = 1;
    for (int v : f.args) {
      if (vars_[v].discrete()) size *= vars_[v].domain_size;
    }
    for (const auto& term : f.terms) {
      if (static_cast<int>(term.table.size()) != size) throw GraphError(who + ": term table size mismatch");
      int bp_params = 0;
      for (std::size_t i = 0; i < term.stats.size(); ++i) {
        const auto& r = term.stats[i];
        if (r.arg < 0 || r.arg >= static_cast<int>(f.args.size())) throw GraphError(who + ": bad statistic argument");
        const auto& var = vars_[f.args[r.arg]];
        if (var.discrete()) throw GraphError(who + ": statistic of a discrete argument");
        if (r.stat < 0 || r.stat >= stat_count(var.family)) throw GraphError(who + ": bad statistic index");
        for (std::size_t j = 0; j < i; ++j) {
          if (term.stats[j].arg == r.arg) throw GraphError(who + ": argument repeated within a term");
        }
        if (f.tags[r.arg] == EdgeTag::kBP) ++bp_params;
      }
      if (bp_params > 1) throw GraphError(who + ": a term may couple at most one BP parametric argument");
      for (double c : term.table) {
        if (std::isnan(c) || c == std::numeric_limits<double>::infinity()) {
          throw GraphError(who + ": log-potential entries must be finite or -inf");
        }
        if (std::isinf(c) && !term.stats.empty()) {
          throw GraphError(who + ": -inf entries are only allowed in terms without statistics");
        }
      }
    }
  }

  std::vector<Variable> vars_;
  std::vector<Factor> factors_;
  std::vector<std::vector<std::pair<int, int>>> adjacency_;
};

// Messages.

struct Uniform {};

struct Discrete {
  std::vector<double> p;
};

using Message = std::variant<Uniform, Discrete, NaturalParams>;

}  // namespace hmpce::hmp
