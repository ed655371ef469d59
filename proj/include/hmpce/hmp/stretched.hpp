#pragma once

// Stretched-graph rewrite of a hybrid factor and a numerical equivalence check.
//
// The BP-tagged arguments x_B of factor a are merged into one variable X' over
// their joint domain. A deterministic BP factor ties X' to x_B and the
// original potential is re-expressed over (X', MF arguments) with every edge
// MF-tagged. Only finite-domain BP arguments are supported.

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "hmpce/hmp/engine.hpp"
#include "hmpce/hmp/factor_graph.hpp"

namespace hmpce::hmp {

struct StretchedGraph {
  FactorGraph graph;
  int factor{-1};          ///< the rewritten factor, same index as in the source graph
  int delta_factor{-1};    ///< deterministic BP factor (X', x_B...); -1 without BP arguments
  int combined_var{-1};    ///< X'
  std::vector<int> bp_positions;  ///< BP argument positions in the source factor
  std::vector<int> new_position;  ///< source position -> position in the rewritten factor (-1 for BP)

  bool trivial() const { return delta_factor < 0; }
};

inline StretchedGraph build_stretched(const FactorGraph& g, int a) {
  const Factor& f = g.factor(a);
  const int n_args = static_cast<int>(f.args.size());
  StretchedGraph s;
  s.new_position.assign(n_args, -1);
  std::vector<int> mf_positions;
  for (int i = 0; i < n_args; ++i) {
    if (f.tags[i] == EdgeTag::kBP) {
      if (!g.variable(f.args[i]).discrete()) {
        throw GraphError("factor '" + f.name + "': stretched graph with non-finite domains unsupported");
      }
      s.bp_positions.push_back(i);
    } else {
      s.new_position[i] = 1 + static_cast<int>(mf_positions.size());
      mf_positions.push_back(i);
    }
  }
  if (s.bp_positions.empty()) {
    // Nothing to stretch: the graph is its own stretched version.
    s.graph = g;
    s.factor = a;
    for (int i = 0; i < n_args; ++i) s.new_position[i] = i;
    return s;
  }

  int combined_size = 1;
  for (int i : s.bp_positions) combined_size *= g.variable(f.args[i]).domain_size;

  // Strides of the source table (discrete args, last fastest) and of X'.
  std::vector<int> src_stride(n_args, 0);
  int acc = 1;
  for (int i = n_args - 1; i >= 0; --i) {
    if (g.variable(f.args[i]).discrete()) {
      src_stride[i] = acc;
      acc *= g.variable(f.args[i]).domain_size;
    }
  }
  std::vector<int> x_stride(n_args, 0);
  acc = 1;
  for (auto it = s.bp_positions.rbegin(); it != s.bp_positions.rend(); ++it) {
    x_stride[*it] = acc;
    acc *= g.variable(f.args[*it]).domain_size;
  }

  for (const auto& v : g.variables()) {
    if (v.discrete()) {
      s.graph.add_discrete(v.name, v.domain_size);
    } else {
      s.graph.add_parametric(v.name, v.family, v.initial_belief);
    }
  }
  s.combined_var = s.graph.add_discrete(f.name + "'", combined_size);

  // Rewritten factor over (X', MF args).
  Factor nf;
  nf.name = f.name;
  nf.args.push_back(s.combined_var);
  for (int i : mf_positions) nf.args.push_back(f.args[i]);
  nf.tags.assign(nf.args.size(), EdgeTag::kMF);
  std::vector<int> new_discrete;  // new positions of discrete args, table order
  for (std::size_t j = 0; j < nf.args.size(); ++j) {
    if (j == 0 || g.variable(nf.args[j]).discrete()) new_discrete.push_back(static_cast<int>(j));
  }
  int new_size = 1;
  std::vector<int> new_stride(nf.args.size(), 0);
  for (auto it = new_discrete.rbegin(); it != new_discrete.rend(); ++it) {
    new_stride[*it] = new_size;
    new_size *= *it == 0 ? combined_size : g.variable(nf.args[*it]).domain_size;
  }
  std::vector<int> src_index(new_size);
  for (int y = 0; y < new_size; ++y) {
    int x = 0;
    const int xc = (y / new_stride[0]) % combined_size;
    for (int i : s.bp_positions) {
      const int d = (xc / x_stride[i]) % g.variable(f.args[i]).domain_size;
      x += d * src_stride[i];
    }
    for (int j : new_discrete) {
      if (j == 0) continue;
      const int i = mf_positions[j - 1];
      const int d = (y / new_stride[j]) % g.variable(f.args[i]).domain_size;
      x += d * src_stride[i];
    }
    src_index[y] = x;
  }
  for (const auto& term : f.terms) {
    Term t;
    t.table.resize(new_size);
    for (int y = 0; y < new_size; ++y) t.table[y] = term.table[src_index[y]];
    for (const auto& r : term.stats) t.stats.push_back({s.new_position[r.arg], r.stat});
    nf.terms.push_back(std::move(t));
  }

  for (int b = 0; b < g.num_factors(); ++b) s.graph.add_factor(b == a ? nf : g.factor(b));
  s.factor = a;

  // Deterministic tie X' = x_B.
  Factor df;
  df.name = f.name + "/delta";
  df.args.push_back(s.combined_var);
  for (int i : s.bp_positions) df.args.push_back(f.args[i]);
  df.tags.assign(df.args.size(), EdgeTag::kBP);
  int d_size = combined_size;
  for (int i : s.bp_positions) d_size *= g.variable(f.args[i]).domain_size;
  Term dt;
  dt.table.assign(d_size, -std::numeric_limits<double>::infinity());
  // Table order: X' slowest, then x_B in order; the x_B block is X' itself.
  for (int xc = 0; xc < combined_size; ++xc) dt.table[xc * combined_size + xc] = 0.0;
  df.terms.push_back(std::move(dt));
  s.delta_factor = s.graph.add_factor(std::move(df));
  return s;
}

struct EquivalenceRun {
  Schedule schedule{Schedule::kSynchronous};
  RunReport original;
  RunReport stretched;
  double message_discrepancy{0.0};
  double belief_discrepancy{0.0};
};

struct EquivalenceReport {
  double max_message_discrepancy{0.0};
  double max_belief_discrepancy{0.0};
  std::vector<EquivalenceRun> runs;

  bool all_converged() const {
    return std::all_of(runs.begin(), runs.end(),
                       [](const EquivalenceRun& r) { return r.original.converged && r.stretched.converged; });
  }
};

/// Runs the source and stretched graphs to convergence under both schedules
/// and compares every corresponding message and every original belief.
inline EquivalenceReport stretched_graph_equivalence_check(const FactorGraph& g, int a, EngineOptions opt = {}) {
  const StretchedGraph s = build_stretched(g, a);
  if (opt.tolerance > 1e-13) opt.tolerance = 1e-14;
  opt.max_sweeps = std::max(opt.max_sweeps, 2000);
  EquivalenceReport rep;
  for (Schedule sched : {Schedule::kSynchronous, Schedule::kSequential}) {
    opt.schedule = sched;
    HmpEngine e0(g, opt);
    HmpEngine e1(s.graph, opt);
    EquivalenceRun run;
    run.schedule = sched;
    run.original = e0.run();
    run.stretched = e1.run();
    for (int b = 0; b < g.num_factors(); ++b) {
      const auto& f = g.factor(b);
      for (int pos = 0; pos < static_cast<int>(f.args.size()); ++pos) {
        Message other;
        if (b != a || s.trivial()) {
          other = e1.message(b, pos);
        } else if (f.tags[pos] == EdgeTag::kMF) {
          other = e1.message(a, s.new_position[pos]);
        } else {
          const auto it = std::find(s.bp_positions.begin(), s.bp_positions.end(), pos);
          other = e1.message(s.delta_factor, 1 + static_cast<int>(it - s.bp_positions.begin()));
        }
        run.message_discrepancy = std::max(run.message_discrepancy, message_distance(e0.message(b, pos), other));
      }
    }
    for (int v = 0; v < g.num_variables(); ++v) {
      run.belief_discrepancy = std::max(run.belief_discrepancy, message_distance(e0.belief(v), e1.belief(v)));
    }
    rep.max_message_discrepancy = std::max(rep.max_message_discrepancy, run.message_discrepancy);
    rep.max_belief_discrepancy = std::max(rep.max_belief_discrepancy, run.belief_discrepancy);
    rep.runs.push_back(run);
  }
  return rep;
}

/// Same check for the graph's only hybrid factor.
inline EquivalenceReport stretched_graph_equivalence_check(const FactorGraph& g, EngineOptions opt = {}) {
  int hybrid = -1;
  for (int a = 0; a < g.num_factors(); ++a) {
    if (!g.is_hybrid(a)) continue;
    if (hybrid >= 0) throw GraphError("graph has more than one hybrid factor; name the factor to check");
    hybrid = a;
  }
  if (hybrid < 0) throw GraphError("graph has no hybrid factor");
  return stretched_graph_equivalence_check(g, hybrid, opt);
}

}  // namespace hmpce::hmp
