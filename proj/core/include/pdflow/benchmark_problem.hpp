#pragma once

#include "pdflow/costs.hpp"
#include "pdflow/digraph.hpp"

#include <string>

namespace pdflow {

/// The five-agent, m = 4 problem: every local cost is nonconvex, the sum is
/// strongly convex, and the exp/sin atoms cancel pairwise so x* = 0.
Problem benchmark_problem(double box_halfwidth = 5.0);

/// Canonical 5-node digraph: cycle 1→2→3→4→5→1 plus chords 1→3 and 3→5,
/// every edge carrying `weight`. Strongly connected, weight-unbalanced.
/// Stand-in for a figure whose edges are not recoverable; weight 4 gives the
/// "all nonzero entries set to 4" variant.
Digraph benchmark_graph(double weight = 1.0);

/// Human-readable edge list (1-based) used in reproduction manifests.
std::string benchmark_graph_description();

}  // namespace pdflow
