#include "pdflow/benchmark_problem.hpp"

#include <array>

namespace pdflow {

namespace {

Eigen::VectorXd unit(int k) { return Eigen::VectorXd::Unit(4, k); }

LocalCost quadratic(std::initializer_list<std::initializer_list<double>> rows) {
  LocalCost c;
  c.H.resize(4, 4);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) c.H(i, j++) = v;
    ++i;
  }
  c.c = Eigen::VectorXd::Zero(4);
  return c;
}

}  // namespace

Problem benchmark_problem(double box_halfwidth) {
  Problem p;
  p.m = 4;
  p.box_halfwidth = box_halfwidth;

  // f1 = x1² + x1x2 + 5x3² - x4² + e^{x1}
  LocalCost f1 = quadratic({{2, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 10, 0}, {0, 0, 0, -2}});
  f1.exp_atoms.push_back({1.0, unit(0)});
  // f2 = 2x2² - 2x1x2 - x3² - e^{x1}
  LocalCost f2 = quadratic({{0, -2, 0, 0}, {-2, 4, 0, 0}, {0, 0, -2, 0}, {0, 0, 0, 0}});
  f2.exp_atoms.push_back({-1.0, unit(0)});
  // f3 = x1² - 2x3² + x2x3 - sin(x4)
  LocalCost f3 = quadratic({{2, 0, 0, 0}, {0, 0, 1, 0}, {0, 1, -4, 0}, {0, 0, 0, 0}});
  f3.sin_atoms.push_back({-1.0, unit(3)});
  // f4 = -x1² + 3x4² + sin(x4)
  LocalCost f4 = quadratic({{-2, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 6}});
  f4.sin_atoms.push_back({1.0, unit(3)});
  // f5 = -x2² + x4²
  LocalCost f5 = quadratic({{0, 0, 0, 0}, {0, -2, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 2}});

  p.costs = {f1, f2, f3, f4, f5};
  return p;
}

Digraph benchmark_graph(double weight) {
  const std::array<Edge, 7> edges{{{0, 1, weight},
                                   {1, 2, weight},
                                   {2, 3, weight},
                                   {3, 4, weight},
                                   {4, 0, weight},
                                   {0, 2, weight},
                                   {2, 4, weight}}};
  return Digraph::from_edges(5, edges);
}

std::string benchmark_graph_description() {
  return "5 nodes; edges 1->2, 2->3, 3->4, 4->5, 5->1, 1->3, 3->5 "
         "(canonical substitute for the unrecoverable published topology)";
}

}  // namespace pdflow
