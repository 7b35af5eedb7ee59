#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gasflow/network.hpp"
#include "gasflow/tolerances.hpp"

namespace gasflow::testing {

inline GasNetwork two_node_pipe(double a = 4.0, double psi_r = 100.0) {
  GasNetwork net;
  net.add_node("1");
  net.add_node("2");
  net.add_pipe("p", 0, 1, a);
  net.set_reference(0, psi_r);
  return net;
}

inline GasNetwork two_node_compressor(double alpha = 1.5, double psi_r = 100.0) {
  GasNetwork net;
  net.add_node("1");
  net.add_node("2");
  net.add_compressor("c", 0, 1, alpha);
  net.set_reference(0, psi_r);
  return net;
}

// 1->2, 2->3, 1->3
inline GasNetwork triangle(double a = 1.0, double psi_r = 100.0) {
  GasNetwork net;
  for (const char* n : {"1", "2", "3"}) net.add_node(n);
  net.add_pipe("12", 0, 1, a);
  net.add_pipe("23", 1, 2, a);
  net.add_pipe("13", 0, 2, a);
  net.set_reference(0, psi_r);
  return net;
}

inline Injections inj(std::vector<double> q) { return Injections{std::move(q)}; }

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline std::string data_path(const std::string& name) { return "data/" + name; }

}  // namespace gasflow::testing
