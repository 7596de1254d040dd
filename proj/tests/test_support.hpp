#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "qmvit/qsim.hpp"

namespace qmvit::test {

inline Circuit random_circuit(std::mt19937_64& eng, int n_qubits, int n_gates) {
  std::uniform_int_distribution<int> kind(0, 4);
  std::uniform_int_distribution<int> qubit(0, n_qubits - 1);
  std::uniform_real_distribution<double> angle(-3.141592653589793, 3.141592653589793);
  Circuit c;
  c.n_qubits = n_qubits;
  for (int i = 0; i < n_gates; ++i) {
    switch (kind(eng)) {
      case 0: c.gates.push_back(Gate::h(qubit(eng))); break;
      case 1: c.gates.push_back(Gate::rx(qubit(eng), angle(eng))); break;
      case 2: c.gates.push_back(Gate::ry(qubit(eng), angle(eng))); break;
      case 3: c.gates.push_back(Gate::rz(qubit(eng), angle(eng))); break;
      default: {
        if (n_qubits < 2) {
          c.gates.push_back(Gate::h(qubit(eng)));
          break;
        }
        const int cq = qubit(eng);
        int tq = qubit(eng);
        while (tq == cq) tq = qubit(eng);
        c.gates.push_back(Gate::cnot(cq, tq));
      }
    }
  }
  return c;
}

inline StateVector random_state(std::mt19937_64& eng, int n_qubits) {
  std::normal_distribution<double> g(0.0, 1.0);
  StateVector s = new_zero_state(n_qubits);
  double nrm2 = 0.0;
  for (Amplitude& a : s.amps) {
    a = Amplitude(g(eng), g(eng));
    nrm2 += std::norm(a);
  }
  const double inv = 1.0 / std::sqrt(nrm2);
  for (Amplitude& a : s.amps) a *= inv;
  return s;
}

inline double max_amp_diff(const StateVector& a, const StateVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.amps.size(); ++i) m = std::max(m, std::abs(a.amps[i] - b.amps[i]));
  return m;
}

// five-point-free central difference used as the gradient oracle everywhere
template <typename F>
double central_diff(F&& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

inline double rel_err(double a, double b, double floor_ = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor_});
}

// Central differences at h=1e-5 on functions bounded by |f| <= O(1) carry
// ~1e-15/(2h) = 5e-11 of roundoff in the quotient, and their truncation error
// scales with |f'| (first-harmonic trig in every parameter here), so near
// structural zeros the oracle reports pure noise. An analytic-vs-FD mismatch
// below 1e-9 absolute is therefore inside the oracle's own error bar and
// certifies nothing; above it, the relative tolerance applies unchanged.
inline bool grad_close(double analytic, double fd, double rel_tol, double fd_noise = 1e-9) {
  const double diff = std::abs(analytic - fd);
  return diff <= fd_noise || diff <= rel_tol * std::max({std::abs(analytic), std::abs(fd), 1e-8});
}

}  // namespace qmvit::test
