#include "qmvit/qsim.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace qmvit {

namespace {

void check_qubit(int q, int n, const char* what) {
  if (q < 0 || q >= n)
    throw std::out_of_range(std::string(what) + " qubit index " + std::to_string(q) +
                            " out of range for " + std::to_string(n) + " qubits");
}

void check_gate(const Gate& g, int n) {
  check_qubit(g.target, n, "target");
  if (g.kind == GateKind::CNOT) {
    check_qubit(g.control, n, "control");
    if (g.control == g.target) throw std::invalid_argument("cnot control equals target");
  }
  if (g.kind == GateKind::RX || g.kind == GateKind::RY || g.kind == GateKind::RZ) {
    if (!std::isfinite(g.angle)) throw std::invalid_argument("non-finite rotation angle");
  }
}

// 2x2 matrix of a single-qubit gate, row-major.
void gate_matrix(const Gate& g, Amplitude u[4]) {
  const Amplitude i(0.0, 1.0);
  switch (g.kind) {
    case GateKind::H: {
      const double s = 1.0 / std::sqrt(2.0);
      u[0] = s; u[1] = s; u[2] = s; u[3] = -s;
      return;
    }
    case GateKind::RX: {
      const double c = std::cos(g.angle / 2), s = std::sin(g.angle / 2);
      u[0] = c; u[1] = -i * s; u[2] = -i * s; u[3] = c;
      return;
    }
    case GateKind::RY: {
      const double c = std::cos(g.angle / 2), s = std::sin(g.angle / 2);
      u[0] = c; u[1] = -s; u[2] = s; u[3] = c;
      return;
    }
    case GateKind::RZ: {
      const double h = g.angle / 2;
      u[0] = Amplitude(std::cos(h), -std::sin(h));
      u[1] = 0.0; u[2] = 0.0;
      u[3] = Amplitude(std::cos(h), std::sin(h));
      return;
    }
    case GateKind::CNOT:
      throw std::invalid_argument("cnot has no 2x2 matrix");
  }
  throw std::invalid_argument("unknown gate kind");
}

}  // namespace

StateVector new_zero_state(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits)
    throw std::invalid_argument("qubit count " + std::to_string(n_qubits) +
                                " outside [1, " + std::to_string(kMaxQubits) + "]");
  StateVector s;
  s.n_qubits = n_qubits;
  s.amps.assign(std::size_t{1} << n_qubits, Amplitude(0.0, 0.0));
  s.amps[0] = 1.0;
  return s;
}

void apply_gate(StateVector& state, const Gate& g) {
  check_gate(g, state.n_qubits);
  const std::size_t dim = state.dim();

  if (g.kind == GateKind::CNOT) {
    const std::size_t cbit = std::size_t{1} << g.control;
    const std::size_t tbit = std::size_t{1} << g.target;
    for (std::size_t k = 0; k < dim; ++k) {
      // visit each swapped pair once, from its target=0 member
      if ((k & cbit) && !(k & tbit)) std::swap(state.amps[k], state.amps[k | tbit]);
    }
    return;
  }

  Amplitude u[4];
  gate_matrix(g, u);
  const std::size_t step = std::size_t{1} << g.target;
  const std::size_t block = step << 1;
  for (std::size_t base = 0; base < dim; base += block) {
    for (std::size_t off = 0; off < step; ++off) {
      const std::size_t i0 = base + off;
      const std::size_t i1 = i0 + step;
      const Amplitude a0 = state.amps[i0];
      const Amplitude a1 = state.amps[i1];
      state.amps[i0] = u[0] * a0 + u[1] * a1;
      state.amps[i1] = u[2] * a0 + u[3] * a1;
    }
  }
}

StateVector run_circuit(const Circuit& c, StateVector init) {
  if (c.n_qubits != init.n_qubits)
    throw std::invalid_argument("circuit is on " + std::to_string(c.n_qubits) +
                                " qubits, state on " + std::to_string(init.n_qubits));
  for (const Gate& g : c.gates) apply_gate(init, g);
  return init;
}

double expectation_z(const StateVector& state, int qubit) {
  check_qubit(qubit, state.n_qubits, "observable");
  const std::size_t bit = std::size_t{1} << qubit;
  double e = 0.0;
  for (std::size_t k = 0; k < state.dim(); ++k) {
    const double p = std::norm(state.amps[k]);
    e += (k & bit) ? -p : p;
  }
  return e;
}

std::vector<double> probabilities(const StateVector& state) {
  std::vector<double> p(state.dim());
  for (std::size_t k = 0; k < state.dim(); ++k) p[k] = std::norm(state.amps[k]);
  return p;
}

double state_norm(const StateVector& state) {
  double s = 0.0;
  for (const Amplitude& a : state.amps) s += std::norm(a);
  return std::sqrt(s);
}

DenseMatrix dense_unitary(const Circuit& c) {
  if (c.n_qubits < 1 || c.n_qubits > kMaxDenseQubits)
    throw std::invalid_argument("dense unitary limited to [1, " +
                                std::to_string(kMaxDenseQubits) + "] qubits");
  const std::size_t dim = std::size_t{1} << c.n_qubits;

  DenseMatrix u(dim * dim, Amplitude(0.0, 0.0));
  for (std::size_t k = 0; k < dim; ++k) u[k * dim + k] = 1.0;

  DenseMatrix g(dim * dim);
  DenseMatrix acc(dim * dim);
  for (const Gate& gate : c.gates) {
    check_gate(gate, c.n_qubits);
    std::fill(g.begin(), g.end(), Amplitude(0.0, 0.0));
    if (gate.kind == GateKind::CNOT) {
      const std::size_t cbit = std::size_t{1} << gate.control;
      const std::size_t tbit = std::size_t{1} << gate.target;
      for (std::size_t col = 0; col < dim; ++col) {
        const std::size_t row = (col & cbit) ? (col ^ tbit) : col;
        g[row * dim + col] = 1.0;
      }
    } else {
      Amplitude m[4];
      gate_matrix(gate, m);
      const std::size_t tbit = std::size_t{1} << gate.target;
      for (std::size_t row = 0; row < dim; ++row) {
        for (std::size_t col = 0; col < dim; ++col) {
          if ((row & ~tbit) != (col & ~tbit)) continue;
          g[row * dim + col] = m[((row & tbit) ? 2 : 0) + ((col & tbit) ? 1 : 0)];
        }
      }
    }
    // acc = g * u
    for (std::size_t r = 0; r < dim; ++r) {
      for (std::size_t cc = 0; cc < dim; ++cc) {
        Amplitude sum(0.0, 0.0);
        for (std::size_t k = 0; k < dim; ++k) sum += g[r * dim + k] * u[k * dim + cc];
        acc[r * dim + cc] = sum;
      }
    }
    std::swap(u, acc);
  }
  return u;
}

StateVector apply_dense(const DenseMatrix& u, const StateVector& state) {
  const std::size_t dim = state.dim();
  if (u.size() != dim * dim) throw std::invalid_argument("matrix/state dimension mismatch");
  StateVector out;
  out.n_qubits = state.n_qubits;
  out.amps.assign(dim, Amplitude(0.0, 0.0));
  for (std::size_t r = 0; r < dim; ++r) {
    Amplitude sum(0.0, 0.0);
    for (std::size_t k = 0; k < dim; ++k) sum += u[r * dim + k] * state.amps[k];
    out.amps[r] = sum;
  }
  return out;
}

std::string gate_name(GateKind k) {
  switch (k) {
    case GateKind::H: return "H";
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::CNOT: return "CNOT";
  }
  throw std::invalid_argument("unknown gate kind");
}

std::string circuit_to_text(const Circuit& c) {
  std::string out;
  char buf[64];
  for (const Gate& g : c.gates) {
    out += gate_name(g.kind);
    out += ' ';
    out += std::to_string(g.target);
    if (g.kind == GateKind::CNOT) {
      out += ' ';
      out += std::to_string(g.control);
    } else if (g.kind != GateKind::H) {
      std::snprintf(buf, sizeof buf, " %.17g", g.angle);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Circuit circuit_from_text(const std::string& text, int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits)
    throw std::invalid_argument("qubit count outside [1, " + std::to_string(kMaxQubits) + "]");
  Circuit c;
  c.n_qubits = n_qubits;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;  // blank line
    Gate g;
    auto fail = [&](const std::string& why) {
      throw std::invalid_argument("circuit text line " + std::to_string(lineno) + ": " + why);
    };
    if (kind == "H" || kind == "RX" || kind == "RY" || kind == "RZ") {
      if (!(ls >> g.target)) fail("missing target");
      if (kind == "H") {
        g.kind = GateKind::H;
      } else {
        g.kind = kind == "RX" ? GateKind::RX : kind == "RY" ? GateKind::RY : GateKind::RZ;
        if (!(ls >> g.angle)) fail("missing angle");
      }
    } else if (kind == "CNOT") {
      g.kind = GateKind::CNOT;
      if (!(ls >> g.target >> g.control)) fail("missing target/control");
    } else {
      fail("unknown gate '" + kind + "'");
    }
    std::string extra;
    if (ls >> extra) fail("trailing token '" + extra + "'");
    check_gate(g, n_qubits);
    c.gates.push_back(g);
  }
  return c;
}

}  // namespace qmvit
