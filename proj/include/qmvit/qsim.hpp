#pragma once

#include <complex>
#include <string>
#include <vector>

namespace qmvit {

using Amplitude = std::complex<double>;

// Hard caps: 20 qubits is 8 MiB of amplitudes, 6 qubits is the largest size
// the dense-matrix oracle multiplies comfortably.
inline constexpr int kMaxQubits = 20;
inline constexpr int kMaxDenseQubits = 6;

// Basis ordering is little-endian: qubit 0 is the least significant bit of
// the amplitude index.
struct StateVector {
  int n_qubits = 0;
  std::vector<Amplitude> amps;

  std::size_t dim() const { return amps.size(); }
};

enum class GateKind { H, RX, RY, RZ, CNOT };

// Rotation convention: R_P(theta) = exp(-i * theta * P / 2), so
// RX(pi)|0> = (0, -i).
struct Gate {
  GateKind kind = GateKind::H;
  int target = 0;
  int control = -1;   // CNOT only
  double angle = 0.0; // RX/RY/RZ only

  static Gate h(int q) { return {GateKind::H, q, -1, 0.0}; }
  static Gate rx(int q, double a) { return {GateKind::RX, q, -1, a}; }
  static Gate ry(int q, double a) { return {GateKind::RY, q, -1, a}; }
  static Gate rz(int q, double a) { return {GateKind::RZ, q, -1, a}; }
  static Gate cnot(int control, int target) { return {GateKind::CNOT, target, control, 0.0}; }
};

struct Circuit {
  int n_qubits = 0;
  std::vector<Gate> gates;
};

StateVector new_zero_state(int n_qubits);

// In-place strided update, O(2^n) per gate.
void apply_gate(StateVector& state, const Gate& g);

StateVector run_circuit(const Circuit& c, StateVector init);

// <Z_q> = sum_k |a_k|^2 * (bit q of k == 0 ? +1 : -1)
double expectation_z(const StateVector& state, int qubit);

std::vector<double> probabilities(const StateVector& state);

double state_norm(const StateVector& state);

// Brute-force oracle path: builds the full 2^n x 2^n matrix of the circuit by
// dense per-gate matrices and dense matrix products, never touching the
// strided kernels above. Row-major.
using DenseMatrix = std::vector<Amplitude>;
DenseMatrix dense_unitary(const Circuit& c);
StateVector apply_dense(const DenseMatrix& u, const StateVector& state);

// Text listing, one gate per line:
//   H 0
//   RX 2 1.5707963267948966
//   CNOT 1 0        (target first, then control)
// Angles carry 17 significant digits so a listing re-parses exactly.
std::string gate_name(GateKind k);
std::string circuit_to_text(const Circuit& c);
Circuit circuit_from_text(const std::string& text, int n_qubits);

}  // namespace qmvit
