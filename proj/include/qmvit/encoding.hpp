#pragma once

#include <string>
#include <vector>

#include "qmvit/qsim.hpp"

namespace qmvit {

enum class Axis { X, Y, Z };

// Loader structure shared by the angle-based encodings: per qubit j a
// rotation about axes[j] by (negate ? -x[j] : x[j]) applied to |0>, then an
// optional H column. The H comes after the rotation on purpose: H|0> is an
// eigenstate of every X rotation, so "H first" would bury the input in a
// global phase and nothing downstream could see it. The order used here is
// the same state as phase encoding, (|0> + e^{-ix}|1>)/sqrt(2) per qubit.
struct AngleEncodingSpec {
  int n_qubits = 1;
  std::vector<Axis> axes;  // empty means all X
  bool hadamard = true;
  bool negate = true;

  Axis axis(int q) const { return axes.empty() ? Axis::X : axes[static_cast<std::size_t>(q)]; }
};

AngleEncodingSpec angle_encoding_spec(int n_qubits);  // hadamard, negated angles, all X
AngleEncodingSpec quanv_encoding_spec(int n_qubits);  // bare rotations, raw angles, all X

Circuit loader_circuit(const std::vector<double>& x, const AngleEncodingSpec& spec);

// angle_encode(x): one qubit per entry, RX(-x_j) then H.
StateVector angle_encode(const std::vector<double>& x);

// quanv_encode(x, spec): per qubit exp(-i x_j P/2)|0>, no Hadamard column.
StateVector quanv_encode(const std::vector<double>& x, const AngleEncodingSpec& spec);

// L2-normalized amplitudes, zero-padded to the next power of two (>= 2).
// All-zero input is degenerate and rejected.
StateVector amplitude_encode(const std::vector<double>& x);

// Uniform superposition over the distinct bitstrings; leftmost character is
// the most significant bit.
StateVector basis_encode(const std::vector<std::string>& bitstrings);

enum class RescaleMode { Identity, PiTanh };

double pi_tanh(double v);
std::vector<double> rescale_for_encoding(const std::vector<double>& v, RescaleMode mode);

}  // namespace qmvit
