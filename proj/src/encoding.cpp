#include "qmvit/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qmvit {

AngleEncodingSpec angle_encoding_spec(int n_qubits) {
  AngleEncodingSpec s;
  s.n_qubits = n_qubits;
  s.hadamard = true;
  s.negate = true;
  return s;
}

AngleEncodingSpec quanv_encoding_spec(int n_qubits) {
  AngleEncodingSpec s;
  s.n_qubits = n_qubits;
  s.hadamard = false;
  s.negate = false;
  return s;
}

Circuit loader_circuit(const std::vector<double>& x, const AngleEncodingSpec& spec) {
  if (spec.n_qubits < 1 || spec.n_qubits > kMaxQubits)
    throw std::invalid_argument("loader qubit count outside [1, " +
                                std::to_string(kMaxQubits) + "]");
  if (static_cast<int>(x.size()) != spec.n_qubits)
    throw std::invalid_argument("loader expects " + std::to_string(spec.n_qubits) +
                                " angles, got " + std::to_string(x.size()));
  if (!spec.axes.empty() && static_cast<int>(spec.axes.size()) != spec.n_qubits)
    throw std::invalid_argument("axis list length does not match qubit count");

  Circuit c;
  c.n_qubits = spec.n_qubits;
  for (int q = 0; q < spec.n_qubits; ++q) {
    const double a = spec.negate ? -x[static_cast<std::size_t>(q)] : x[static_cast<std::size_t>(q)];
    if (!std::isfinite(a)) throw std::invalid_argument("non-finite encoding angle");
    switch (spec.axis(q)) {
      case Axis::X: c.gates.push_back(Gate::rx(q, a)); break;
      case Axis::Y: c.gates.push_back(Gate::ry(q, a)); break;
      case Axis::Z: c.gates.push_back(Gate::rz(q, a)); break;
    }
  }
  if (spec.hadamard)
    for (int q = 0; q < spec.n_qubits; ++q) c.gates.push_back(Gate::h(q));
  return c;
}

StateVector angle_encode(const std::vector<double>& x) {
  const auto spec = angle_encoding_spec(static_cast<int>(x.size()));
  return run_circuit(loader_circuit(x, spec), new_zero_state(spec.n_qubits));
}

StateVector quanv_encode(const std::vector<double>& x, const AngleEncodingSpec& spec) {
  if (spec.hadamard)
    throw std::invalid_argument("quanv encoding uses bare rotations, no Hadamard column");
  return run_circuit(loader_circuit(x, spec), new_zero_state(spec.n_qubits));
}

StateVector amplitude_encode(const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("amplitude encoding of an empty vector");
  double nrm2 = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite amplitude input");
    nrm2 += v * v;
  }
  if (nrm2 == 0.0) throw std::invalid_argument("amplitude encoding of the zero vector is degenerate");

  int n_qubits = 1;
  while ((std::size_t{1} << n_qubits) < x.size()) ++n_qubits;
  if (n_qubits > kMaxQubits)
    throw std::invalid_argument("amplitude encoding needs more than " +
                                std::to_string(kMaxQubits) + " qubits");

  StateVector s = new_zero_state(n_qubits);
  const double inv = 1.0 / std::sqrt(nrm2);
  std::fill(s.amps.begin(), s.amps.end(), Amplitude(0.0, 0.0));
  for (std::size_t k = 0; k < x.size(); ++k) s.amps[k] = x[k] * inv;
  return s;
}

StateVector basis_encode(const std::vector<std::string>& bitstrings) {
  if (bitstrings.empty()) throw std::invalid_argument("basis encoding of an empty set");
  const std::size_t len = bitstrings.front().size();
  if (len < 1 || len > static_cast<std::size_t>(kMaxQubits))
    throw std::invalid_argument("bitstring length outside [1, " + std::to_string(kMaxQubits) + "]");

  std::vector<std::size_t> indices;
  for (const std::string& b : bitstrings) {
    if (b.size() != len) throw std::invalid_argument("bitstrings differ in length");
    std::size_t idx = 0;
    for (char ch : b) {
      if (ch != '0' && ch != '1') throw std::invalid_argument("bitstring character not 0/1");
      idx = (idx << 1) | static_cast<std::size_t>(ch - '0');
    }
    indices.push_back(idx);
  }
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());

  StateVector s = new_zero_state(static_cast<int>(len));
  std::fill(s.amps.begin(), s.amps.end(), Amplitude(0.0, 0.0));
  const double amp = 1.0 / std::sqrt(static_cast<double>(indices.size()));
  for (std::size_t idx : indices) s.amps[idx] = amp;
  return s;
}

double pi_tanh(double v) { return std::numbers::pi * std::tanh(v); }

std::vector<double> rescale_for_encoding(const std::vector<double>& v, RescaleMode mode) {
  if (mode == RescaleMode::Identity) return v;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = pi_tanh(v[i]);
  return out;
}

}  // namespace qmvit
