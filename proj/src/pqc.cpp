#include "qmvit/pqc.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qmvit {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2;

void check_spec(const AnsatzSpec& spec) {
  if (spec.n_qubits < 1 || spec.n_qubits > kMaxQubits)
    throw std::invalid_argument("ansatz qubit count outside [1, " +
                                std::to_string(kMaxQubits) + "]");
  if (spec.n_layers < 0) throw std::invalid_argument("negative ansatz layer count");
}

void check_theta(const AnsatzSpec& spec, const ParamVector& theta) {
  if (static_cast<int>(theta.size()) != param_count(spec))
    throw std::invalid_argument("ansatz expects " + std::to_string(param_count(spec)) +
                                " parameters, got " + std::to_string(theta.size()));
}

void check_obs(const ObservableSpec& obs, int n_qubits) {
  if (obs.z_targets.empty()) throw std::invalid_argument("empty observable list");
  for (int t : obs.z_targets)
    if (t < 0 || t >= n_qubits) throw std::out_of_range("observable target out of range");
}

std::vector<double> readout(const StateVector& s, const ObservableSpec& obs) {
  std::vector<double> out;
  out.reserve(obs.z_targets.size());
  for (int t : obs.z_targets) out.push_back(expectation_z(s, t));
  return out;
}

double weighted(const std::vector<double>& vals, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) s += w[i] * vals[i];
  return s;
}

}  // namespace

ObservableSpec ObservableSpec::all(int n_qubits) {
  ObservableSpec o;
  for (int q = 0; q < n_qubits; ++q) o.z_targets.push_back(q);
  return o;
}

int param_count(const AnsatzSpec& spec) {
  check_spec(spec);
  return spec.n_layers * spec.n_qubits;
}

ParamVector init_params(const AnsatzSpec& spec, std::uint64_t seed) {
  const int n = param_count(spec);
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> dist(-std::numbers::pi / 8, std::numbers::pi / 8);
  ParamVector theta(static_cast<std::size_t>(n));
  for (double& t : theta) t = dist(eng);
  return theta;
}

Circuit build_ansatz(const AnsatzSpec& spec, const ParamVector& theta) {
  check_theta(spec, theta);
  Circuit c;
  c.n_qubits = spec.n_qubits;
  if (spec.initial_hadamard)
    for (int q = 0; q < spec.n_qubits; ++q) c.gates.push_back(Gate::h(q));
  for (int l = 0; l < spec.n_layers; ++l) {
    for (int q = 0; q < spec.n_qubits; ++q)
      c.gates.push_back(Gate::rx(q, theta[static_cast<std::size_t>(l * spec.n_qubits + q)]));
    if (spec.n_qubits > 1) {
      const int last = spec.entangler == AnsatzSpec::Entangler::CnotRing ? spec.n_qubits
                                                                         : spec.n_qubits - 1;
      for (int q = 0; q < last; ++q) c.gates.push_back(Gate::cnot(q, (q + 1) % spec.n_qubits));
    }
  }
  return c;
}

std::vector<double> expectation_head(const StateVector& prepared, const AnsatzSpec& spec,
                                     const ParamVector& theta, const ObservableSpec& obs) {
  if (prepared.n_qubits != spec.n_qubits)
    throw std::invalid_argument("prepared state qubit count does not match ansatz");
  check_obs(obs, spec.n_qubits);
  const StateVector out = run_circuit(build_ansatz(spec, theta), prepared);
  return readout(out, obs);
}

std::vector<double> encoded_expectations(const std::vector<double>& x,
                                         const AngleEncodingSpec& enc, const AnsatzSpec& spec,
                                         const ParamVector& theta, const ObservableSpec& obs) {
  if (enc.n_qubits != spec.n_qubits)
    throw std::invalid_argument("loader qubit count does not match ansatz");
  check_obs(obs, spec.n_qubits);
  StateVector s = run_circuit(loader_circuit(x, enc), new_zero_state(enc.n_qubits));
  s = run_circuit(build_ansatz(spec, theta), std::move(s));
  return readout(s, obs);
}

ParamVector param_shift_vjp(const StateVector& prepared, const AnsatzSpec& spec,
                            const ParamVector& theta, const ObservableSpec& obs,
                            const std::vector<double>& weights) {
  if (prepared.n_qubits != spec.n_qubits)
    throw std::invalid_argument("prepared state qubit count does not match ansatz");
  check_theta(spec, theta);
  check_obs(obs, spec.n_qubits);
  if (weights.size() != obs.z_targets.size())
    throw std::invalid_argument("weight count does not match observable count");

  ParamVector grad(theta.size(), 0.0);
  ParamVector shifted = theta;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    shifted[k] = theta[k] + kHalfPi;
    const double plus =
        weighted(readout(run_circuit(build_ansatz(spec, shifted), prepared), obs), weights);
    shifted[k] = theta[k] - kHalfPi;
    const double minus =
        weighted(readout(run_circuit(build_ansatz(spec, shifted), prepared), obs), weights);
    shifted[k] = theta[k];
    grad[k] = (plus - minus) / 2.0;
  }
  return grad;
}

ParamVector param_shift_grad(const StateVector& prepared, const AnsatzSpec& spec,
                             const ParamVector& theta, const ObservableSpec& obs,
                             int target_index) {
  check_obs(obs, spec.n_qubits);
  if (target_index < 0 || target_index >= static_cast<int>(obs.z_targets.size()))
    throw std::out_of_range("observable target index out of range");
  std::vector<double> w(obs.z_targets.size(), 0.0);
  w[static_cast<std::size_t>(target_index)] = 1.0;
  return param_shift_vjp(prepared, spec, theta, obs, w);
}

std::vector<double> input_shift_vjp(const std::vector<double>& x, const AngleEncodingSpec& enc,
                                    const AnsatzSpec& spec, const ParamVector& theta,
                                    const ObservableSpec& obs,
                                    const std::vector<double>& weights) {
  if (weights.size() != obs.z_targets.size())
    throw std::invalid_argument("weight count does not match observable count");
  std::vector<double> grad(x.size(), 0.0);
  std::vector<double> shifted = x;
  for (std::size_t j = 0; j < x.size(); ++j) {
    shifted[j] = x[j] + kHalfPi;
    const double plus = weighted(encoded_expectations(shifted, enc, spec, theta, obs), weights);
    shifted[j] = x[j] - kHalfPi;
    const double minus = weighted(encoded_expectations(shifted, enc, spec, theta, obs), weights);
    shifted[j] = x[j];
    grad[j] = (plus - minus) / 2.0;
  }
  return grad;
}

std::vector<double> input_shift_grad(const std::vector<double>& x, const AngleEncodingSpec& enc,
                                     const AnsatzSpec& spec, const ParamVector& theta,
                                     const ObservableSpec& obs, int target_index) {
  check_obs(obs, spec.n_qubits);
  if (target_index < 0 || target_index >= static_cast<int>(obs.z_targets.size()))
    throw std::out_of_range("observable target index out of range");
  std::vector<double> w(obs.z_targets.size(), 0.0);
  w[static_cast<std::size_t>(target_index)] = 1.0;
  return input_shift_vjp(x, enc, spec, theta, obs, w);
}

}  // namespace qmvit
