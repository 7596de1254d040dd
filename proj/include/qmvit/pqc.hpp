#pragma once

#include <cstdint>
#include <vector>

#include "qmvit/encoding.hpp"
#include "qmvit/qsim.hpp"

namespace qmvit {

// Hardware-efficient ansatz: per layer one RX(theta) on every qubit followed
// by a CNOT entangler column. Parameters are layer-major: theta[l*n + q].
struct AnsatzSpec {
  enum class Entangler { CnotRing, CnotChain };

  int n_qubits = 1;
  int n_layers = 1;
  Entangler entangler = Entangler::CnotRing;
  bool initial_hadamard = false;  // extra H column before the first layer
};

using ParamVector = std::vector<double>;

// Z readout targets; readouts are <Z_t> for each listed qubit t.
struct ObservableSpec {
  std::vector<int> z_targets;

  static ObservableSpec single(int t) { return {{t}}; }
  static ObservableSpec all(int n_qubits);
};

int param_count(const AnsatzSpec& spec);

// Uniform [-pi/8, pi/8], deterministic in the seed.
ParamVector init_params(const AnsatzSpec& spec, std::uint64_t seed);

Circuit build_ansatz(const AnsatzSpec& spec, const ParamVector& theta);

// Runs the ansatz on an already prepared state and reads every target.
std::vector<double> expectation_head(const StateVector& prepared, const AnsatzSpec& spec,
                                     const ParamVector& theta, const ObservableSpec& obs);

// Loader + ansatz + readout in one call.
std::vector<double> encoded_expectations(const std::vector<double>& x,
                                         const AngleEncodingSpec& enc, const AnsatzSpec& spec,
                                         const ParamVector& theta, const ObservableSpec& obs);

// Parameter-shift rule, exact for this gate set:
//   dE/dtheta_k = (E(theta_k + pi/2) - E(theta_k - pi/2)) / 2.
// Gradient of <Z_t> for obs.z_targets[target_index], one entry per parameter.
ParamVector param_shift_grad(const StateVector& prepared, const AnsatzSpec& spec,
                             const ParamVector& theta, const ObservableSpec& obs,
                             int target_index);

// Gradient of sum_t weights[t] * <Z_t>; still two circuit runs per parameter.
ParamVector param_shift_vjp(const StateVector& prepared, const AnsatzSpec& spec,
                            const ParamVector& theta, const ObservableSpec& obs,
                            const std::vector<double>& weights);

// Same rule applied to the loader angles (every loader gate is a single
// rotation in x_j, so readouts are first-order trigonometric in each x_j).
std::vector<double> input_shift_grad(const std::vector<double>& x, const AngleEncodingSpec& enc,
                                     const AnsatzSpec& spec, const ParamVector& theta,
                                     const ObservableSpec& obs, int target_index);

std::vector<double> input_shift_vjp(const std::vector<double>& x, const AngleEncodingSpec& enc,
                                    const AnsatzSpec& spec, const ParamVector& theta,
                                    const ObservableSpec& obs, const std::vector<double>& weights);

}  // namespace qmvit
