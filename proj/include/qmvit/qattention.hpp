#pragma once

#include <vector>

#include "qmvit/pqc.hpp"
#include "qmvit/tape.hpp"
#include "qmvit/tensor.hpp"

namespace qmvit {

// One hybrid attention head. Query, key and value operators share a circuit
// shape but hold independent parameter vectors; the head width equals the
// qubit count because each vector entry is encoded into its own qubit.
struct QuantumHeadParams {
  AnsatzSpec ansatz;
  ParamVector theta_q;
  ParamVector theta_k;
  ParamVector theta_v;
};

// Two linear layers around one quantum layer. The pi-scaled tanh keeps every
// encoded angle inside (-pi, pi) before the loader.
struct QMLPParams {
  Tensor w_in;  // (embed, n_qubits)
  Tensor b_in;  // (n_qubits)
  AnsatzSpec ansatz;
  ParamVector theta;
  Tensor w_out;  // (n_qubits, embed)
  Tensor b_out;  // (embed)
};

// <Z_0> after encoding x (length n_qubits) and running the ansatz.
double quantum_query(const std::vector<double>& x, const ParamVector& theta,
                     const AnsatzSpec& ansatz);
double quantum_key(const std::vector<double>& x, const ParamVector& theta,
                   const AnsatzSpec& ansatz);

// All-qubit readout: out[j] = <Z_j>, each in [-1, 1].
std::vector<double> quantum_values(const std::vector<double>& x, const ParamVector& theta,
                                   const AnsatzSpec& ansatz);

// scores(i, j) = -(q[i] - k[j])^2; never positive, zero diagonal when q == k.
Tensor attention_scores(const std::vector<double>& q, const std::vector<double>& k);

// Rows of x produce scalars Q_i, K_i and rows V_i; the head output is
// row_softmax(scores / sqrt(dh)) * V.
Tensor hybrid_head(const Tensor& x, const QuantumHeadParams& p);

// x (S, H*dh) is split column-wise across heads; per-head outputs are
// concatenated back and projected by w_o (H*dh, H*dh).
Tensor multi_head(const Tensor& x, const std::vector<QuantumHeadParams>& heads,
                  const Tensor& w_o);

std::vector<double> quantum_mlp(const std::vector<double>& x, const QMLPParams& p);

// ---- tape ops -------------------------------------------------------------
// Pullbacks route into both the encoded inputs and the circuit parameters via
// the shift rule; either side is skipped when its node does not need a grad.

// x (S, n), theta (P) -> (S); out[i] = <Z_0> for row i.
Tape::NodeId quantum_scalar_rows_op(Tape& t, Tape::NodeId x, Tape::NodeId theta,
                                    const AnsatzSpec& spec);

// x (S, n), theta (P) -> (S, n); out(i, j) = <Z_j> for row i.
Tape::NodeId quantum_value_rows_op(Tape& t, Tape::NodeId x, Tape::NodeId theta,
                                   const AnsatzSpec& spec);

// q (S), k (S) -> (S, S); out(i, j) = -(q_i - k_j)^2.
Tape::NodeId pairwise_neg_sqdiff_op(Tape& t, Tape::NodeId q, Tape::NodeId k);

struct HeadNodes {
  Tape::NodeId theta_q;
  Tape::NodeId theta_k;
  Tape::NodeId theta_v;
};

Tape::NodeId hybrid_head_op(Tape& t, Tape::NodeId x, const HeadNodes& h, const AnsatzSpec& spec);

Tape::NodeId multi_head_op(Tape& t, Tape::NodeId x, const std::vector<HeadNodes>& heads,
                           const AnsatzSpec& spec, Tape::NodeId w_o);

// Row-wise MLP: linear -> pi*tanh -> quantum layer -> linear.
Tape::NodeId quantum_mlp_rows_op(Tape& t, Tape::NodeId x, Tape::NodeId w_in, Tape::NodeId b_in,
                                 Tape::NodeId theta, const AnsatzSpec& spec, Tape::NodeId w_out,
                                 Tape::NodeId b_out);

}  // namespace qmvit
